#include "docloop/ingestion.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <set>

#include "docloop/error.hpp"
#include "docloop/hash.hpp"
#include "docloop/pdf_reader.hpp"
#include "parallel.hpp"

namespace docloop {

namespace {

Error empty_document(const std::string& source_name) {
  return Error(ErrorCode::Invalid, source_name + " has no pages", {{"kind", "empty_document"}});
}

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    int extra = c < 0x80 ? 0 : (c >> 5) == 0x6 ? 1 : (c >> 4) == 0xE ? 2 : (c >> 3) == 0x1E ? 3 : -1;
    if (extra < 0 || c == 0) return false;
    if (i + static_cast<std::size_t>(extra) >= s.size()) return false;
    for (int k = 1; k <= extra; ++k) {
      if ((static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]) >> 6) != 0x2) return false;
    }
    i += static_cast<std::size_t>(extra) + 1;
  }
  return true;
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      if (start < text.size()) lines.emplace_back(text.substr(start));
      break;
    }
    lines.emplace_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  for (auto& l : lines) {
    if (!l.empty() && l.back() == '\r') l.pop_back();
  }
  return lines;
}

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

NormalizedSource paginate_text(std::string_view bytes, SourceFormat format, const std::string& source_name) {
  if (!valid_utf8(bytes)) throw format_error(source_name + " is not valid UTF-8 text");
  std::vector<std::string> lines = split_lines(bytes);
  if (std::all_of(lines.begin(), lines.end(), [](const std::string& l) { return blank(l); })) {
    throw empty_document(source_name);
  }
  NormalizedSource out;
  int page_count = static_cast<int>((lines.size() + kLinesPerPage - 1) / kLinesPerPage);
  out.text_layer.resize(static_cast<std::size_t>(page_count));
  for (int p = 0; p < page_count; ++p) {
    out.text_layer[static_cast<std::size_t>(p)].width = kTextPageWidth;
    out.text_layer[static_cast<std::size_t>(p)].height = kTextPageHeight;
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string text = lines[i];
    if (blank(text)) continue;
    double size = kTextFontSize;
    if (format == SourceFormat::Md) {
      std::size_t hashes = 0;
      while (hashes < text.size() && text[hashes] == '#') ++hashes;
      if (hashes >= 1 && hashes <= 6 && hashes < text.size() && text[hashes] == ' ') {
        size = kHeadingFontSize;
        text = text.substr(hashes + 1);
      }
    }
    auto first = text.find_first_not_of(" \t");
    auto last = text.find_last_not_of(" \t");
    std::size_t indent = first;
    text = text.substr(first, last - first + 1);
    int row = static_cast<int>(i % kLinesPerPage);
    TextRun run;
    run.text = text;
    run.font_size = size;
    run.x0 = std::min(kTextLeftMargin + static_cast<double>(indent) * 0.5 * size, kTextPageWidth - 1.0);
    run.x1 = std::min(run.x0 + static_cast<double>(text.size()) * 0.5 * size, kTextPageWidth);
    run.y0 = kTextTopMargin + row * kTextLeading;
    run.y1 = run.y0 + size;
    out.text_layer[i / kLinesPerPage].runs.push_back(std::move(run));
  }
  out.document.page_count = page_count;
  return out;
}

}  // namespace

const char* to_string(SourceFormat f) {
  switch (f) {
    case SourceFormat::Pdf: return "pdf";
    case SourceFormat::Txt: return "txt";
    case SourceFormat::Md: return "md";
  }
  return "";
}

SourceFormat parse_source_format(std::string_view name) {
  std::string l;
  for (char c : name) l.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (!l.empty() && l.front() == '.') l.erase(0, 1);
  if (l == "pdf") return SourceFormat::Pdf;
  if (l == "txt" || l == "text") return SourceFormat::Txt;
  if (l == "md" || l == "markdown") return SourceFormat::Md;
  throw format_error("unsupported source format '" + std::string(name) + "' (accepted: pdf, txt, md)");
}

SourceFormat format_from_path(const std::filesystem::path& path) {
  return parse_source_format(path.extension().string());
}

std::string document_identity(std::string_view bytes) { return "d" + sha256_hex(bytes).substr(0, 16); }

NormalizedSource normalize(std::string_view bytes, SourceFormat format, const std::string& source_name) {
  if (bytes.empty()) throw empty_document(source_name);
  NormalizedSource out;
  if (format == SourceFormat::Pdf) {
    pdf::PdfContent content = pdf::read_pdf(bytes);
    out.document.page_count = static_cast<int>(content.pages.size());
    out.text_layer = std::move(content.pages);
  } else {
    out = paginate_text(bytes, format, source_name);
  }
  if (out.document.page_count == 0) throw empty_document(source_name);
  out.document.document_id = document_identity(bytes);
  out.document.source_name = source_name;
  for (int p = 0; p < out.document.page_count; ++p) {
    const PageText& layer = out.text_layer[static_cast<std::size_t>(p)];
    out.document.pages.push_back(Page{p, layer.width, layer.height, {}});
  }
  out.document.advance(ProcessingState::Normalized);
  return out;
}

void detect_layout(NormalizedSource& source, const ExtractionAdapter& detector) {
  Document& doc = source.document;
  if (doc.processing_state != ProcessingState::Normalized) {
    throw Error(ErrorCode::Invalid, "detect_layout requires a Normalized document");
  }
  std::vector<std::vector<LayoutBlock>> detected(doc.pages.size());
  auto errors = detail::parallel_for(doc.pages.size(), [&](std::size_t i) {
    const Page& page = doc.pages[i];
    const int page_index = page.page_index;
    AdapterRequest req{doc.document_id, doc.source_name, page_index, page.width, page.height, std::nullopt,
                       std::nullopt, &source.text_layer[i]};
    Json payload = detector.invoke(req);
    std::vector<LayoutBlock> blocks;
    std::set<std::string> seen;
    for (const DetectedRegion& r : parse_regions(payload)) {
      auto box = BoundingBox{page_index, r.x0, r.y0, r.x1, r.y1}.clipped(page.width, page.height);
      if (!box) continue;
      LayoutBlock b;
      b.document_id = doc.document_id;
      b.bbox = *box;
      b.block_type = block_type_from_label(r.label);
      b.block_id = block_identity(doc.document_id, page_index, b.bbox, b.block_type);
      if (!seen.insert(b.block_id).second) continue;
      blocks.push_back(std::move(b));
    }
    sort_reading_order(blocks);
    detected[i] = std::move(blocks);
  });
  std::optional<PageFailure> failure;
  for (std::size_t i = 0; i < errors.size() && !failure; ++i) {
    if (!errors[i]) continue;
    std::string what = "unknown error";
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    failure.emplace(static_cast<int>(i), "layout detection failed on page " + std::to_string(i) + ": " + what);
  }
  if (failure) throw *failure;
  for (std::size_t i = 0; i < detected.size(); ++i) doc.pages[i].blocks = std::move(detected[i]);
  doc.advance(ProcessingState::LayoutDetected);
}

ExtractionSummary extract_blocks(NormalizedSource& source, const AdapterSet& adapters) {
  Document& doc = source.document;
  if (doc.processing_state != ProcessingState::LayoutDetected) {
    throw Error(ErrorCode::Invalid, "extract_blocks requires a LayoutDetected document");
  }
  std::map<AdapterKind, const ExtractionAdapter*> healthy;
  for (AdapterKind kind : kAllAdapterKinds) {
    if (kind == AdapterKind::LayoutDetector) continue;
    try {
      const ExtractionAdapter& a = adapters.get(kind);
      healthy[kind] = a.health() ? &a : nullptr;
    } catch (const Error&) {
      healthy[kind] = nullptr;
    }
  }

  std::vector<ExtractionSummary> per_page(doc.pages.size());
  detail::parallel_for(doc.pages.size(), [&](std::size_t i) {
    Page& page = doc.pages[i];
    ExtractionSummary& s = per_page[i];
    for (LayoutBlock& b : page.blocks) {
      const ExtractionAdapter* adapter = healthy.at(extractor_for(b.block_type));
      try {
        if (!adapter) throw Error(ErrorCode::AdapterUnavailable, "extractor unavailable");
        AdapterRequest req{doc.document_id, doc.source_name, page.page_index, page.width, page.height, b.bbox,
                           b.block_type, &source.text_layer[i]};
        Json payload = adapter->invoke(req);
        validate_adapter_payload(adapter->kind(), payload);
        std::string text = canonical_text_repr(b.block_type, payload);
        if (text.empty()) throw Error(ErrorCode::AdapterUnavailable, "extractor returned no text");
        b.raw_payload = std::move(payload);
        b.text_repr = std::move(text);
        b.needs_validation = false;
        ++s.extracted;
      } catch (const std::exception&) {
        b.raw_payload = Json::object();
        b.text_repr.clear();
        b.needs_validation = true;
        ++s.flagged;
      }
    }
  });
  ExtractionSummary total;
  for (const auto& s : per_page) {
    total.extracted += s.extracted;
    total.flagged += s.flagged;
  }
  doc.advance(ProcessingState::Extracted);
  return total;
}

void to_json(Json& j, const PipelineJob& job) {
  Json stamps = Json::array();
  for (const auto& [stage, ts] : job.stage_timestamps) stamps.push_back({{"stage", stage}, {"timestamp", ts}});
  j = Json{{"job_id", job.job_id},
           {"document_id", job.document_id},
           {"source_name", job.source_name},
           {"stage", job.stage},
           {"failed_stage", job.failed_stage ? Json(*job.failed_stage) : Json(nullptr)},
           {"failed_page", job.failed_page ? Json(*job.failed_page) : Json(nullptr)},
           {"stage_timestamps", stamps},
           {"error_message", job.error_message ? Json(*job.error_message) : Json(nullptr)},
           {"blocks_extracted", job.blocks_extracted},
           {"blocks_flagged", job.blocks_flagged}};
}

Pipeline::Pipeline(BlockStore& store, VectorIndex& index, std::shared_ptr<Clock> clock)
    : store_(store), index_(index), clock_(std::move(clock)) {}

PipelineJob Pipeline::run(std::string_view bytes, SourceFormat format, const std::string& source_name,
                          const AdapterSet& adapters, const std::string& job_id) {
  static std::atomic<std::uint64_t> counter{0};
  PipelineJob job;
  if (job_id.empty()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "job-%06llu", static_cast<unsigned long long>(++counter));
    job.job_id = buf;
  } else {
    job.job_id = job_id;
  }
  job.source_name = source_name;
  job.stage_timestamps.emplace_back(ProcessingState::Uploaded, clock_->now_ms());

  auto fail = [&](ProcessingState stage, const std::string& message) {
    job.failed_stage = stage;
    job.error_message = message;
    job.stage = ProcessingState::Failed;
    job.stage_timestamps.emplace_back(ProcessingState::Failed, clock_->now_ms());
  };
  auto reached = [&](ProcessingState stage) {
    job.stage = stage;
    job.stage_timestamps.emplace_back(stage, clock_->now_ms());
  };

  NormalizedSource source;
  try {
    source = normalize(bytes, format, source_name);
  } catch (const std::exception& e) {
    fail(ProcessingState::Normalized, e.what());
    return job;
  }
  job.document_id = source.document.document_id;
  reached(ProcessingState::Normalized);

  auto keep_failed = [&]() {
    if (!store_.contains(source.document.document_id)) {
      source.document.advance(ProcessingState::Failed);
      for (auto& page : source.document.pages) page.blocks.clear();
      store_.put(source.document);
    }
  };

  try {
    const ExtractionAdapter& detector = adapters.get(AdapterKind::LayoutDetector);
    if (!detector.health()) throw Error(ErrorCode::AdapterUnavailable, "layout detector is unhealthy");
    detect_layout(source, detector);
  } catch (const PageFailure& e) {
    job.failed_page = e.page_index();
    fail(ProcessingState::LayoutDetected, e.what());
    keep_failed();
    return job;
  } catch (const std::exception& e) {
    fail(ProcessingState::LayoutDetected, e.what());
    keep_failed();
    return job;
  }
  reached(ProcessingState::LayoutDetected);

  try {
    ExtractionSummary summary = extract_blocks(source, adapters);
    job.blocks_extracted = summary.extracted;
    job.blocks_flagged = summary.flagged;
  } catch (const std::exception& e) {
    fail(ProcessingState::Extracted, e.what());
    keep_failed();
    return job;
  }
  reached(ProcessingState::Extracted);

  try {
    if (auto previous = store_.get(source.document.document_id)) {
      for (const auto* b : previous->blocks()) index_.remove(b->block_id);
    }
    for (const auto* b : source.document.blocks()) {
      if (b->indexable()) index_.upsert(*b);
    }
    source.document.advance(ProcessingState::Indexed);
    store_.put(source.document);
  } catch (const std::exception& e) {
    fail(ProcessingState::Indexed, e.what());
    return job;
  }
  reached(ProcessingState::Indexed);
  return job;
}

PipelineJob Pipeline::run_file(const std::filesystem::path& path, const AdapterConfig& config,
                               const std::string& job_id) {
  std::string bytes;
  SourceFormat format;
  AdapterSet adapters;
  try {
    bytes = read_file(path);
    format = format_from_path(path);
    adapters = make_adapters(config, path);
  } catch (const std::exception& e) {
    PipelineJob job;
    job.job_id = job_id.empty() ? "job-" + path.filename().string() : job_id;
    job.source_name = path.filename().string();
    job.stage_timestamps.emplace_back(ProcessingState::Uploaded, clock_->now_ms());
    job.failed_stage = ProcessingState::Normalized;
    job.error_message = e.what();
    job.stage = ProcessingState::Failed;
    job.stage_timestamps.emplace_back(ProcessingState::Failed, clock_->now_ms());
    return job;
  }
  return run(bytes, format, path.filename().string(), adapters, job_id);
}

}  // namespace docloop

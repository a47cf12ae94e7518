#include "docloop/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "docloop/error.hpp"

namespace docloop {

namespace {

constexpr std::string_view kSectionPreamble =
    "Write one section of a research report from the evidence blocks below. "
    "Follow the instruction and refer to evidence by its source tag.";

constexpr std::string_view kRemovedNotice = "removed content: this block was deleted during validation";

struct AppendixLine {
  std::string tag;
  std::string text;
  bool removed = false;
};

std::vector<AppendixLine> appendix(const Report& report, const BlockStore& store) {
  std::vector<AppendixLine> out;
  for (std::size_t s = 0; s < report.sections.size(); ++s) {
    const auto& sec = report.sections[s];
    for (std::size_t i = 0; i < sec.block_ids.size(); ++i) {
      AppendixLine line;
      line.tag = std::to_string(s + 1) + "." + std::to_string(i + 1);
      const auto& id = sec.block_ids[i];
      if (auto ref = store.find_block(id)) {
        std::ostringstream os;
        os << ref->source_name << ", p." << ref->block.page_index() + 1 << ", " << to_string(ref->block.block_type)
           << " (block " << id << ", revision " << ref->block.revision << ")";
        line.text = os.str();
        line.removed = ref->block.tombstoned;
      } else {
        line.text = "unresolved block " + id;
      }
      out.push_back(std::move(line));
    }
  }
  return out;
}

std::string html_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

ReportSection& require_section(Report& r, const std::string& section_id) {
  auto* s = r.find_section(section_id);
  if (!s) throw not_found("section " + section_id);
  return *s;
}

}  // namespace

const ReportSection* Report::find_section(const std::string& section_id) const {
  for (const auto& s : sections) {
    if (s.section_id == section_id) return &s;
  }
  return nullptr;
}

ReportSection* Report::find_section(const std::string& section_id) {
  for (auto& s : sections) {
    if (s.section_id == section_id) return &s;
  }
  return nullptr;
}

void to_json(Json& j, const ReportSection& s) {
  j = Json{{"section_id", s.section_id}, {"heading", s.heading},     {"instruction", s.instruction},
           {"block_ids", s.block_ids},   {"draft", s.draft},         {"draft_revision", s.draft_revision}};
}

void from_json(const Json& j, ReportSection& s) {
  s.section_id = j.at("section_id").get<std::string>();
  s.heading = j.at("heading").get<std::string>();
  s.instruction = j.value("instruction", std::string());
  s.block_ids = j.value("block_ids", std::vector<std::string>{});
  s.draft = j.value("draft", std::string());
  s.draft_revision = j.value("draft_revision", std::int64_t{0});
}

void to_json(Json& j, const Report& r) {
  j = Json{{"report_id", r.report_id}, {"session_id", r.session_id},     {"title", r.title},
           {"sections", r.sections},   {"next_section", r.next_section}};
}

void from_json(const Json& j, Report& r) {
  r.report_id = j.at("report_id").get<std::string>();
  r.session_id = j.value("session_id", std::string());
  r.title = j.at("title").get<std::string>();
  r.sections = j.value("sections", std::vector<ReportSection>{});
  r.next_section = j.value("next_section", r.sections.size() + 1);
}

std::optional<ExportFormat> parse_export_format(std::string_view name) {
  if (name == "md" || name == "markdown") return ExportFormat::Markdown;
  if (name == "html") return ExportFormat::Html;
  return std::nullopt;
}

std::string render_markdown(const Report& report, const BlockStore& store) {
  std::ostringstream os;
  os << "# " << report.title << "\n\n";
  for (std::size_t s = 0; s < report.sections.size(); ++s) {
    const auto& sec = report.sections[s];
    os << "## " << s + 1 << ". " << sec.heading << "\n\n";
    os << (sec.draft.empty() ? std::string("_No draft yet._") : sec.draft) << "\n\n";
  }
  os << "## Appendix: cited blocks\n\n";
  for (const auto& line : appendix(report, store)) {
    os << "- [" << line.tag << "] " << line.text;
    if (line.removed) os << " _(" << kRemovedNotice << ")_";
    os << "\n";
  }
  return os.str();
}

std::string render_html(const Report& report, const BlockStore& store) {
  std::ostringstream os;
  os << "<!DOCTYPE html>\n<html>\n<head><meta charset=\"utf-8\"><title>" << html_escape(report.title)
     << "</title></head>\n<body>\n";
  os << "<h1>" << html_escape(report.title) << "</h1>\n";
  for (std::size_t s = 0; s < report.sections.size(); ++s) {
    const auto& sec = report.sections[s];
    os << "<h2>" << s + 1 << ". " << html_escape(sec.heading) << "</h2>\n";
    if (sec.draft.empty()) {
      os << "<p><em>No draft yet.</em></p>\n";
    } else {
      std::istringstream paras(sec.draft);
      std::string line;
      while (std::getline(paras, line)) {
        if (!line.empty()) os << "<p>" << html_escape(line) << "</p>\n";
      }
    }
  }
  os << "<h2>Appendix: cited blocks</h2>\n<ul>\n";
  for (const auto& line : appendix(report, store)) {
    os << "<li>[" << line.tag << "] " << html_escape(line.text);
    if (line.removed) os << " <em>(" << kRemovedNotice << ")</em>";
    os << "</li>\n";
  }
  os << "</ul>\n</body>\n</html>\n";
  return os.str();
}

std::string section_prompt(const ReportSection& section, const BlockStore& store) {
  std::ostringstream os;
  os << kSectionPreamble << "\n\n";
  for (const auto& id : section.block_ids) {
    auto ref = store.find_block(id);
    if (!ref) continue;
    os << "[source: " << ref->source_name << " p." << ref->block.page_index() + 1 << ' '
       << to_string(ref->block.block_type) << "]\n";
    os << (ref->block.tombstoned ? std::string("(") + std::string(kRemovedNotice) + ")" : ref->block.text_repr)
       << "\n\n";
  }
  os << "Instruction: " << section.instruction << "\n";
  os << "Section: " << section.heading;
  return os.str();
}

ReportService::ReportService(BlockStore& store, std::shared_ptr<LlmAdapter> llm, std::filesystem::path dir)
    : store_(store), llm_(std::move(llm)), dir_(std::move(dir)) {}

void ReportService::load() {
  if (dir_.empty() || !std::filesystem::exists(dir_)) return;
  std::unique_lock lock(map_mutex_);
  for (const auto& file : std::filesystem::directory_iterator(dir_)) {
    if (file.path().extension() != ".json") continue;
    auto e = std::make_shared<Entry>();
    e->report = Json::parse(read_file(file.path())).get<Report>();
    unsigned long n = 0;
    if (std::sscanf(e->report.report_id.c_str(), "rep-%lu", &n) == 1) {
      next_report_ = std::max<std::size_t>(next_report_, n + 1);
    }
    reports_[e->report.report_id] = std::move(e);
  }
}

void ReportService::persist(const Report& r) const {
  if (dir_.empty()) return;
  std::filesystem::create_directories(dir_);
  write_file_atomic(dir_ / (r.report_id + ".json"), Json(r).dump(2) + "\n");
}

std::shared_ptr<ReportService::Entry> ReportService::entry(const std::string& report_id) const {
  std::shared_lock lock(map_mutex_);
  auto it = reports_.find(report_id);
  if (it == reports_.end()) throw not_found("report " + report_id);
  return it->second;
}

Report ReportService::create(const std::string& session_id, const std::string& title) {
  auto e = std::make_shared<Entry>();
  e->report.session_id = session_id;
  e->report.title = title;
  {
    std::unique_lock lock(map_mutex_);
    char buf[32];
    std::snprintf(buf, sizeof buf, "rep-%06zu", next_report_++);
    e->report.report_id = buf;
    reports_[e->report.report_id] = e;
  }
  persist(e->report);
  return e->report;
}

Report ReportService::get(const std::string& report_id) const {
  auto e = entry(report_id);
  std::lock_guard lock(e->mutex);
  return e->report;
}

std::vector<std::string> ReportService::report_ids() const {
  std::shared_lock lock(map_mutex_);
  std::vector<std::string> out;
  for (const auto& [id, _] : reports_) out.push_back(id);
  return out;
}

Report ReportService::mutate(const std::string& report_id, const std::function<void(Report&)>& fn) {
  auto e = entry(report_id);
  std::lock_guard lock(e->mutex);
  Report copy = e->report;
  fn(copy);
  persist(copy);
  e->report = std::move(copy);
  return e->report;
}

Report ReportService::add_section(const std::string& report_id, const std::string& heading,
                                  const std::string& instruction, std::optional<std::size_t> position) {
  return mutate(report_id, [&](Report& r) {
    std::size_t pos = position.value_or(r.sections.size());
    if (pos > r.sections.size()) throw Error(ErrorCode::Invalid, "section position out of range");
    ReportSection s;
    s.section_id = "sec-" + std::to_string(r.next_section++);
    s.heading = heading;
    s.instruction = instruction;
    r.sections.insert(r.sections.begin() + static_cast<std::ptrdiff_t>(pos), std::move(s));
  });
}

Report ReportService::remove_section(const std::string& report_id, const std::string& section_id) {
  return mutate(report_id, [&](Report& r) {
    require_section(r, section_id);
    std::erase_if(r.sections, [&](const ReportSection& s) { return s.section_id == section_id; });
  });
}

Report ReportService::move_section(const std::string& report_id, const std::string& section_id,
                                   std::size_t position) {
  return mutate(report_id, [&](Report& r) {
    require_section(r, section_id);
    if (position >= r.sections.size()) throw Error(ErrorCode::Invalid, "section position out of range");
    auto it = std::find_if(r.sections.begin(), r.sections.end(),
                           [&](const ReportSection& s) { return s.section_id == section_id; });
    ReportSection moved = std::move(*it);
    r.sections.erase(it);
    r.sections.insert(r.sections.begin() + static_cast<std::ptrdiff_t>(position), std::move(moved));
  });
}

Report ReportService::set_heading(const std::string& report_id, const std::string& section_id,
                                  const std::string& heading) {
  return mutate(report_id, [&](Report& r) { require_section(r, section_id).heading = heading; });
}

Report ReportService::set_instruction(const std::string& report_id, const std::string& section_id,
                                      const std::string& instruction) {
  return mutate(report_id, [&](Report& r) { require_section(r, section_id).instruction = instruction; });
}

Report ReportService::assign_block(const std::string& report_id, const std::string& section_id,
                                   const std::string& block_id, std::optional<std::size_t> position) {
  return mutate(report_id, [&](Report& r) {
    auto& s = require_section(r, section_id);
    if (!store_.find_block(block_id)) throw not_found("block " + block_id);
    if (std::find(s.block_ids.begin(), s.block_ids.end(), block_id) != s.block_ids.end()) {
      throw Error(ErrorCode::Conflict, "block " + block_id + " is already in section " + section_id,
                  {{"kind", "duplicate"}});
    }
    std::size_t pos = position.value_or(s.block_ids.size());
    if (pos > s.block_ids.size()) throw Error(ErrorCode::Invalid, "block position out of range");
    s.block_ids.insert(s.block_ids.begin() + static_cast<std::ptrdiff_t>(pos), block_id);
  });
}

Report ReportService::unassign_block(const std::string& report_id, const std::string& section_id,
                                     const std::string& block_id) {
  return mutate(report_id, [&](Report& r) {
    auto& s = require_section(r, section_id);
    auto it = std::find(s.block_ids.begin(), s.block_ids.end(), block_id);
    if (it == s.block_ids.end()) throw not_found("block " + block_id + " in section " + section_id);
    s.block_ids.erase(it);
  });
}

std::string ReportService::generate_section(const std::string& report_id, const std::string& section_id) {
  auto e = entry(report_id);
  std::lock_guard lock(e->mutex);
  Report copy = e->report;
  auto& s = require_section(copy, section_id);
  if (s.block_ids.empty() && s.instruction.empty()) {
    throw Error(ErrorCode::Invalid, "section needs an assigned block or an instruction", {{"kind", "precondition"}});
  }
  LlmRequest req;
  req.purpose = LlmPurpose::ReportSection;
  req.prompt = section_prompt(s, store_);
  req.max_chars = 8000;
  s.draft = llm_->complete(req).text;
  ++s.draft_revision;
  std::string draft = s.draft;
  persist(copy);
  e->report = std::move(copy);
  return draft;
}

Report ReportService::edit_draft(const std::string& report_id, const std::string& section_id,
                                 const std::string& draft) {
  return mutate(report_id, [&](Report& r) {
    auto& s = require_section(r, section_id);
    s.draft = draft;
    ++s.draft_revision;
  });
}

std::string ReportService::export_report(const std::string& report_id, ExportFormat format) const {
  Report r = get(report_id);
  return format == ExportFormat::Markdown ? render_markdown(r, store_) : render_html(r, store_);
}

}  // namespace docloop

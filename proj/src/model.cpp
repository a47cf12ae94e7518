#include "docloop/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <utility>

#include "docloop/error.hpp"
#include "docloop/hash.hpp"

namespace docloop {

namespace {

std::string lower_snake(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == ' ' || c == '-') {
      out.push_back('_');
    } else {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  return out;
}

bool has_string(const Payload& p, const char* key) { return p.contains(key) && p.at(key).is_string(); }

bool optional_string(const Payload& p, const char* key) { return !p.contains(key) || p.at(key).is_string(); }

std::string optional_text(const Payload& p, const char* key) {
  return p.contains(key) ? p.at(key).get<std::string>() : std::string();
}

}  // namespace

BoundingBox BoundingBox::make(int page_index, double x0, double y0, double x1, double y1) {
  BoundingBox b{page_index, x0, y0, x1, y1};
  if (!b.is_valid()) {
    std::ostringstream os;
    os << "invalid bbox on page " << page_index << ": [" << x0 << ", " << y0 << ", " << x1 << ", " << y1 << "]";
    throw Error(ErrorCode::Invalid, os.str());
  }
  return b;
}

bool BoundingBox::is_valid() const {
  for (double v : {x0, y0, x1, y1}) {
    if (!std::isfinite(v) || v < 0.0) return false;
  }
  return page_index >= 0 && x0 < x1 && y0 < y1;
}

std::optional<BoundingBox> BoundingBox::clipped(double page_width, double page_height) const {
  BoundingBox b{page_index, std::clamp(x0, 0.0, page_width), std::clamp(y0, 0.0, page_height),
                std::clamp(x1, 0.0, page_width), std::clamp(y1, 0.0, page_height)};
  if (!b.is_valid()) return std::nullopt;
  return b;
}

const char* to_string(BlockType type) {
  switch (type) {
    case BlockType::Title: return "Title";
    case BlockType::Text: return "Text";
    case BlockType::Table: return "Table";
    case BlockType::Figure: return "Figure";
    case BlockType::Formula: return "Formula";
    case BlockType::Caption: return "Caption";
    case BlockType::Other: return "Other";
  }
  return "Other";
}

std::optional<BlockType> parse_block_type(std::string_view name) {
  for (BlockType t : kAllBlockTypes) {
    if (name == to_string(t)) return t;
  }
  return std::nullopt;
}

BlockType block_type_from_label(std::string_view label) {
  const std::string l = lower_snake(label);
  if (l == "title" || l == "doc_title" || l == "section_header" || l == "heading") return BlockType::Title;
  if (l == "text" || l == "plain_text" || l == "content" || l == "paragraph" || l == "list" || l == "list_item")
    return BlockType::Text;
  if (l == "table") return BlockType::Table;
  if (l == "figure" || l == "picture" || l == "image") return BlockType::Figure;
  if (l == "formula" || l == "equation" || l == "isolate_formula" || l == "isolated_formula")
    return BlockType::Formula;
  if (l == "caption" || l == "figure_caption" || l == "table_caption" || l == "formula_caption")
    return BlockType::Caption;
  return BlockType::Other;
}

bool payload_matches(BlockType type, const Payload& p) {
  if (!p.is_object()) return false;
  switch (type) {
    case BlockType::Title:
    case BlockType::Text:
    case BlockType::Caption:
    case BlockType::Other:
      return has_string(p, "text");
    case BlockType::Table: {
      if (!p.contains("cells") || !p.at("cells").is_array()) return false;
      for (const auto& row : p.at("cells")) {
        if (!row.is_array()) return false;
        for (const auto& cell : row) {
          if (!cell.is_string()) return false;
        }
      }
      return optional_string(p, "caption") && optional_string(p, "latex") && optional_string(p, "html");
    }
    case BlockType::Formula:
      return has_string(p, "latex") && has_string(p, "description");
    case BlockType::Figure:
      return has_string(p, "description") && optional_string(p, "caption");
  }
  return false;
}

void validate_payload(BlockType type, const Payload& payload) {
  if (!payload_matches(type, payload)) {
    throw schema_error(std::string("payload does not match ") + to_string(type) + " schema");
  }
}

std::string canonical_text_repr(BlockType type, const Payload& p) {
  validate_payload(type, p);
  switch (type) {
    case BlockType::Title:
    case BlockType::Text:
    case BlockType::Caption:
    case BlockType::Other:
      return p.at("text").get<std::string>();
    case BlockType::Table: {
      std::string out = optional_text(p, "caption");
      for (const auto& row : p.at("cells")) {
        std::string line;
        for (std::size_t i = 0; i < row.size(); ++i) {
          if (i) line += " | ";
          line += row[i].get<std::string>();
        }
        if (!out.empty()) out += '\n';
        out += line;
      }
      return out;
    }
    case BlockType::Formula:
      return p.at("latex").get<std::string>() + std::string(kFormulaSeparator) + p.at("description").get<std::string>();
    case BlockType::Figure: {
      std::string caption = optional_text(p, "caption");
      std::string description = p.at("description").get<std::string>();
      if (caption.empty()) return description;
      return caption + "\n" + description;
    }
  }
  return {};
}

std::string block_identity(std::string_view document_id, int page_index, const BoundingBox& bbox, BlockType type) {
  std::ostringstream key;
  key << document_id << '\x1f' << page_index;
  for (double v : {bbox.x0, bbox.y0, bbox.x1, bbox.y1}) {
    key << '\x1f' << std::llround(v * 10.0);
  }
  key << '\x1f' << to_string(type);
  return "b" + sha256_hex(key.str()).substr(0, 20);
}

const char* to_string(ProcessingState state) {
  switch (state) {
    case ProcessingState::Uploaded: return "Uploaded";
    case ProcessingState::Normalized: return "Normalized";
    case ProcessingState::LayoutDetected: return "LayoutDetected";
    case ProcessingState::Extracted: return "Extracted";
    case ProcessingState::Indexed: return "Indexed";
    case ProcessingState::Failed: return "Failed";
  }
  return "Failed";
}

std::optional<ProcessingState> parse_processing_state(std::string_view name) {
  for (auto s : {ProcessingState::Uploaded, ProcessingState::Normalized, ProcessingState::LayoutDetected,
                 ProcessingState::Extracted, ProcessingState::Indexed, ProcessingState::Failed}) {
    if (name == to_string(s)) return s;
  }
  return std::nullopt;
}

bool is_terminal(ProcessingState state) {
  return state == ProcessingState::Indexed || state == ProcessingState::Failed;
}

bool can_transition(ProcessingState from, ProcessingState to) {
  if (is_terminal(from)) return false;
  if (to == ProcessingState::Failed) return true;
  return static_cast<int>(to) > static_cast<int>(from);
}

void Document::advance(ProcessingState next) {
  if (!can_transition(processing_state, next)) {
    throw Error(ErrorCode::Invalid, std::string("illegal state transition ") + to_string(processing_state) +
                                        " -> " + to_string(next));
  }
  processing_state = next;
}

const LayoutBlock* Document::find_block(std::string_view block_id) const {
  for (const auto& page : pages) {
    for (const auto& block : page.blocks) {
      if (block.block_id == block_id) return &block;
    }
  }
  return nullptr;
}

LayoutBlock* Document::find_block(std::string_view block_id) {
  return const_cast<LayoutBlock*>(std::as_const(*this).find_block(block_id));
}

std::vector<const LayoutBlock*> Document::blocks() const {
  std::vector<const LayoutBlock*> out;
  for (const auto& page : pages) {
    for (const auto& block : page.blocks) out.push_back(&block);
  }
  return out;
}

std::size_t Document::block_count() const {
  std::size_t n = 0;
  for (const auto& page : pages) n += page.blocks.size();
  return n;
}

void Document::check_invariants() const {
  if (page_count <= 0 || static_cast<int>(pages.size()) != page_count) {
    throw Error(ErrorCode::Invalid, "document " + document_id + " has inconsistent page_count");
  }
  for (std::size_t i = 0; i < pages.size(); ++i) {
    if (pages[i].page_index != static_cast<int>(i)) {
      throw Error(ErrorCode::Invalid, "page records out of order in " + document_id);
    }
    for (const auto& block : pages[i].blocks) {
      if (block.bbox.page_index != pages[i].page_index || block.bbox.page_index >= page_count ||
          !block.bbox.is_valid() || block.document_id != document_id) {
        throw Error(ErrorCode::Invalid, "block " + block.block_id + " violates page bounds");
      }
    }
  }
}

void sort_reading_order(std::vector<LayoutBlock>& blocks) {
  std::sort(blocks.begin(), blocks.end(), [](const LayoutBlock& a, const LayoutBlock& b) {
    if (a.bbox.y0 != b.bbox.y0) return a.bbox.y0 < b.bbox.y0;
    if (a.bbox.x0 != b.bbox.x0) return a.bbox.x0 < b.bbox.x0;
    return a.block_id < b.block_id;
  });
}

void to_json(Json& j, const BoundingBox& b) {
  j = Json{{"page_index", b.page_index}, {"x0", b.x0}, {"y0", b.y0}, {"x1", b.x1}, {"y1", b.y1}};
}

void from_json(const Json& j, BoundingBox& b) {
  b = BoundingBox::make(j.at("page_index").get<int>(), j.at("x0").get<double>(), j.at("y0").get<double>(),
                        j.at("x1").get<double>(), j.at("y1").get<double>());
}

void to_json(Json& j, BlockType t) { j = to_string(t); }

void from_json(const Json& j, BlockType& t) {
  auto parsed = parse_block_type(j.get<std::string>());
  if (!parsed) throw schema_error("unknown block_type " + j.dump());
  t = *parsed;
}

void to_json(Json& j, ProcessingState s) { j = to_string(s); }

void from_json(const Json& j, ProcessingState& s) {
  auto parsed = parse_processing_state(j.get<std::string>());
  if (!parsed) throw schema_error("unknown processing_state " + j.dump());
  s = *parsed;
}

void to_json(Json& j, const LayoutBlock& b) {
  j = Json{{"block_id", b.block_id},
           {"document_id", b.document_id},
           {"bbox", b.bbox},
           {"block_type", b.block_type},
           {"raw_payload", b.raw_payload},
           {"text_repr", b.text_repr},
           {"revision", b.revision},
           {"needs_validation", b.needs_validation},
           {"tombstoned", b.tombstoned}};
}

void from_json(const Json& j, LayoutBlock& b) {
  b.block_id = j.at("block_id").get<std::string>();
  b.document_id = j.at("document_id").get<std::string>();
  b.bbox = j.at("bbox").get<BoundingBox>();
  b.block_type = j.at("block_type").get<BlockType>();
  b.raw_payload = j.value("raw_payload", Json::object());
  b.text_repr = j.value("text_repr", std::string());
  b.revision = j.value("revision", std::int64_t{0});
  b.needs_validation = j.value("needs_validation", false);
  b.tombstoned = j.value("tombstoned", false);
}

void to_json(Json& j, const Page& p) {
  j = Json{{"page_index", p.page_index}, {"width", p.width}, {"height", p.height}, {"blocks", p.blocks}};
}

void from_json(const Json& j, Page& p) {
  p.page_index = j.at("page_index").get<int>();
  p.width = j.value("width", 612.0);
  p.height = j.value("height", 792.0);
  p.blocks = j.value("blocks", std::vector<LayoutBlock>{});
}

void to_json(Json& j, const Document& d) {
  j = Json{{"document_id", d.document_id},
           {"source_name", d.source_name},
           {"page_count", d.page_count},
           {"pages", d.pages},
           {"processing_state", d.processing_state}};
}

void from_json(const Json& j, Document& d) {
  d.document_id = j.at("document_id").get<std::string>();
  d.source_name = j.at("source_name").get<std::string>();
  d.page_count = j.at("page_count").get<int>();
  d.pages = j.at("pages").get<std::vector<Page>>();
  d.processing_state = j.value("processing_state", ProcessingState::Uploaded);
}

std::string serialize_document(const Document& doc) { return Json(doc).dump(2) + "\n"; }

Document deserialize_document(std::string_view text) {
  try {
    return Json::parse(text).get<Document>();
  } catch (const Json::exception& e) {
    throw format_error(std::string("malformed block store: ") + e.what());
  }
}

}  // namespace docloop

#include "docloop/validation.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "docloop/error.hpp"

namespace docloop {

namespace {

bool text_like(BlockType t) {
  return t == BlockType::Title || t == BlockType::Text || t == BlockType::Caption || t == BlockType::Other;
}

std::string format_edit_id(std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "edit-%08zu", n);
  return buf;
}

void require(bool cond, const std::string& message) {
  if (!cond) throw schema_error(message);
}

void apply_snapshot(LayoutBlock& block, const BlockSnapshot& s) {
  block.block_type = s.block_type;
  block.bbox = s.bbox;
  block.raw_payload = s.raw_payload;
  block.tombstoned = s.tombstoned;
  block.text_repr = payload_matches(s.block_type, s.raw_payload) ? canonical_text_repr(s.block_type, s.raw_payload)
                                                                 : std::string();
  block.needs_validation = !block.tombstoned && block.text_repr.empty();
}

}  // namespace

const char* to_string(EditKind kind) {
  switch (kind) {
    case EditKind::Reclassify: return "Reclassify";
    case EditKind::AdjustBounds: return "AdjustBounds";
    case EditKind::AddBlock: return "AddBlock";
    case EditKind::RemoveBlock: return "RemoveBlock";
    case EditKind::CorrectText: return "CorrectText";
    case EditKind::CorrectTable: return "CorrectTable";
    case EditKind::CorrectFigure: return "CorrectFigure";
    case EditKind::CorrectFormula: return "CorrectFormula";
  }
  return "";
}

std::optional<EditKind> parse_edit_kind(std::string_view name) {
  for (auto k : {EditKind::Reclassify, EditKind::AdjustBounds, EditKind::AddBlock, EditKind::RemoveBlock,
                 EditKind::CorrectText, EditKind::CorrectTable, EditKind::CorrectFigure, EditKind::CorrectFormula}) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

BlockSnapshot BlockSnapshot::of(const LayoutBlock& block) {
  return BlockSnapshot{block.block_type, block.bbox, block.raw_payload, block.tombstoned};
}

void to_json(Json& j, const BlockSnapshot& s) {
  j = Json{{"block_type", s.block_type}, {"bbox", s.bbox}, {"raw_payload", s.raw_payload}, {"tombstoned", s.tombstoned}};
}

void from_json(const Json& j, BlockSnapshot& s) {
  s.block_type = j.at("block_type").get<BlockType>();
  s.bbox = j.at("bbox").get<BoundingBox>();
  s.raw_payload = j.value("raw_payload", Json::object());
  s.tombstoned = j.value("tombstoned", false);
}

void to_json(Json& j, const ValidationEdit& e) {
  j = Json{{"edit_id", e.edit_id},
           {"block_id", e.block_id},
           {"document_id", e.document_id},
           {"editor_id", e.editor_id},
           {"edit_kind", to_string(e.edit_kind)},
           {"before", e.before ? Json(*e.before) : Json(nullptr)},
           {"after", e.after},
           {"timestamp", e.timestamp},
           {"revision", e.revision}};
}

void from_json(const Json& j, ValidationEdit& e) {
  e.edit_id = j.value("edit_id", std::string());
  e.block_id = j.value("block_id", std::string());
  e.document_id = j.value("document_id", std::string());
  e.editor_id = j.value("editor_id", std::string());
  auto kind = parse_edit_kind(j.at("edit_kind").get<std::string>());
  if (!kind) throw schema_error("unknown edit_kind " + j.at("edit_kind").dump());
  e.edit_kind = *kind;
  if (j.contains("before") && !j.at("before").is_null()) {
    e.before = j.at("before").get<BlockSnapshot>();
  } else {
    e.before.reset();
  }
  e.after = j.at("after").get<BlockSnapshot>();
  e.timestamp = j.value("timestamp", std::int64_t{0});
  e.revision = j.value("revision", std::int64_t{0});
}

EditLog::EditLog(std::filesystem::path path) : path_(std::move(path)) {}

void EditLog::load() {
  std::lock_guard lock(mutex_);
  edits_.clear();
  if (path_.empty() || !std::filesystem::exists(path_)) return;
  std::ifstream in(path_);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    edits_.push_back(Json::parse(line).get<ValidationEdit>());
  }
}

ValidationEdit EditLog::append(ValidationEdit edit) {
  std::lock_guard lock(mutex_);
  edit.edit_id = format_edit_id(edits_.size() + 1);
  if (!path_.empty()) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    if (!out) throw Error(ErrorCode::Internal, "cannot append to " + path_.string());
    out << Json(edit).dump() << '\n';
  }
  edits_.push_back(edit);
  return edit;
}

std::vector<ValidationEdit> EditLog::all() const {
  std::lock_guard lock(mutex_);
  return edits_;
}

std::vector<ValidationEdit> EditLog::for_block(const std::string& block_id) const {
  std::lock_guard lock(mutex_);
  std::vector<ValidationEdit> out;
  for (const auto& e : edits_) {
    if (e.block_id == block_id) out.push_back(e);
  }
  return out;
}

std::size_t EditLog::size() const {
  std::lock_guard lock(mutex_);
  return edits_.size();
}

PendingFilter PendingFilter::parse(std::string_view text) {
  if (text == "needs_validation") return {Mode::NeedsValidation, BlockType::Other};
  if (text == "all" || text.empty()) return {Mode::All, BlockType::Other};
  if (auto t = parse_block_type(text)) return {Mode::ByType, *t};
  throw Error(ErrorCode::Invalid, "unknown pending filter '" + std::string(text) + "'");
}

void check_edit_shape(const ValidationEdit& e) {
  const BlockSnapshot& a = e.after;
  require(a.bbox.is_valid(), "edit produces an invalid bbox");
  if (e.edit_kind == EditKind::AddBlock) {
    require(!e.before, "AddBlock must not carry a before snapshot");
    require(!a.tombstoned, "AddBlock cannot create a removed block");
    validate_payload(a.block_type, a.raw_payload);
    return;
  }
  require(e.before.has_value(), std::string(to_string(e.edit_kind)) + " needs a before snapshot");
  const BlockSnapshot& b = *e.before;
  require(!b.tombstoned, "block is removed");
  require(a.bbox.page_index == b.bbox.page_index, "edits cannot move a block to another page");
  switch (e.edit_kind) {
    case EditKind::Reclassify:
      require(a.block_type != b.block_type, "Reclassify must change block_type");
      require(a.bbox == b.bbox && !a.tombstoned, "Reclassify may only change type and payload");
      break;
    case EditKind::AdjustBounds:
      require(a.block_type == b.block_type && a.raw_payload == b.raw_payload && !a.tombstoned,
              "AdjustBounds may only change bbox");
      break;
    case EditKind::RemoveBlock:
      require(a.tombstoned && a.block_type == b.block_type && a.bbox == b.bbox && a.raw_payload == b.raw_payload,
              "RemoveBlock may only set tombstoned");
      break;
    case EditKind::CorrectText:
    case EditKind::CorrectTable:
    case EditKind::CorrectFigure:
    case EditKind::CorrectFormula: {
      require(a.block_type == b.block_type && a.bbox == b.bbox && !a.tombstoned,
              std::string(to_string(e.edit_kind)) + " may only change the payload");
      bool ok = (e.edit_kind == EditKind::CorrectText && text_like(a.block_type)) ||
                (e.edit_kind == EditKind::CorrectTable && a.block_type == BlockType::Table) ||
                (e.edit_kind == EditKind::CorrectFigure && a.block_type == BlockType::Figure) ||
                (e.edit_kind == EditKind::CorrectFormula && a.block_type == BlockType::Formula);
      require(ok, std::string(to_string(e.edit_kind)) + " does not apply to " + to_string(a.block_type) + " blocks");
      break;
    }
    case EditKind::AddBlock: break;
  }
  // Bounds and removal edits leave the payload alone, so flagged blocks with
  // an empty payload can still be moved or removed.
  if (e.edit_kind != EditKind::AdjustBounds && e.edit_kind != EditKind::RemoveBlock) {
    validate_payload(a.block_type, a.raw_payload);
  }
}

Validator::Validator(BlockStore& store, EditLog& log, std::shared_ptr<Clock> clock)
    : store_(store), log_(log), clock_(std::move(clock)) {}

LayoutBlock Validator::apply_edit(ValidationEdit edit) {
  check_edit_shape(edit);
  if (edit.edit_kind != EditKind::AddBlock) {
    auto ref = store_.find_block(edit.block_id);
    if (!ref) throw not_found("block " + edit.block_id);
    if (!edit.document_id.empty() && edit.document_id != ref->block.document_id) {
      throw Error(ErrorCode::Invalid, "block " + edit.block_id + " does not belong to " + edit.document_id);
    }
    edit.document_id = ref->block.document_id;
  } else if (edit.document_id.empty()) {
    throw Error(ErrorCode::Invalid, "AddBlock needs a document_id");
  }

  LayoutBlock result;
  store_.update(edit.document_id, [&](Document& doc) {
    const BlockSnapshot& after = edit.after;
    if (after.bbox.page_index >= doc.page_count) throw schema_error("bbox page outside document");
    const Page& page = doc.pages[static_cast<std::size_t>(after.bbox.page_index)];
    if (after.bbox.x1 > page.width || after.bbox.y1 > page.height) throw schema_error("bbox exceeds page bounds");

    if (edit.edit_kind == EditKind::AddBlock) {
      std::string id = block_identity(doc.document_id, after.bbox.page_index, after.bbox, after.block_type);
      if (doc.find_block(id)) throw Error(ErrorCode::Conflict, "an identical block already exists: " + id);
      LayoutBlock block;
      block.block_id = id;
      block.document_id = doc.document_id;
      apply_snapshot(block, after);
      block.revision = 1;
      auto& blocks = doc.pages[static_cast<std::size_t>(after.bbox.page_index)].blocks;
      blocks.push_back(block);
      sort_reading_order(blocks);
      edit.block_id = id;
      result = block;
    } else {
      LayoutBlock* block = doc.find_block(edit.block_id);
      if (!block) throw not_found("block " + edit.block_id);
      if (BlockSnapshot::of(*block) != *edit.before) {
        throw Error(ErrorCode::Conflict, "block " + edit.block_id + " changed since revision was read",
                    {{"current_revision", block->revision}});
      }
      LayoutBlock updated = *block;
      apply_snapshot(updated, after);
      updated.revision = block->revision + 1;
      *block = updated;
      if (edit.edit_kind == EditKind::AdjustBounds) {
        sort_reading_order(doc.pages[static_cast<std::size_t>(after.bbox.page_index)].blocks);
      }
      result = updated;
    }
    edit.revision = result.revision;
    edit.timestamp = clock_->now_ms();
    log_.append(edit);
  });
  if (reindex_) reindex_(result);
  return result;
}

PendingPage Validator::list_pending(const std::string& document_id, const PendingFilter& filter,
                                    const std::optional<std::string>& cursor, std::size_t page_size) const {
  if (page_size == 0) throw Error(ErrorCode::Invalid, "page_size must be positive");
  Document doc = store_.require(document_id);
  std::vector<LayoutBlock> matching;
  for (const auto& page : doc.pages) {
    for (const auto& block : page.blocks) {
      if (block.tombstoned) continue;
      bool keep = filter.mode == PendingFilter::Mode::All ||
                  (filter.mode == PendingFilter::Mode::NeedsValidation && block.needs_validation) ||
                  (filter.mode == PendingFilter::Mode::ByType && block.block_type == filter.type);
      if (keep) matching.push_back(block);
    }
  }
  std::size_t offset = 0;
  if (cursor && !cursor->empty()) {
    try {
      offset = std::stoul(*cursor);
    } catch (...) {
      throw Error(ErrorCode::Invalid, "malformed cursor '" + *cursor + "'");
    }
  }
  PendingPage out;
  for (std::size_t i = offset; i < matching.size() && out.blocks.size() < page_size; ++i) {
    out.blocks.push_back(matching[i]);
  }
  if (offset + out.blocks.size() < matching.size()) out.next_cursor = std::to_string(offset + out.blocks.size());
  return out;
}

LayoutBlock replay_edits(const std::vector<ValidationEdit>& edits) {
  if (edits.empty()) throw Error(ErrorCode::Invalid, "nothing to replay");
  LayoutBlock block;
  block.block_id = edits.front().block_id;
  block.document_id = edits.front().document_id;
  if (edits.front().edit_kind == EditKind::AddBlock) {
    block.revision = 0;
  } else {
    apply_snapshot(block, *edits.front().before);
    block.revision = 0;
  }
  for (const auto& e : edits) {
    if (e.edit_kind != EditKind::AddBlock && BlockSnapshot::of(block) != *e.before) {
      throw Error(ErrorCode::Conflict, "edit " + e.edit_id + " does not chain onto the replayed state");
    }
    apply_snapshot(block, e.after);
    block.revision += 1;
  }
  return block;
}

}  // namespace docloop

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "docloop/block_store.hpp"
#include "docloop/clock.hpp"
#include "docloop/model.hpp"

namespace docloop {

enum class EditKind {
  Reclassify,
  AdjustBounds,
  AddBlock,
  RemoveBlock,
  CorrectText,
  CorrectTable,
  CorrectFigure,
  CorrectFormula
};

const char* to_string(EditKind kind);
std::optional<EditKind> parse_edit_kind(std::string_view name);

// The human-editable part of a block.
struct BlockSnapshot {
  BlockType block_type = BlockType::Other;
  BoundingBox bbox;
  Payload raw_payload = Json::object();
  bool tombstoned = false;

  static BlockSnapshot of(const LayoutBlock& block);
  bool operator==(const BlockSnapshot&) const = default;
};

void to_json(Json& j, const BlockSnapshot& s);
void from_json(const Json& j, BlockSnapshot& s);

struct ValidationEdit {
  std::string edit_id;  // assigned on acceptance
  std::string block_id;  // assigned on acceptance for AddBlock
  std::string document_id;
  std::string editor_id;
  EditKind edit_kind = EditKind::CorrectText;
  std::optional<BlockSnapshot> before;  // absent only for AddBlock
  BlockSnapshot after;
  std::int64_t timestamp = 0;
  std::int64_t revision = 0;  // block revision produced by this edit

  bool operator==(const ValidationEdit&) const = default;
};

void to_json(Json& j, const ValidationEdit& e);
void from_json(const Json& j, ValidationEdit& e);

// Append-only edit history, mirrored to a JSON Lines file when a path is set.
class EditLog {
 public:
  explicit EditLog(std::filesystem::path path = {});

  void load();
  // Assigns edit_id and appends.
  ValidationEdit append(ValidationEdit edit);
  std::vector<ValidationEdit> all() const;
  std::vector<ValidationEdit> for_block(const std::string& block_id) const;
  std::size_t size() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::vector<ValidationEdit> edits_;
};

struct PendingFilter {
  enum class Mode { NeedsValidation, ByType, All };
  Mode mode = Mode::All;
  BlockType type = BlockType::Other;

  // "needs_validation", "all", or a block type name ("Table").
  static PendingFilter parse(std::string_view text);
};

struct PendingPage {
  std::vector<LayoutBlock> blocks;
  std::optional<std::string> next_cursor;
};

// Applies human corrections to stored blocks. Each accepted edit bumps the
// block revision by one, recomputes text_repr, is appended to the edit log
// and triggers the re-index hook. Stale `before` snapshots are rejected with
// Error(Conflict).
class Validator {
 public:
  using ReindexHook = std::function<void(const LayoutBlock&)>;

  Validator(BlockStore& store, EditLog& log, std::shared_ptr<Clock> clock = system_clock());

  void set_reindex_hook(ReindexHook hook) { reindex_ = std::move(hook); }

  LayoutBlock apply_edit(ValidationEdit edit);

  PendingPage list_pending(const std::string& document_id, const PendingFilter& filter,
                           const std::optional<std::string>& cursor = std::nullopt, std::size_t page_size = 50) const;

 private:
  BlockStore& store_;
  EditLog& log_;
  std::shared_ptr<Clock> clock_;
  ReindexHook reindex_;
};

// Rebuilds a block's state from its complete edit sequence, starting from
// the `before` snapshot of the first edit (revision 0) or from AddBlock.
LayoutBlock replay_edits(const std::vector<ValidationEdit>& edits);

// Checks an edit's before/after pair against the rules of its kind; throws a
// schema error on violation. Does not look at stored state.
void check_edit_shape(const ValidationEdit& edit);

}  // namespace docloop

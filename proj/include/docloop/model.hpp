#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace docloop {

using Json = nlohmann::json;

// Page-space rectangle in PDF points, origin at the top-left corner of the
// page. Always satisfies x0 < x1, y0 < y1 with finite, non-negative values.
struct BoundingBox {
  int page_index = 0;
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  // Throws Error(Invalid) when the invariants do not hold.
  static BoundingBox make(int page_index, double x0, double y0, double x1, double y1);
  bool is_valid() const;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  // Intersection with [0,w]x[0,h]; nullopt when nothing with positive area remains.
  std::optional<BoundingBox> clipped(double page_width, double page_height) const;

  bool operator==(const BoundingBox&) const = default;
};

enum class BlockType { Title, Text, Table, Figure, Formula, Caption, Other };

inline constexpr BlockType kAllBlockTypes[] = {BlockType::Title,   BlockType::Text,    BlockType::Table,
                                               BlockType::Figure,  BlockType::Formula, BlockType::Caption,
                                               BlockType::Other};

const char* to_string(BlockType type);
// Strict parse of the canonical names used on disk and on the wire.
std::optional<BlockType> parse_block_type(std::string_view name);
// Lenient mapping from detector labels ("plain text", "table_caption",
// "isolate_formula", ...). Unknown labels map to Other.
BlockType block_type_from_label(std::string_view label);

// Type-specific extraction record:
//   Title/Text/Caption/Other: {"text": str}
//   Table:   {"caption"?: str, "cells": [[str]], "latex"?: str, "html"?: str}
//   Formula: {"latex": str, "description": str}
//   Figure:  {"caption"?: str, "description": str}
using Payload = Json;

// Throws a schema error when `payload` does not match the schema of `type`.
void validate_payload(BlockType type, const Payload& payload);
bool payload_matches(BlockType type, const Payload& payload);

inline constexpr std::string_view kFormulaSeparator = "\n---\n";

// Flattened embeddable text for a block. Validates the payload first.
std::string canonical_text_repr(BlockType type, const Payload& payload);

// Content-hash id over (document, page, bbox rounded to 0.1 pt, type).
std::string block_identity(std::string_view document_id, int page_index, const BoundingBox& bbox,
                           BlockType type);

struct LayoutBlock {
  std::string block_id;
  std::string document_id;
  BoundingBox bbox;
  BlockType block_type = BlockType::Other;
  Payload raw_payload = Json::object();
  std::string text_repr;
  std::int64_t revision = 0;
  bool needs_validation = false;
  bool tombstoned = false;

  int page_index() const { return bbox.page_index; }
  // Live blocks with text are the only ones admitted to the index.
  bool indexable() const { return !tombstoned && !text_repr.empty(); }

  bool operator==(const LayoutBlock&) const = default;
};

enum class ProcessingState { Uploaded, Normalized, LayoutDetected, Extracted, Indexed, Failed };

const char* to_string(ProcessingState state);
std::optional<ProcessingState> parse_processing_state(std::string_view name);
bool is_terminal(ProcessingState state);
// Forward moves along the pipeline order, or to Failed from any non-terminal state.
bool can_transition(ProcessingState from, ProcessingState to);

struct Page {
  int page_index = 0;
  double width = 612.0;
  double height = 792.0;
  std::vector<LayoutBlock> blocks;  // reading order

  bool operator==(const Page&) const = default;
};

struct Document {
  std::string document_id;
  std::string source_name;
  int page_count = 0;
  std::vector<Page> pages;
  ProcessingState processing_state = ProcessingState::Uploaded;

  void advance(ProcessingState next);
  const LayoutBlock* find_block(std::string_view block_id) const;
  LayoutBlock* find_block(std::string_view block_id);
  std::vector<const LayoutBlock*> blocks() const;
  std::size_t block_count() const;
  // Throws Error(Invalid) when a structural invariant is broken.
  void check_invariants() const;

  bool operator==(const Document&) const = default;
};

// Sorts a page's blocks by (y0, x0), ties by block_id.
void sort_reading_order(std::vector<LayoutBlock>& blocks);

void to_json(Json& j, const BoundingBox& b);
void from_json(const Json& j, BoundingBox& b);
void to_json(Json& j, BlockType t);
void from_json(const Json& j, BlockType& t);
void to_json(Json& j, ProcessingState s);
void from_json(const Json& j, ProcessingState& s);
void to_json(Json& j, const LayoutBlock& b);
void from_json(const Json& j, LayoutBlock& b);
void to_json(Json& j, const Page& p);
void from_json(const Json& j, Page& p);
void to_json(Json& j, const Document& d);
void from_json(const Json& j, Document& d);

// Canonical serialized form of a document (block store file contents).
std::string serialize_document(const Document& doc);
Document deserialize_document(std::string_view text);

}  // namespace docloop

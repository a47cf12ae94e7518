#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "docloop/model.hpp"

namespace docloop {

struct BlockRef {
  LayoutBlock block;
  std::string source_name;
};

// Documents keyed by id, optionally persisted as one JSON file per document
// under `dir` ("<document_id>.json").
class BlockStore {
 public:
  explicit BlockStore(std::filesystem::path dir = {});

  // Reads every document file under the store directory.
  void load_all();

  void put(Document doc);
  bool contains(const std::string& document_id) const;
  std::optional<Document> get(const std::string& document_id) const;
  Document require(const std::string& document_id) const;
  std::vector<std::string> document_ids() const;
  std::vector<Document> documents() const;

  std::optional<BlockRef> find_block(const std::string& block_id) const;
  BlockRef require_block(const std::string& block_id) const;

  // Runs `fn` on the stored document under the exclusive lock and persists the
  // result when `fn` returns normally. Exceptions leave the document untouched.
  void update(const std::string& document_id, const std::function<void(Document&)>& fn);

  // Exact bytes of the persisted form of a document.
  std::string serialized(const std::string& document_id) const;
  std::filesystem::path path_for(const std::string& document_id) const;

 private:
  void reindex_locked(const Document& doc);
  void persist_locked(const Document& doc) const;

  std::filesystem::path dir_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, Document> docs_;
  std::map<std::string, std::string> block_to_doc_;
};

// Writes `text` to `path` through a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_file(const std::filesystem::path& path);

}  // namespace docloop

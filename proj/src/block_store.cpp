#include "docloop/block_store.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <sstream>

#include "docloop/error.hpp"

namespace docloop {

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Internal, "cannot write " + tmp.string());
    out << text;
    if (!out) throw Error(ErrorCode::Internal, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw not_found("file " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

BlockStore::BlockStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

void BlockStore::load_all() {
  if (dir_.empty() || !std::filesystem::exists(dir_)) return;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::unique_lock lock(mutex_);
  for (const auto& f : files) {
    Document doc = deserialize_document(read_file(f));
    reindex_locked(doc);
    std::string id = doc.document_id;
    docs_[id] = std::move(doc);
  }
}

void BlockStore::put(Document doc) {
  doc.check_invariants();
  std::unique_lock lock(mutex_);
  if (auto it = docs_.find(doc.document_id); it != docs_.end()) {
    for (const auto* b : it->second.blocks()) block_to_doc_.erase(b->block_id);
  }
  reindex_locked(doc);
  persist_locked(doc);
  std::string id = doc.document_id;
  docs_[id] = std::move(doc);
}

bool BlockStore::contains(const std::string& document_id) const {
  std::shared_lock lock(mutex_);
  return docs_.contains(document_id);
}

std::optional<Document> BlockStore::get(const std::string& document_id) const {
  std::shared_lock lock(mutex_);
  auto it = docs_.find(document_id);
  if (it == docs_.end()) return std::nullopt;
  return it->second;
}

Document BlockStore::require(const std::string& document_id) const {
  auto doc = get(document_id);
  if (!doc) throw not_found("document " + document_id);
  return *doc;
}

std::vector<std::string> BlockStore::document_ids() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, doc] : docs_) out.push_back(id);
  return out;
}

std::vector<Document> BlockStore::documents() const {
  std::shared_lock lock(mutex_);
  std::vector<Document> out;
  for (const auto& [id, doc] : docs_) out.push_back(doc);
  return out;
}

std::optional<BlockRef> BlockStore::find_block(const std::string& block_id) const {
  std::shared_lock lock(mutex_);
  auto it = block_to_doc_.find(block_id);
  if (it == block_to_doc_.end()) return std::nullopt;
  const Document& doc = docs_.at(it->second);
  const LayoutBlock* block = doc.find_block(block_id);
  if (!block) return std::nullopt;
  return BlockRef{*block, doc.source_name};
}

BlockRef BlockStore::require_block(const std::string& block_id) const {
  auto ref = find_block(block_id);
  if (!ref) throw not_found("block " + block_id);
  return *ref;
}

void BlockStore::update(const std::string& document_id, const std::function<void(Document&)>& fn) {
  std::unique_lock lock(mutex_);
  auto it = docs_.find(document_id);
  if (it == docs_.end()) throw not_found("document " + document_id);
  Document working = it->second;
  fn(working);
  working.check_invariants();
  persist_locked(working);
  for (const auto* b : it->second.blocks()) block_to_doc_.erase(b->block_id);
  reindex_locked(working);
  it->second = std::move(working);
}

std::string BlockStore::serialized(const std::string& document_id) const {
  std::shared_lock lock(mutex_);
  auto it = docs_.find(document_id);
  if (it == docs_.end()) throw not_found("document " + document_id);
  return serialize_document(it->second);
}

std::filesystem::path BlockStore::path_for(const std::string& document_id) const {
  return dir_ / (document_id + ".json");
}

void BlockStore::reindex_locked(const Document& doc) {
  for (const auto* b : doc.blocks()) block_to_doc_[b->block_id] = doc.document_id;
}

void BlockStore::persist_locked(const Document& doc) const {
  if (dir_.empty()) return;
  write_file_atomic(path_for(doc.document_id), serialize_document(doc));
}

}  // namespace docloop

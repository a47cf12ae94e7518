#include "docloop/embedding_index.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <mutex>

#include "docloop/error.hpp"
#include "docloop/hash.hpp"
#include "docloop/http_json.hpp"

namespace docloop {

namespace {

double norm_of(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

void l2_normalize(Vector& v) {
  double n = norm_of(v);
  if (n == 0) return;
  for (double& x : v) x /= n;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::Invalid, "cosine of vectors with different dimensions");
  double na = norm_of(a), nb = norm_of(b);
  if (na == 0 || nb == 0) return 0.0;
  double dot = 0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

Vector ReferenceEmbedder::embed(std::string_view text) const {
  Vector v(kDimension, 0.0);
  std::string norm = " ";
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = true;
      continue;
    }
    if (pending_space && norm.size() > 1) norm.push_back(' ');
    pending_space = false;
    norm.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (norm.size() == 1) return v;
  norm.push_back(' ');
  for (std::size_t i = 0; i + 3 <= norm.size(); ++i) {
    v[fnv1a32(std::string_view(norm).substr(i, 3)) % kDimension] += 1.0;
  }
  l2_normalize(v);
  return v;
}

Vector HttpEmbedder::embed(std::string_view text) const {
  Json res = post_json(endpoint_, Json{{"text", std::string(text)}, {"model", name_}});
  if (!res.contains("vector") || !res.at("vector").is_array()) {
    throw Error(ErrorCode::AdapterUnavailable, "embedding response without vector");
  }
  Vector v = res.at("vector").get<Vector>();
  if (v.size() != dimension_) {
    throw Error(ErrorCode::AdapterUnavailable, "embedding service returned dimension " + std::to_string(v.size()));
  }
  l2_normalize(v);
  return v;
}

bool ranks_before(const ScoredBlock& a, const ScoredBlock& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.block_id < b.block_id;
}

bool SearchFilter::admits(const IndexEntry& e) const {
  if (type && e.block_type != *type) return false;
  if (documents && !documents->contains(e.document_id)) return false;
  return true;
}

VectorIndex::VectorIndex(std::shared_ptr<const Embedder> embedder) : embedder_(std::move(embedder)) {
  if (!embedder_) throw Error(ErrorCode::Invalid, "index needs an embedder");
}

void VectorIndex::upsert(const LayoutBlock& block) {
  if (block.tombstoned) throw Error(ErrorCode::Invalid, "cannot index tombstoned block " + block.block_id);
  if (block.text_repr.empty()) throw Error(ErrorCode::Invalid, "cannot index block without text " + block.block_id);
  upsert_entry(IndexEntry{block.block_id, block.document_id, block.block_type, embedder_->embed(block.text_repr),
                          block.revision});
}

void VectorIndex::upsert_entry(IndexEntry entry) {
  if (entry.vector.size() != embedder_->dimension()) {
    throw Error(ErrorCode::Invalid, "vector dimension " + std::to_string(entry.vector.size()) + " != " +
                                        std::to_string(embedder_->dimension()));
  }
  double n = norm_of(entry.vector);
  std::unique_lock lock(mutex_);
  std::string id = entry.block_id;
  entries_[id] = Stored{std::move(entry), n};
}

bool VectorIndex::remove(const std::string& block_id) {
  std::unique_lock lock(mutex_);
  return entries_.erase(block_id) > 0;
}

void VectorIndex::clear() {
  std::unique_lock lock(mutex_);
  entries_.clear();
}

std::vector<ScoredBlock> VectorIndex::search(std::span<const double> query, std::size_t k,
                                             const SearchFilter& filter) const {
  if (k == 0) throw Error(ErrorCode::Invalid, "k must be at least 1");
  if (query.size() != embedder_->dimension()) throw Error(ErrorCode::Invalid, "query dimension mismatch");
  double qn = norm_of(query);
  std::shared_lock lock(mutex_);
  std::vector<ScoredBlock> scored;
  scored.reserve(entries_.size());
  for (const auto& [id, stored] : entries_) {
    if (!filter.admits(stored.entry)) continue;
    double score = 0;
    if (qn > 0 && stored.norm > 0) {
      double dot = 0;
      const Vector& v = stored.entry.vector;
      for (std::size_t i = 0; i < v.size(); ++i) dot += query[i] * v[i];
      score = std::clamp(dot / (qn * stored.norm), -1.0, 1.0);
    }
    scored.push_back(ScoredBlock{id, score, stored.entry.block_type, stored.entry.document_id});
  }
  lock.unlock();
  std::size_t take = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), ranks_before);
  scored.resize(take);
  return scored;
}

std::vector<ScoredBlock> VectorIndex::search_text(std::string_view query, std::size_t k,
                                                  const SearchFilter& filter) const {
  Vector q = embedder_->embed(query);
  return search(q, k, filter);
}

std::size_t VectorIndex::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

std::optional<IndexEntry> VectorIndex::entry(const std::string& block_id) const {
  std::shared_lock lock(mutex_);
  auto it = entries_.find(block_id);
  if (it == entries_.end()) return std::nullopt;
  return it->second.entry;
}

std::vector<IndexEntry> VectorIndex::entries() const {
  std::shared_lock lock(mutex_);
  std::vector<IndexEntry> out;
  out.reserve(entries_.size());
  for (const auto& [id, stored] : entries_) out.push_back(stored.entry);
  return out;
}

std::set<BlockType> VectorIndex::types_present(const SearchFilter& filter) const {
  std::shared_lock lock(mutex_);
  std::set<BlockType> out;
  for (const auto& [id, stored] : entries_) {
    if (filter.admits(stored.entry)) out.insert(stored.entry.block_type);
  }
  return out;
}

Json VectorIndex::to_json() const {
  std::shared_lock lock(mutex_);
  Json entries = Json::array();
  for (const auto& [id, stored] : entries_) {
    const IndexEntry& e = stored.entry;
    entries.push_back({{"block_id", e.block_id},
                       {"document_id", e.document_id},
                       {"block_type", e.block_type},
                       {"revision", e.revision},
                       {"vector", e.vector}});
  }
  return Json{{"embedder_name", embedder_->name()}, {"dimension", embedder_->dimension()}, {"entries", entries}};
}

void VectorIndex::load_json(const Json& j) {
  std::string name = j.at("embedder_name").get<std::string>();
  if (name != embedder_->name()) {
    throw Error(ErrorCode::Invalid, "index was built with embedder '" + name + "', configured '" + embedder_->name() + "'",
                {{"kind", "embedder_mismatch"}});
  }
  if (j.at("dimension").get<std::size_t>() != embedder_->dimension()) {
    throw Error(ErrorCode::Invalid, "index dimension mismatch", {{"kind", "embedder_mismatch"}});
  }
  std::map<std::string, Stored> loaded;
  for (const auto& e : j.at("entries")) {
    IndexEntry entry{e.at("block_id").get<std::string>(), e.at("document_id").get<std::string>(),
                     e.at("block_type").get<BlockType>(), e.at("vector").get<Vector>(),
                     e.at("revision").get<std::int64_t>()};
    if (entry.vector.size() != embedder_->dimension()) throw Error(ErrorCode::Invalid, "index entry dimension mismatch");
    double n = norm_of(entry.vector);
    std::string id = entry.block_id;
    loaded[id] = Stored{std::move(entry), n};
  }
  std::unique_lock lock(mutex_);
  entries_ = std::move(loaded);
}

void VectorIndex::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::string text = to_json().dump() + "\n";
  std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Internal, "cannot write " + tmp.string());
    out << text;
  }
  std::filesystem::rename(tmp, path);
}

void VectorIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw not_found("index file " + path.string());
  try {
    load_json(Json::parse(in));
  } catch (const Json::exception& e) {
    throw format_error("malformed index file: " + std::string(e.what()));
  }
}

}  // namespace docloop

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "docloop/model.hpp"

namespace docloop {

using Vector = std::vector<double>;

// Embedders are deterministic and return unit vectors (or all zeros for
// blank input).
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::string name() const = 0;
  virtual std::size_t dimension() const = 0;
  virtual Vector embed(std::string_view text) const = 0;
};

// Hashed bag of lowercase character trigrams, 256 buckets, L2-normalized.
// Text is whitespace-collapsed and padded with one space on each side so
// that short words still produce trigrams.
class ReferenceEmbedder final : public Embedder {
 public:
  static constexpr std::size_t kDimension = 256;
  std::string name() const override { return "reference-trigram-256"; }
  std::size_t dimension() const override { return kDimension; }
  Vector embed(std::string_view text) const override;
};

// POST {"text": ...} -> {"vector": [...]} against an external embedding service.
class HttpEmbedder final : public Embedder {
 public:
  HttpEmbedder(std::string endpoint, std::string name, std::size_t dimension)
      : endpoint_(std::move(endpoint)), name_(std::move(name)), dimension_(dimension) {}
  std::string name() const override { return name_; }
  std::size_t dimension() const override { return dimension_; }
  Vector embed(std::string_view text) const override;

 private:
  std::string endpoint_;
  std::string name_;
  std::size_t dimension_;
};

double cosine(std::span<const double> a, std::span<const double> b);
void l2_normalize(Vector& v);

struct IndexEntry {
  std::string block_id;
  std::string document_id;
  BlockType block_type = BlockType::Other;
  Vector vector;
  std::int64_t revision = 0;

  bool operator==(const IndexEntry&) const = default;
};

struct ScoredBlock {
  std::string block_id;
  double score = 0;
  BlockType block_type = BlockType::Other;
  std::string document_id;

  bool operator==(const ScoredBlock&) const = default;
};

// Score descending, then block_id ascending.
bool ranks_before(const ScoredBlock& a, const ScoredBlock& b);

struct SearchFilter {
  std::optional<BlockType> type;
  std::optional<std::set<std::string>> documents;  // nullopt = whole index

  bool admits(const IndexEntry& e) const;
};

inline constexpr std::size_t kDefaultTopK = 5;

// Exact cosine top-k over every live entry. Readers share a lock; upserts
// take it exclusively, so a search always sees a consistent snapshot.
class VectorIndex {
 public:
  explicit VectorIndex(std::shared_ptr<const Embedder> embedder);

  const Embedder& embedder() const { return *embedder_; }

  // Rejects tombstoned blocks and blocks without text.
  void upsert(const LayoutBlock& block);
  // Inserts a precomputed vector; the dimension must match the embedder.
  void upsert_entry(IndexEntry entry);
  bool remove(const std::string& block_id);
  void clear();

  std::vector<ScoredBlock> search(std::span<const double> query, std::size_t k, const SearchFilter& filter = {}) const;
  std::vector<ScoredBlock> search_text(std::string_view query, std::size_t k, const SearchFilter& filter = {}) const;

  std::size_t size() const;
  std::optional<IndexEntry> entry(const std::string& block_id) const;
  std::vector<IndexEntry> entries() const;  // block_id order
  std::set<BlockType> types_present(const SearchFilter& filter = {}) const;

  Json to_json() const;
  // Throws Error(Invalid) when the stored embedder name or dimension differs.
  void load_json(const Json& j);
  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);

 private:
  struct Stored {
    IndexEntry entry;
    double norm = 0;
  };

  std::shared_ptr<const Embedder> embedder_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, Stored> entries_;
};

}  // namespace docloop

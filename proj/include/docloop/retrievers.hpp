#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "docloop/clock.hpp"
#include "docloop/embedding_index.hpp"
#include "docloop/events.hpp"
#include "docloop/llm.hpp"

namespace docloop {

inline constexpr std::size_t kIntentWindow = 50;
inline constexpr std::size_t kIntentMaxChars = 600;
inline constexpr std::string_view kIntentSeparator = "\n[user intent]\n";

struct RetrievalResult {
  std::string strategy_name;
  std::string query_as_issued;
  std::optional<std::string> augmented_query;
  std::vector<ScoredBlock> items;
  std::size_t k_requested = kDefaultTopK;
  std::optional<std::string> intention_summary;
  bool warning = false;
  std::string warning_message;

  bool operator==(const RetrievalResult&) const = default;
};

void to_json(Json& j, const ScoredBlock& s);
void from_json(const Json& j, ScoredBlock& s);
void to_json(Json& j, const RetrievalResult& r);
void from_json(const Json& j, RetrievalResult& r);

struct IntentionSummary {
  std::string session_id;
  std::string summary_text;
  std::size_t source_event_count = 0;
  std::int64_t generated_at = 0;
  bool warning = false;
  std::string warning_message;
};

void to_json(Json& j, const IntentionSummary& s);

// Looks up a short description of a block ("Table: Assay results ...") for
// transcripts. Returning nullopt leaves only the id.
using BlockDescriber = std::function<std::optional<std::string>(const std::string& block_id)>;

// Everything a strategy may read besides the index. `corpus` restricts the
// searched documents; nullopt searches every indexed document.
struct RetrievalContext {
  std::string session_id;
  std::optional<std::set<std::string>> corpus;
  std::span<const InteractionEvent> prior_events;
  BlockDescriber describe_block;
};

// Renders the most recent kIntentWindow events, one line per event.
std::string render_transcript(std::span<const InteractionEvent> events, const BlockDescriber& describe = {});

IntentionSummary summarize_intention(const std::string& session_id, std::span<const InteractionEvent> events,
                                     LlmAdapter& llm, Clock& clock, const BlockDescriber& describe = {});

std::string augment_query(const std::string& query, const std::string& summary);

RetrievalResult naive_retrieve(const VectorIndex& index, const std::string& query, std::size_t k,
                               const std::optional<std::set<std::string>>& corpus);

// Per-type top-k for every block type present in the corpus, deduplicated.
std::vector<ScoredBlock> label_naive_candidates(const VectorIndex& index, std::span<const double> query,
                                                std::size_t k, const std::optional<std::set<std::string>>& corpus);
// How per-type candidates become the final list.
std::vector<ScoredBlock> merge_candidates(std::vector<ScoredBlock> candidates, std::size_t k);

RetrievalResult label_naive_retrieve(const VectorIndex& index, const std::string& query, std::size_t k,
                                     const std::optional<std::set<std::string>>& corpus);

RetrievalResult symbiotic_retrieve(const VectorIndex& index, const std::string& query, std::size_t k,
                                   const RetrievalContext& context, LlmAdapter& llm, Clock& clock);

class RetrieverStrategy {
 public:
  virtual ~RetrieverStrategy() = default;
  virtual std::string name() const = 0;
  virtual RetrievalResult retrieve(const std::string& query, const RetrievalContext& context, std::size_t k) const = 0;
};

class NaiveRetriever final : public RetrieverStrategy {
 public:
  explicit NaiveRetriever(const VectorIndex& index) : index_(index) {}
  std::string name() const override { return "naive"; }
  RetrievalResult retrieve(const std::string& query, const RetrievalContext& context, std::size_t k) const override;

 private:
  const VectorIndex& index_;
};

class LabelNaiveRetriever final : public RetrieverStrategy {
 public:
  explicit LabelNaiveRetriever(const VectorIndex& index) : index_(index) {}
  std::string name() const override { return "label"; }
  RetrievalResult retrieve(const std::string& query, const RetrievalContext& context, std::size_t k) const override;

 private:
  const VectorIndex& index_;
};

class SymbioticRetriever final : public RetrieverStrategy {
 public:
  SymbioticRetriever(const VectorIndex& index, std::shared_ptr<LlmAdapter> llm, std::shared_ptr<Clock> clock)
      : index_(index), llm_(std::move(llm)), clock_(std::move(clock)) {}
  std::string name() const override { return "symbiotic"; }
  RetrievalResult retrieve(const std::string& query, const RetrievalContext& context, std::size_t k) const override;

 private:
  const VectorIndex& index_;
  std::shared_ptr<LlmAdapter> llm_;
  std::shared_ptr<Clock> clock_;
};

// Name -> strategy. Pre-populated with naive, label and symbiotic.
class StrategyRegistry {
 public:
  StrategyRegistry(const VectorIndex& index, std::shared_ptr<LlmAdapter> llm, std::shared_ptr<Clock> clock);

  void add(std::shared_ptr<const RetrieverStrategy> strategy);
  // Throws Error(Invalid) for unknown names.
  const RetrieverStrategy& get(const std::string& name) const;
  bool contains(const std::string& name) const { return strategies_.count(name) > 0; }
  std::vector<std::string> names() const;

 private:
  std::map<std::string, std::shared_ptr<const RetrieverStrategy>> strategies_;
};

}  // namespace docloop

#include "docloop/retrievers.hpp"

#include <algorithm>
#include <sstream>

#include "docloop/error.hpp"

namespace docloop {

namespace {

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

std::string payload_string(const Json& payload, const char* key) {
  auto it = payload.find(key);
  if (it == payload.end()) return {};
  return it->is_string() ? it->get<std::string>() : it->dump();
}

std::string block_clause(const std::string& block_id, const BlockDescriber& describe) {
  std::string out = block_id;
  if (describe) {
    if (auto d = describe(block_id)) out += " (" + one_line(*d) + ")";
  }
  return out;
}

SearchFilter corpus_filter(const std::optional<std::set<std::string>>& corpus) {
  SearchFilter f;
  f.documents = corpus;
  return f;
}

void require_k(std::size_t k) {
  if (k < 1) throw Error(ErrorCode::Invalid, "k must be at least 1");
}

}  // namespace

void to_json(Json& j, const ScoredBlock& s) {
  j = Json{{"block_id", s.block_id}, {"score", s.score}, {"block_type", s.block_type}, {"document_id", s.document_id}};
}

void from_json(const Json& j, ScoredBlock& s) {
  s.block_id = j.at("block_id").get<std::string>();
  s.score = j.at("score").get<double>();
  s.block_type = j.at("block_type").get<BlockType>();
  s.document_id = j.at("document_id").get<std::string>();
}

void to_json(Json& j, const RetrievalResult& r) {
  j = Json{{"strategy_name", r.strategy_name},
           {"query_as_issued", r.query_as_issued},
           {"augmented_query", r.augmented_query ? Json(*r.augmented_query) : Json(nullptr)},
           {"items", r.items},
           {"k_requested", r.k_requested},
           {"intention_summary", r.intention_summary ? Json(*r.intention_summary) : Json(nullptr)},
           {"warning", r.warning}};
  if (r.warning) j["warning_message"] = r.warning_message;
}

void from_json(const Json& j, RetrievalResult& r) {
  r.strategy_name = j.at("strategy_name").get<std::string>();
  r.query_as_issued = j.at("query_as_issued").get<std::string>();
  r.augmented_query.reset();
  if (j.contains("augmented_query") && !j.at("augmented_query").is_null()) {
    r.augmented_query = j.at("augmented_query").get<std::string>();
  }
  r.items = j.at("items").get<std::vector<ScoredBlock>>();
  r.k_requested = j.at("k_requested").get<std::size_t>();
  r.intention_summary.reset();
  if (j.contains("intention_summary") && !j.at("intention_summary").is_null()) {
    r.intention_summary = j.at("intention_summary").get<std::string>();
  }
  r.warning = j.value("warning", false);
  r.warning_message = j.value("warning_message", std::string());
}

void to_json(Json& j, const IntentionSummary& s) {
  j = Json{{"session_id", s.session_id},
           {"summary_text", s.summary_text},
           {"source_event_count", s.source_event_count},
           {"generated_at", s.generated_at},
           {"warning", s.warning}};
  if (s.warning) j["warning_message"] = s.warning_message;
}

std::string render_transcript(std::span<const InteractionEvent> events, const BlockDescriber& describe) {
  std::size_t start = events.size() > kIntentWindow ? events.size() - kIntentWindow : 0;
  std::ostringstream os;
  for (std::size_t i = start; i < events.size(); ++i) {
    const auto& e = events[i];
    os << to_string(e.kind) << ": ";
    switch (e.kind) {
      case EventKind::SendQuery:
        os << one_line(payload_string(e.payload, "query"));
        break;
      case EventKind::ClickResult:
        os << block_clause(payload_string(e.payload, "block_id"), describe);
        if (e.payload.contains("rank")) os << " at rank " << e.payload.at("rank").dump();
        break;
      case EventKind::SelectBlock:
      case EventKind::DeselectBlock:
        os << block_clause(payload_string(e.payload, "block_id"), describe);
        break;
      case EventKind::NavigatePage: {
        os << payload_string(e.payload, "document_id");
        auto page = e.payload.find("page_index");
        if (page != e.payload.end() && page->is_number_integer()) os << " p." << page->get<int>() + 1;
        break;
      }
      case EventKind::AddDocument:
        os << payload_string(e.payload, "document_id");
        break;
      case EventKind::Like:
      case EventKind::Dislike:
      case EventKind::Regenerate:
        os << payload_string(e.payload, "message_id");
        break;
    }
    os << '\n';
  }
  return os.str();
}

IntentionSummary summarize_intention(const std::string& session_id, std::span<const InteractionEvent> events,
                                     LlmAdapter& llm, Clock& clock, const BlockDescriber& describe) {
  IntentionSummary out;
  out.session_id = session_id;
  out.generated_at = clock.now_ms();
  if (events.empty()) return out;

  LlmRequest req;
  req.purpose = LlmPurpose::IntentionSummary;
  req.max_chars = kIntentMaxChars;
  req.prompt =
      "Summarize in one or two sentences what this user is looking for, judging from their recent actions.\n\n" +
      render_transcript(events, describe);
  try {
    out.summary_text = truncate_utf8(llm.complete(req).text, kIntentMaxChars);
  } catch (const std::exception& e) {
    out.warning = true;
    out.warning_message = std::string("intention summary unavailable: ") + e.what();
    return out;
  }
  if (out.summary_text.empty()) {
    out.warning = true;
    out.warning_message = "intention summary unavailable: empty response";
    return out;
  }
  out.source_event_count = std::min(events.size(), kIntentWindow);
  return out;
}

std::string augment_query(const std::string& query, const std::string& summary) {
  if (summary.empty()) return query;
  return query + std::string(kIntentSeparator) + summary;
}

RetrievalResult naive_retrieve(const VectorIndex& index, const std::string& query, std::size_t k,
                               const std::optional<std::set<std::string>>& corpus) {
  require_k(k);
  RetrievalResult r;
  r.strategy_name = "naive";
  r.query_as_issued = query;
  r.k_requested = k;
  r.items = index.search_text(query, k, corpus_filter(corpus));
  return r;
}

std::vector<ScoredBlock> label_naive_candidates(const VectorIndex& index, std::span<const double> query,
                                                std::size_t k, const std::optional<std::set<std::string>>& corpus) {
  SearchFilter filter = corpus_filter(corpus);
  std::vector<ScoredBlock> out;
  std::set<std::string> seen;
  for (BlockType type : index.types_present(filter)) {
    SearchFilter typed = filter;
    typed.type = type;
    for (auto& s : index.search(query, k, typed)) {
      if (seen.insert(s.block_id).second) out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<ScoredBlock> merge_candidates(std::vector<ScoredBlock> candidates, std::size_t k) {
  std::sort(candidates.begin(), candidates.end(), ranks_before);
  if (candidates.size() > k) candidates.resize(k);
  return candidates;
}

RetrievalResult label_naive_retrieve(const VectorIndex& index, const std::string& query, std::size_t k,
                                     const std::optional<std::set<std::string>>& corpus) {
  require_k(k);
  RetrievalResult r;
  r.strategy_name = "label";
  r.query_as_issued = query;
  r.k_requested = k;
  Vector q = index.embedder().embed(query);
  r.items = merge_candidates(label_naive_candidates(index, q, k, corpus), k);
  return r;
}

RetrievalResult symbiotic_retrieve(const VectorIndex& index, const std::string& query, std::size_t k,
                                   const RetrievalContext& context, LlmAdapter& llm, Clock& clock) {
  require_k(k);
  IntentionSummary summary =
      summarize_intention(context.session_id, context.prior_events, llm, clock, context.describe_block);
  RetrievalResult r;
  r.strategy_name = "symbiotic";
  r.query_as_issued = query;
  r.k_requested = k;
  r.augmented_query = augment_query(query, summary.summary_text);
  r.intention_summary = summary.summary_text;
  r.warning = summary.warning;
  r.warning_message = summary.warning_message;
  r.items = index.search_text(*r.augmented_query, k, corpus_filter(context.corpus));
  return r;
}

RetrievalResult NaiveRetriever::retrieve(const std::string& query, const RetrievalContext& context,
                                         std::size_t k) const {
  return naive_retrieve(index_, query, k, context.corpus);
}

RetrievalResult LabelNaiveRetriever::retrieve(const std::string& query, const RetrievalContext& context,
                                              std::size_t k) const {
  return label_naive_retrieve(index_, query, k, context.corpus);
}

RetrievalResult SymbioticRetriever::retrieve(const std::string& query, const RetrievalContext& context,
                                             std::size_t k) const {
  return symbiotic_retrieve(index_, query, k, context, *llm_, *clock_);
}

StrategyRegistry::StrategyRegistry(const VectorIndex& index, std::shared_ptr<LlmAdapter> llm,
                                   std::shared_ptr<Clock> clock) {
  add(std::make_shared<NaiveRetriever>(index));
  add(std::make_shared<LabelNaiveRetriever>(index));
  add(std::make_shared<SymbioticRetriever>(index, std::move(llm), std::move(clock)));
}

void StrategyRegistry::add(std::shared_ptr<const RetrieverStrategy> strategy) {
  auto name = strategy->name();
  strategies_[name] = std::move(strategy);
}

const RetrieverStrategy& StrategyRegistry::get(const std::string& name) const {
  auto it = strategies_.find(name);
  if (it == strategies_.end()) {
    throw Error(ErrorCode::Invalid, "unknown strategy '" + name + "'", Json{{"kind", "unknown_strategy"}});
  }
  return *it->second;
}

std::vector<std::string> StrategyRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : strategies_) out.push_back(name);
  return out;
}

}  // namespace docloop

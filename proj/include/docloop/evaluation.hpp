#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "docloop/block_store.hpp"
#include "docloop/embedding_index.hpp"
#include "docloop/error.hpp"
#include "docloop/llm.hpp"
#include "docloop/session.hpp"

namespace docloop {

// 1 - |H n R| / |H u R|, and 0 when both sets are empty.
double distance(const std::set<std::string>& h, const std::set<std::string>& r);

struct ConversationOutcome {
  std::string session_id;
  std::string strategy_name;
  std::string scenario;
  std::string script_name;
  std::set<std::string> h;  // final staging set
  std::set<std::string> r;  // union of retrieved blocks over all turns
  std::optional<int> satisfaction;
  std::size_t k = kDefaultTopK;

  double d() const { return distance(h, r); }
};

void to_json(Json& j, const ConversationOutcome& o);

ConversationOutcome outcome_from_session(const ChatSession& session, std::size_t k);

// Throws Error(Invalid, kind "undefined_value") when nothing is rated.
double mean_satisfaction(std::span<const ConversationOutcome> outcomes);
double mean_satisfaction(std::span<const int> ratings);

// One scripted step, executed after the reply to queries[turn].
//   select / deselect       {block_id} or {rank}
//   select_all_retrieved    every block returned in this turn
//   click                   {block_id} or {rank}
//   navigate                {document_id, page_index}
//   add_document            {document_id}
//   like / dislike / regenerate   the turn's assistant message
struct ScriptAction {
  std::size_t turn = 0;
  std::string op;
  Json args = Json::object();
  std::size_t line = 0;
};

struct SessionScript {
  std::string name;
  std::string scenario = "default";
  std::optional<std::string> strategy;  // restricts the script to one strategy
  std::optional<std::vector<std::string>> documents;  // ids or source names; default all indexed
  std::vector<std::string> queries;
  std::vector<ScriptAction> actions;
  std::optional<int> rating;
};

// Error(Invalid, kind "script") whose detail carries {script, line}.
Error script_error(const std::string& script, std::size_t line, const std::string& message);

// 1-based line of byte offset `pos`.
std::size_t line_of(std::string_view text, std::size_t pos);

SessionScript parse_script(std::string_view text, const std::string& name);
std::vector<SessionScript> load_scripts(const std::filesystem::path& dir);

// Resolves script references against the store; unknown blocks or
// documents raise a script error pointing at the offending line.
void check_script(const SessionScript& script, const BlockStore& store);

struct ExperimentRow {
  std::string strategy;
  std::string scenario;
  std::size_t sessions = 0;
  double mean_distance = 0;
  std::optional<double> mean_satisfaction;
  std::size_t rated_sessions = 0;
};

struct ExperimentResult {
  std::size_t k = kDefaultTopK;
  std::vector<ExperimentRow> rows;
  std::vector<ConversationOutcome> outcomes;

  Json to_json() const;
  std::string render_table() const;
};

// Aggregates outcomes into (strategy, scenario) rows; strategies keep the
// order given, scenarios are sorted.
std::vector<ExperimentRow> aggregate(std::span<const ConversationOutcome> outcomes,
                                     const std::vector<std::string>& strategies);

struct ExperimentOptions {
  std::size_t k = kDefaultTopK;
  std::function<std::shared_ptr<LlmAdapter>()> make_llm;  // default: MockLlm
  bool parallel = true;
};

// Replays every script under every requested strategy (or only its own, when
// it names one), each in a fresh session with a stepping clock.
ExperimentResult run_experiment(BlockStore& store, const VectorIndex& index, const std::vector<SessionScript>& scripts,
                                const std::vector<std::string>& strategies, const ExperimentOptions& options = {});

}  // namespace docloop

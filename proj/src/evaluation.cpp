#include "docloop/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "docloop/error.hpp"
#include "parallel.hpp"

namespace docloop {

namespace {

const std::set<std::string> kOps = {"select",   "deselect",     "select_all_retrieved", "click", "navigate",
                                    "add_document", "like", "dislike", "regenerate"};

std::size_t skip_ws(std::string_view text, std::size_t i) {
  while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  return i;
}

// Byte offset of the value of top-level `key`, or npos.
std::size_t top_level_value(std::string_view text, std::string_view key) {
  int depth = 0;
  bool in_str = false;
  std::size_t str_start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (in_str) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_str = false;
        if (depth == 1 && text.substr(str_start + 1, i - str_start - 1) == key) {
          std::size_t j = skip_ws(text, i + 1);
          if (j < text.size() && text[j] == ':') return skip_ws(text, j + 1);
        }
      }
      continue;
    }
    if (c == '"') {
      in_str = true;
      str_start = i;
    } else if (c == '{' || c == '[') {
      ++depth;
    } else if (c == '}' || c == ']') {
      --depth;
    }
  }
  return std::string_view::npos;
}

// Offsets of the elements of the array starting at `open`.
std::vector<std::size_t> array_elements(std::string_view text, std::size_t open) {
  std::vector<std::size_t> out;
  if (open >= text.size() || text[open] != '[') return out;
  int depth = 0;
  bool in_str = false;
  bool expect = true;
  for (std::size_t i = open + 1; i < text.size(); ++i) {
    char c = text[i];
    if (in_str) {
      if (c == '\\') ++i;
      else if (c == '"') in_str = false;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    if (depth == 0 && c == ']') break;
    if (depth == 0 && c == ',') {
      expect = true;
      continue;
    }
    if (depth == 0 && expect) {
      out.push_back(i);
      expect = false;
    }
    if (c == '"') in_str = true;
    else if (c == '{' || c == '[') ++depth;
    else if (c == '}' || c == ']') --depth;
  }
  return out;
}

std::optional<std::string> resolve_document(const BlockStore& store, const std::string& ref) {
  if (store.contains(ref)) return ref;
  std::optional<std::string> found;
  for (const auto& doc : store.documents()) {
    if (doc.source_name == ref) {
      if (found) return std::nullopt;
      found = doc.document_id;
    }
  }
  return found;
}

std::string fmt(double v, int decimals) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

struct RunSpec {
  const SessionScript* script;
  std::string strategy;
};

ConversationOutcome run_one(BlockStore& store, const VectorIndex& index, const RunSpec& spec,
                            const ExperimentOptions& options) {
  const SessionScript& script = *spec.script;
  auto clock = std::make_shared<SteppingClock>();
  EventLog log({}, clock);
  std::shared_ptr<LlmAdapter> llm = options.make_llm ? options.make_llm() : std::make_shared<MockLlm>();
  SessionOptions so;
  so.k = options.k;
  SessionManager sessions(store, index, log, llm, clock, so);

  std::optional<std::set<std::string>> corpus;
  if (script.documents) {
    corpus.emplace();
    for (const auto& ref : *script.documents) {
      auto id = resolve_document(store, ref);
      if (!id) throw script_error(script.name, 1, "unknown document " + ref);
      corpus->insert(*id);
    }
  }
  ChatSession session = sessions.create_session("script:" + script.name, spec.strategy, corpus);
  const std::string& sid = session.session_id;

  for (std::size_t turn = 0; turn < script.queries.size(); ++turn) {
    auto [retrieval, reply] = sessions.post_query(sid, script.queries[turn]);
    const auto& items = retrieval.retrieval->items;
    for (const auto& a : script.actions) {
      if (a.turn != turn) continue;
      auto block_arg = [&]() -> std::string {
        if (a.args.contains("block_id")) return a.args.at("block_id").get<std::string>();
        auto rank = a.args.at("rank").get<std::size_t>();
        if (rank < 1 || rank > items.size()) {
          throw script_error(script.name, a.line,
                             "rank " + std::to_string(rank) + " beyond the " + std::to_string(items.size()) +
                                 " retrieved blocks");
        }
        return items[rank - 1].block_id;
      };
      try {
        if (a.op == "select" || a.op == "deselect") {
          sessions.toggle_block(sid, block_arg(), a.op == "select");
        } else if (a.op == "select_all_retrieved") {
          for (const auto& item : items) sessions.toggle_block(sid, item.block_id, true);
        } else if (a.op == "click") {
          sessions.click_result(sid, retrieval.message_id, block_arg());
        } else if (a.op == "navigate") {
          auto doc = resolve_document(store, a.args.at("document_id").get<std::string>());
          sessions.navigate_page(sid, doc.value_or(""), a.args.value("page_index", 0));
        } else if (a.op == "add_document") {
          auto doc = resolve_document(store, a.args.at("document_id").get<std::string>());
          sessions.add_document(sid, doc.value_or(""));
        } else if (a.op == "like" || a.op == "dislike") {
          sessions.rate(sid, reply.message_id, a.op == "like");
        } else if (a.op == "regenerate") {
          sessions.regenerate(sid, reply.message_id);
        }
      } catch (const Error& e) {
        if (e.detail().value("kind", "") == "script") throw;
        throw script_error(script.name, a.line, e.what());
      }
    }
  }
  if (script.rating) sessions.set_satisfaction(sid, *script.rating);

  ConversationOutcome o = outcome_from_session(sessions.get(sid), options.k);
  o.session_id = script.name + "@" + spec.strategy;
  o.scenario = script.scenario;
  o.script_name = script.name;
  return o;
}

}  // namespace

double distance(const std::set<std::string>& h, const std::set<std::string>& r) {
  std::size_t inter = 0;
  for (const auto& x : h) inter += r.count(x);
  std::size_t uni = h.size() + r.size() - inter;
  if (uni == 0) return 0.0;
  return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

void to_json(Json& j, const ConversationOutcome& o) {
  j = Json{{"session_id", o.session_id},
           {"strategy_name", o.strategy_name},
           {"scenario", o.scenario},
           {"script", o.script_name},
           {"H", o.h},
           {"R", o.r},
           {"D", o.d()},
           {"satisfaction_rating", o.satisfaction ? Json(*o.satisfaction) : Json(nullptr)},
           {"k", o.k}};
}

ConversationOutcome outcome_from_session(const ChatSession& session, std::size_t k) {
  ConversationOutcome o;
  o.session_id = session.session_id;
  o.strategy_name = session.strategy_name;
  o.h.insert(session.staging.begin(), session.staging.end());
  for (const auto& m : session.messages) {
    if (m.role != MessageRole::Retrieval || !m.retrieval) continue;
    for (const auto& item : m.retrieval->items) o.r.insert(item.block_id);
  }
  o.satisfaction = session.satisfaction;
  o.k = k;
  return o;
}

double mean_satisfaction(std::span<const int> ratings) {
  if (ratings.empty()) {
    throw Error(ErrorCode::Invalid, "mean satisfaction is undefined without ratings", {{"kind", "undefined_value"}});
  }
  for (int r : ratings) {
    if (r < 1 || r > 5) throw schema_error("satisfaction rating must be between 1 and 5");
  }
  return std::accumulate(ratings.begin(), ratings.end(), 0.0) / static_cast<double>(ratings.size());
}

double mean_satisfaction(std::span<const ConversationOutcome> outcomes) {
  std::vector<int> ratings;
  for (const auto& o : outcomes) {
    if (o.satisfaction) ratings.push_back(*o.satisfaction);
  }
  return mean_satisfaction(std::span<const int>(ratings));
}

Error script_error(const std::string& script, std::size_t line, const std::string& message) {
  return Error(ErrorCode::Invalid, script + ":" + std::to_string(line) + ": " + message,
               {{"kind", "script"}, {"script", script}, {"line", line}});
}

std::size_t line_of(std::string_view text, std::size_t pos) {
  pos = std::min(pos, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

SessionScript parse_script(std::string_view text, const std::string& name) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw script_error(name, line_of(text, e.byte > 0 ? e.byte - 1 : 0), "malformed JSON");
  }
  auto line_for = [&](std::string_view key) {
    auto pos = top_level_value(text, key);
    return pos == std::string_view::npos ? std::size_t{1} : line_of(text, pos);
  };
  if (!j.is_object()) throw script_error(name, 1, "script must be a JSON object");

  SessionScript s;
  s.name = j.value("name", name);
  try {
    s.scenario = j.value("scenario", std::string("default"));
    if (j.contains("strategy") && !j.at("strategy").is_null()) s.strategy = j.at("strategy").get<std::string>();
    if (j.contains("documents")) s.documents = j.at("documents").get<std::vector<std::string>>();
  } catch (const Json::exception& e) {
    throw script_error(name, 1, e.what());
  }

  if (!j.contains("queries") || !j.at("queries").is_array() || j.at("queries").empty()) {
    throw script_error(name, line_for("queries"), "queries must be a non-empty array of strings");
  }
  for (const auto& q : j.at("queries")) {
    if (!q.is_string()) throw script_error(name, line_for("queries"), "queries must be strings");
    s.queries.push_back(q.get<std::string>());
  }

  if (j.contains("rating") && !j.at("rating").is_null()) {
    const auto& r = j.at("rating");
    if (!r.is_number_integer() || r.get<int>() < 1 || r.get<int>() > 5) {
      throw script_error(name, line_for("rating"), "rating must be an integer from 1 to 5");
    }
    s.rating = r.get<int>();
  }

  if (j.contains("actions")) {
    if (!j.at("actions").is_array()) throw script_error(name, line_for("actions"), "actions must be an array");
    auto offsets = array_elements(text, top_level_value(text, "actions"));
    const auto& actions = j.at("actions");
    for (std::size_t i = 0; i < actions.size(); ++i) {
      ScriptAction a;
      a.line = i < offsets.size() ? line_of(text, offsets[i]) : 1;
      const auto& aj = actions[i];
      if (!aj.is_object() || !aj.contains("op") || !aj.at("op").is_string()) {
        throw script_error(name, a.line, "action needs an op");
      }
      a.op = aj.at("op").get<std::string>();
      if (!kOps.count(a.op)) throw script_error(name, a.line, "unknown op '" + a.op + "'");
      if (!aj.contains("turn") || !aj.at("turn").is_number_unsigned()) {
        throw script_error(name, a.line, "action needs a non-negative integer turn");
      }
      a.turn = aj.at("turn").get<std::size_t>();
      if (a.turn >= s.queries.size()) {
        throw script_error(name, a.line, "turn " + std::to_string(a.turn) + " has no query");
      }
      a.args = aj;
      a.args.erase("op");
      a.args.erase("turn");
      bool needs_block = a.op == "select" || a.op == "deselect" || a.op == "click";
      if (needs_block) {
        bool by_id = a.args.contains("block_id") && a.args.at("block_id").is_string();
        bool by_rank = a.args.contains("rank") && a.args.at("rank").is_number_unsigned();
        if (by_id == by_rank) throw script_error(name, a.line, a.op + " needs exactly one of block_id or rank");
      }
      if ((a.op == "navigate" || a.op == "add_document") &&
          !(a.args.contains("document_id") && a.args.at("document_id").is_string())) {
        throw script_error(name, a.line, a.op + " needs a document_id");
      }
      s.actions.push_back(std::move(a));
    }
  }
  return s;
}

std::vector<SessionScript> load_scripts(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& f : std::filesystem::directory_iterator(dir)) {
    if (f.path().extension() == ".json") files.push_back(f.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<SessionScript> out;
  for (const auto& f : files) out.push_back(parse_script(read_file(f), f.filename().string()));
  return out;
}

void check_script(const SessionScript& script, const BlockStore& store) {
  if (script.documents) {
    for (const auto& ref : *script.documents) {
      if (!resolve_document(store, ref)) throw script_error(script.name, 1, "unknown document " + ref);
    }
  }
  for (const auto& a : script.actions) {
    if (a.args.contains("block_id")) {
      auto id = a.args.at("block_id").get<std::string>();
      if (!store.find_block(id)) throw script_error(script.name, a.line, "unknown block " + id);
    }
    if (a.args.contains("document_id")) {
      auto ref = a.args.at("document_id").get<std::string>();
      if (!resolve_document(store, ref)) throw script_error(script.name, a.line, "unknown document " + ref);
    }
  }
}

std::vector<ExperimentRow> aggregate(std::span<const ConversationOutcome> outcomes,
                                     const std::vector<std::string>& strategies) {
  std::set<std::string> scenarios;
  for (const auto& o : outcomes) scenarios.insert(o.scenario);
  std::vector<ExperimentRow> rows;
  for (const auto& strategy : strategies) {
    for (const auto& scenario : scenarios) {
      ExperimentRow row;
      row.strategy = strategy;
      row.scenario = scenario;
      double total = 0;
      std::vector<int> ratings;
      for (const auto& o : outcomes) {
        if (o.strategy_name != strategy || o.scenario != scenario) continue;
        ++row.sessions;
        total += o.d();
        if (o.satisfaction) ratings.push_back(*o.satisfaction);
      }
      if (row.sessions == 0) continue;
      row.mean_distance = total / static_cast<double>(row.sessions);
      row.rated_sessions = ratings.size();
      if (!ratings.empty()) row.mean_satisfaction = mean_satisfaction(std::span<const int>(ratings));
      rows.push_back(row);
    }
  }
  return rows;
}

Json ExperimentResult::to_json() const {
  Json rows_j = Json::array();
  for (const auto& r : rows) {
    rows_j.push_back({{"strategy", r.strategy},
                      {"scenario", r.scenario},
                      {"sessions", r.sessions},
                      {"mean_distance", r.mean_distance},
                      {"mean_satisfaction", r.mean_satisfaction ? Json(*r.mean_satisfaction) : Json(nullptr)},
                      {"rated_sessions", r.rated_sessions}});
  }
  return Json{{"k", k}, {"rows", rows_j}, {"outcomes", outcomes}};
}

std::string ExperimentResult::render_table() const {
  std::vector<std::string> strategies;
  std::set<std::string> scenario_set;
  std::map<std::pair<std::string, std::string>, const ExperimentRow*> cell;
  for (const auto& r : rows) {
    if (std::find(strategies.begin(), strategies.end(), r.strategy) == strategies.end()) {
      strategies.push_back(r.strategy);
    }
    scenario_set.insert(r.scenario);
    cell[{r.strategy, r.scenario}] = &r;
  }
  std::vector<std::string> scenarios(scenario_set.begin(), scenario_set.end());

  std::vector<std::vector<std::string>> grid;
  grid.push_back({"Strategy", "Metric"});
  for (const auto& s : scenarios) grid.back().push_back(s);
  for (const auto& strategy : strategies) {
    std::vector<std::string> d_row{strategy, "D (lower is better)"};
    std::vector<std::string> s_row{"", "S (higher is better)"};
    for (const auto& sc : scenarios) {
      auto it = cell.find({strategy, sc});
      if (it == cell.end()) {
        d_row.push_back("-");
        s_row.push_back("-");
        continue;
      }
      d_row.push_back(fmt(it->second->mean_distance, 3));
      s_row.push_back(it->second->mean_satisfaction ? fmt(*it->second->mean_satisfaction, 2) : "n/a");
    }
    grid.push_back(std::move(d_row));
    grid.push_back(std::move(s_row));
  }

  std::vector<std::size_t> width(grid.front().size(), 0);
  for (const auto& row : grid) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream os;
  auto emit = [&](const std::vector<std::string>& row) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      std::string cellv = row[c];
      if (c + 1 < row.size()) cellv.resize(width[c] + 2, ' ');
      line += cellv;
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    os << line << '\n';
  };
  emit(grid.front());
  std::size_t total = 0;
  for (std::size_t c = 0; c < width.size(); ++c) total += width[c] + (c + 1 < width.size() ? 2 : 0);
  os << std::string(total, '-') << '\n';
  for (std::size_t i = 1; i < grid.size(); ++i) emit(grid[i]);
  os << "k = " << k << "\n";
  return os.str();
}

ExperimentResult run_experiment(BlockStore& store, const VectorIndex& index, const std::vector<SessionScript>& scripts,
                                const std::vector<std::string>& strategies, const ExperimentOptions& options) {
  for (const auto& s : scripts) check_script(s, store);

  std::vector<RunSpec> runs;
  for (const auto& strategy : strategies) {
    for (const auto& s : scripts) {
      if (!s.strategy || *s.strategy == strategy) runs.push_back({&s, strategy});
    }
  }

  ExperimentResult result;
  result.k = options.k;
  result.outcomes.resize(runs.size());
  auto body = [&](std::size_t i) { result.outcomes[i] = run_one(store, index, runs[i], options); };
  if (options.parallel) {
    for (auto& err : detail::parallel_for(runs.size(), body)) {
      if (err) std::rethrow_exception(err);
    }
  } else {
    for (std::size_t i = 0; i < runs.size(); ++i) body(i);
  }
  result.rows = aggregate(result.outcomes, strategies);
  return result;
}

}  // namespace docloop

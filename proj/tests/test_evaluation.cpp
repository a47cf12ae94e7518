#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "docloop/error.hpp"
#include "docloop/evaluation.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace docloop;

namespace {

std::set<std::string> ids(std::initializer_list<const char*> xs) { return {xs.begin(), xs.end()}; }

std::size_t error_line(const Error& e) { return e.detail().value("line", std::size_t{0}); }

template <typename Fn>
Error capture(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "expected an Error";
  return Error(ErrorCode::Internal, "none");
}

class EvalTest : public ::testing::Test {
 protected:
  void SetUp() override { engine = testsupport::corpus_engine(dir.path()); }

  ExperimentResult run(const std::vector<SessionScript>& scripts, const std::vector<std::string>& strategies) {
    ExperimentOptions opts;
    opts.k = 5;
    return run_experiment(engine->store(), engine->index(), scripts, strategies, opts);
  }

  testsupport::TempDir dir;
  std::unique_ptr<Engine> engine;
};

SessionScript script(const std::string& name, std::vector<std::string> queries, const std::string& scenario = "default") {
  SessionScript s;
  s.name = name;
  s.scenario = scenario;
  s.queries = std::move(queries);
  return s;
}

ScriptAction action(std::size_t turn, const std::string& op, Json args = Json::object()) {
  ScriptAction a;
  a.turn = turn;
  a.op = op;
  a.args = std::move(args);
  return a;
}

}  // namespace

TEST(Distance, WorkedExamples) {
  EXPECT_DOUBLE_EQ(distance(ids({"a", "b"}), ids({"a", "b"})), 0.0);
  EXPECT_DOUBLE_EQ(distance(ids({"a"}), ids({"b"})), 1.0);
  EXPECT_NEAR(distance(ids({"a", "b", "c"}), ids({"a", "b", "d", "e"})), 0.6, 1e-12);
  EXPECT_DOUBLE_EQ(distance({}, {}), 0.0);
  EXPECT_DOUBLE_EQ(distance(ids({"a"}), {}), 1.0);
}

TEST(Distance, PropertiesAgainstSetOracle) {
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> size(0, 8), elem(0, 11);
  for (int t = 0; t < 2000; ++t) {
    std::set<std::string> h, r;
    for (int i = size(rng); i > 0; --i) h.insert("b" + std::to_string(elem(rng)));
    for (int i = size(rng); i > 0; --i) r.insert("b" + std::to_string(elem(rng)));
    double d = distance(h, r);
    EXPECT_NEAR(d, oracle::jaccard_distance(h, r), 1e-12);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 1.0);
    EXPECT_DOUBLE_EQ(d, distance(r, h));
    EXPECT_DOUBLE_EQ(distance(h, h), 0.0);
    bool disjoint = std::none_of(h.begin(), h.end(), [&](const auto& x) { return r.count(x) > 0; });
    if (disjoint && !(h.empty() && r.empty())) EXPECT_DOUBLE_EQ(d, 1.0);
  }
}

TEST(MeanSatisfaction, ExamplesAndUndefined) {
  std::vector<int> a{4, 4, 4}, b{1, 5}, c{2, 3, 2, 1, 3};
  EXPECT_DOUBLE_EQ(mean_satisfaction(std::span<const int>(a)), 4.0);
  EXPECT_DOUBLE_EQ(mean_satisfaction(std::span<const int>(b)), 3.0);
  EXPECT_NEAR(mean_satisfaction(std::span<const int>(c)), 2.2, 1e-12);
  Error e = capture([] { mean_satisfaction(std::span<const int>()); });
  EXPECT_EQ(e.code(), ErrorCode::Invalid);
  EXPECT_EQ(e.detail().value("kind", ""), "undefined_value");

  std::vector<ConversationOutcome> outcomes(3);
  outcomes[0].satisfaction = 5;
  outcomes[2].satisfaction = 2;
  EXPECT_DOUBLE_EQ(mean_satisfaction(std::span<const ConversationOutcome>(outcomes)), 3.5);
}

TEST(ParseScript, AcceptsFixtureScripts) {
  auto scripts = load_scripts(testsupport::fixture_dir() / "scripts");
  ASSERT_EQ(scripts.size(), 3u);
  EXPECT_EQ(scripts[0].name, "copy_retrieval");
  EXPECT_EQ(scripts[2].name, "select_nothing");
  for (const auto& s : scripts) EXPECT_EQ(s.queries.size(), 3u);
  EXPECT_EQ(scripts[1].documents->size(), 2u);
  EXPECT_EQ(scripts[1].rating, 4);
}

TEST(ParseScript, ErrorsCarryLineNumbers) {
  const std::string bad_op =
      "{\n"
      "  \"queries\": [\"q\"],\n"
      "  \"actions\": [\n"
      "    {\"turn\": 0, \"op\": \"select\", \"rank\": 1},\n"
      "    {\"turn\": 0, \"op\": \"teleport\"}\n"
      "  ]\n"
      "}\n";
  Error e = capture([&] { parse_script(bad_op, "bad.json"); });
  EXPECT_EQ(e.detail().value("kind", ""), "script");
  EXPECT_EQ(error_line(e), 5u);
  EXPECT_EQ(e.detail().value("script", ""), "bad.json");

  const std::string bad_turn = "{\"queries\": [\"q\"],\n\"actions\": [\n{\"turn\": 3, \"op\": \"like\"}]}";
  EXPECT_EQ(error_line(capture([&] { parse_script(bad_turn, "t"); })), 3u);

  const std::string both = "{\"queries\": [\"q\"], \"actions\": [{\"turn\": 0, \"op\": \"click\", \"rank\": 1, \"block_id\": \"b\"}]}";
  EXPECT_EQ(error_line(capture([&] { parse_script(both, "t"); })), 1u);

  const std::string no_doc = "{\"queries\": [\"q\"], \"actions\": [{\"turn\": 0, \"op\": \"navigate\"}]}";
  capture([&] { parse_script(no_doc, "t"); });

  const std::string bad_rating = "{\n\"queries\": [\"q\"],\n\"rating\": 6\n}";
  EXPECT_EQ(error_line(capture([&] { parse_script(bad_rating, "t"); })), 3u);

  const std::string empty_queries = "{\n\n\"queries\": []}";
  EXPECT_EQ(error_line(capture([&] { parse_script(empty_queries, "t"); })), 3u);

  const std::string malformed = "{\n\"queries\": [\"q\"\n,,]}";
  EXPECT_EQ(error_line(capture([&] { parse_script(malformed, "t"); })), 3u);
}

TEST_F(EvalTest, CheckScriptReportsUnknownReferences) {
  const std::string text =
      "{\n"
      "  \"queries\": [\"q\"],\n"
      "  \"actions\": [\n"
      "    {\"turn\": 0, \"op\": \"navigate\", \"document_id\": \"site_log.txt\"},\n"
      "    {\"turn\": 0, \"op\": \"select\", \"block_id\": \"bdeadbeef\"}\n"
      "  ]\n"
      "}\n";
  SessionScript s = parse_script(text, "refs.json");
  Error e = capture([&] { check_script(s, engine->store()); });
  EXPECT_EQ(e.detail().value("kind", ""), "script");
  EXPECT_EQ(error_line(e), 5u);
  EXPECT_NE(std::string(e.what()).find("bdeadbeef"), std::string::npos);

  s.actions.pop_back();
  EXPECT_NO_THROW(check_script(s, engine->store()));
  s.documents = std::vector<std::string>{"missing.pdf"};
  EXPECT_THROW(check_script(s, engine->store()), Error);
}

TEST_F(EvalTest, CopyingEveryRetrievalGivesZeroDistance) {
  SessionScript s = script("copy", {"zinc grades", "flotation recovery", "camp logistics"});
  for (std::size_t t = 0; t < 3; ++t) s.actions.push_back(action(t, "select_all_retrieved"));
  auto result = run({s}, {"naive", "label", "symbiotic"});
  ASSERT_EQ(result.outcomes.size(), 3u);
  for (const auto& o : result.outcomes) {
    EXPECT_FALSE(o.r.empty());
    EXPECT_EQ(o.h, o.r);
    EXPECT_EQ(o.d(), 0.0);
  }
}

TEST_F(EvalTest, SelectingNothingGivesDistanceOne) {
  SessionScript s = script("none", {"zinc grades", "water supply"});
  s.rating = 3;
  auto result = run({s}, {"naive", "symbiotic"});
  for (const auto& o : result.outcomes) {
    EXPECT_TRUE(o.h.empty());
    EXPECT_EQ(o.d(), 1.0);
    EXPECT_EQ(o.satisfaction, 3);
  }
}

TEST_F(EvalTest, AggregatesMatchRecomputationFromOutcomes) {
  std::vector<SessionScript> scripts;
  const std::vector<std::string> pool = {"zinc grades", "silver assays", "camp logistics", "drill core recovery",
                                         "fault contact", "helicopter support", "soil samples"};
  std::mt19937 rng(3);
  for (int i = 0; i < 5; ++i) {
    SessionScript s = script("s" + std::to_string(i), {pool[i], pool[(i + 2) % pool.size()], pool[(i + 4) % pool.size()]},
                             i % 2 ? "targeted" : "exploration");
    s.actions.push_back(action(0, "select", {{"rank", 1}}));
    s.actions.push_back(action(1, "select", {{"rank", 1 + rng() % 3}}));
    if (i % 3 == 0) s.actions.push_back(action(2, "select_all_retrieved"));
    if (i != 4) s.rating = 1 + static_cast<int>(rng() % 5);
    scripts.push_back(s);
  }
  const std::vector<std::string> strategies = {"naive", "label", "symbiotic"};
  auto result = run(scripts, strategies);
  ASSERT_EQ(result.outcomes.size(), 15u);
  ASSERT_EQ(result.rows.size(), 6u);
  for (const auto& row : result.rows) {
    double total = 0;
    std::size_t n = 0;
    std::vector<int> ratings;
    for (const auto& o : result.outcomes) {
      if (o.strategy_name != row.strategy || o.scenario != row.scenario) continue;
      total += oracle::jaccard_distance(o.h, o.r);
      ++n;
      if (o.satisfaction) ratings.push_back(*o.satisfaction);
    }
    EXPECT_EQ(row.sessions, n);
    EXPECT_NEAR(row.mean_distance, total / static_cast<double>(n), 1e-12);
    ASSERT_TRUE(row.mean_satisfaction.has_value());
    double mean = 0;
    for (int r : ratings) mean += r;
    EXPECT_NEAR(*row.mean_satisfaction, mean / static_cast<double>(ratings.size()), 1e-12);
    EXPECT_EQ(row.rated_sessions, ratings.size());
  }
  EXPECT_EQ(result.rows[0].strategy, "naive");
  EXPECT_EQ(result.rows[0].scenario, "exploration");
}

TEST_F(EvalTest, ReplayIsDeterministic) {
  auto scripts = load_scripts(testsupport::fixture_dir() / "scripts");
  for (const auto& s : scripts) check_script(s, engine->store());
  auto a = run(scripts, {"naive", "label", "symbiotic"});
  auto b = run(scripts, {"naive", "label", "symbiotic"});
  EXPECT_EQ(a.to_json(), b.to_json());
  EXPECT_EQ(a.render_table(), b.render_table());
}

TEST_F(EvalTest, FixtureScriptsBehaveAsLabelled) {
  auto scripts = load_scripts(testsupport::fixture_dir() / "scripts");
  auto result = run(scripts, {"naive", "symbiotic"});
  for (const auto& o : result.outcomes) {
    if (o.script_name == "copy_retrieval") EXPECT_EQ(o.d(), 0.0) << o.strategy_name;
    if (o.script_name == "select_nothing") EXPECT_EQ(o.d(), 1.0) << o.strategy_name;
    if (o.script_name == "curated") {
      EXPECT_GT(o.d(), 0.0);
      EXPECT_LT(o.d(), 1.0);
    }
  }
}

TEST_F(EvalTest, ScriptRunErrorsPointAtTheAction) {
  SessionScript s = script("far", {"zinc"});
  ScriptAction a = action(0, "select", {{"rank", 99}});
  a.line = 12;
  s.actions.push_back(a);
  Error e = capture([&] { run({s}, {"naive"}); });
  EXPECT_EQ(e.detail().value("kind", ""), "script");
  EXPECT_EQ(error_line(e), 12u);
}

TEST_F(EvalTest, StrategyPinnedScriptsRunOnce) {
  SessionScript s = script("pinned", {"zinc"});
  s.strategy = "label";
  auto result = run({s}, {"naive", "label", "symbiotic"});
  ASSERT_EQ(result.outcomes.size(), 1u);
  EXPECT_EQ(result.outcomes[0].strategy_name, "label");
}

TEST(RenderTable, LayoutAndFormatting) {
  ExperimentResult r;
  r.k = 5;
  r.rows.push_back({"naive", "exploration", 2, 0.25, 4.5, 2});
  r.rows.push_back({"symbiotic", "exploration", 2, 0.125, std::nullopt, 0});
  r.rows.push_back({"symbiotic", "targeted", 1, 1.0, 3.0, 1});
  std::string t = r.render_table();
  EXPECT_NE(t.find("exploration"), std::string::npos);
  EXPECT_NE(t.find("targeted"), std::string::npos);
  EXPECT_NE(t.find("D (lower is better)"), std::string::npos);
  EXPECT_NE(t.find("S (higher is better)"), std::string::npos);
  EXPECT_NE(t.find("0.250"), std::string::npos);
  EXPECT_NE(t.find("4.50"), std::string::npos);
  EXPECT_NE(t.find("0.125"), std::string::npos);
  EXPECT_NE(t.find("n/a"), std::string::npos);
  EXPECT_NE(t.find("-"), std::string::npos);
  EXPECT_NE(t.find("k = 5"), std::string::npos);
  EXPECT_LT(t.find("naive"), t.find("symbiotic"));
}

#include <gtest/gtest.h>

#include <random>
#include <thread>

#include "docloop/error.hpp"
#include "docloop/session.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace docloop;

namespace {

class SessionTest : public ::testing::Test {
 protected:
  void SetUp() override {
    llm = std::make_shared<MockLlm>();
    engine = testsupport::corpus_engine(dir.path(), std::make_shared<SteppingClock>(), llm);
    docs = testsupport::doc_ids_by_name(engine->store());
  }

  SessionManager& sm() { return engine->sessions(); }

  std::set<std::string> retrieved_ids(const ChatMessage& retrieval) {
    std::set<std::string> out;
    for (const auto& s : retrieval.retrieval->items) out.insert(s.block_id);
    return out;
  }

  std::set<std::string> cited(const ChatMessage& m) {
    std::set<std::string> out;
    for (const auto& c : m.citations) out.insert(c.block_id);
    return out;
  }

  testsupport::TempDir dir;
  std::shared_ptr<MockLlm> llm;
  std::unique_ptr<Engine> engine;
  std::map<std::string, std::string> docs;
};

}  // namespace

TEST_F(SessionTest, CreateDefaultsToAllIndexedDocuments) {
  auto s = sm().create_session("u1", "naive");
  EXPECT_EQ(s.corpus.size(), 3u);
  EXPECT_EQ(s.initial_corpus, s.corpus);
  EXPECT_TRUE(s.staging.empty());
  EXPECT_THROW(sm().create_session("u1", "bogus"), Error);
  EXPECT_THROW(sm().create_session("u1", "naive", std::set<std::string>{"dmissing"}), Error);
  try {
    sm().get("ses-999999");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotFound);
  }
}

TEST_F(SessionTest, PostQueryRecordsRetrievalAndAnswer) {
  auto s = sm().create_session("u1", "naive");
  auto [retrieval, reply] = sm().post_query(s.session_id, "zinc grades by drill hole");
  ASSERT_TRUE(retrieval.retrieval.has_value());
  EXPECT_EQ(retrieval.retrieval->items.size(), 5u);
  EXPECT_EQ(retrieval.retrieval->items, naive_retrieve(engine->index(), "zinc grades by drill hole", 5, s.corpus).items);
  EXPECT_EQ(reply.role, MessageRole::Assistant);
  EXPECT_NE(reply.content.find("5"), std::string::npos);
  EXPECT_EQ(reply.content, "Answer drawing on 5 blocks: zinc grades by drill hole");
  EXPECT_EQ(cited(reply), retrieved_ids(retrieval));
  for (const auto& c : reply.citations) {
    EXPECT_EQ(c.revision, engine->block(c.block_id).block.revision);
  }

  auto prompt = llm->requests().back().prompt;
  EXPECT_EQ(count_block_segments(prompt), 5u);
  auto first = engine->block(retrieval.retrieval->items[0].block_id);
  EXPECT_NE(prompt.find(render_block_segment(first)), std::string::npos);
  EXPECT_EQ(prompt.substr(prompt.size() - 35), "Question: zinc grades by drill hole");

  auto stored = sm().get(s.session_id);
  ASSERT_EQ(stored.messages.size(), 3u);
  EXPECT_EQ(stored.messages[0].role, MessageRole::User);
  EXPECT_EQ(stored.messages[1].role, MessageRole::Retrieval);
  EXPECT_EQ(stored.messages[2].role, MessageRole::Assistant);
  auto events = engine->events().for_session(s.session_id);
  ASSERT_EQ(events.size(), 1u);
  EXPECT_EQ(events[0].kind, EventKind::SendQuery);
  EXPECT_EQ(events[0].payload.at("query"), "zinc grades by drill hole");
}

TEST_F(SessionTest, BlockSegmentFormat) {
  auto doc = engine->document(docs.at("assay_report.pdf"));
  const LayoutBlock& fig = doc.pages[1].blocks[1];
  ASSERT_EQ(fig.block_type, BlockType::Figure);
  EXPECT_EQ(render_block_segment(engine->block(fig.block_id)),
            "[source: assay_report.pdf p.2 Figure]\n" + fig.text_repr);
}

TEST_F(SessionTest, FirstSymbioticQueryEqualsNaive) {
  auto sym = sm().create_session("u1", "symbiotic");
  auto naive = sm().create_session("u1", "naive");
  auto a = sm().post_query(sym.session_id, "flotation recovery").first;
  auto b = sm().post_query(naive.session_id, "flotation recovery").first;
  EXPECT_EQ(a.retrieval->items, b.retrieval->items);
  EXPECT_EQ(a.retrieval->augmented_query, "flotation recovery");

  auto second = sm().post_query(sym.session_id, "drill core sampling").first;
  EXPECT_EQ(*second.retrieval->augmented_query,
            "drill core sampling\n[user intent]\nUSER SEEKS: flotation recovery");
  EXPECT_EQ(*second.retrieval->intention_summary, "USER SEEKS: flotation recovery");
}

TEST_F(SessionTest, IdenticalQueriesInFreshSessionsAreIdentical) {
  for (const auto& strategy : {"naive", "label", "symbiotic"}) {
    auto a = sm().create_session("u1", strategy);
    auto b = sm().create_session("u2", strategy);
    auto ra = sm().post_query(a.session_id, "silver values near the fault").first;
    auto rb = sm().post_query(b.session_id, "silver values near the fault").first;
    EXPECT_EQ(ra.retrieval, rb.retrieval) << strategy;
    EXPECT_EQ(ra.content, rb.content);
  }
}

TEST_F(SessionTest, ToggleSemantics) {
  auto s = sm().create_session("u1", "naive");
  auto block = engine->document(docs.at("site_log.txt")).blocks()[0]->block_id;
  EXPECT_EQ(sm().toggle_block(s.session_id, block, true).size(), 1u);
  EXPECT_EQ(sm().toggle_block(s.session_id, block, true).size(), 1u);
  EXPECT_TRUE(sm().toggle_block(s.session_id, block, false).empty());
  EXPECT_EQ(engine->events().for_session(s.session_id).size(), 3u);
  try {
    sm().toggle_block(s.session_id, "bnope", true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotFound);
  }
  EXPECT_EQ(engine->events().for_session(s.session_id).size(), 3u);
}

TEST_F(SessionTest, RandomTogglesMatchReplayOracle) {
  auto all = testsupport::all_blocks(engine->store());
  std::vector<std::string> ids;
  for (const auto& [id, _] : all) ids.push_back(id);
  std::mt19937 rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    auto s = sm().create_session("u1", "naive");
    std::vector<std::pair<std::string, bool>> script;
    for (int i = 0; i < 20; ++i) {
      std::string id = ids[rng() % 6];
      bool select = rng() % 3 != 0;
      script.emplace_back(id, select);
      sm().toggle_block(s.session_id, id, select);
    }
    auto staged = sm().get(s.session_id).staging;
    std::set<std::string> as_set(staged.begin(), staged.end());
    EXPECT_EQ(as_set.size(), staged.size());
    EXPECT_EQ(as_set, oracle::replay_staging(script));
  }
}

TEST_F(SessionTest, RegenerateUnionsRetrievalAndStaging) {
  auto s = sm().create_session("u1", "naive");
  auto [retrieval, reply] = sm().post_query(s.session_id, "zinc grades");
  auto original = retrieved_ids(retrieval);

  auto empty_regen = sm().regenerate(s.session_id, reply.message_id);
  EXPECT_EQ(cited(empty_regen), original);
  EXPECT_EQ(empty_regen.regenerated_from, reply.message_id);

  std::vector<std::string> outside;
  for (const auto& [id, _] : testsupport::all_blocks(engine->store())) {
    if (!original.count(id) && outside.size() < 2) outside.push_back(id);
  }
  sm().toggle_block(s.session_id, outside[0], true);
  sm().toggle_block(s.session_id, outside[1], true);
  sm().toggle_block(s.session_id, *original.begin(), true);
  auto regen = sm().regenerate(s.session_id, reply.message_id);

  std::set<std::string> expect = original;
  for (const auto& id : sm().get(s.session_id).staging) expect.insert(id);
  EXPECT_EQ(cited(regen), expect);
  EXPECT_EQ(cited(regen).size(), original.size() + 2);
  EXPECT_EQ(count_block_segments(llm->requests().back().prompt), original.size() + 2);
  EXPECT_EQ(regen.content, "Answer drawing on 7 blocks: zinc grades");

  auto session = sm().get(s.session_id);
  EXPECT_TRUE(session.find_message(reply.message_id));
  EXPECT_EQ(session.messages.size(), 5u);
  auto events = engine->events().for_session(s.session_id);
  EXPECT_EQ(events.back().kind, EventKind::Regenerate);
  EXPECT_EQ(events.back().payload.at("new_message_id"), regen.message_id);

  try {
    sm().regenerate(s.session_id, retrieval.message_id);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Invalid);
  }
}

TEST_F(SessionTest, RatingsAreLastWinsAndRetained) {
  auto s = sm().create_session("u1", "naive");
  auto [retrieval, reply] = sm().post_query(s.session_id, "camp generator");
  sm().rate(s.session_id, reply.message_id, true);
  auto events = engine->events().for_session(s.session_id);
  EXPECT_EQ(events.back().kind, EventKind::Like);
  EXPECT_EQ(events.back().payload.at("message_id"), reply.message_id);
  sm().rate(s.session_id, reply.message_id, false);
  EXPECT_FALSE(sm().get(s.session_id).ratings.at(reply.message_id));
  events = engine->events().for_session(s.session_id);
  EXPECT_EQ(events[events.size() - 2].kind, EventKind::Like);
  EXPECT_EQ(events.back().kind, EventKind::Dislike);

  auto user_msg = sm().get(s.session_id).messages[0].message_id;
  try {
    sm().rate(s.session_id, user_msg, true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Invalid);
    EXPECT_EQ(e.detail().at("kind"), "invalid_target");
  }
  try {
    sm().rate(s.session_id, "msg-9999", true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotFound);
  }
}

TEST_F(SessionTest, AddDocumentWidensRetrieval) {
  std::string assay = docs.at("assay_report.pdf"), log = docs.at("site_log.txt");
  auto s = sm().create_session("u1", "naive", std::set<std::string>{assay});
  const std::string q = "Helicopter support was grounded for two days by low cloud";
  auto narrow = sm().post_query(s.session_id, q).first;
  for (const auto& item : narrow.retrieval->items) EXPECT_EQ(item.document_id, assay);

  auto corpus = sm().add_document(s.session_id, log);
  EXPECT_EQ(corpus, (std::set<std::string>{assay, log}));
  EXPECT_EQ(sm().add_document(s.session_id, log), corpus);
  auto widened = sm().post_query(s.session_id, q).first.retrieval->items;

  std::vector<oracle::Item> items;
  for (const auto& e : engine->index().entries()) {
    if (corpus.count(e.document_id)) items.push_back({e.block_id, e.vector, 0, e.document_id});
  }
  auto expect = oracle::brute_top_k(items, engine->index().embedder().embed(q), 5);
  ASSERT_EQ(widened.size(), expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_EQ(widened[i].block_id, expect[i].first);
  EXPECT_EQ(widened[0].document_id, log);

  try {
    sm().add_document(s.session_id, "dunknown");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotFound);
  }
}

TEST_F(SessionTest, AddUnindexedDocumentIsPrecondition) {
  Document failed;
  failed.document_id = "dfailed";
  failed.source_name = "broken.pdf";
  failed.page_count = 1;
  failed.pages.resize(1);
  failed.processing_state = ProcessingState::Failed;
  engine->store().put(failed);
  auto s = sm().create_session("u1", "naive");
  try {
    sm().add_document(s.session_id, "dfailed");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Invalid);
    EXPECT_EQ(e.detail().at("kind"), "precondition");
  }
}

TEST_F(SessionTest, LlmFailureKeepsRetrievalAndAddsNotice) {
  auto s = sm().create_session("u1", "naive");
  llm->fail_with("model offline");
  auto [retrieval, reply] = sm().post_query(s.session_id, "zinc");
  llm->fail_with(std::nullopt);
  EXPECT_EQ(retrieval.retrieval->items.size(), 5u);
  EXPECT_TRUE(reply.error);
  EXPECT_NE(reply.content.find("model offline"), std::string::npos);
  EXPECT_EQ(sm().get(s.session_id).messages.size(), 3u);
}

TEST_F(SessionTest, TombstonedBlocksCannotBeSelectedOrRetrieved) {
  auto s = sm().create_session("u1", "naive");
  LayoutBlock b = *engine->document(docs.at("site_log.txt")).blocks()[1];
  ValidationEdit rm;
  rm.block_id = b.block_id;
  rm.editor_id = "v";
  rm.edit_kind = EditKind::RemoveBlock;
  rm.before = BlockSnapshot::of(b);
  rm.after = BlockSnapshot::of(b);
  rm.after.tombstoned = true;
  engine->apply_edit(rm);
  try {
    sm().toggle_block(s.session_id, b.block_id, true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Invalid);
    EXPECT_EQ(e.detail().at("kind"), "tombstoned");
  }
  auto r = sm().post_query(s.session_id, b.text_repr).first;
  for (const auto& item : r.retrieval->items) EXPECT_NE(item.block_id, b.block_id);
}

TEST_F(SessionTest, ClickNavigateSatisfactionAndIntention) {
  auto s = sm().create_session("u1", "symbiotic");
  auto [retrieval, reply] = sm().post_query(s.session_id, "zinc");
  auto top = retrieval.retrieval->items[0].block_id;
  sm().click_result(s.session_id, retrieval.message_id, top);
  sm().navigate_page(s.session_id, docs.at("assay_report.pdf"), 1);
  EXPECT_THROW(sm().navigate_page(s.session_id, docs.at("assay_report.pdf"), 7), Error);
  EXPECT_THROW(sm().click_result(s.session_id, retrieval.message_id, "bnotretrieved"), Error);
  sm().set_satisfaction(s.session_id, 4);
  EXPECT_EQ(sm().get(s.session_id).satisfaction, 4);
  EXPECT_THROW(sm().set_satisfaction(s.session_id, 6), Error);

  auto events = engine->events().for_session(s.session_id);
  std::vector<EventKind> kinds;
  for (const auto& e : events) kinds.push_back(e.kind);
  EXPECT_EQ(kinds, (std::vector<EventKind>{EventKind::SendQuery, EventKind::ClickResult, EventKind::NavigatePage}));
  EXPECT_EQ(events[1].payload.at("rank"), 1);

  auto intent = sm().current_intention(s.session_id);
  EXPECT_EQ(intent.summary_text, "USER SEEKS: zinc");
  EXPECT_EQ(intent.source_event_count, 3u);
}

TEST_F(SessionTest, StateIsAFoldOfTheLog) {
  auto s = sm().create_session("u1", "naive");
  auto [retrieval, reply] = sm().post_query(s.session_id, "lead silver");
  for (const auto& item : retrieval.retrieval->items) sm().toggle_block(s.session_id, item.block_id, true);
  sm().toggle_block(s.session_id, retrieval.retrieval->items[1].block_id, false);
  sm().add_document(s.session_id, docs.at("site_log.txt"));
  sm().rate(s.session_id, reply.message_id, true);

  auto session = sm().get(s.session_id);
  auto fold = fold_events(session.initial_corpus, engine->events().for_session(s.session_id));
  EXPECT_EQ(fold.staging, session.staging);
  EXPECT_EQ(fold.corpus, session.corpus);
  EXPECT_EQ(fold.ratings, session.ratings);

  // A fresh engine over the same directory rebuilds identical state.
  auto snapshot = Json(session).dump();
  engine.reset();
  EngineConfig cfg;
  cfg.data_dir = dir.path();
  cfg.job_workers = 1;
  Engine reopened(cfg, std::make_shared<SteppingClock>(), std::make_shared<MockLlm>());
  EXPECT_EQ(Json(reopened.sessions().get(s.session_id)).dump(), snapshot);
}

TEST_F(SessionTest, DistinctSessionsRunConcurrently) {
  std::vector<std::string> ids;
  for (int i = 0; i < 6; ++i) ids.push_back(sm().create_session("u" + std::to_string(i), "symbiotic").session_id);
  std::vector<std::thread> threads;
  for (const auto& id : ids) {
    threads.emplace_back([&, id] {
      for (int q = 0; q < 5; ++q) {
        auto r = sm().post_query(id, "query " + std::to_string(q)).first;
        sm().toggle_block(id, r.retrieval->items[0].block_id, true);
      }
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& id : ids) {
    auto events = engine->events().for_session(id);
    EXPECT_EQ(events.size(), 10u);
    for (std::size_t i = 1; i < events.size(); ++i) EXPECT_TRUE(event_before(events[i - 1], events[i]));
    EXPECT_EQ(sm().get(id).messages.size(), 15u);
  }
}

TEST(EventLog, AppendOnlyJsonLines) {
  testsupport::TempDir dir;
  EventLog log(dir / "events.jsonl", std::make_shared<SteppingClock>(100, 0));
  std::string before;
  for (int i = 0; i < 10; ++i) {
    InteractionEvent e;
    e.session_id = i % 2 ? "a" : "b";
    e.user_id = "u";
    e.kind = EventKind::SelectBlock;
    e.payload = {{"block_id", "b" + std::to_string(i)}};
    auto stored = log.append(e);
    EXPECT_FALSE(stored.event_id.empty());
    std::string now = read_file(dir / "events.jsonl");
    EXPECT_EQ(now.compare(0, before.size(), before), 0);
    EXPECT_GT(now.size(), before.size());
    before = now;
  }
  EXPECT_EQ(log.export_jsonl(), before);
  EXPECT_EQ(log.for_session("a").size(), 5u);
  auto all = log.all();
  for (std::size_t i = 1; i < all.size(); ++i) EXPECT_TRUE(event_before(all[i - 1], all[i]));

  EventLog reloaded(dir / "events.jsonl");
  reloaded.load();
  EXPECT_EQ(reloaded.all(), all);
  Json first = Json::parse(before.substr(0, before.find('\n')));
  for (auto key : {"event_id", "session_id", "user_id", "kind", "payload", "timestamp"}) EXPECT_TRUE(first.contains(key));
}

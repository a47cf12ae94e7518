#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <thread>

#include "docloop/embedding_index.hpp"
#include "docloop/error.hpp"
#include "docloop/hash.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace docloop;

namespace {

auto reference() { return std::make_shared<ReferenceEmbedder>(); }

LayoutBlock make_block(const std::string& id, const std::string& text, BlockType type = BlockType::Text,
                       const std::string& doc = "d1") {
  LayoutBlock b;
  b.block_id = id;
  b.document_id = doc;
  b.bbox = BoundingBox::make(0, 10, 10, 100, 30);
  b.block_type = type;
  b.raw_payload = {{"text", text}};
  b.text_repr = text;
  b.revision = 0;
  return b;
}

double norm(const Vector& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::string random_words(std::mt19937& rng, int n) {
  static const char* words[] = {"zinc", "lead", "silver", "assay", "core", "drill", "fault", "grade",
                                "camp", "ridge", "table", "soil", "rock", "chip", "flotation", "copper"};
  std::string s;
  for (int i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += words[rng() % 16];
  }
  return s;
}

}  // namespace

TEST(ReferenceEmbedder, DeterministicUnitOrZero) {
  ReferenceEmbedder e;
  EXPECT_EQ(e.embed("abc"), e.embed("abc"));
  Vector z = e.embed("");
  ASSERT_EQ(z.size(), 256u);
  EXPECT_EQ(norm(z), 0.0);
  EXPECT_EQ(norm(e.embed("   \n\t ")), 0.0);
  EXPECT_NEAR(norm(e.embed("zinc grade")), 1.0, 1e-6);
  EXPECT_NEAR(cosine(e.embed("zinc grade"), e.embed("zinc grade")), 1.0, 1e-6);
  EXPECT_EQ(e.embed("Zinc  Grade"), e.embed("zinc grade"));
  for (double x : e.embed("anything at all")) EXPECT_GE(x, 0.0);
}

TEST(ReferenceEmbedder, TrigramHashingOracle) {
  // " ab" and "ab " are the only trigrams of "ab" once padded.
  Vector expect(256, 0.0);
  expect[fnv1a32(" ab") % 256] += 1;
  expect[fnv1a32("ab ") % 256] += 1;
  double n = norm(expect);
  for (double& x : expect) x /= n;
  Vector got = ReferenceEmbedder().embed("AB");
  for (std::size_t i = 0; i < 256; ++i) EXPECT_NEAR(got[i], expect[i], 1e-12);
}

TEST(VectorIndex, UpsertThenExactTextRanksFirst) {
  VectorIndex index(reference());
  index.upsert(make_block("b1", "zinc grades by drill hole"));
  index.upsert(make_block("b2", "helicopter grounded by low cloud"));
  index.upsert(make_block("b3", "soil geochemistry grid extension"));
  auto hits = index.search_text("helicopter grounded by low cloud", 5);
  ASSERT_EQ(hits.size(), 3u);
  EXPECT_EQ(hits[0].block_id, "b2");
  EXPECT_NEAR(hits[0].score, 1.0, 1e-6);
}

TEST(VectorIndex, UpsertIsIdempotentAndTracksRevision) {
  VectorIndex index(reference());
  auto b = make_block("b1", "helo");
  index.upsert(b);
  index.upsert(b);
  EXPECT_EQ(index.size(), 1u);
  b.text_repr = "hello";
  b.raw_payload = {{"text", "hello"}};
  b.revision = 1;
  index.upsert(b);
  EXPECT_EQ(index.size(), 1u);
  EXPECT_EQ(index.entry("b1")->revision, 1);
  EXPECT_EQ(index.entry("b1")->vector, ReferenceEmbedder().embed("hello"));
}

TEST(VectorIndex, RejectsTombstonedAndEmpty) {
  VectorIndex index(reference());
  auto t = make_block("b1", "x");
  t.tombstoned = true;
  EXPECT_THROW(index.upsert(t), Error);
  EXPECT_THROW(index.upsert(make_block("b2", "")), Error);
  EXPECT_EQ(index.size(), 0u);
  IndexEntry wrong{"b3", "d", BlockType::Text, Vector(3, 1.0), 0};
  EXPECT_THROW(index.upsert_entry(wrong), Error);
}

TEST(VectorIndex, FewerThanKAndEmptyIndex) {
  VectorIndex index(reference());
  EXPECT_TRUE(index.search_text("anything", 5).empty());
  index.upsert(make_block("a", "one"));
  index.upsert(make_block("b", "two"));
  index.upsert(make_block("c", "three"));
  EXPECT_EQ(index.search_text("one", 5).size(), 3u);
  EXPECT_THROW(index.search_text("one", 0), Error);
}

TEST(VectorIndex, TiesOrderedByBlockId) {
  VectorIndex index(reference());
  index.upsert(make_block("b9", "same words"));
  index.upsert(make_block("b1", "same words"));
  index.upsert(make_block("b5", "same words"));
  auto hits = index.search_text("same words", 3);
  ASSERT_EQ(hits.size(), 3u);
  EXPECT_EQ(hits[0].block_id, "b1");
  EXPECT_EQ(hits[1].block_id, "b5");
  EXPECT_EQ(hits[2].block_id, "b9");
  EXPECT_EQ(hits[0].score, hits[2].score);
}

TEST(VectorIndex, RandomCorpusMatchesBruteForce) {
  std::mt19937 rng(42);
  ReferenceEmbedder e;
  for (int trial = 0; trial < 20; ++trial) {
    VectorIndex index(reference());
    std::vector<oracle::Item> items;
    for (int i = 0; i < 50; ++i) {
      char id[16];
      std::snprintf(id, sizeof id, "b%03d", static_cast<int>(rng() % 1000));
      auto blk = make_block(id, random_words(rng, 1 + rng() % 4), kAllBlockTypes[rng() % 3]);
      index.upsert(blk);
      std::erase_if(items, [&](const oracle::Item& it) { return it.id == blk.block_id; });
      items.push_back({blk.block_id, e.embed(blk.text_repr), static_cast<int>(blk.block_type), blk.document_id});
    }
    auto q = e.embed(random_words(rng, 2));
    auto expect = oracle::brute_top_k(items, q, 5);
    auto got = index.search(q, 5);
    ASSERT_EQ(got.size(), expect.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].block_id, expect[i].first);
      EXPECT_NEAR(got[i].score, expect[i].second, 1e-12);
    }
  }
}

TEST(VectorIndex, FiltersAreSound) {
  std::mt19937 rng(9);
  VectorIndex index(reference());
  for (int i = 0; i < 60; ++i) {
    index.upsert(make_block("b" + std::to_string(i), random_words(rng, 3), kAllBlockTypes[i % 4],
                            "d" + std::to_string(i % 3)));
  }
  auto q = ReferenceEmbedder().embed("zinc assay");
  for (auto t : {BlockType::Title, BlockType::Text, BlockType::Table, BlockType::Figure, BlockType::Caption}) {
    SearchFilter f;
    f.type = t;
    for (const auto& hit : index.search(q, 20, f)) EXPECT_EQ(hit.block_type, t);
  }
  SearchFilter docs;
  docs.documents = std::set<std::string>{"d1"};
  auto hits = index.search(q, 100, docs);
  EXPECT_EQ(hits.size(), 20u);
  for (const auto& hit : hits) EXPECT_EQ(hit.document_id, "d1");
  SearchFilter none;
  none.documents = std::set<std::string>{};
  EXPECT_TRUE(index.search(q, 5, none).empty());
  for (const auto& hit : index.search(q, 60)) {
    EXPECT_GE(hit.score, 0.0);
    EXPECT_LE(hit.score, 1.0);
  }
}

TEST(VectorIndex, RemoveExcludesBlock) {
  VectorIndex index(reference());
  index.upsert(make_block("b1", "drill core"));
  index.upsert(make_block("b2", "drill core samples"));
  EXPECT_TRUE(index.remove("b1"));
  EXPECT_FALSE(index.remove("b1"));
  for (const auto& hit : index.search_text("drill core", 5)) EXPECT_NE(hit.block_id, "b1");
}

TEST(VectorIndex, PersistenceRoundTripAndEmbedderCheck) {
  testsupport::TempDir dir;
  VectorIndex index(reference());
  index.upsert(make_block("b1", "drill core", BlockType::Table));
  index.upsert(make_block("b2", "fault contact"));
  index.save(dir / "index.json");
  Json j = Json::parse(read_file(dir / "index.json"));
  EXPECT_EQ(j.at("embedder_name"), "reference-trigram-256");
  EXPECT_EQ(j.at("dimension"), 256);
  EXPECT_EQ(j.at("entries").size(), 2u);

  VectorIndex loaded(reference());
  loaded.load(dir / "index.json");
  EXPECT_EQ(loaded.entries(), index.entries());
  EXPECT_EQ(loaded.to_json().dump(), index.to_json().dump());

  class Other final : public Embedder {
   public:
    std::string name() const override { return "other"; }
    std::size_t dimension() const override { return 256; }
    Vector embed(std::string_view) const override { return Vector(256, 0.0); }
  };
  VectorIndex mismatched(std::make_shared<Other>());
  try {
    mismatched.load(dir / "index.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Invalid);
  }
}

TEST(VectorIndex, ConcurrentReadersSeeConsistentSnapshots) {
  VectorIndex index(reference());
  for (int i = 0; i < 100; ++i) index.upsert(make_block("b" + std::to_string(i), "word " + std::to_string(i)));
  std::atomic<bool> stop{false};
  std::atomic<int> bad{0};
  std::vector<std::thread> readers;
  for (int r = 0; r < 4; ++r) {
    readers.emplace_back([&] {
      auto q = ReferenceEmbedder().embed("word 7");
      while (!stop) {
        auto hits = index.search(q, 10);
        if (hits.size() != 10) ++bad;
        for (std::size_t i = 1; i < hits.size(); ++i) {
          if (ranks_before(hits[i], hits[i - 1])) ++bad;
        }
      }
    });
  }
  for (int round = 0; round < 200; ++round) {
    auto b = make_block("b" + std::to_string(round % 100), "word " + std::to_string(round));
    b.revision = round;
    index.upsert(b);
  }
  stop = true;
  for (auto& t : readers) t.join();
  EXPECT_EQ(bad.load(), 0);
  EXPECT_EQ(index.size(), 100u);
}

#include <arpa/inet.h>
#include <gtest/gtest.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cmath>
#include <thread>

#include "docloop/adapters.hpp"
#include "docloop/embedding_index.hpp"
#include "docloop/error.hpp"
#include "docloop/http_json.hpp"
#include "docloop/ingestion.hpp"
#include "docloop/llm.hpp"
#include "httplib.h"
#include "support.hpp"

using namespace docloop;

namespace {

// Local stand-in for the external model services.
class FakeServices {
 public:
  FakeServices() {
    for (const char* path : {"/layout/health", "/ocr/health"}) {
      server_.Get(path, [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });
    }
    server_.Post("/layout", [this](const httplib::Request& req, httplib::Response& res) {
      last_layout_ = Json::parse(req.body);
      Json regions = Json::array({{{"label", "text"}, {"bbox", {72, 80, 540, 120}}}});
      res.set_content(Json{{"regions", regions}}.dump(), "application/json");
    });
    server_.Post("/ocr", [this](const httplib::Request& req, httplib::Response& res) {
      last_ocr_ = Json::parse(req.body);
      res.set_content(Json{{"text", "recognised by http"}}.dump(), "application/json");
    });
    server_.Post("/bad", [](const httplib::Request&, httplib::Response& res) {
      res.status = 500;
      res.set_content("boom", "text/plain");
    });
    server_.Post("/llm", [this](const httplib::Request& req, httplib::Response& res) {
      last_llm_ = Json::parse(req.body);
      res.set_content(Json{{"text", "remote says hi"}}.dump(), "application/json");
    });
    server_.Post("/embed", [](const httplib::Request& req, httplib::Response& res) {
      Json body = Json::parse(req.body);
      std::vector<double> v = {1.0, static_cast<double>(body.at("text").get<std::string>().size()), 0.0};
      res.set_content(Json{{"vector", v}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServices() {
    server_.stop();
    thread_.join();
  }

  std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

  Json last_layout_, last_ocr_, last_llm_;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

// A port that was free a moment ago and has nothing listening on it.
std::string closed_port_url() {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return "http://127.0.0.1:" + std::to_string(ntohs(addr.sin_port)) + "/x";
}

}  // namespace

TEST(MockLlm, DefaultRules) {
  MockLlm llm;
  auto summary = llm.complete({LlmPurpose::IntentionSummary, "SendQuery: zinc\nSelectBlock: b1\nSendQuery: silver grades\n", 600});
  EXPECT_EQ(summary.text, "USER SEEKS: silver grades");
  auto answer = llm.complete({LlmPurpose::Answer, "pre\n[source: a p.1 Text]\nx\n\n[source: b p.2 Table]\ny\n\nQuestion: why?", 4000});
  EXPECT_EQ(answer.text, "Answer drawing on 2 blocks: why?");
  auto draft = llm.complete({LlmPurpose::ReportSection, "Instruction: be brief\nSection: Results", 4000});
  EXPECT_EQ(draft.text, "Draft from 0 blocks: Results");
  EXPECT_EQ(llm.calls(), 3u);
  EXPECT_EQ(llm.requests()[1].purpose, LlmPurpose::Answer);
}

TEST(MockLlm, ResponderFailureAndTruncation) {
  MockLlm llm([](const LlmRequest&) { return std::string(1000, 'x'); });
  EXPECT_EQ(llm.complete({LlmPurpose::Answer, "p", 10}).text.size(), 10u);
  llm.fail_with("offline");
  try {
    llm.complete({LlmPurpose::Answer, "p", 10});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AdapterUnavailable);
  }
  llm.fail_with(std::nullopt);
  EXPECT_NO_THROW(llm.complete({LlmPurpose::Answer, "p", 10}));
}

TEST(Llm, TruncateKeepsUtf8Whole) {
  std::string s = "a\xc3\xa9\xc3\xa9";  // a é é
  EXPECT_EQ(truncate_utf8(s, 2), "a");
  EXPECT_EQ(truncate_utf8(s, 3), "a\xc3\xa9");
  EXPECT_EQ(truncate_utf8(s, 100), s);
  EXPECT_EQ(count_block_segments("[source: a]\n[source: b]"), 2u);
  EXPECT_EQ(count_block_segments("none"), 0u);
}

TEST(HttpAdapters, LlmAndEmbedderContracts) {
  FakeServices svc;
  HttpLlm llm(svc.url("/llm"));
  EXPECT_EQ(llm.complete({LlmPurpose::ReportSection, "prompt text", 77}).text, "remote says hi");
  EXPECT_EQ(svc.last_llm_.at("purpose"), "report_section");
  EXPECT_EQ(svc.last_llm_.at("prompt"), "prompt text");
  EXPECT_EQ(svc.last_llm_.at("max_chars"), 77);

  HttpEmbedder emb(svc.url("/embed"), "remote-3", 3);
  Vector v = emb.embed("abcd");
  ASSERT_EQ(v.size(), 3u);
  // [1, 4, 0] from the service, normalized to unit length.
  EXPECT_NEAR(v[0], 1.0 / std::sqrt(17.0), 1e-12);
  EXPECT_NEAR(v[1], 4.0 / std::sqrt(17.0), 1e-12);
  HttpEmbedder wrong_dim(svc.url("/embed"), "remote-5", 5);
  EXPECT_THROW(wrong_dim.embed("abc"), Error);
}

TEST(HttpAdapters, TransportFailuresAreAdapterUnavailable) {
  FakeServices svc;
  for (const auto& url : {svc.url("/bad"), closed_port_url()}) {
    try {
      post_json(url, Json::object(), 2);
      FAIL() << url;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::AdapterUnavailable) << url;
    }
  }
  EXPECT_THROW(HttpLlm(closed_port_url()).complete({LlmPurpose::Answer, "p", 10}), Error);
  EXPECT_FALSE(HttpAdapter(AdapterKind::Ocr, closed_port_url()).health());
  EXPECT_TRUE(probe(svc.url("/layout/health")));
}

TEST(HttpAdapters, PipelineOverHttpDetectorAndOcr) {
  FakeServices svc;
  AdapterConfig cfg = AdapterConfig::from_json({{"LayoutDetector", {{"mode", "http"}, {"endpoint", svc.url("/layout")}}},
                                                {"Ocr", {{"mode", "http"}, {"endpoint", svc.url("/ocr")}}}});
  BlockStore store;
  VectorIndex index(std::make_shared<ReferenceEmbedder>());
  Pipeline pipeline(store, index, std::make_shared<SteppingClock>());
  auto adapters = make_adapters(cfg, std::shared_ptr<const MockFixture>());
  EXPECT_TRUE(adapters.get(AdapterKind::LayoutDetector).health());
  auto job = pipeline.run(testsupport::make_pdf({{"Some native text"}}), SourceFormat::Pdf, "h.pdf", adapters);
  ASSERT_EQ(job.stage, ProcessingState::Indexed) << job.error_message.value_or("");
  auto doc = store.require(job.document_id);
  ASSERT_EQ(doc.block_count(), 1u);
  EXPECT_EQ(doc.blocks()[0]->text_repr, "recognised by http");
  EXPECT_EQ(svc.last_layout_.at("page_index"), 0);
  EXPECT_EQ(svc.last_layout_.at("source_name"), "h.pdf");
  EXPECT_EQ(svc.last_ocr_.at("crop"), Json::array({72.0, 80.0, 540.0, 120.0}));
  EXPECT_EQ(svc.last_ocr_.at("adapter_kind"), "Ocr");
}

TEST(HttpAdapters, UnreachableDetectorFailsJob) {
  AdapterConfig cfg = AdapterConfig::from_json({{"LayoutDetector", {{"mode", "http"}, {"endpoint", closed_port_url()}}}});
  BlockStore store;
  VectorIndex index(std::make_shared<ReferenceEmbedder>());
  Pipeline pipeline(store, index);
  auto job = pipeline.run(testsupport::make_pdf({{"x"}}), SourceFormat::Pdf, "h.pdf",
                          make_adapters(cfg, std::shared_ptr<const MockFixture>()));
  EXPECT_EQ(job.stage, ProcessingState::Failed);
  EXPECT_EQ(job.failed_stage, ProcessingState::LayoutDetected);
}

TEST(AdapterConfig, ParsesModesAndEnvOverride) {
  EXPECT_THROW(AdapterConfig::from_json({{"Ocr", {{"mode", "gpu"}}}}), Error);
  EXPECT_THROW(AdapterConfig::from_json({{"Bogus", {{"mode", "mock"}}}}), Error);
  AdapterConfig cfg = AdapterConfig::from_json({{"Ocr", {{"mode", "reference"}}}});
  EXPECT_EQ(cfg.spec(AdapterKind::Ocr).mode, "reference");
  EXPECT_EQ(cfg.spec(AdapterKind::TableExtractor).mode, "auto");
  ::setenv("DOCLOOP_OCR_ENDPOINT", "http://127.0.0.1:1/ocr", 1);
  cfg.apply_env_overrides();
  ::unsetenv("DOCLOOP_OCR_ENDPOINT");
  EXPECT_EQ(cfg.spec(AdapterKind::Ocr).mode, "http");
  EXPECT_EQ(cfg.spec(AdapterKind::Ocr).endpoint, "http://127.0.0.1:1/ocr");
}

TEST(AdapterPayloads, SchemasPerKind) {
  EXPECT_NO_THROW(validate_adapter_payload(AdapterKind::LayoutDetector,
                                           {{"regions", {{{"label", "text"}, {"bbox", {1, 2, 3, 4}}}}}}));
  EXPECT_THROW(validate_adapter_payload(AdapterKind::LayoutDetector, {{"regions", {{{"label", "text"}}}}}), Error);
  EXPECT_THROW(validate_adapter_payload(AdapterKind::Ocr, {{"txt", "x"}}), Error);
  EXPECT_NO_THROW(validate_adapter_payload(AdapterKind::FigureDescriber, {{"description", "d"}}));
  EXPECT_THROW(validate_adapter_payload(AdapterKind::FormulaExtractor, {{"latex", "x"}}), Error);
  EXPECT_EQ(extractor_for(BlockType::Table), AdapterKind::TableExtractor);
  EXPECT_EQ(extractor_for(BlockType::Title), AdapterKind::Ocr);
  EXPECT_EQ(extractor_for(BlockType::Figure), AdapterKind::FigureDescriber);
}

TEST(MockAdapter, SidecarFixtureDrivesExtraction) {
  auto fx = MockFixture::load(testsupport::corpus_dir() / "assay_report.pdf.fixture.json");
  EXPECT_EQ(fx.pages.size(), 2u);
  EXPECT_EQ(fx.pages.at(0).regions.size(), 4u);
  EXPECT_EQ(sidecar_fixture_path("a/b.pdf"), std::filesystem::path("a/b.pdf.fixture.json"));
  MockAdapter unhealthy(AdapterKind::Ocr, std::make_shared<const MockFixture>(fx), false);
  EXPECT_FALSE(unhealthy.health());
}

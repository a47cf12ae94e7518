#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "docloop/model.hpp"
#include "docloop/text_layer.hpp"

namespace docloop {

enum class AdapterKind { LayoutDetector, Ocr, TableExtractor, FormulaExtractor, FigureDescriber };

inline constexpr AdapterKind kAllAdapterKinds[] = {AdapterKind::LayoutDetector, AdapterKind::Ocr,
                                                   AdapterKind::TableExtractor, AdapterKind::FormulaExtractor,
                                                   AdapterKind::FigureDescriber};

const char* to_string(AdapterKind kind);
std::optional<AdapterKind> parse_adapter_kind(std::string_view name);
// The extraction adapter responsible for blocks of `type`.
AdapterKind extractor_for(BlockType type);

// What an adapter gets to look at: a whole page, or a crop of it when `crop`
// is set. The text layer is only present for digitally-native sources.
struct AdapterRequest {
  std::string document_id;
  std::string source_name;
  int page_index = 0;
  double page_width = 0;
  double page_height = 0;
  std::optional<BoundingBox> crop;
  std::optional<BlockType> block_type;
  const PageText* text_layer = nullptr;

  Json to_json() const;
};

// Payload schemas per kind:
//   LayoutDetector:   {"regions": [{"label": str, "bbox": [x0, y0, x1, y1]}]}
//   Ocr:              {"text": str}
//   TableExtractor:   Table payload
//   FormulaExtractor: Formula payload
//   FigureDescriber:  Figure payload
void validate_adapter_payload(AdapterKind kind, const Json& payload);

// invoke() must not touch the block store; implementations are called
// concurrently from several threads.
class ExtractionAdapter {
 public:
  virtual ~ExtractionAdapter() = default;
  virtual AdapterKind kind() const = 0;
  virtual Json invoke(const AdapterRequest& request) const = 0;
  virtual bool health() const = 0;
};

struct DetectedRegion {
  std::string label;
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

std::vector<DetectedRegion> parse_regions(const Json& detector_payload);

// Reads the page text layer. The detector emits one Text region per
// paragraph (Title when the paragraph's font is markedly larger than the
// page median); the extractors read whatever text lies inside the crop.
class ReferenceAdapter final : public ExtractionAdapter {
 public:
  explicit ReferenceAdapter(AdapterKind kind) : kind_(kind) {}
  AdapterKind kind() const override { return kind_; }
  Json invoke(const AdapterRequest& request) const override;
  bool health() const override { return true; }

 private:
  AdapterKind kind_;
};

// Sidecar fixture driving the mock adapters:
// {
//   "unhealthy": ["LayoutDetector", ...],
//   "pages": [{"page_index": 0, "fail": false,
//              "regions": [{"label": "table", "bbox": [x0,y0,x1,y1],
//                           "payload": {...}, "fail": false}]}]
// }
struct MockFixture {
  struct Region {
    DetectedRegion region;
    std::optional<Json> payload;
    bool fail = false;
  };
  struct PageFixture {
    bool fail = false;
    std::vector<Region> regions;
  };
  std::map<int, PageFixture> pages;
  std::vector<AdapterKind> unhealthy;

  static MockFixture from_json(const Json& j);
  static MockFixture load(const std::filesystem::path& path);
};

class MockAdapter final : public ExtractionAdapter {
 public:
  MockAdapter(AdapterKind kind, std::shared_ptr<const MockFixture> fixture, std::optional<bool> healthy = std::nullopt);
  AdapterKind kind() const override { return kind_; }
  Json invoke(const AdapterRequest& request) const override;
  bool health() const override;

 private:
  AdapterKind kind_;
  std::shared_ptr<const MockFixture> fixture_;
  std::optional<bool> healthy_;
};

// POSTs AdapterRequest::to_json() to the endpoint; the response body is the
// payload. Health is GET <endpoint>/health.
class HttpAdapter final : public ExtractionAdapter {
 public:
  HttpAdapter(AdapterKind kind, std::string endpoint) : kind_(kind), endpoint_(std::move(endpoint)) {}
  AdapterKind kind() const override { return kind_; }
  Json invoke(const AdapterRequest& request) const override;
  bool health() const override;

 private:
  AdapterKind kind_;
  std::string endpoint_;
};

struct AdapterSpec {
  // "auto" resolves to "mock" when a fixture is available, else "reference".
  std::string mode = "auto";
  std::string endpoint;
  std::string fixture;
  std::optional<bool> healthy;
};

struct AdapterConfig {
  std::map<AdapterKind, AdapterSpec> specs;

  const AdapterSpec& spec(AdapterKind kind) const;

  // Config file: {"<AdapterKind>": {"mode": ..., "endpoint": ..., "fixture": ...}}
  static AdapterConfig from_json(const Json& j);
  static AdapterConfig load(const std::filesystem::path& path);
  // DOCLOOP_<KIND>_ENDPOINT (e.g. DOCLOOP_OCR_ENDPOINT) switches a kind to http mode.
  void apply_env_overrides();
};

class AdapterSet {
 public:
  void set(std::shared_ptr<const ExtractionAdapter> adapter);
  // Throws Error(AdapterUnavailable) when no adapter of `kind` is configured.
  const ExtractionAdapter& get(AdapterKind kind) const;

 private:
  std::map<AdapterKind, std::shared_ptr<const ExtractionAdapter>> by_kind_;
};

// Builds the adapters for one source file. A mock fixture is taken from the
// spec, or from the sidecar "<source>.fixture.json" next to the file.
AdapterSet make_adapters(const AdapterConfig& config, const std::filesystem::path& source_path = {});
AdapterSet make_adapters(const AdapterConfig& config, std::shared_ptr<const MockFixture> sidecar);

std::filesystem::path sidecar_fixture_path(const std::filesystem::path& source_path);

}  // namespace docloop

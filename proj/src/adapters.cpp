#include "docloop/adapters.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "docloop/error.hpp"
#include "docloop/http_json.hpp"

namespace docloop {

namespace {

const char* env_name(AdapterKind kind) {
  switch (kind) {
    case AdapterKind::LayoutDetector: return "DOCLOOP_LAYOUT_DETECTOR_ENDPOINT";
    case AdapterKind::Ocr: return "DOCLOOP_OCR_ENDPOINT";
    case AdapterKind::TableExtractor: return "DOCLOOP_TABLE_EXTRACTOR_ENDPOINT";
    case AdapterKind::FormulaExtractor: return "DOCLOOP_FORMULA_EXTRACTOR_ENDPOINT";
    case AdapterKind::FigureDescriber: return "DOCLOOP_FIGURE_DESCRIBER_ENDPOINT";
  }
  return "";
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw not_found("file " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw format_error(path.string() + ": " + e.what());
  }
}

bool near(double a, double b) { return std::abs(a - b) <= 0.05; }

}  // namespace

const char* to_string(AdapterKind kind) {
  switch (kind) {
    case AdapterKind::LayoutDetector: return "LayoutDetector";
    case AdapterKind::Ocr: return "Ocr";
    case AdapterKind::TableExtractor: return "TableExtractor";
    case AdapterKind::FormulaExtractor: return "FormulaExtractor";
    case AdapterKind::FigureDescriber: return "FigureDescriber";
  }
  return "";
}

std::optional<AdapterKind> parse_adapter_kind(std::string_view name) {
  for (AdapterKind k : kAllAdapterKinds) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

AdapterKind extractor_for(BlockType type) {
  switch (type) {
    case BlockType::Table: return AdapterKind::TableExtractor;
    case BlockType::Formula: return AdapterKind::FormulaExtractor;
    case BlockType::Figure: return AdapterKind::FigureDescriber;
    default: return AdapterKind::Ocr;
  }
}

Json AdapterRequest::to_json() const {
  Json j{{"document_id", document_id},
         {"source_name", source_name},
         {"page_index", page_index},
         {"page_width", page_width},
         {"page_height", page_height}};
  if (crop) j["crop"] = {crop->x0, crop->y0, crop->x1, crop->y1};
  if (block_type) j["block_type"] = to_string(*block_type);
  if (text_layer) {
    Json runs = Json::array();
    for (const auto& r : text_layer->runs) {
      runs.push_back({{"text", r.text}, {"bbox", {r.x0, r.y0, r.x1, r.y1}}, {"font_size", r.font_size}});
    }
    j["text_layer"] = std::move(runs);
  }
  return j;
}

void validate_adapter_payload(AdapterKind kind, const Json& payload) {
  switch (kind) {
    case AdapterKind::LayoutDetector:
      parse_regions(payload);
      return;
    case AdapterKind::Ocr: validate_payload(BlockType::Text, payload); return;
    case AdapterKind::TableExtractor: validate_payload(BlockType::Table, payload); return;
    case AdapterKind::FormulaExtractor: validate_payload(BlockType::Formula, payload); return;
    case AdapterKind::FigureDescriber: validate_payload(BlockType::Figure, payload); return;
  }
}

std::vector<DetectedRegion> parse_regions(const Json& payload) {
  if (!payload.is_object() || !payload.contains("regions") || !payload.at("regions").is_array()) {
    throw schema_error("layout payload must hold a regions array");
  }
  std::vector<DetectedRegion> out;
  for (const auto& r : payload.at("regions")) {
    if (!r.is_object() || !r.contains("label") || !r.at("label").is_string() || !r.contains("bbox") ||
        !r.at("bbox").is_array() || r.at("bbox").size() != 4) {
      throw schema_error("malformed layout region " + r.dump());
    }
    DetectedRegion d;
    d.label = r.at("label").get<std::string>();
    for (const auto& v : r.at("bbox")) {
      if (!v.is_number()) throw schema_error("non-numeric bbox in " + r.dump());
    }
    d.x0 = r.at("bbox")[0].get<double>();
    d.y0 = r.at("bbox")[1].get<double>();
    d.x1 = r.at("bbox")[2].get<double>();
    d.y1 = r.at("bbox")[3].get<double>();
    out.push_back(std::move(d));
  }
  return out;
}

Json ReferenceAdapter::invoke(const AdapterRequest& request) const {
  if (!request.text_layer) {
    if (kind_ == AdapterKind::LayoutDetector) return Json{{"regions", Json::array()}};
    throw Error(ErrorCode::AdapterUnavailable, "reference extractor needs a text layer");
  }
  const PageText& page = *request.text_layer;
  if (kind_ == AdapterKind::LayoutDetector) {
    auto lines = group_lines(page);
    double body = body_font_size(lines);
    Json regions = Json::array();
    for (const auto& p : group_paragraphs(lines)) {
      const char* label = p.font_size >= 1.3 * body ? "title" : "text";
      regions.push_back({{"label", label}, {"bbox", {p.x0, p.y0, p.x1, p.y1}}});
    }
    return Json{{"regions", std::move(regions)}};
  }
  if (!request.crop) throw Error(ErrorCode::Invalid, "extractor request without crop");
  std::string text = text_in_box(page, *request.crop);
  if (text.empty()) throw Error(ErrorCode::AdapterUnavailable, "no text inside crop");
  switch (kind_) {
    case AdapterKind::Ocr: return Json{{"text", text}};
    case AdapterKind::TableExtractor: {
      Json cells = Json::array();
      for (const auto& line : group_lines(page)) {
        double cx = 0.5 * (line.x0 + line.x1), cy = 0.5 * (line.y0 + line.y1);
        const auto& c = *request.crop;
        if (cx >= c.x0 && cx <= c.x1 && cy >= c.y0 && cy <= c.y1) cells.push_back(Json::array({line.text}));
      }
      return Json{{"cells", std::move(cells)}};
    }
    case AdapterKind::FormulaExtractor: return Json{{"latex", text}, {"description", ""}};
    case AdapterKind::FigureDescriber: return Json{{"description", text}};
    default: break;
  }
  throw Error(ErrorCode::Internal, "unreachable adapter kind");
}

MockFixture MockFixture::from_json(const Json& j) {
  MockFixture f;
  try {
    for (const auto& name : j.value("unhealthy", Json::array())) {
      auto kind = parse_adapter_kind(name.get<std::string>());
      if (!kind) throw schema_error("unknown adapter kind " + name.dump());
      f.unhealthy.push_back(*kind);
    }
    for (const auto& p : j.value("pages", Json::array())) {
      PageFixture page;
      page.fail = p.value("fail", false);
      for (const auto& r : p.value("regions", Json::array())) {
        Region region;
        region.region = parse_regions(Json{{"regions", Json::array({r})}}).front();
        if (r.contains("payload")) region.payload = r.at("payload");
        region.fail = r.value("fail", false);
        page.regions.push_back(std::move(region));
      }
      f.pages[p.at("page_index").get<int>()] = std::move(page);
    }
  } catch (const Json::exception& e) {
    throw schema_error(std::string("malformed mock fixture: ") + e.what());
  }
  return f;
}

MockFixture MockFixture::load(const std::filesystem::path& path) { return from_json(read_json_file(path)); }

MockAdapter::MockAdapter(AdapterKind kind, std::shared_ptr<const MockFixture> fixture, std::optional<bool> healthy)
    : kind_(kind), fixture_(std::move(fixture)), healthy_(healthy) {
  if (!fixture_) fixture_ = std::make_shared<MockFixture>();
}

bool MockAdapter::health() const {
  if (healthy_) return *healthy_;
  for (AdapterKind k : fixture_->unhealthy) {
    if (k == kind_) return false;
  }
  return true;
}

Json MockAdapter::invoke(const AdapterRequest& request) const {
  if (!health()) throw Error(ErrorCode::AdapterUnavailable, std::string("mock ") + to_string(kind_) + " is unhealthy");
  auto page_it = fixture_->pages.find(request.page_index);
  if (kind_ == AdapterKind::LayoutDetector) {
    Json regions = Json::array();
    if (page_it != fixture_->pages.end()) {
      if (page_it->second.fail) {
        throw Error(ErrorCode::AdapterUnavailable, "mock detector failure on page " + std::to_string(request.page_index));
      }
      for (const auto& r : page_it->second.regions) {
        regions.push_back({{"label", r.region.label}, {"bbox", {r.region.x0, r.region.y0, r.region.x1, r.region.y1}}});
      }
    }
    return Json{{"regions", std::move(regions)}};
  }
  if (!request.crop) throw Error(ErrorCode::Invalid, "extractor request without crop");
  if (page_it != fixture_->pages.end()) {
    const auto& c = *request.crop;
    for (const auto& r : page_it->second.regions) {
      auto clipped = BoundingBox{request.page_index, r.region.x0, r.region.y0, r.region.x1, r.region.y1}.clipped(
          request.page_width, request.page_height);
      if (!clipped || !near(clipped->x0, c.x0) || !near(clipped->y0, c.y0) || !near(clipped->x1, c.x1) ||
          !near(clipped->y1, c.y1)) {
        continue;
      }
      if (request.block_type && block_type_from_label(r.region.label) != *request.block_type) continue;
      if (r.fail || !r.payload) break;
      return *r.payload;
    }
  }
  throw Error(ErrorCode::AdapterUnavailable, std::string("mock ") + to_string(kind_) + " has no fixture for region");
}

Json HttpAdapter::invoke(const AdapterRequest& request) const {
  Json body = request.to_json();
  body["adapter_kind"] = to_string(kind_);
  return post_json(endpoint_, body);
}

bool HttpAdapter::health() const {
  std::string url = endpoint_;
  if (!url.empty() && url.back() == '/') url.pop_back();
  return probe(url + "/health");
}

const AdapterSpec& AdapterConfig::spec(AdapterKind kind) const {
  static const AdapterSpec kDefault;
  auto it = specs.find(kind);
  return it == specs.end() ? kDefault : it->second;
}

AdapterConfig AdapterConfig::from_json(const Json& j) {
  AdapterConfig config;
  if (!j.is_object()) throw schema_error("adapter config must be an object");
  for (const auto& [name, value] : j.items()) {
    auto kind = parse_adapter_kind(name);
    if (!kind) throw schema_error("unknown adapter kind " + name);
    AdapterSpec spec;
    spec.mode = value.value("mode", std::string("auto"));
    if (spec.mode != "auto" && spec.mode != "reference" && spec.mode != "mock" && spec.mode != "http") {
      throw schema_error("unknown adapter mode " + spec.mode);
    }
    spec.endpoint = value.value("endpoint", std::string());
    spec.fixture = value.value("fixture", std::string());
    if (value.contains("healthy")) spec.healthy = value.at("healthy").get<bool>();
    config.specs[*kind] = std::move(spec);
  }
  return config;
}

AdapterConfig AdapterConfig::load(const std::filesystem::path& path) {
  AdapterConfig config = from_json(read_json_file(path));
  // relative fixture paths are resolved against the config file
  for (auto& [kind, spec] : config.specs) {
    if (!spec.fixture.empty() && std::filesystem::path(spec.fixture).is_relative()) {
      spec.fixture = (path.parent_path() / spec.fixture).string();
    }
  }
  return config;
}

void AdapterConfig::apply_env_overrides() {
  for (AdapterKind k : kAllAdapterKinds) {
    if (const char* v = std::getenv(env_name(k)); v && *v) {
      specs[k].mode = "http";
      specs[k].endpoint = v;
    }
  }
}

void AdapterSet::set(std::shared_ptr<const ExtractionAdapter> adapter) {
  AdapterKind k = adapter->kind();
  by_kind_[k] = std::move(adapter);
}

const ExtractionAdapter& AdapterSet::get(AdapterKind kind) const {
  auto it = by_kind_.find(kind);
  if (it == by_kind_.end()) {
    throw Error(ErrorCode::AdapterUnavailable, std::string("no ") + to_string(kind) + " adapter configured");
  }
  return *it->second;
}

std::filesystem::path sidecar_fixture_path(const std::filesystem::path& source_path) {
  return source_path.string() + ".fixture.json";
}

AdapterSet make_adapters(const AdapterConfig& config, const std::filesystem::path& source_path) {
  std::shared_ptr<const MockFixture> sidecar;
  if (!source_path.empty() && std::filesystem::exists(sidecar_fixture_path(source_path))) {
    sidecar = std::make_shared<MockFixture>(MockFixture::load(sidecar_fixture_path(source_path)));
  }
  return make_adapters(config, sidecar);
}

AdapterSet make_adapters(const AdapterConfig& config, std::shared_ptr<const MockFixture> sidecar) {
  AdapterSet set;
  std::map<std::string, std::shared_ptr<const MockFixture>> loaded;
  for (AdapterKind kind : kAllAdapterKinds) {
    const AdapterSpec& spec = config.spec(kind);
    std::shared_ptr<const MockFixture> fixture = sidecar;
    if (!spec.fixture.empty()) {
      auto& slot = loaded[spec.fixture];
      if (!slot) slot = std::make_shared<MockFixture>(MockFixture::load(spec.fixture));
      fixture = slot;
    }
    std::string mode = spec.mode;
    if (mode == "auto") mode = fixture ? "mock" : "reference";
    if (mode == "reference") {
      set.set(std::make_shared<ReferenceAdapter>(kind));
    } else if (mode == "mock") {
      set.set(std::make_shared<MockAdapter>(kind, fixture, spec.healthy));
    } else if (mode == "http") {
      if (spec.endpoint.empty()) {
        throw Error(ErrorCode::Invalid, std::string("http adapter ") + to_string(kind) + " has no endpoint");
      }
      set.set(std::make_shared<HttpAdapter>(kind, spec.endpoint));
    } else {
      throw schema_error("unknown adapter mode " + mode);
    }
  }
  return set;
}

}  // namespace docloop

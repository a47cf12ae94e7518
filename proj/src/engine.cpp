#include "docloop/engine.hpp"

#include <cstdlib>
#include <iostream>

#include "docloop/error.hpp"

namespace docloop {

namespace {

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

std::string safe_filename(const std::string& name) {
  std::string base = std::filesystem::path(name).filename().string();
  if (base.empty() || base == "." || base == "..") throw schema_error("invalid source name '" + name + "'");
  return base;
}

}  // namespace

EngineConfig EngineConfig::from_json(const Json& j) {
  EngineConfig c;
  try {
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    c.data_dir = j.value("data_dir", c.data_dir.string());
    c.k = j.value("k", c.k);
    if (j.contains("llm")) {
      const auto& l = j.at("llm");
      c.llm_mode = l.value("mode", c.llm_mode);
      c.llm_endpoint = l.value("endpoint", c.llm_endpoint);
    }
    if (j.contains("embedder")) {
      const auto& e = j.at("embedder");
      c.embedder_mode = e.value("mode", c.embedder_mode);
      c.embedder_endpoint = e.value("endpoint", c.embedder_endpoint);
      c.embedder_name = e.value("name", c.embedder_name);
      c.embedder_dimension = e.value("dimension", c.embedder_dimension);
    }
    if (j.contains("adapters")) c.adapters = AdapterConfig::from_json(j.at("adapters"));
    if (j.contains("jobs")) {
      c.job_workers = j.at("jobs").value("workers", c.job_workers);
      c.job_queue_limit = j.at("jobs").value("queue_limit", c.job_queue_limit);
    }
    c.rasterizer = j.value("rasterizer", c.rasterizer);
  } catch (const Json::exception& e) {
    throw schema_error(std::string("config: ") + e.what());
  }
  if (c.k < 1) throw schema_error("config: k must be at least 1");
  if (c.llm_mode != "mock" && c.llm_mode != "http") throw schema_error("config: llm.mode must be mock or http");
  if (c.embedder_mode != "reference" && c.embedder_mode != "http") {
    throw schema_error("config: embedder.mode must be reference or http");
  }
  if (c.job_workers < 1) throw schema_error("config: jobs.workers must be at least 1");
  return c;
}

EngineConfig EngineConfig::load(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw format_error("config " + path.string() + ": " + e.what());
  }
  EngineConfig c = from_json(j);
  if (c.data_dir.is_relative()) c.data_dir = path.parent_path() / c.data_dir;
  return c;
}

void EngineConfig::apply_env_overrides() {
  if (auto v = env("DOCLOOP_HOST")) host = *v;
  if (auto v = env("DOCLOOP_PORT")) port = std::stoi(*v);
  if (auto v = env("DOCLOOP_DATA_DIR")) data_dir = *v;
  if (auto v = env("DOCLOOP_K")) k = std::stoul(*v);
  if (auto v = env("DOCLOOP_LLM_MODE")) llm_mode = *v;
  if (auto v = env("DOCLOOP_LLM_ENDPOINT")) {
    llm_endpoint = *v;
    llm_mode = "http";
  }
  if (auto v = env("DOCLOOP_EMBEDDER_MODE")) embedder_mode = *v;
  if (auto v = env("DOCLOOP_EMBEDDER_ENDPOINT")) {
    embedder_endpoint = *v;
    embedder_mode = "http";
  }
  adapters.apply_env_overrides();
}

const char* to_string(JobStatus status) {
  switch (status) {
    case JobStatus::Queued: return "queued";
    case JobStatus::Running: return "running";
    case JobStatus::Succeeded: return "succeeded";
    case JobStatus::Failed: return "failed";
  }
  return "";
}

Json JobRecord::to_json() const {
  Json j{{"job_id", job_id}, {"source_name", source_name}, {"status", to_string(status)}};
  if (result) j["result"] = *result;
  return j;
}

std::shared_ptr<Embedder> make_embedder(const EngineConfig& config) {
  if (config.embedder_mode == "http") {
    if (config.embedder_endpoint.empty() || config.embedder_dimension == 0) {
      throw schema_error("config: http embedder needs endpoint and dimension");
    }
    std::string name = config.embedder_name.empty() ? "http:" + config.embedder_endpoint : config.embedder_name;
    return std::make_shared<HttpEmbedder>(config.embedder_endpoint, name, config.embedder_dimension);
  }
  return std::make_shared<ReferenceEmbedder>();
}

std::shared_ptr<LlmAdapter> make_llm(const EngineConfig& config) {
  if (config.llm_mode == "http") {
    if (config.llm_endpoint.empty()) throw schema_error("config: http LLM needs an endpoint");
    return std::make_shared<HttpLlm>(config.llm_endpoint);
  }
  return std::make_shared<MockLlm>();
}

Engine::Engine(EngineConfig config, std::shared_ptr<Clock> clock, std::shared_ptr<LlmAdapter> llm)
    : config_(std::move(config)),
      clock_(std::move(clock)),
      llm_(llm ? std::move(llm) : make_llm(config_)),
      store_(config_.data_dir / "documents"),
      index_(make_embedder(config_)),
      edits_(config_.data_dir / "edits.jsonl"),
      events_(config_.data_dir / "events.jsonl", clock_),
      validator_(store_, edits_, clock_),
      pipeline_(store_, index_, clock_),
      sessions_(store_, index_, events_, llm_, clock_,
                SessionOptions{config_.k, 4000, config_.data_dir / "sessions"}),
      reports_(store_, llm_, config_.data_dir / "reports") {
  std::filesystem::create_directories(config_.data_dir);
  store_.load_all();
  if (std::filesystem::exists(config_.data_dir / "index.json")) {
    index_.load(config_.data_dir / "index.json");
  } else {
    for (const auto& d : store_.documents()) {
      if (d.processing_state != ProcessingState::Indexed) continue;
      for (const auto* b : d.blocks()) {
        if (b->indexable()) index_.upsert(*b);
      }
    }
  }
  edits_.load();
  events_.load();
  sessions_.load();
  reports_.load();

  validator_.set_reindex_hook([this](const LayoutBlock& b) {
    if (b.indexable()) {
      index_.upsert(b);
    } else {
      index_.remove(b.block_id);
    }
    save_index();
  });

  for (std::size_t i = 0; i < config_.job_workers; ++i) workers_.emplace_back([this] { worker_loop(); });
}

Engine::~Engine() {
  {
    std::lock_guard lock(jobs_mutex_);
    stopping_ = true;
  }
  jobs_cv_.notify_all();
  for (auto& t : workers_) t.join();
}

void Engine::save_index() {
  std::lock_guard lock(index_save_mutex_);
  index_.save(config_.data_dir / "index.json");
}

PipelineJob Engine::ingest_file(const std::filesystem::path& path) {
  std::string job_id;
  {
    std::lock_guard lock(jobs_mutex_);
    char buf[32];
    std::snprintf(buf, sizeof buf, "job-%06zu", next_job_++);
    job_id = buf;
  }
  PipelineJob job = pipeline_.run_file(path, config_.adapters, job_id);
  save_index();
  install_page_images(path, job);
  std::lock_guard lock(jobs_mutex_);
  JobRecord rec{job_id, job.source_name, job.stage == ProcessingState::Failed ? JobStatus::Failed : JobStatus::Succeeded,
                job};
  jobs_[job_id] = rec;
  return job;
}

std::string Engine::submit_upload(std::string bytes, const std::string& source_name,
                                  const std::optional<std::string>& fixture_json) {
  std::string name = safe_filename(source_name);
  std::lock_guard lock(jobs_mutex_);
  if (queue_.size() >= config_.job_queue_limit) {
    throw Error(ErrorCode::AdapterUnavailable, "ingestion queue is full", {{"kind", "queue_full"}});
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "job-%06zu", next_job_++);
  std::string job_id = buf;
  auto dir = config_.data_dir / "uploads" / job_id;
  std::filesystem::create_directories(dir);
  auto path = dir / name;
  write_file_atomic(path, bytes);
  if (fixture_json) write_file_atomic(sidecar_fixture_path(path), *fixture_json);
  jobs_[job_id] = JobRecord{job_id, name, JobStatus::Queued, std::nullopt};
  queue_.emplace_back(job_id, path);
  jobs_cv_.notify_one();
  return job_id;
}

void Engine::worker_loop() {
  for (;;) {
    std::pair<std::string, std::filesystem::path> item;
    {
      std::unique_lock lock(jobs_mutex_);
      jobs_cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (stopping_ && queue_.empty()) return;
      item = std::move(queue_.front());
      queue_.pop_front();
      jobs_[item.first].status = JobStatus::Running;
    }
    PipelineJob job = pipeline_.run_file(item.second, config_.adapters, item.first);
    try {
      save_index();
      install_page_images(item.second, job);
    } catch (const std::exception& e) {
      std::cerr << "docloop: post-ingest step for " << item.first << " failed: " << e.what() << "\n";
    }
    {
      std::lock_guard lock(jobs_mutex_);
      auto& rec = jobs_[item.first];
      rec.result = job;
      rec.status = job.stage == ProcessingState::Failed ? JobStatus::Failed : JobStatus::Succeeded;
    }
    done_cv_.notify_all();
  }
}

JobRecord Engine::wait_job(const std::string& job_id) {
  std::unique_lock lock(jobs_mutex_);
  if (!jobs_.count(job_id)) throw not_found("job " + job_id);
  done_cv_.wait(lock, [&] {
    auto s = jobs_.at(job_id).status;
    return s == JobStatus::Succeeded || s == JobStatus::Failed;
  });
  return jobs_.at(job_id);
}

JobRecord Engine::job(const std::string& job_id) const {
  std::lock_guard lock(jobs_mutex_);
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) throw not_found("job " + job_id);
  return it->second;
}

std::vector<LayoutBlock> Engine::page_blocks(const std::string& document_id, int page_index) const {
  Document doc = store_.require(document_id);
  for (auto& page : doc.pages) {
    if (page.page_index == page_index) return std::move(page.blocks);
  }
  throw not_found("page " + std::to_string(page_index) + " of " + document_id);
}

std::optional<std::filesystem::path> Engine::page_image(const std::string& document_id, int page_index) const {
  auto p = config_.data_dir / "pages" / document_id / (std::to_string(page_index) + ".png");
  if (std::filesystem::exists(p)) return p;
  return std::nullopt;
}

void Engine::install_page_images(const std::filesystem::path& source, const PipelineJob& job) {
  if (job.document_id.empty() || job.stage == ProcessingState::Failed) return;
  auto out_dir = config_.data_dir / "pages" / job.document_id;
  auto supplied = std::filesystem::path(source.string() + ".pages");
  if (std::filesystem::is_directory(supplied)) {
    std::filesystem::create_directories(out_dir);
    for (const auto& f : std::filesystem::directory_iterator(supplied)) {
      std::filesystem::copy_file(f.path(), out_dir / f.path().filename(),
                                 std::filesystem::copy_options::overwrite_existing);
    }
    return;
  }
  if (config_.rasterizer.empty() || format_from_path(source) != SourceFormat::Pdf) return;
  std::filesystem::create_directories(out_dir);
  std::string cmd = config_.rasterizer;
  replace_all(cmd, "{input}", shell_quote(std::filesystem::absolute(source).string()));
  replace_all(cmd, "{output_dir}", shell_quote(std::filesystem::absolute(out_dir).string()));
  if (std::system(cmd.c_str()) != 0) std::cerr << "docloop: rasterizer failed for " << source << "\n";
}

ExperimentResult Engine::run_eval(const std::vector<SessionScript>& scripts,
                                  const std::vector<std::string>& strategies) {
  ExperimentOptions opts;
  opts.k = config_.k;
  if (config_.llm_mode == "mock") {
    opts.make_llm = [] { return std::make_shared<MockLlm>(); };
  } else {
    opts.make_llm = [this] { return llm_; };
  }
  for (const auto& s : strategies) sessions_.strategies().get(s);
  return run_experiment(store_, index_, scripts, strategies, opts);
}

}  // namespace docloop

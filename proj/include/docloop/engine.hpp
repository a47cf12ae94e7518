#pragma once

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "docloop/adapters.hpp"
#include "docloop/block_store.hpp"
#include "docloop/embedding_index.hpp"
#include "docloop/evaluation.hpp"
#include "docloop/events.hpp"
#include "docloop/ingestion.hpp"
#include "docloop/llm.hpp"
#include "docloop/report.hpp"
#include "docloop/session.hpp"
#include "docloop/validation.hpp"

namespace docloop {

struct EngineConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path data_dir = "data";
  std::size_t k = kDefaultTopK;
  std::string llm_mode = "mock";  // mock | http
  std::string llm_endpoint;
  std::string embedder_mode = "reference";  // reference | http
  std::string embedder_endpoint;
  std::string embedder_name;
  std::size_t embedder_dimension = 0;
  AdapterConfig adapters;
  std::size_t job_workers = 2;
  std::size_t job_queue_limit = 64;
  // Shell command run after a PDF is ingested; {input} and {output_dir} are
  // replaced by quoted paths. Expected to write <page_index>.png files.
  std::string rasterizer;

  static EngineConfig from_json(const Json& j);
  static EngineConfig load(const std::filesystem::path& path);
  // DOCLOOP_PORT, DOCLOOP_HOST, DOCLOOP_DATA_DIR, DOCLOOP_K, DOCLOOP_LLM_MODE,
  // DOCLOOP_LLM_ENDPOINT, DOCLOOP_EMBEDDER_MODE, DOCLOOP_EMBEDDER_ENDPOINT and
  // the adapter endpoint variables.
  void apply_env_overrides();
};

enum class JobStatus { Queued, Running, Succeeded, Failed };

const char* to_string(JobStatus status);

struct JobRecord {
  std::string job_id;
  std::string source_name;
  JobStatus status = JobStatus::Queued;
  std::optional<PipelineJob> result;

  Json to_json() const;
};

// Owns every module and their on-disk state under data_dir:
//   documents/  index.json  edits.jsonl  events.jsonl  sessions/  reports/
//   uploads/    pages/<document_id>/<page_index>.png
class Engine {
 public:
  explicit Engine(EngineConfig config, std::shared_ptr<Clock> clock = system_clock(),
                  std::shared_ptr<LlmAdapter> llm = nullptr);
  ~Engine();
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  const EngineConfig& config() const { return config_; }

  // Synchronous ingestion of a file on disk (sidecar fixtures are honoured).
  PipelineJob ingest_file(const std::filesystem::path& path);
  // Stores the upload and queues it; returns the job id.
  std::string submit_upload(std::string bytes, const std::string& source_name,
                            const std::optional<std::string>& fixture_json = std::nullopt);
  JobRecord wait_job(const std::string& job_id);
  JobRecord job(const std::string& job_id) const;

  std::vector<Document> documents() const { return store_.documents(); }
  Document document(const std::string& document_id) const { return store_.require(document_id); }
  std::vector<LayoutBlock> page_blocks(const std::string& document_id, int page_index) const;
  BlockRef block(const std::string& block_id) const { return store_.require_block(block_id); }
  std::vector<ValidationEdit> block_history(const std::string& block_id) const { return edits_.for_block(block_id); }
  std::optional<std::filesystem::path> page_image(const std::string& document_id, int page_index) const;

  LayoutBlock apply_edit(ValidationEdit edit) { return validator_.apply_edit(std::move(edit)); }
  PendingPage pending(const std::string& document_id, const PendingFilter& filter,
                      const std::optional<std::string>& cursor, std::size_t page_size) const {
    return validator_.list_pending(document_id, filter, cursor, page_size);
  }

  SessionManager& sessions() { return sessions_; }
  ReportService& reports() { return reports_; }
  BlockStore& store() { return store_; }
  VectorIndex& index() { return index_; }
  EventLog& events() { return events_; }
  EditLog& edits() { return edits_; }

  ExperimentResult run_eval(const std::vector<SessionScript>& scripts, const std::vector<std::string>& strategies);

  void save_index();

 private:
  void worker_loop();
  void install_page_images(const std::filesystem::path& source, const PipelineJob& job);

  EngineConfig config_;
  std::shared_ptr<Clock> clock_;
  std::shared_ptr<LlmAdapter> llm_;
  BlockStore store_;
  VectorIndex index_;
  EditLog edits_;
  EventLog events_;
  Validator validator_;
  Pipeline pipeline_;
  SessionManager sessions_;
  ReportService reports_;

  std::mutex index_save_mutex_;

  mutable std::mutex jobs_mutex_;
  std::condition_variable jobs_cv_;
  std::condition_variable done_cv_;
  std::deque<std::pair<std::string, std::filesystem::path>> queue_;
  std::map<std::string, JobRecord> jobs_;
  std::size_t next_job_ = 1;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

std::shared_ptr<Embedder> make_embedder(const EngineConfig& config);
std::shared_ptr<LlmAdapter> make_llm(const EngineConfig& config);

}  // namespace docloop

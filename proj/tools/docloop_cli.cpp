#include <algorithm>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <unistd.h>

#include "CLI11.hpp"
#include "docloop/api.hpp"
#include "docloop/engine.hpp"
#include "docloop/error.hpp"

namespace fs = std::filesystem;
using namespace docloop;

namespace {

ApiServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

struct Common {
  std::string config;
  std::string data_dir;
};

EngineConfig load_config(const Common& c) {
  EngineConfig cfg = c.config.empty() ? EngineConfig{} : EngineConfig::load(c.config);
  cfg.apply_env_overrides();
  if (!c.data_dir.empty()) cfg.data_dir = c.data_dir;
  return cfg;
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "Service config file (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("-d,--data", c.data_dir, "Data directory");
}

bool is_source(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  return ext == ".pdf" || ext == ".txt" || ext == ".md" || ext == ".markdown";
}

std::vector<fs::path> corpus_files(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& f : fs::directory_iterator(dir)) {
    if (f.is_regular_file() && is_source(f.path())) out.push_back(f.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void write_out(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Internal, "cannot write " + path);
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"docloop: layout-aware document retrieval with human curation"};
  app.require_subcommand(1);

  Common ingest_opts;
  std::vector<std::string> ingest_files;
  auto* ingest = app.add_subcommand("ingest", "Ingest PDF, text or markdown files into the data directory");
  add_common(ingest, ingest_opts);
  ingest->add_option("files", ingest_files, "Source files")->required()->check(CLI::ExistingFile);

  Common report_opts;
  std::string report_id, report_format = "md", report_out;
  auto* report = app.add_subcommand("report", "Report operations");
  report->require_subcommand(1);
  auto* report_export = report->add_subcommand("export", "Render a report as markdown or html");
  add_common(report_export, report_opts);
  report_export->add_option("report_id", report_id, "Report id")->required();
  report_export->add_option("-f,--format", report_format, "md or html")->check(CLI::IsMember({"md", "markdown", "html"}));
  report_export->add_option("-o,--out", report_out, "Output file (default stdout)");

  Common eval_opts;
  std::string corpus_dir, scripts_dir, strategies = "naive,label,symbiotic", eval_json;
  std::size_t eval_k = 0;
  auto* eval = app.add_subcommand("eval", "Evaluation");
  eval->require_subcommand(1);
  auto* eval_run = eval->add_subcommand("run", "Replay scripted sessions under each strategy and tabulate D and S");
  add_common(eval_run, eval_opts);
  eval_run->add_option("--corpus", corpus_dir, "Directory of source documents to ingest first")
      ->check(CLI::ExistingDirectory);
  eval_run->add_option("--scripts", scripts_dir, "Directory of session scripts (*.json)")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval_run->add_option("--strategies", strategies, "Comma-separated strategy names");
  eval_run->add_option("-k", eval_k, "Blocks per retrieval (default from config)");
  eval_run->add_option("--json", eval_json, "Write the machine-readable table here");

  Common serve_opts;
  std::string host;
  int port = -1;
  bool verbose = false;
  auto* serve = app.add_subcommand("serve", "Run the HTTP/JSON service");
  add_common(serve, serve_opts);
  serve->add_option("--host", host, "Bind address");
  serve->add_option("-p,--port", port, "Port (0 picks a free one)");
  serve->add_flag("-v,--verbose", verbose, "Log requests to stderr");

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest->parsed()) {
      EngineConfig cfg = load_config(ingest_opts);
      cfg.job_workers = 1;
      Engine engine(cfg);
      int failures = 0;
      for (const auto& f : ingest_files) {
        PipelineJob job = engine.ingest_file(f);
        if (job.stage == ProcessingState::Failed) ++failures;
        std::cout << Json(job).dump() << "\n";
      }
      return failures ? 1 : 0;
    }

    if (report_export->parsed()) {
      Engine engine(load_config(report_opts));
      auto fmt = parse_export_format(report_format);
      write_out(report_out, engine.reports().export_report(report_id, *fmt));
      return 0;
    }

    if (eval_run->parsed()) {
      EngineConfig cfg = load_config(eval_opts);
      std::optional<fs::path> scratch;
      if (eval_opts.data_dir.empty() && eval_opts.config.empty()) {
        scratch = fs::temp_directory_path() / ("docloop-eval-" + std::to_string(::getpid()));
        cfg.data_dir = *scratch;
      }
      if (eval_k > 0) cfg.k = eval_k;
      int rc = 0;
      {
        Engine engine(cfg);
        if (!corpus_dir.empty()) {
          for (const auto& f : corpus_files(corpus_dir)) {
            PipelineJob job = engine.ingest_file(f);
            if (job.stage == ProcessingState::Failed) {
              std::cerr << "ingest failed: " << f << ": " << job.error_message.value_or("") << "\n";
              rc = 1;
            }
          }
        }
        ExperimentResult result = engine.run_eval(load_scripts(scripts_dir), split_csv(strategies));
        std::cout << result.render_table();
        if (!eval_json.empty()) write_out(eval_json, result.to_json().dump(2) + "\n");
      }
      if (scratch) fs::remove_all(*scratch);
      return rc;
    }

    if (serve->parsed()) {
      EngineConfig cfg = load_config(serve_opts);
      if (!host.empty()) cfg.host = host;
      if (port >= 0) cfg.port = port;
      Engine engine(cfg);
      ApiServer server(engine);
      server.set_verbose(verbose);
      int bound = server.bind(cfg.host, cfg.port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "docloop listening on http://" << cfg.host << ":" << bound << " (data " << cfg.data_dir.string()
                << ")\n";
      server.listen();
      g_server = nullptr;
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    if (!e.detail().empty()) std::cerr << e.detail().dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

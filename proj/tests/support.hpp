#pragma once

#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "docloop/engine.hpp"

#ifndef DOCLOOP_FIXTURE_DIR
#error "DOCLOOP_FIXTURE_DIR must be defined"
#endif

namespace testsupport {

namespace fs = std::filesystem;

inline fs::path fixture_dir() { return fs::path(DOCLOOP_FIXTURE_DIR); }
inline fs::path corpus_dir() { return fixture_dir() / "corpus"; }

inline const std::vector<std::string>& corpus_files() {
  static const std::vector<std::string> files = {"assay_report.pdf", "field_notes.md", "site_log.txt"};
  return files;
}

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "docloop-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string pdf_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '(' || c == ')' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

// Minimal uncompressed PDF: one Helvetica line per entry, left margin 72,
// first baseline `top + size` points below the top edge. An empty string
// leaves a blank line.
inline std::string make_pdf(const std::vector<std::vector<std::string>>& pages, double size = 10,
                            double leading = 12, double top = 72) {
  std::vector<std::string> objects;
  std::size_t n_pages = pages.size();
  // 1 catalog, 2 pages, 3 font, then (page, content) pairs.
  std::string kids;
  for (std::size_t i = 0; i < n_pages; ++i) kids += std::to_string(4 + 2 * i) + " 0 R ";
  objects.push_back("<< /Type /Catalog /Pages 2 0 R >>");
  objects.push_back("<< /Type /Pages /Kids [" + kids + "] /Count " + std::to_string(n_pages) + " >>");
  objects.push_back("<< /Type /Font /Subtype /Type1 /BaseFont /Helvetica >>");
  for (std::size_t i = 0; i < n_pages; ++i) {
    std::ostringstream content;
    for (std::size_t l = 0; l < pages[i].size(); ++l) {
      if (pages[i][l].empty()) continue;
      double y = 792 - (top + size + l * leading);
      content << "BT /F1 " << size << " Tf 72 " << y << " Td (" << pdf_escape(pages[i][l]) << ") Tj ET\n";
    }
    std::string stream = content.str();
    objects.push_back("<< /Type /Page /Parent 2 0 R /MediaBox [0 0 612 792] /Resources << /Font << /F1 3 0 R >> >> "
                      "/Contents " +
                      std::to_string(5 + 2 * i) + " 0 R >>");
    objects.push_back("<< /Length " + std::to_string(stream.size()) + " >>\nstream\n" + stream + "endstream");
  }
  std::string out = "%PDF-1.4\n";
  std::vector<std::size_t> offsets;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    offsets.push_back(out.size());
    out += std::to_string(i + 1) + " 0 obj\n" + objects[i] + "\nendobj\n";
  }
  std::size_t xref = out.size();
  out += "xref\n0 " + std::to_string(objects.size() + 1) + "\n0000000000 65535 f \n";
  for (auto off : offsets) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%010zu 00000 n \n", off);
    out += buf;
  }
  out += "trailer\n<< /Size " + std::to_string(objects.size() + 1) + " /Root 1 0 R >>\nstartxref\n" +
         std::to_string(xref) + "\n%%EOF\n";
  return out;
}

inline void write_text(const fs::path& path, const std::string& text) { docloop::write_file_atomic(path, text); }

// Engine over `data_dir` with the three-document fixture corpus ingested.
inline std::unique_ptr<docloop::Engine> corpus_engine(const fs::path& data_dir,
                                                      std::shared_ptr<docloop::Clock> clock =
                                                          std::make_shared<docloop::SteppingClock>(),
                                                      std::shared_ptr<docloop::LlmAdapter> llm = nullptr) {
  docloop::EngineConfig cfg;
  cfg.data_dir = data_dir;
  cfg.job_workers = 1;
  auto engine = std::make_unique<docloop::Engine>(cfg, std::move(clock), std::move(llm));
  for (const auto& f : corpus_files()) {
    auto job = engine->ingest_file(corpus_dir() / f);
    if (job.stage != docloop::ProcessingState::Indexed) {
      throw std::runtime_error("fixture ingest failed: " + f + ": " + job.error_message.value_or(""));
    }
  }
  return engine;
}

inline std::map<std::string, std::string> doc_ids_by_name(const docloop::BlockStore& store) {
  std::map<std::string, std::string> out;
  for (const auto& d : store.documents()) out[d.source_name] = d.document_id;
  return out;
}

// Text of every block in the store, by block id.
inline std::map<std::string, docloop::LayoutBlock> all_blocks(const docloop::BlockStore& store) {
  std::map<std::string, docloop::LayoutBlock> out;
  for (const auto& d : store.documents()) {
    for (const auto* b : d.blocks()) out[b->block_id] = *b;
  }
  return out;
}

}  // namespace testsupport

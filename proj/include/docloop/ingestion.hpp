#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "docloop/adapters.hpp"
#include "docloop/block_store.hpp"
#include "docloop/clock.hpp"
#include "docloop/embedding_index.hpp"
#include "docloop/model.hpp"
#include "docloop/text_layer.hpp"

namespace docloop {

enum class SourceFormat { Pdf, Txt, Md };

const char* to_string(SourceFormat f);
// Accepts "pdf", "txt", "md" (and "markdown"); anything else is rejected.
SourceFormat parse_source_format(std::string_view name);
SourceFormat format_from_path(const std::filesystem::path& path);

// Plain-text pagination policy.
inline constexpr int kLinesPerPage = 60;
inline constexpr double kTextPageWidth = 612.0;
inline constexpr double kTextPageHeight = 792.0;
inline constexpr double kTextTopMargin = 66.0;
inline constexpr double kTextLeftMargin = 72.0;
inline constexpr double kTextLeading = 11.0;
inline constexpr double kTextFontSize = 10.0;
inline constexpr double kHeadingFontSize = 14.0;

// A document together with the text layer read during normalization.
struct NormalizedSource {
  Document document;
  std::vector<PageText> text_layer;
};

// Content hash of the source bytes; re-ingesting identical bytes yields the
// same document (and therefore the same block ids).
std::string document_identity(std::string_view bytes);

// Produces a Normalized document. txt/md are laid out as synthetic
// single-column pages of kLinesPerPage lines; markdown headings get a larger
// font so the reference detector labels them Title.
// Errors: unreadable bytes -> format error, no pages -> Invalid{kind: empty_document}.
NormalizedSource normalize(std::string_view bytes, SourceFormat format, const std::string& source_name);

// Raised when the detector fails on a page; carries the page index.
class PageFailure : public std::runtime_error {
 public:
  PageFailure(int page_index, const std::string& message) : std::runtime_error(message), page_index_(page_index) {}
  int page_index() const { return page_index_; }

 private:
  int page_index_;
};

// Runs the detector over every page (fanned out, merged in page order),
// clips regions to the page and stores typed blocks in reading order.
// Overlapping detections are kept; exact duplicates collapse to one id.
void detect_layout(NormalizedSource& source, const ExtractionAdapter& detector);

struct ExtractionSummary {
  std::size_t extracted = 0;
  std::size_t flagged = 0;
};

// Fills raw_payload and text_repr for every block. A failing adapter flags
// the block needs_validation instead of failing the document.
ExtractionSummary extract_blocks(NormalizedSource& source, const AdapterSet& adapters);

struct PipelineJob {
  std::string job_id;
  std::string document_id;
  std::string source_name;
  ProcessingState stage = ProcessingState::Uploaded;
  std::optional<ProcessingState> failed_stage;
  std::optional<int> failed_page;
  std::vector<std::pair<ProcessingState, std::int64_t>> stage_timestamps;
  std::optional<std::string> error_message;
  std::size_t blocks_extracted = 0;
  std::size_t blocks_flagged = 0;
};

void to_json(Json& j, const PipelineJob& job);

// normalize -> detect_layout -> extract_blocks -> index, recording each
// stage transition. Never throws for stage errors: they end the job Failed.
class Pipeline {
 public:
  Pipeline(BlockStore& store, VectorIndex& index, std::shared_ptr<Clock> clock = system_clock());

  PipelineJob run(std::string_view bytes, SourceFormat format, const std::string& source_name,
                  const AdapterSet& adapters, const std::string& job_id = {});
  PipelineJob run_file(const std::filesystem::path& path, const AdapterConfig& config, const std::string& job_id = {});

 private:
  BlockStore& store_;
  VectorIndex& index_;
  std::shared_ptr<Clock> clock_;
};

}  // namespace docloop

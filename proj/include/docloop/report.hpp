#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "docloop/block_store.hpp"
#include "docloop/llm.hpp"

namespace docloop {

struct ReportSection {
  std::string section_id;
  std::string heading;
  std::string instruction;
  std::vector<std::string> block_ids;
  std::string draft;
  std::int64_t draft_revision = 0;

  bool operator==(const ReportSection&) const = default;
};

struct Report {
  std::string report_id;
  std::string session_id;
  std::string title;
  std::vector<ReportSection> sections;
  std::size_t next_section = 1;

  const ReportSection* find_section(const std::string& section_id) const;
  ReportSection* find_section(const std::string& section_id);
  bool operator==(const Report&) const = default;
};

void to_json(Json& j, const ReportSection& s);
void from_json(const Json& j, ReportSection& s);
void to_json(Json& j, const Report& r);
void from_json(const Json& j, Report& r);

enum class ExportFormat { Markdown, Html };

std::optional<ExportFormat> parse_export_format(std::string_view name);

// Pure renderings. Cited blocks are looked up in `store`.
std::string render_markdown(const Report& report, const BlockStore& store);
std::string render_html(const Report& report, const BlockStore& store);
std::string section_prompt(const ReportSection& section, const BlockStore& store);

// Reports are single-writer: mutations on one report are serialized.
class ReportService {
 public:
  ReportService(BlockStore& store, std::shared_ptr<LlmAdapter> llm, std::filesystem::path dir = {});

  void load();

  Report create(const std::string& session_id, const std::string& title);
  Report get(const std::string& report_id) const;
  std::vector<std::string> report_ids() const;

  // `position` defaults to the end.
  Report add_section(const std::string& report_id, const std::string& heading, const std::string& instruction = {},
                     std::optional<std::size_t> position = std::nullopt);
  Report remove_section(const std::string& report_id, const std::string& section_id);
  Report move_section(const std::string& report_id, const std::string& section_id, std::size_t position);
  Report set_heading(const std::string& report_id, const std::string& section_id, const std::string& heading);
  Report set_instruction(const std::string& report_id, const std::string& section_id, const std::string& instruction);
  Report assign_block(const std::string& report_id, const std::string& section_id, const std::string& block_id,
                      std::optional<std::size_t> position = std::nullopt);
  Report unassign_block(const std::string& report_id, const std::string& section_id, const std::string& block_id);
  std::string generate_section(const std::string& report_id, const std::string& section_id);
  Report edit_draft(const std::string& report_id, const std::string& section_id, const std::string& draft);

  std::string export_report(const std::string& report_id, ExportFormat format) const;

 private:
  struct Entry {
    std::mutex mutex;
    Report report;
  };

  std::shared_ptr<Entry> entry(const std::string& report_id) const;
  Report mutate(const std::string& report_id, const std::function<void(Report&)>& fn);
  void persist(const Report& r) const;

  BlockStore& store_;
  std::shared_ptr<LlmAdapter> llm_;
  std::filesystem::path dir_;
  mutable std::shared_mutex map_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> reports_;
  std::size_t next_report_ = 1;
};

}  // namespace docloop

#include "docloop/llm.hpp"

#include "docloop/error.hpp"
#include "docloop/http_json.hpp"

namespace docloop {

namespace {

std::string after_last_marker(std::string_view text, std::string_view marker) {
  auto pos = text.rfind(marker);
  if (pos == std::string_view::npos) return {};
  auto start = pos + marker.size();
  auto end = text.find('\n', start);
  return std::string(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
}

}  // namespace

const char* to_string(LlmPurpose purpose) {
  switch (purpose) {
    case LlmPurpose::IntentionSummary: return "intention_summary";
    case LlmPurpose::Answer: return "answer";
    case LlmPurpose::ReportSection: return "report_section";
  }
  return "";
}

nlohmann::json LlmRequest::to_json() const {
  return {{"purpose", to_string(purpose)}, {"prompt", prompt}, {"max_chars", max_chars}};
}

std::string truncate_utf8(std::string text, std::size_t max_chars) {
  if (text.size() <= max_chars) return text;
  std::size_t cut = max_chars;
  while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
  text.resize(cut);
  return text;
}

std::size_t count_block_segments(std::string_view prompt) {
  std::size_t n = 0;
  for (std::size_t pos = prompt.find("[source: "); pos != std::string_view::npos;
       pos = prompt.find("[source: ", pos + 1)) {
    ++n;
  }
  return n;
}

std::string MockLlm::default_response(const LlmRequest& request) {
  switch (request.purpose) {
    case LlmPurpose::IntentionSummary: {
      std::string last = after_last_marker(request.prompt, "SendQuery: ");
      return "USER SEEKS: " + (last.empty() ? std::string("(browsing without a query)") : last);
    }
    case LlmPurpose::Answer:
      return "Answer drawing on " + std::to_string(count_block_segments(request.prompt)) +
             " blocks: " + after_last_marker(request.prompt, "Question: ");
    case LlmPurpose::ReportSection:
      return "Draft from " + std::to_string(count_block_segments(request.prompt)) +
             " blocks: " + after_last_marker(request.prompt, "Section: ");
  }
  return {};
}

LlmResponse MockLlm::complete(const LlmRequest& request) {
  Responder responder;
  {
    std::lock_guard lock(mutex_);
    ++calls_;
    requests_.push_back(request);
    if (failure_) throw Error(ErrorCode::AdapterUnavailable, *failure_);
    responder = responder_;
  }
  std::string text = responder ? responder(request) : default_response(request);
  return {truncate_utf8(std::move(text), request.max_chars)};
}

void MockLlm::set_responder(Responder responder) {
  std::lock_guard lock(mutex_);
  responder_ = std::move(responder);
}

void MockLlm::fail_with(std::optional<std::string> message) {
  std::lock_guard lock(mutex_);
  failure_ = std::move(message);
}

std::vector<LlmRequest> MockLlm::requests() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

LlmResponse HttpLlm::complete(const LlmRequest& request) {
  nlohmann::json res = post_json(endpoint_, request.to_json(), 120);
  if (!res.contains("text") || !res.at("text").is_string()) {
    throw Error(ErrorCode::AdapterUnavailable, "LLM response without text");
  }
  return {truncate_utf8(res.at("text").get<std::string>(), request.max_chars)};
}

}  // namespace docloop

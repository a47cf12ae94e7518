#pragma once

#include <atomic>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace docloop {

enum class LlmPurpose { IntentionSummary, Answer, ReportSection };

const char* to_string(LlmPurpose purpose);

struct LlmRequest {
  LlmPurpose purpose = LlmPurpose::Answer;
  std::string prompt;
  std::size_t max_chars = 4000;

  nlohmann::json to_json() const;
};

struct LlmResponse {
  std::string text;
};

// Failures are reported by throwing (Error(AdapterUnavailable) for transport
// problems). Implementations must be safe to call from several threads.
class LlmAdapter {
 public:
  virtual ~LlmAdapter() = default;
  virtual std::string name() const = 0;
  virtual LlmResponse complete(const LlmRequest& request) = 0;
};

// Cuts to at most `max_chars` bytes without splitting a UTF-8 sequence.
std::string truncate_utf8(std::string text, std::size_t max_chars);

// Number of "[source: ...]" segments in a prompt.
std::size_t count_block_segments(std::string_view prompt);

// Deterministic stand-in. Default rules:
//   IntentionSummary -> "USER SEEKS: <last query in the transcript>"
//   Answer           -> "Answer drawing on <n> blocks: <question>"
//   ReportSection    -> "Draft from <n> blocks: <heading>"
// A custom responder replaces the rules; fail_with() makes every call throw.
class MockLlm final : public LlmAdapter {
 public:
  using Responder = std::function<std::string(const LlmRequest&)>;

  MockLlm() = default;
  explicit MockLlm(Responder responder) : responder_(std::move(responder)) {}

  std::string name() const override { return "mock"; }
  LlmResponse complete(const LlmRequest& request) override;

  void set_responder(Responder responder);
  void fail_with(std::optional<std::string> message);

  std::size_t calls() const { return calls_.load(); }
  std::vector<LlmRequest> requests() const;

  static std::string default_response(const LlmRequest& request);

 private:
  mutable std::mutex mutex_;
  Responder responder_;
  std::optional<std::string> failure_;
  std::vector<LlmRequest> requests_;
  std::atomic<std::size_t> calls_{0};
};

// POST {purpose, prompt, max_chars} -> {text}.
class HttpLlm final : public LlmAdapter {
 public:
  explicit HttpLlm(std::string endpoint) : endpoint_(std::move(endpoint)) {}
  std::string name() const override { return "http"; }
  LlmResponse complete(const LlmRequest& request) override;

 private:
  std::string endpoint_;
};

}  // namespace docloop

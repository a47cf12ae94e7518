#pragma once

#include <stdexcept>
#include <string>

#include "json.hpp"

namespace docloop {

enum class ErrorCode { NotFound, Conflict, Invalid, AdapterUnavailable, Internal };

const char* to_string(ErrorCode code);

// Every failure surfaced by the library carries exactly one code. `detail`
// holds a machine-readable record (e.g. {"kind":"schema"}).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, nlohmann::json detail = nlohmann::json::object())
      : std::runtime_error(message), code_(code), detail_(std::move(detail)) {}

  ErrorCode code() const { return code_; }
  const nlohmann::json& detail() const { return detail_; }

 private:
  ErrorCode code_;
  nlohmann::json detail_;
};

inline Error not_found(const std::string& what) {
  return Error(ErrorCode::NotFound, what + " not found");
}

inline Error schema_error(const std::string& message) {
  return Error(ErrorCode::Invalid, message, {{"kind", "schema"}});
}

inline Error format_error(const std::string& message) {
  return Error(ErrorCode::Invalid, message, {{"kind", "format"}});
}

}  // namespace docloop

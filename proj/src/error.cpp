#include "docloop/error.hpp"

namespace docloop {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::Conflict: return "Conflict";
    case ErrorCode::Invalid: return "Invalid";
    case ErrorCode::AdapterUnavailable: return "AdapterUnavailable";
    case ErrorCode::Internal: return "Internal";
  }
  return "Internal";
}

}  // namespace docloop

#pragma once

#include <string>

#include "json.hpp"

namespace docloop {

struct Endpoint {
  std::string scheme_host_port;  // "http://127.0.0.1:8080"
  std::string path;              // "/v1/ocr"

  static Endpoint parse(const std::string& url);
};

// POSTs `body` as JSON and parses a JSON response. Any transport failure or
// non-2xx status throws Error(AdapterUnavailable).
nlohmann::json post_json(const std::string& url, const nlohmann::json& body, int timeout_seconds = 30);

// True when GET <url> answers with a 2xx status.
bool probe(const std::string& url, int timeout_seconds = 5);

}  // namespace docloop

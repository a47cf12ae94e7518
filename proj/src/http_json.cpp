#include "docloop/http_json.hpp"

#include "docloop/error.hpp"
#include "httplib.h"

namespace docloop {

Endpoint Endpoint::parse(const std::string& url) {
  auto scheme = url.find("://");
  if (scheme == std::string::npos) throw Error(ErrorCode::Invalid, "endpoint is not an absolute URL: " + url);
  auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

nlohmann::json post_json(const std::string& url, const nlohmann::json& body, int timeout_seconds) {
  Endpoint ep = Endpoint::parse(url);
  httplib::Client client(ep.scheme_host_port);
  client.set_connection_timeout(timeout_seconds, 0);
  client.set_read_timeout(timeout_seconds, 0);
  auto res = client.Post(ep.path, body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::AdapterUnavailable, "request to " + url + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(ErrorCode::AdapterUnavailable, url + " answered HTTP " + std::to_string(res->status),
                {{"status", res->status}});
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::AdapterUnavailable, url + " returned malformed JSON: " + e.what());
  }
}

bool probe(const std::string& url, int timeout_seconds) {
  try {
    Endpoint ep = Endpoint::parse(url);
    httplib::Client client(ep.scheme_host_port);
    client.set_connection_timeout(timeout_seconds, 0);
    client.set_read_timeout(timeout_seconds, 0);
    auto res = client.Get(ep.path);
    return res && res->status >= 200 && res->status < 300;
  } catch (const Error&) {
    return false;
  }
}

}  // namespace docloop

#pragma once

#include <memory>
#include <string>

#include "docloop/engine.hpp"
#include "docloop/error.hpp"

namespace docloop {

int http_status(ErrorCode code);
// {"error": {"code", "message", "detail"}}
Json error_body(const Error& error);

// JSON over HTTP. Handlers only translate between the wire and Engine calls.
class ApiServer {
 public:
  explicit ApiServer(Engine& engine);
  ~ApiServer();

  // Binds to `port` (0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  bool listen();
  void stop();
  void set_verbose(bool verbose);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace docloop

#pragma once

// HTTP+JSON API over live chain sessions.
//
// Each session publishes immutable snapshots (chain, state, version). Reads
// copy the current snapshot pointer; mutations take the session's writer lock,
// check the caller's baseVersion and publish a new snapshot.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "promptloom/backend.hpp"
#include "promptloom/library.hpp"

namespace promptloom {

struct ServiceOptions {
  ExecutionPolicy policy = ExecutionPolicy::Parallel;
  int max_threads = 0;  // 0: OpenMP default
  std::function<std::int64_t()> clock;  // defaults to wall-clock milliseconds
  std::string transcript_path;          // empty: no transcript
};

struct HttpResponse {
  int status = 200;
  nlohmann::json body;
};

class Service {
 public:
  explicit Service(std::shared_ptr<const Backend> backend, ServiceOptions options = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Pure router: every endpoint is reachable without a socket.
  HttpResponse handle(std::string_view method, std::string_view path,
                      const std::multimap<std::string, std::string>& query,
                      std::string_view body);

  // Blocks until every background run has finished.
  void wait_idle();

  // Serves on host:port until stop(). Returns false if binding failed.
  bool listen(const std::string& host, int port);
  // Binds an ephemeral port; returns it, or -1. Call serve() afterwards.
  int bind_any(const std::string& host);
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace promptloom

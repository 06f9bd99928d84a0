#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <thread>

#include "gog/mock_tools.hpp"

namespace httplib {
class Server;
}

namespace gog::mock {

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 picks a free port
  double fault_rate = 0.0;
  std::uint64_t seed = 0;
};

/// Local HTTP server exposing the mock toolset:
///   GET  /health
///   POST /upload               binary PPM body -> {"url"}
///   POST /image_search         {"image_url"} -> {"visual_matches": [...]}
///   POST /search               {"q"} -> {"organic_results": [...]}
///   GET  /read?url=...         page text
///   POST /ground               {"image_url", "text", "top_n"} -> {"boxes": [...]}
///   POST /v1/chat/completions  model "policy", "judge" or "summarizer"
/// Injected faults surface as 504 (timeout), 502 (network), 422 (malformed) or 503.
class MockServer {
 public:
  MockServer(Corpus corpus, ServerOptions options);
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  /// Binds and serves on a background thread; returns the bound port.
  int start();
  /// Binds and serves on the calling thread until stop() is called.
  void serve();
  void stop();

  int port() const { return port_; }
  std::string base_url() const;
  long requests() const { return requests_.load(); }
  FaultPlan& faults() { return tools_.faults; }
  MockToolset& tools() { return tools_; }

 private:
  void install_routes();
  std::string ref_for_upload(const std::string& bytes, const Image& image);

  ServerOptions options_;
  MockToolset tools_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<long> requests_{0};
  std::mutex uploads_mutex_;
  std::map<std::string, std::string> url_to_ref_;
  std::map<std::string, std::string> hash_to_ref_;
};

}  // namespace gog::mock

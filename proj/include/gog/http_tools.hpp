#pragma once

// HTTP clients for the tool and chat endpoints. Payloads follow the usual
// provider shapes (search results under "organic_results", image matches
// under "visual_matches", chat completions under "choices"); the mock server
// speaks the same shapes.

#include <chrono>
#include <string>

#include "gog/image.hpp"
#include "gog/toolkit.hpp"

namespace gog::http {

struct Endpoint {
  std::string base_url;  // e.g. "http://127.0.0.1:8080"
  std::string api_key;   // sent as a bearer token when non-empty
  std::chrono::milliseconds timeout{30000};
};

/// Maps a transport outcome to a ToolFailure: connection errors are
/// NetworkError, timeouts and 408/504 are Timeout, 502 is NetworkError, 422 is
/// MalformedContent, any other non-2xx status is UpstreamError.
toolkit::ToolFailure failure_for_status(std::string tool, int status, std::string detail = {});

/// Uploads image bytes (binary PPM) and returns the hosted URL.
class HttpImageHost final : public toolkit::ImageHost {
 public:
  HttpImageHost(Endpoint endpoint, const ImageStore& store) : endpoint_(std::move(endpoint)), store_(store) {}
  toolkit::ToolResult<std::string> upload(std::string_view image_ref) override;

 private:
  Endpoint endpoint_;
  const ImageStore& store_;
};

/// Reverse image search by hosted URL; the image is uploaded first.
class HttpImageSearch final : public toolkit::ImageSearchTool {
 public:
  HttpImageSearch(Endpoint endpoint, toolkit::ImageHost& host) : endpoint_(std::move(endpoint)), host_(host) {}
  toolkit::ToolResult<std::vector<toolkit::ImageSearchResult>> search(std::string_view image_ref) override;

 private:
  Endpoint endpoint_;
  toolkit::ImageHost& host_;
};

class HttpWebSearch final : public toolkit::WebSearchProvider {
 public:
  explicit HttpWebSearch(Endpoint endpoint) : endpoint_(std::move(endpoint)) {}
  toolkit::ToolResult<std::vector<toolkit::WebResult>> search(std::string_view query) override;

 private:
  Endpoint endpoint_;
};

/// Reader endpoint returning the extracted page text as the response body.
class HttpPageReader final : public toolkit::PageReader {
 public:
  explicit HttpPageReader(Endpoint endpoint) : endpoint_(std::move(endpoint)) {}
  toolkit::ToolResult<std::string> read(std::string_view url) override;

 private:
  Endpoint endpoint_;
};

class HttpGrounding final : public toolkit::GroundingTool {
 public:
  HttpGrounding(Endpoint endpoint, toolkit::ImageHost& host, const ImageStore& store,
                std::size_t top_n = toolkit::kDefaultGroundingTopN)
      : endpoint_(std::move(endpoint)), host_(host), store_(store), top_n_(top_n) {}
  toolkit::ToolResult<std::vector<toolkit::GroundingBox>> ground(std::string_view image_ref,
                                                                  std::string_view description) override;

 private:
  Endpoint endpoint_;
  toolkit::ImageHost& host_;
  const ImageStore& store_;
  std::size_t top_n_;
};

/// Chat-completions client; `model` selects the endpoint role.
class HttpChatClient final : public toolkit::ChatClient {
 public:
  HttpChatClient(Endpoint endpoint, std::string model) : endpoint_(std::move(endpoint)), model_(std::move(model)) {}
  toolkit::ToolResult<std::string> complete(const toolkit::ChatRequest& request) override;

 private:
  Endpoint endpoint_;
  std::string model_;
};

/// GET /health; true when the server answers 200.
bool health_check(const Endpoint& endpoint);

}  // namespace gog::http

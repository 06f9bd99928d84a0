#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "gog/image.hpp"
#include "gog/result.hpp"

namespace gog::toolkit {

enum class FailureCause { Timeout, NetworkError, MalformedContent, UpstreamError };

std::string_view to_string(FailureCause cause);

struct ToolFailure {
  std::string tool;
  FailureCause cause = FailureCause::UpstreamError;
  int upstream_code = 0;  // HTTP status for UpstreamError
  bool retryable = false;
  std::string detail;

  /// Builds a failure with the retry flag implied by the cause: timeouts and
  /// network errors retry, malformed content never does, upstream errors retry
  /// on 429 and 5xx.
  static ToolFailure make(std::string tool, FailureCause cause, std::string detail = {}, int upstream_code = 0);

  std::string message() const;
};

template <class T>
using ToolResult = Result<T, ToolFailure>;

struct RetryPolicy {
  int max_retries = 2;
  std::chrono::milliseconds base_backoff{200};  // doubled after each attempt
};

/// Counts failures seen by a tool client, including those later recovered by a retry.
struct FailureLog {
  std::atomic<long> failures{0};
  std::atomic<long> retries{0};
};

/// Calls fn until it succeeds, fails with a non-retryable error, or the retry
/// budget is spent. `attempts` receives the number of calls made.
template <class T>
ToolResult<T> with_retry(const RetryPolicy& policy, const std::function<ToolResult<T>()>& fn,
                         FailureLog* log = nullptr, int* attempts = nullptr);

// ---------------------------------------------------------------------------
// Tool data

struct ImageSearchResult {
  std::string thumbnail_ref;
  std::string title;
  int rank = 0;  // 1-based, contiguous
  bool operator==(const ImageSearchResult&) const = default;
};

struct GroundingBox {
  BBox bbox;
  double score = 0;
  std::string query;
  bool operator==(const GroundingBox&) const = default;
};

struct WebResult {
  std::string url;
  std::string title;
  std::string snippet;
};

struct TextSummary {
  std::string text;
  int pages_total = 0;
  int pages_read = 0;
  bool degraded = false;    // every page read failed; summarised from snippets only
  bool no_results = false;  // the search itself matched nothing
};

inline constexpr std::size_t kMaxImageSearchResults = 5;
inline constexpr std::size_t kMaxWebResults = 5;
inline constexpr std::size_t kDefaultGroundingTopN = 5;
inline constexpr std::string_view kNoRelevantInformation = "No relevant information found.";

/// Keeps results with a title and thumbnail, in provider order, ranked 1..k with k <= 5.
std::vector<ImageSearchResult> normalize_image_results(std::vector<ImageSearchResult> raw);

/// Drops boxes that are degenerate or outside width x height, sorts by score
/// (descending, stable) and keeps the first top_n.
std::vector<GroundingBox> normalize_boxes(std::vector<GroundingBox> raw, int width, int height, std::size_t top_n);

// ---------------------------------------------------------------------------
// Chat completion

struct ChatMessage {
  std::string role;  // "system", "user" or "assistant"
  std::string text;
  std::vector<std::string> image_urls;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  std::optional<std::uint64_t> seed;
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual ToolResult<std::string> complete(const ChatRequest& request) = 0;
};

// ---------------------------------------------------------------------------
// Tool interfaces

class ImageSearchTool {
 public:
  virtual ~ImageSearchTool() = default;
  virtual ToolResult<std::vector<ImageSearchResult>> search(std::string_view image_ref) = 0;
};

class WebSearchProvider {
 public:
  virtual ~WebSearchProvider() = default;
  virtual ToolResult<std::vector<WebResult>> search(std::string_view query) = 0;
};

class PageReader {
 public:
  virtual ~PageReader() = default;
  virtual ToolResult<std::string> read(std::string_view url) = 0;
};

class TextSearchTool {
 public:
  virtual ~TextSearchTool() = default;
  virtual ToolResult<TextSummary> search(std::string_view query) = 0;
};

class GroundingTool {
 public:
  virtual ~GroundingTool() = default;
  virtual ToolResult<std::vector<GroundingBox>> ground(std::string_view image_ref, std::string_view description) = 0;
};

class ImageHost {
 public:
  virtual ~ImageHost() = default;
  virtual ToolResult<std::string> upload(std::string_view image_ref) = 0;
};

/// Content-addressed pseudo-URL used by the mock host: identical pixels, identical URL.
std::string content_url(const Image& image);

// ---------------------------------------------------------------------------

struct PipelineOptions {
  std::size_t parallelism = 4;
  RetryPolicy retry{};
};

/// search -> concurrent page reads -> summarizer. Failed pages are dropped;
/// when every page fails the summary is built from search snippets and marked degraded.
class TextSearchPipeline final : public TextSearchTool {
 public:
  TextSearchPipeline(WebSearchProvider& search, PageReader& reader, ChatClient& summarizer, PipelineOptions options = {});

  ToolResult<TextSummary> search(std::string_view query) override;

  const FailureLog& failures() const { return failures_; }

 private:
  WebSearchProvider& search_;
  PageReader& reader_;
  ChatClient& summarizer_;
  PipelineOptions options_;
  FailureLog failures_;
};

/// The summarizer prompt with the extracted pages (or snippets) filled in.
std::string summarization_prompt(const std::vector<WebResult>& results, const std::vector<std::optional<std::string>>& pages);

template <class T>
ToolResult<T> with_retry(const RetryPolicy& policy, const std::function<ToolResult<T>()>& fn, FailureLog* log,
                         int* attempts) {
  auto backoff = policy.base_backoff;
  for (int attempt = 0;; ++attempt) {
    auto result = fn();
    if (attempts) *attempts = attempt + 1;
    if (result) return result;
    if (log) ++log->failures;
    if (!result.error().retryable || attempt >= policy.max_retries) return result;
    if (log) ++log->retries;
    if (backoff.count() > 0) std::this_thread::sleep_for(backoff);
    backoff *= 2;
  }
}

}  // namespace gog::toolkit

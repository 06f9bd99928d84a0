#include "gog/toolkit.hpp"

#include <algorithm>
#include <cmath>

#include "gog/hashing.hpp"
#include "gog/parallel.hpp"
#include "gog/prompts.hpp"

namespace gog::toolkit {

std::string_view to_string(FailureCause cause) {
  switch (cause) {
    case FailureCause::Timeout: return "Timeout";
    case FailureCause::NetworkError: return "NetworkError";
    case FailureCause::MalformedContent: return "MalformedContent";
    case FailureCause::UpstreamError: return "UpstreamError";
  }
  return "?";
}

ToolFailure ToolFailure::make(std::string tool, FailureCause cause, std::string detail, int upstream_code) {
  bool retryable = false;
  switch (cause) {
    case FailureCause::Timeout:
    case FailureCause::NetworkError:
      retryable = true;
      break;
    case FailureCause::MalformedContent:
      retryable = false;
      break;
    case FailureCause::UpstreamError:
      retryable = upstream_code == 429 || upstream_code >= 500;
      break;
  }
  return {std::move(tool), cause, upstream_code, retryable, std::move(detail)};
}

std::string ToolFailure::message() const {
  std::string out = std::string(to_string(cause));
  if (cause == FailureCause::UpstreamError && upstream_code) out += "(" + std::to_string(upstream_code) + ")";
  if (!detail.empty()) out += ": " + detail;
  return out;
}

std::vector<ImageSearchResult> normalize_image_results(std::vector<ImageSearchResult> raw) {
  std::vector<ImageSearchResult> out;
  for (auto& r : raw) {
    if (out.size() == kMaxImageSearchResults) break;
    if (r.title.empty() || r.thumbnail_ref.empty()) continue;
    r.rank = static_cast<int>(out.size()) + 1;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<GroundingBox> normalize_boxes(std::vector<GroundingBox> raw, int width, int height, std::size_t top_n) {
  std::vector<GroundingBox> out;
  for (auto& box : raw) {
    const auto& b = box.bbox;
    const bool finite = std::isfinite(b.x0) && std::isfinite(b.y0) && std::isfinite(b.x1) && std::isfinite(b.y1);
    if (!finite || b.x0 < 0 || b.y0 < 0 || b.x1 > width || b.y1 > height || b.x0 >= b.x1 || b.y0 >= b.y1) continue;
    if (!(box.score >= 0.0 && box.score <= 1.0)) continue;
    out.push_back(std::move(box));
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
  if (out.size() > top_n) out.resize(top_n);
  return out;
}

std::string content_url(const Image& image) {
  return "mock://img/" + sha256_hex(encode_ppm(image)).substr(0, 32) + ".ppm";
}

std::string summarization_prompt(const std::vector<WebResult>& results, const std::vector<std::optional<std::string>>& pages) {
  const bool any_page = std::any_of(pages.begin(), pages.end(), [](const auto& p) { return p.has_value(); });
  std::string formatted;
  int n = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const bool have_page = i < pages.size() && pages[i].has_value();
    if (any_page && !have_page) continue;
    if (n) formatted += "\n";
    formatted += "[" + std::to_string(++n) + "] Title: " + results[i].title + "\n";
    formatted += "URL: " + results[i].url + "\n";
    if (have_page)
      formatted += "Content: " + *pages[i] + "\n";
    else
      formatted += "Snippet: " + results[i].snippet + "\n";
  }
  return prompts::fill(prompts::summarize(), "formatted_results", formatted);
}

TextSearchPipeline::TextSearchPipeline(WebSearchProvider& search, PageReader& reader, ChatClient& summarizer,
                                       PipelineOptions options)
    : search_(search), reader_(reader), summarizer_(summarizer), options_(options) {}

ToolResult<TextSummary> TextSearchPipeline::search(std::string_view query) {
  if (query.empty()) return unexpected(ToolFailure::make("text_search", FailureCause::MalformedContent, "empty query"));

  auto found = with_retry<std::vector<WebResult>>(options_.retry, [&] { return search_.search(query); }, &failures_);
  if (!found) return unexpected(found.error());
  auto results = std::move(*found);
  if (results.size() > kMaxWebResults) results.resize(kMaxWebResults);
  if (results.empty()) return TextSummary{std::string(kNoRelevantInformation), 0, 0, false, true};

  auto pages = parallel_map(results.size(), options_.parallelism, [&](std::size_t i) -> std::optional<std::string> {
    auto page = with_retry<std::string>(options_.retry, [&] { return reader_.read(results[i].url); }, &failures_);
    if (!page || page->empty()) return std::nullopt;
    return std::move(*page);
  });

  TextSummary summary;
  summary.pages_total = static_cast<int>(results.size());
  summary.pages_read = static_cast<int>(std::count_if(pages.begin(), pages.end(), [](const auto& p) { return p.has_value(); }));
  summary.degraded = summary.pages_read == 0;

  ChatRequest request;
  request.messages.push_back({"user", summarization_prompt(results, pages), {}});
  auto text = with_retry<std::string>(options_.retry, [&] { return summarizer_.complete(request); }, &failures_);
  if (!text) {
    auto failure = text.error();
    failure.tool = "summarizer";
    return unexpected(std::move(failure));
  }
  summary.text = std::move(*text);
  return summary;
}

}  // namespace gog::toolkit

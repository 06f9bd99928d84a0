#include <gtest/gtest.h>

#include <map>

#include "gog/image.hpp"
#include "gog/toolkit.hpp"
#include "support.hpp"

using namespace gog;
using namespace gog::toolkit;

namespace {

class FakeSearch final : public WebSearchProvider {
 public:
  std::vector<WebResult> results;
  std::optional<ToolFailure> fail;
  ToolResult<std::vector<WebResult>> search(std::string_view) override {
    if (fail) return unexpected(*fail);
    return results;
  }
};

class FakeReader final : public PageReader {
 public:
  std::map<std::string, std::string> pages;  // missing url -> network error
  std::atomic<int> calls{0};
  ToolResult<std::string> read(std::string_view url) override {
    ++calls;
    auto it = pages.find(std::string(url));
    if (it == pages.end()) return unexpected(ToolFailure::make("reader", FailureCause::NetworkError, "down"));
    return it->second;
  }
};

std::vector<WebResult> three_results() {
  return {{"u1", "T1", "snippet one"}, {"u2", "T2", "snippet two"}, {"u3", "T3", "snippet three"}};
}

RetryPolicy fast_retry() { return {2, std::chrono::milliseconds(0)}; }

}  // namespace

TEST(ToolFailure, RetryabilityFollowsCause) {
  EXPECT_TRUE(ToolFailure::make("t", FailureCause::Timeout).retryable);
  EXPECT_TRUE(ToolFailure::make("t", FailureCause::NetworkError).retryable);
  EXPECT_FALSE(ToolFailure::make("t", FailureCause::MalformedContent).retryable);
  EXPECT_TRUE(ToolFailure::make("t", FailureCause::UpstreamError, "", 429).retryable);
  EXPECT_TRUE(ToolFailure::make("t", FailureCause::UpstreamError, "", 503).retryable);
  EXPECT_FALSE(ToolFailure::make("t", FailureCause::UpstreamError, "", 404).retryable);
}

TEST(WithRetry, StopsAtBudget) {
  int calls = 0, attempts = 0;
  FailureLog log;
  auto r = with_retry<int>(fast_retry(), [&]() -> ToolResult<int> {
    ++calls;
    return unexpected(ToolFailure::make("t", FailureCause::Timeout));
  }, &log, &attempts);
  EXPECT_FALSE(r);
  EXPECT_EQ(calls, 3);
  EXPECT_EQ(attempts, 3);
  EXPECT_EQ(log.failures.load(), 3);
  EXPECT_EQ(log.retries.load(), 2);
}

TEST(WithRetry, NonRetryableFailsOnce) {
  int calls = 0;
  auto r = with_retry<int>(fast_retry(), [&]() -> ToolResult<int> {
    ++calls;
    return unexpected(ToolFailure::make("t", FailureCause::MalformedContent));
  });
  EXPECT_FALSE(r);
  EXPECT_EQ(calls, 1);
}

TEST(WithRetry, RecoversAfterTransientFailure) {
  int calls = 0;
  auto r = with_retry<int>(fast_retry(), [&]() -> ToolResult<int> {
    if (++calls < 2) return unexpected(ToolFailure::make("t", FailureCause::NetworkError));
    return 7;
  });
  ASSERT_TRUE(r);
  EXPECT_EQ(*r, 7);
}

TEST(Normalize, ImageResultsRankedAndCapped) {
  std::vector<ImageSearchResult> raw;
  for (int i = 0; i < 8; ++i) raw.push_back({"t" + std::to_string(i), i == 1 ? "" : "title", 99});
  const auto out = normalize_image_results(raw);
  ASSERT_EQ(out.size(), 5u);
  EXPECT_EQ(out[0].thumbnail_ref, "t0");
  EXPECT_EQ(out[1].thumbnail_ref, "t2");
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i].rank, static_cast<int>(i) + 1);
}

TEST(Normalize, BoxesFilteredSortedCapped) {
  std::vector<GroundingBox> raw = {
      {{0, 0, 10, 10}, 0.2, "q"},
      {{5, 5, 5, 9}, 0.9, "q"},     // degenerate
      {{0, 0, 200, 10}, 0.95, "q"}, // outside the image
      {{1, 1, 3, 3}, 0.8, "q"},
      {{2, 2, 4, 4}, 0.8, "q"},
      {{0, 0, 1, 1}, 1.5, "q"},     // score above 1
  };
  const auto out = normalize_boxes(raw, 100, 100, 2);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].bbox, (BBox{1, 1, 3, 3}));
  EXPECT_EQ(out[1].bbox, (BBox{2, 2, 4, 4}));
}

TEST(Pipeline, ReadsPagesAndSummarizes) {
  FakeSearch search;
  search.results = three_results();
  FakeReader reader;
  reader.pages = {{"u1", "page one"}, {"u3", "page three"}};
  oracle::CannedChat summarizer({std::string("summary text")});
  TextSearchPipeline pipeline(search, reader, summarizer, {2, fast_retry()});
  auto r = pipeline.search("query");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->text, "summary text");
  EXPECT_EQ(r->pages_total, 3);
  EXPECT_EQ(r->pages_read, 2);
  EXPECT_FALSE(r->degraded);
  ASSERT_EQ(summarizer.requests.size(), 1u);
  const auto& prompt = summarizer.requests[0].messages.back().text;
  EXPECT_NE(prompt.find("page one"), std::string::npos);
  EXPECT_NE(prompt.find("page three"), std::string::npos);
  // u2 was tried three times (one call plus two retries).
  EXPECT_EQ(reader.calls.load(), 2 + 3);
}

TEST(Pipeline, AllReadsFailingDegradesToSnippets) {
  FakeSearch search;
  search.results = three_results();
  FakeReader reader;
  oracle::CannedChat summarizer({std::string("from snippets")});
  TextSearchPipeline pipeline(search, reader, summarizer, {2, fast_retry()});
  auto r = pipeline.search("query");
  ASSERT_TRUE(r);
  EXPECT_TRUE(r->degraded);
  EXPECT_EQ(r->pages_read, 0);
  EXPECT_NE(summarizer.requests[0].messages.back().text.find("snippet two"), std::string::npos);
}

TEST(Pipeline, NoResultsSkipsSummarizer) {
  FakeSearch search;
  FakeReader reader;
  oracle::CannedChat summarizer({});
  TextSearchPipeline pipeline(search, reader, summarizer, {2, fast_retry()});
  auto r = pipeline.search("nothing");
  ASSERT_TRUE(r);
  EXPECT_TRUE(r->no_results);
  EXPECT_EQ(r->text, kNoRelevantInformation);
  EXPECT_TRUE(summarizer.requests.empty());
}

TEST(Pipeline, SearchFailurePropagates) {
  FakeSearch search;
  search.fail = ToolFailure::make("search", FailureCause::UpstreamError, "bad", 400);
  FakeReader reader;
  oracle::CannedChat summarizer({});
  TextSearchPipeline pipeline(search, reader, summarizer, {2, fast_retry()});
  auto r = pipeline.search("q");
  ASSERT_FALSE(r);
  EXPECT_EQ(r.error().upstream_code, 400);
}

TEST(Pipeline, SummarizerFailureIsAttributed) {
  FakeSearch search;
  search.results = three_results();
  FakeReader reader;
  oracle::CannedChat summarizer({oracle::failure(FailureCause::MalformedContent)});
  TextSearchPipeline pipeline(search, reader, summarizer, {2, fast_retry()});
  auto r = pipeline.search("q");
  ASSERT_FALSE(r);
  EXPECT_EQ(r.error().tool, "summarizer");
}

// ---------------------------------------------------------------------------

TEST(ImageStore, CropsFoldToBaseCoordinates) {
  ImageStore store;
  store.add_synthetic("base", 100, 80, 3);
  const auto a = store.crop("base", {10, 10, 60, 60});
  EXPECT_EQ(a, "base@10,10,60,60");
  const auto b = store.crop(a, {5, 5, 15, 25});
  EXPECT_EQ(b, "base@15,15,25,35");
  EXPECT_EQ(store.dimensions(b), (std::pair<int, int>{10, 20}));
  EXPECT_EQ(store.crop("base", {0.5, 0.2, 9.1, 9.9}), "base@0,0,10,10");
}

TEST(ImageStore, CropPixelsMatchSource) {
  ImageStore store;
  store.add_synthetic("base", 40, 30, 9);
  const auto full = store.resolve("base");
  const auto part = store.resolve("base@3,4,13,9");
  ASSERT_EQ(part.width, 10);
  ASSERT_EQ(part.height, 5);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 10; ++x)
      for (int c = 0; c < 3; ++c)
        ASSERT_EQ(part.rgb[(y * 10 + x) * 3 + c], full.rgb[((y + 4) * 40 + x + 3) * 3 + c]);
}

TEST(ImageStore, RejectsBadRefs) {
  ImageStore store;
  store.add_synthetic("base", 10, 10, 1);
  EXPECT_THROW(store.resolve("nope"), UnknownImage);
  EXPECT_THROW(store.resolve("base@0,0,11,5"), UnknownImage);
  EXPECT_THROW(store.crop("base", {5, 5, 5, 8}), OutOfBounds);
}

TEST(Image, PpmRoundTrip) {
  const auto img = synthetic_image(17, 9, 42);
  EXPECT_EQ(synthetic_image(17, 9, 42), img);
  auto back = decode_ppm(encode_ppm(img));
  ASSERT_TRUE(back);
  EXPECT_EQ(*back, img);
  EXPECT_FALSE(decode_ppm("P3\n1 1\n255\n0 0 0"));
  EXPECT_FALSE(decode_ppm("P6\n2 2\n255\nabc"));
}

TEST(Image, ContentUrlIsContentAddressed) {
  const auto a = synthetic_image(8, 8, 1);
  EXPECT_EQ(content_url(a), content_url(synthetic_image(8, 8, 1)));
  EXPECT_NE(content_url(a), content_url(synthetic_image(8, 8, 2)));
}

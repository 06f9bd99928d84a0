#pragma once

// In-process deterministic implementations of every tool and chat endpoint.
// The mock server wraps the same objects behind HTTP.

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>

#include "gog/mock_corpus.hpp"
#include "gog/toolkit.hpp"

namespace gog::mock {

/// Seeded fault injection. Each (tool, key) pair keeps its own call counter,
/// and call n fails iff hash(seed, tool, key, n) < rate, so the failure
/// pattern does not depend on how calls to different keys interleave.
class FaultPlan {
 public:
  FaultPlan() = default;
  FaultPlan(double rate, std::uint64_t seed);

  /// Every call to `tool` fails with `cause` regardless of the rate.
  void force(std::string tool, toolkit::FailureCause cause, int upstream_code = 0);
  /// Only calls to (tool, key) fail, with a non-retryable cause.
  void force_key(std::string tool, std::string key, toolkit::FailureCause cause);

  std::optional<toolkit::ToolFailure> draw(std::string_view tool, std::string_view key);

  double rate() const { return rate_; }
  long injected() const;

 private:
  double rate_ = 0.0;
  std::uint64_t seed_ = 0;
  std::map<std::string, std::pair<toolkit::FailureCause, int>, std::less<>> forced_;
  std::map<std::string, toolkit::FailureCause, std::less<>> forced_keys_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, long> counters_;
  long injected_ = 0;
};

class MockImageSearch final : public toolkit::ImageSearchTool {
 public:
  MockImageSearch(const Corpus& corpus, const ImageStore& store, FaultPlan* faults = nullptr);
  toolkit::ToolResult<std::vector<toolkit::ImageSearchResult>> search(std::string_view image_ref) override;

  /// Lookup by content hash, bypassing the image store. Used by the server.
  std::vector<toolkit::ImageSearchResult> lookup_hash(const std::string& sha256) const;

 private:
  const ImageStore& store_;
  FaultPlan* faults_;
  std::map<std::string, std::vector<toolkit::ImageSearchResult>> by_hash_;
};

class MockWebSearch final : public toolkit::WebSearchProvider {
 public:
  explicit MockWebSearch(const Corpus& corpus, FaultPlan* faults = nullptr) : corpus_(corpus), faults_(faults) {}
  toolkit::ToolResult<std::vector<toolkit::WebResult>> search(std::string_view query) override;

 private:
  const Corpus& corpus_;
  FaultPlan* faults_;
};

class MockPageReader final : public toolkit::PageReader {
 public:
  explicit MockPageReader(const Corpus& corpus, FaultPlan* faults = nullptr) : corpus_(corpus), faults_(faults) {}
  toolkit::ToolResult<std::string> read(std::string_view url) override;

 private:
  const Corpus& corpus_;
  FaultPlan* faults_;
};

class MockGrounding final : public toolkit::GroundingTool {
 public:
  MockGrounding(const Corpus& corpus, const ImageStore& store, FaultPlan* faults = nullptr,
                std::size_t top_n = toolkit::kDefaultGroundingTopN)
      : corpus_(corpus), store_(store), faults_(faults), top_n_(top_n) {}
  toolkit::ToolResult<std::vector<toolkit::GroundingBox>> ground(std::string_view image_ref,
                                                                  std::string_view description) override;

 private:
  const Corpus& corpus_;
  const ImageStore& store_;
  FaultPlan* faults_;
  std::size_t top_n_;
};

class MockImageHost final : public toolkit::ImageHost {
 public:
  explicit MockImageHost(const ImageStore& store, FaultPlan* faults = nullptr) : store_(store), faults_(faults) {}
  toolkit::ToolResult<std::string> upload(std::string_view image_ref) override;

 private:
  const ImageStore& store_;
  FaultPlan* faults_;
};

/// Replays canned model turns. The episode is found by its question in the
/// first user message; the turn index is the number of assistant messages so
/// far; the script variant is seed modulo the number of variants. Unknown
/// questions get a direct answer, and exhausted scripts answer "I don't know".
class ScriptedPolicy final : public toolkit::ChatClient {
 public:
  explicit ScriptedPolicy(const Corpus& corpus);
  ScriptedPolicy(std::string question, std::vector<std::vector<std::string>> scripts);

  toolkit::ToolResult<std::string> complete(const toolkit::ChatRequest& request) override;

  static constexpr std::string_view kUnknownAnswer = "<think>I cannot identify this.</think>\n<answer>I don't know</answer>";

 private:
  std::vector<std::pair<std::string, std::vector<std::vector<std::string>>>> scripts_;  // normalized question
};

/// Judge that accepts a prediction when, after normalization, it equals or
/// contains one of the ground truths. Replies in the style the prompt asks for.
class MockJudge final : public toolkit::ChatClient {
 public:
  toolkit::ToolResult<std::string> complete(const toolkit::ChatRequest& request) override;

  struct Fields {
    std::string question;
    std::vector<std::string> ground_truth;
    std::string prediction;
    bool xml = false;
  };
  /// Recovers the filled-in fields from either judge prompt.
  static std::optional<Fields> extract(std::string_view prompt);
  static bool matches(std::string_view prediction, const std::vector<std::string>& ground_truth);
};

/// Summarizer that keeps the first sentence of each extracted page or snippet, at most five.
class ScriptedSummarizer final : public toolkit::ChatClient {
 public:
  toolkit::ToolResult<std::string> complete(const toolkit::ChatRequest& request) override;
};

/// Direct-answer sampler for uncertainty filtering. For a question with target
/// pass count k, attempts 0..k-1 (the request seed) answer correctly and the
/// rest answer wrongly.
class ScriptedSampler final : public toolkit::ChatClient {
 public:
  void set(std::string question, std::string correct_answer, int pass_count);
  toolkit::ToolResult<std::string> complete(const toolkit::ChatRequest& request) override;

  static constexpr std::string_view kWrongAnswer = "no idea";

 private:
  std::map<std::string, std::pair<std::string, int>> targets_;  // normalized question
};

/// Extracts the question from a prompt containing "Question: <q>" up to the
/// next "Image:" marker or line end.
std::optional<std::string> question_in_prompt(std::string_view prompt);

/// All in-process mocks wired over one corpus and one fault plan.
struct MockToolset {
  Corpus corpus;
  ImageStore store;
  FaultPlan faults;
  std::unique_ptr<MockImageSearch> image_search;
  std::unique_ptr<MockWebSearch> web_search;
  std::unique_ptr<MockPageReader> reader;
  std::unique_ptr<MockGrounding> grounding;
  std::unique_ptr<MockImageHost> host;
  std::unique_ptr<ScriptedPolicy> policy;
  std::unique_ptr<MockJudge> judge;
  std::unique_ptr<ScriptedSummarizer> summarizer;

  explicit MockToolset(Corpus c, double fault_rate = 0.0, std::uint64_t fault_seed = 0,
                       std::size_t grounding_top_n = toolkit::kDefaultGroundingTopN);
  MockToolset(const MockToolset&) = delete;
  MockToolset& operator=(const MockToolset&) = delete;
};

}  // namespace gog::mock

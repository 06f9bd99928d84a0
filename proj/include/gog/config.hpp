#pragma once

#include <cstdint>
#include <cstdlib>
#include <functional>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "gog/datapipe.hpp"
#include "gog/reward.hpp"
#include "gog/session.hpp"
#include "gog/toolkit.hpp"

namespace gog::config {

struct EndpointConfig {
  std::string url;
  std::string api_key;
  std::string model;  // model name sent to a chat endpoint
};

enum class MockTransport { InProcess, Http };

struct RunConfig {
  bool mock = true;
  MockTransport mock_transport = MockTransport::InProcess;
  std::string corpus_path;  // empty: bundled corpus
  double fault_rate = 0.0;  // injected into mock tool endpoints
  std::uint64_t seed = 0;

  EndpointConfig model;
  EndpointConfig judge;
  EndpointConfig summarizer;
  EndpointConfig tools;  // search, reader, grounding and upload share one base URL
  long timeout_ms = 30000;

  session::Budgets budgets{};
  bool forced_answer = false;
  int max_consecutive_invalid_turns = 2;
  double policy_temperature = 0.7;

  double lambda = reward::kDefaultLambda;
  reward::JudgeStyle judge_style = reward::JudgeStyle::Bracket;
  int group_size = 5;

  std::size_t episode_parallelism = 4;
  std::size_t tool_parallelism = 4;
  toolkit::RetryPolicy retry{};

  double iou_threshold = 0.7;
  std::size_t grounding_top_n = toolkit::kDefaultGroundingTopN;

  int filter_attempts = datapipe::kDefaultFilterAttempts;
  datapipe::Band band{};
};

/// Missing keys keep their defaults; unknown keys are rejected. Throws
/// session::ConfigError on malformed or invalid values.
RunConfig from_json(const nlohmann::json& j);
RunConfig load(const std::string& path);

/// Endpoint overrides: GOG_{MODEL,JUDGE,SUMMARIZER,TOOLS}_{URL,API_KEY}.
/// `getenv` is injectable for tests.
void apply_env(RunConfig& config, const std::function<const char*(const char*)>& getenv = ::getenv);

/// Throws session::ConfigError when the configuration is unusable.
void validate(const RunConfig& config);

nlohmann::ordered_json to_json(const RunConfig& config);

}  // namespace gog::config

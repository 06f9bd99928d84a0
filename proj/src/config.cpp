#include "gog/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace gog::config {

using nlohmann::json;
using nlohmann::ordered_json;
using session::ConfigError;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

EndpointConfig endpoint_from(const json& j, const std::string& where) {
  reject_unknown(j, {"url", "api_key", "model"}, where);
  return {j.value("url", std::string()), j.value("api_key", std::string()), j.value("model", std::string())};
}

ordered_json endpoint_json(const EndpointConfig& e) {
  // Keys are never written back out.
  return {{"url", e.url}, {"model", e.model}};
}

}  // namespace

RunConfig from_json(const json& j) {
  RunConfig c;
  try {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    reject_unknown(j,
                   {"mock", "mock_transport", "corpus", "fault_rate", "seed", "endpoints", "timeout_ms", "budgets",
                    "forced_answer", "max_consecutive_invalid_turns", "policy_temperature", "lambda", "judge_style",
                    "group_size", "parallelism", "retry", "iou_threshold", "grounding_top_n", "filter_attempts", "band"},
                   "config");
    c.mock = j.value("mock", c.mock);
    if (j.contains("mock_transport")) {
      const auto t = j.at("mock_transport").get<std::string>();
      if (t == "inprocess") {
        c.mock_transport = MockTransport::InProcess;
      } else if (t == "http") {
        c.mock_transport = MockTransport::Http;
      } else {
        throw ConfigError("mock_transport must be \"inprocess\" or \"http\"");
      }
    }
    c.corpus_path = j.value("corpus", c.corpus_path);
    c.fault_rate = j.value("fault_rate", c.fault_rate);
    c.seed = j.value("seed", c.seed);
    if (j.contains("endpoints")) {
      const auto& e = j.at("endpoints");
      reject_unknown(e, {"model", "judge", "summarizer", "tools"}, "endpoints");
      if (e.contains("model")) c.model = endpoint_from(e.at("model"), "endpoints.model");
      if (e.contains("judge")) c.judge = endpoint_from(e.at("judge"), "endpoints.judge");
      if (e.contains("summarizer")) c.summarizer = endpoint_from(e.at("summarizer"), "endpoints.summarizer");
      if (e.contains("tools")) c.tools = endpoint_from(e.at("tools"), "endpoints.tools");
    }
    c.timeout_ms = j.value("timeout_ms", c.timeout_ms);
    if (j.contains("budgets")) {
      const auto& b = j.at("budgets");
      reject_unknown(b, {"image_searches", "text_searches", "rounds", "crop_rounds"}, "budgets");
      c.budgets.image_searches_left = b.value("image_searches", c.budgets.image_searches_left);
      c.budgets.text_searches_left = b.value("text_searches", c.budgets.text_searches_left);
      c.budgets.rounds_left = b.value("rounds", c.budgets.rounds_left);
      c.budgets.crop_rounds_left = b.value("crop_rounds", c.budgets.crop_rounds_left);
    }
    c.forced_answer = j.value("forced_answer", c.forced_answer);
    c.max_consecutive_invalid_turns = j.value("max_consecutive_invalid_turns", c.max_consecutive_invalid_turns);
    c.policy_temperature = j.value("policy_temperature", c.policy_temperature);
    c.lambda = j.value("lambda", c.lambda);
    if (j.contains("judge_style")) {
      const auto s = j.at("judge_style").get<std::string>();
      if (s == "bracket") {
        c.judge_style = reward::JudgeStyle::Bracket;
      } else if (s == "xml") {
        c.judge_style = reward::JudgeStyle::Xml;
      } else {
        throw ConfigError("judge_style must be \"bracket\" or \"xml\"");
      }
    }
    c.group_size = j.value("group_size", c.group_size);
    if (j.contains("parallelism")) {
      const auto& p = j.at("parallelism");
      reject_unknown(p, {"episodes", "tools"}, "parallelism");
      c.episode_parallelism = p.value("episodes", c.episode_parallelism);
      c.tool_parallelism = p.value("tools", c.tool_parallelism);
    }
    if (j.contains("retry")) {
      const auto& r = j.at("retry");
      reject_unknown(r, {"max_retries", "base_backoff_ms"}, "retry");
      c.retry.max_retries = r.value("max_retries", c.retry.max_retries);
      c.retry.base_backoff = std::chrono::milliseconds(r.value("base_backoff_ms", c.retry.base_backoff.count()));
    }
    c.iou_threshold = j.value("iou_threshold", c.iou_threshold);
    c.grounding_top_n = j.value("grounding_top_n", c.grounding_top_n);
    c.filter_attempts = j.value("filter_attempts", c.filter_attempts);
    if (j.contains("band")) {
      const auto& b = j.at("band");
      reject_unknown(b, {"low", "high"}, "band");
      c.band.low = b.value("low", c.band.low);
      c.band.high = b.value("high", c.band.high);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return c;
}

RunConfig load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return from_json(json::parse(buf.str()));
  } catch (const json::parse_error& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
}

void apply_env(RunConfig& config, const std::function<const char*(const char*)>& getenv) {
  auto set = [&](const char* name, std::string& field) {
    if (const char* v = getenv(name); v && *v) field = v;
  };
  set("GOG_MODEL_URL", config.model.url);
  set("GOG_MODEL_API_KEY", config.model.api_key);
  set("GOG_JUDGE_URL", config.judge.url);
  set("GOG_JUDGE_API_KEY", config.judge.api_key);
  set("GOG_SUMMARIZER_URL", config.summarizer.url);
  set("GOG_SUMMARIZER_API_KEY", config.summarizer.api_key);
  set("GOG_TOOLS_URL", config.tools.url);
  set("GOG_TOOLS_API_KEY", config.tools.api_key);
}

void validate(const RunConfig& c) {
  const auto& b = c.budgets;
  if (b.image_searches_left <= 0 || b.text_searches_left <= 0 || b.rounds_left <= 0 || b.crop_rounds_left <= 0)
    throw ConfigError("all budgets must be positive");
  if (!(c.lambda >= 0.0 && c.lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1]");
  if (c.group_size < 2) throw ConfigError("group_size must be at least 2");
  if (c.episode_parallelism < 1 || c.tool_parallelism < 1) throw ConfigError("parallelism must be at least 1");
  if (c.retry.max_retries < 0 || c.retry.base_backoff.count() < 0) throw ConfigError("retry settings must be non-negative");
  if (!(c.iou_threshold > 0.0 && c.iou_threshold <= 1.0)) throw ConfigError("iou_threshold must lie in (0, 1]");
  if (c.grounding_top_n < 1) throw ConfigError("grounding_top_n must be at least 1");
  if (c.filter_attempts < 1) throw ConfigError("filter_attempts must be at least 1");
  if (!(c.band.low >= 0.0 && c.band.low <= c.band.high && c.band.high <= 1.0))
    throw ConfigError("band must satisfy 0 <= low <= high <= 1");
  if (!(c.fault_rate >= 0.0 && c.fault_rate <= 1.0)) throw ConfigError("fault_rate must lie in [0, 1]");
  if (c.max_consecutive_invalid_turns < 1) throw ConfigError("max_consecutive_invalid_turns must be at least 1");
  if (c.timeout_ms <= 0) throw ConfigError("timeout_ms must be positive");
  if (!c.mock) {
    for (const auto* e : {&c.model, &c.judge, &c.summarizer, &c.tools})
      if (e->url.empty()) throw ConfigError("live mode needs model, judge, summarizer and tools endpoint URLs");
  }
}

ordered_json to_json(const RunConfig& c) {
  return {
      {"mock", c.mock},
      {"mock_transport", c.mock_transport == MockTransport::Http ? "http" : "inprocess"},
      {"corpus", c.corpus_path},
      {"fault_rate", c.fault_rate},
      {"seed", c.seed},
      {"endpoints",
       {{"model", endpoint_json(c.model)},
        {"judge", endpoint_json(c.judge)},
        {"summarizer", endpoint_json(c.summarizer)},
        {"tools", endpoint_json(c.tools)}}},
      {"timeout_ms", c.timeout_ms},
      {"budgets",
       {{"image_searches", c.budgets.image_searches_left},
        {"text_searches", c.budgets.text_searches_left},
        {"rounds", c.budgets.rounds_left},
        {"crop_rounds", c.budgets.crop_rounds_left}}},
      {"forced_answer", c.forced_answer},
      {"max_consecutive_invalid_turns", c.max_consecutive_invalid_turns},
      {"policy_temperature", c.policy_temperature},
      {"lambda", c.lambda},
      {"judge_style", reward::to_string(c.judge_style)},
      {"group_size", c.group_size},
      {"parallelism", {{"episodes", c.episode_parallelism}, {"tools", c.tool_parallelism}}},
      {"retry", {{"max_retries", c.retry.max_retries}, {"base_backoff_ms", c.retry.base_backoff.count()}}},
      {"iou_threshold", c.iou_threshold},
      {"grounding_top_n", c.grounding_top_n},
      {"filter_attempts", c.filter_attempts},
      {"band", {{"low", c.band.low}, {"high", c.band.high}}},
  };
}

}  // namespace gog::config

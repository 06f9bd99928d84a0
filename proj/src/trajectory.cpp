#include "gog/trajectory.hpp"

#include "gog/hashing.hpp"

namespace gog::trajectory {

using nlohmann::json;
using nlohmann::ordered_json;

std::vector<protocol::Action> Trajectory::actions() const {
  std::vector<protocol::Action> out;
  for (const auto& turn : turns)
    if (turn.action) out.push_back(turn.action->action);
  return out;
}

namespace {

template <class T, class Parse>
T enum_from(const json& j, Parse parse, const char* what) {
  auto v = parse(j.get<std::string>());
  if (!v) throw RecordError(std::string("unknown ") + what + ": " + j.get<std::string>());
  return *v;
}

ordered_json budgets_json(const session::Budgets& b) {
  return {{"image_searches_left", b.image_searches_left},
          {"text_searches_left", b.text_searches_left},
          {"rounds_left", b.rounds_left},
          {"crop_rounds_left", b.crop_rounds_left}};
}

session::Budgets budgets_from(const json& j) {
  return {j.at("image_searches_left").get<int>(), j.at("text_searches_left").get<int>(), j.at("rounds_left").get<int>(),
          j.at("crop_rounds_left").get<int>()};
}

ordered_json reward_json(const reward::RewardBreakdown& r) {
  return {{"r_acc", r.r_acc}, {"r_fmt", r.r_fmt}, {"lambda", r.lambda},
          {"total", r.total}, {"advantage", r.advantage}, {"judged", r.judged}};
}

reward::RewardBreakdown reward_from(const json& j) {
  reward::RewardBreakdown r;
  r.r_acc = j.at("r_acc").get<double>();
  r.r_fmt = j.at("r_fmt").get<double>();
  r.lambda = j.at("lambda").get<double>();
  r.total = j.at("total").get<double>();
  r.advantage = j.at("advantage").get<double>();
  r.judged = j.at("judged").get<bool>();
  return r;
}

template <class T>
std::optional<T> optional_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

ordered_json to_json(const protocol::ModelAction& action) {
  ordered_json j;
  j["kind"] = to_string(action.kind());
  j["think"] = action.think ? ordered_json(*action.think) : ordered_json(nullptr);
  std::visit(
      [&](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, protocol::CroppedSearch>) j["description"] = a.description;
        if constexpr (std::is_same_v<T, protocol::TextSearch>) j["query"] = a.query;
        if constexpr (std::is_same_v<T, protocol::SelectCrops>) j["indices"] = a.indices;
        if constexpr (std::is_same_v<T, protocol::Answer>) j["text"] = a.text;
      },
      action.action);
  return j;
}

protocol::ModelAction model_action_from_json(const json& j) {
  protocol::ModelAction out{optional_from<std::string>(j, "think"), protocol::WholeImageSearch{}};
  switch (enum_from<ActionKind>(j.at("kind"), action_kind_from_string, "action kind")) {
    case ActionKind::WholeImageSearch: break;
    case ActionKind::CroppedSearch: out.action = protocol::CroppedSearch{j.at("description").get<std::string>()}; break;
    case ActionKind::TextSearch: out.action = protocol::TextSearch{j.at("query").get<std::string>()}; break;
    case ActionKind::SelectCrops: out.action = protocol::SelectCrops{j.at("indices").get<std::vector<int>>()}; break;
    case ActionKind::Answer: out.action = protocol::Answer{j.at("text").get<std::string>()}; break;
  }
  return out;
}

ordered_json to_json(const protocol::Observation& obs) {
  ordered_json j;
  j["kind"] = protocol::kind_name(obs.kind);
  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, protocol::ImageSearchResults>) {
          ordered_json sections = ordered_json::array();
          for (const auto& s : k.sections) {
            ordered_json hits = ordered_json::array();
            for (const auto& h : s.hits) hits.push_back({{"thumbnail", h.thumbnail}, {"title", h.title}});
            sections.push_back({{"crop_index", s.crop_index ? ordered_json(*s.crop_index) : ordered_json(nullptr)},
                                {"hits", hits}});
          }
          j["sections"] = sections;
        } else if constexpr (std::is_same_v<T, protocol::TextSearchSummary>) {
          j["text"] = k.text;
        } else if constexpr (std::is_same_v<T, protocol::CropCandidates>) {
          j["description"] = k.description;
          j["candidate_images"] = k.images;
        } else if constexpr (std::is_same_v<T, protocol::ToolError>) {
          j["tool"] = k.tool;
          j["message"] = k.message;
        } else {
          j["reason"] = k.reason;
        }
      },
      obs.kind);
  j["rendered"] = obs.rendered;
  j["images"] = obs.images;
  return j;
}

protocol::Observation observation_from_json(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  protocol::Observation obs;
  if (kind == "ImageSearchResults") {
    protocol::ImageSearchResults r;
    for (const auto& s : j.at("sections")) {
      protocol::ImageSearchSection section{optional_from<int>(s, "crop_index"), {}};
      for (const auto& h : s.at("hits"))
        section.hits.push_back({h.at("thumbnail").get<std::string>(), h.at("title").get<std::string>()});
      r.sections.push_back(std::move(section));
    }
    obs.kind = std::move(r);
  } else if (kind == "TextSearchSummary") {
    obs.kind = protocol::TextSearchSummary{j.at("text").get<std::string>()};
  } else if (kind == "CropCandidates") {
    obs.kind = protocol::CropCandidates{j.at("description").get<std::string>(),
                                        j.at("candidate_images").get<std::vector<std::string>>()};
  } else if (kind == "ToolError") {
    obs.kind = protocol::ToolError{j.at("tool").get<std::string>(), j.at("message").get<std::string>()};
  } else if (kind == "TurnRejected") {
    obs.kind = protocol::TurnRejected{j.at("reason").get<std::string>()};
  } else {
    throw RecordError("unknown observation kind: " + kind);
  }
  obs.rendered = j.at("rendered").get<std::string>();
  obs.images = j.at("images").get<std::vector<std::string>>();
  return obs;
}

ordered_json to_json(const Trajectory& t) {
  ordered_json turns = ordered_json::array();
  for (const auto& turn : t.turns) {
    ordered_json tj;
    tj["phase"] = to_string(turn.phase);
    tj["forced_answer"] = turn.forced_answer;
    tj["prompt"] = turn.prompt;
    tj["prompt_images"] = turn.prompt_images;
    tj["raw_output"] = turn.raw_output;
    tj["action"] = turn.action ? to_json(*turn.action) : ordered_json(nullptr);
    tj["rejection"] = turn.rejection ? ordered_json(*turn.rejection) : ordered_json(nullptr);
    tj["observation"] = turn.observation ? to_json(*turn.observation) : ordered_json(nullptr);
    tj["crop_refs"] = turn.crop_refs;
    tj["format_score"] = turn.format_score;
    tj["elapsed"] = turn.elapsed;
    turns.push_back(std::move(tj));
  }
  ordered_json j;
  j["version"] = kRecordVersion;
  j["episode_id"] = t.episode_id;
  j["question"] = t.question;
  j["image"] = t.image_ref;
  j["answers"] = t.ground_truth;
  j["seed"] = t.seed;
  j["turns"] = std::move(turns);
  j["termination"] = to_string(t.termination);
  j["final_answer"] = t.final_answer ? ordered_json(*t.final_answer) : ordered_json(nullptr);
  j["answered"] = t.answered;
  j["budgets_left"] = budgets_json(t.budgets_left);
  j["image_search_dispatches"] = t.image_search_dispatches;
  j["crops_searched"] = t.crops_searched;
  j["errors"] = t.errors;
  j["reward"] = t.reward ? reward_json(*t.reward) : ordered_json(nullptr);
  j["verdict"] = t.verdict ? ordered_json(*t.verdict) : ordered_json(nullptr);
  j["elapsed"] = t.elapsed;
  return j;
}

Trajectory from_json(const json& j) {
  try {
    if (j.at("version").get<std::string>() != kRecordVersion) throw RecordError("unsupported trajectory version");
    Trajectory t;
    t.episode_id = j.at("episode_id").get<std::string>();
    t.question = j.at("question").get<std::string>();
    t.image_ref = j.at("image").get<std::string>();
    t.ground_truth = j.at("answers").get<std::vector<std::string>>();
    t.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& tj : j.at("turns")) {
      TurnRecord turn;
      turn.phase = enum_from<Phase>(tj.at("phase"), phase_from_string, "phase");
      turn.forced_answer = tj.at("forced_answer").get<bool>();
      turn.prompt = tj.at("prompt").get<std::string>();
      turn.prompt_images = tj.at("prompt_images").get<std::vector<std::string>>();
      turn.raw_output = tj.at("raw_output").get<std::string>();
      if (!tj.at("action").is_null()) turn.action = model_action_from_json(tj.at("action"));
      turn.rejection = optional_from<std::string>(tj, "rejection");
      if (!tj.at("observation").is_null()) turn.observation = observation_from_json(tj.at("observation"));
      turn.crop_refs = tj.at("crop_refs").get<std::vector<std::string>>();
      turn.format_score = tj.at("format_score").get<double>();
      turn.elapsed = tj.at("elapsed").get<long>();
      t.turns.push_back(std::move(turn));
    }
    t.termination = enum_from<TerminationReason>(j.at("termination"), termination_from_string, "termination reason");
    t.final_answer = optional_from<std::string>(j, "final_answer");
    t.answered = j.at("answered").get<bool>();
    t.budgets_left = budgets_from(j.at("budgets_left"));
    t.image_search_dispatches = j.at("image_search_dispatches").get<int>();
    t.crops_searched = j.at("crops_searched").get<int>();
    t.errors = j.at("errors").get<std::vector<std::string>>();
    if (!j.at("reward").is_null()) t.reward = reward_from(j.at("reward"));
    t.verdict = optional_from<bool>(j, "verdict");
    t.elapsed = j.at("elapsed").get<long>();
    return t;
  } catch (const json::exception& e) {
    throw RecordError(std::string("malformed trajectory record: ") + e.what());
  }
}

std::string to_jsonl(const Trajectory& t) { return to_json(t).dump(); }

Trajectory parse_jsonl(std::string_view line) {
  try {
    return from_json(json::parse(line));
  } catch (const json::parse_error& e) {
    throw RecordError(std::string("malformed trajectory line: ") + e.what());
  }
}

std::string trajectory_hash(const Trajectory& t) {
  auto j = to_json(t);
  j.erase("elapsed");
  for (auto& turn : j["turns"]) turn.erase("elapsed");
  return sha256_hex(j.dump());
}

}  // namespace gog::trajectory

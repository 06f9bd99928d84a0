#pragma once

// Episode records: one JSON object per line, stable field order. Timings are
// logical ticks in mock mode, so a mock record is a pure function of its
// inputs.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gog/phase.hpp"
#include "gog/protocol.hpp"
#include "gog/reward.hpp"
#include "gog/session.hpp"

namespace gog::trajectory {

inline constexpr std::string_view kRecordVersion = "gog-trajectory/v1";

class RecordError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TurnRecord {
  Phase phase = Phase::Initial;  // phase in which the prompt was issued
  bool forced_answer = false;
  std::string prompt;            // full user message for this turn
  std::vector<std::string> prompt_images;
  std::string raw_output;
  std::optional<protocol::ModelAction> action;  // set when the turn was accepted
  std::optional<std::string> rejection;         // parse or transition failure
  std::optional<protocol::Observation> observation;
  std::vector<std::string> crop_refs;           // candidate crops produced by a CroppedSearch
  double format_score = 0;
  long elapsed = 0;
};

struct Trajectory {
  std::string episode_id;
  std::string question;
  std::string image_ref;
  std::vector<std::string> ground_truth;
  std::uint64_t seed = 0;
  std::vector<TurnRecord> turns;
  TerminationReason termination = TerminationReason::Error;
  std::optional<std::string> final_answer;
  bool answered = false;
  session::Budgets budgets_left{};
  int image_search_dispatches = 0;
  int crops_searched = 0;
  std::vector<std::string> errors;  // tool failures and rejected turns, in order
  std::optional<reward::RewardBreakdown> reward;
  std::optional<bool> verdict;  // judge result on the final answer
  long elapsed = 0;

  /// Accepted actions in order.
  std::vector<protocol::Action> actions() const;
};

nlohmann::ordered_json to_json(const protocol::ModelAction& action);
protocol::ModelAction model_action_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const protocol::Observation& obs);
protocol::Observation observation_from_json(const nlohmann::json& j);

nlohmann::ordered_json to_json(const Trajectory& t);
Trajectory from_json(const nlohmann::json& j);

/// Single-line serialization.
std::string to_jsonl(const Trajectory& t);
Trajectory parse_jsonl(std::string_view line);

/// SHA-256 of the record with timings removed.
std::string trajectory_hash(const Trajectory& t);

}  // namespace gog::trajectory

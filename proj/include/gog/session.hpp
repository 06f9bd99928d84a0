#pragma once

#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "gog/phase.hpp"
#include "gog/protocol.hpp"
#include "gog/result.hpp"

namespace gog::session {

/// Per-episode tool limits. Defaults: 3 image searches, 3 text searches,
/// 5 generation rounds, 5 crop rounds.
struct Budgets {
  int image_searches_left = 3;
  int text_searches_left = 3;
  int rounds_left = 5;
  int crop_rounds_left = 5;

  bool operator==(const Budgets&) const = default;
};

struct SessionConfig {
  Budgets budgets{};
  // When set, exhausting the round budget issues one final answer-only prompt
  // instead of terminating with the fallback answer.
  bool forced_answer = false;
};

inline constexpr std::string_view kFallbackAnswer = "Unable to answer due to lack of relevant information";

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class TerminatedError : public std::logic_error {
 public:
  TerminatedError() : std::logic_error("session is terminated") {}
};

struct HistoryEntry {
  std::string prompt;
  std::string model_turn;
  std::optional<protocol::Observation> observation;
};

struct SessionState {
  Phase phase = Phase::Initial;
  std::optional<TerminationReason> termination;
  Budgets budgets{};
  Budgets initial_budgets{};
  std::string question;
  std::string image_ref;
  std::vector<HistoryEntry> history;
  // Crop image refs awaiting selection; non-empty exactly while in AfterGazeCrops.
  std::vector<std::string> pending_crops;
  bool awaiting_forced_answer = false;
  std::optional<std::string> final_answer;
  bool answered = false;
  int image_search_dispatches = 0;  // one per WholeImageSearch or SelectCrops batch
  int crops_searched = 0;           // individual crops sent to image search
};

// ---------------------------------------------------------------------------
// Tool requests produced by a transition

struct GroundingRequest {
  std::string image_ref;
  std::string description;
  bool operator==(const GroundingRequest&) const = default;
};

struct ImageSearchRequest {
  std::string image_ref;
  std::optional<int> crop_index;
  bool operator==(const ImageSearchRequest&) const = default;
};

struct TextSearchRequest {
  std::string query;
  bool operator==(const TextSearchRequest&) const = default;
};

using ToolRequest = std::variant<GroundingRequest, ImageSearchRequest, TextSearchRequest>;

struct Transition {
  std::vector<ToolRequest> tool_requests;
  Phase next_phase;
  SessionState updated_state;
};

enum class BudgetCounter { ImageSearches, TextSearches, Rounds, CropRounds };

std::string_view to_string(BudgetCounter counter);

struct TransitionError {
  enum class Kind { BudgetViolation, IllegalTransition } kind;
  std::optional<BudgetCounter> counter;  // set for BudgetViolation
  std::string message;
};

// ---------------------------------------------------------------------------

SessionState new_session(std::string question, std::string image_ref, const SessionConfig& config = {});

std::set<ActionKind> allowed_actions(const SessionState& state);

Result<Transition, TransitionError> apply_action(const SessionState& state, const protocol::ModelAction& action);

/// Stores grounded crop refs after a CroppedSearch. An empty list is a failed
/// gaze: the episode falls back to the after-image-search menu so the model
/// can retry the search.
SessionState attach_crops(SessionState state, std::vector<std::string> crop_refs);

/// A rejected turn (unparseable, illegal, over budget) still costs a round.
SessionState consume_rejected_turn(SessionState state);

SessionState record_turn(SessionState state, std::string prompt, std::string model_turn,
                         std::optional<protocol::Observation> observation);

/// The prompt for a phase with the question substituted. Pure in (phase, question).
std::string select_prompt(Phase phase, std::string_view question);

/// Prompt for the next model turn, including the forced-answer prompt.
std::string select_prompt(const SessionState& state);

/// Ends an episode whose round budget is spent. In forced-answer mode the
/// first call instead arms a single answer-only turn.
SessionState terminate_exhausted(SessionState state, const SessionConfig& config = {});

/// Terminates for reasons outside the state machine (repeated invalid turns, infrastructure errors).
SessionState terminate(SessionState state, TerminationReason reason);

bool needs_exhaustion(const SessionState& state);

}  // namespace gog::session

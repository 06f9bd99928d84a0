#include "gog/session.hpp"

#include <algorithm>

#include "gog/prompts.hpp"

namespace gog::session {

namespace {

TransitionError budget_violation(BudgetCounter counter) {
  return {TransitionError::Kind::BudgetViolation, counter,
          "budget exhausted: " + std::string(to_string(counter))};
}

TransitionError illegal(std::string message) {
  return {TransitionError::Kind::IllegalTransition, std::nullopt, std::move(message)};
}

// The counter that blocks an action kind, if any. Answer is never blocked.
std::optional<BudgetCounter> budget_blocker(const SessionState& state, ActionKind kind) {
  if (kind == ActionKind::Answer) return std::nullopt;
  const auto& b = state.budgets;
  if (state.awaiting_forced_answer || b.rounds_left <= 0) return BudgetCounter::Rounds;
  switch (kind) {
    case ActionKind::WholeImageSearch:
      if (b.image_searches_left <= 0) return BudgetCounter::ImageSearches;
      break;
    case ActionKind::CroppedSearch:
    case ActionKind::SelectCrops:
      if (b.image_searches_left <= 0) return BudgetCounter::ImageSearches;
      if (b.crop_rounds_left <= 0) return BudgetCounter::CropRounds;
      break;
    case ActionKind::TextSearch:
      if (b.text_searches_left <= 0) return BudgetCounter::TextSearches;
      break;
    case ActionKind::Answer:
      break;
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(BudgetCounter counter) {
  switch (counter) {
    case BudgetCounter::ImageSearches: return "image_searches";
    case BudgetCounter::TextSearches: return "text_searches";
    case BudgetCounter::Rounds: return "rounds";
    case BudgetCounter::CropRounds: return "crop_rounds";
  }
  return "?";
}

SessionState new_session(std::string question, std::string image_ref, const SessionConfig& config) {
  if (question.find_first_not_of(" \t\r\n") == std::string::npos)
    throw ConfigError("question must not be empty");
  if (image_ref.empty()) throw ConfigError("image reference must not be empty");
  const auto& b = config.budgets;
  if (b.image_searches_left <= 0 || b.text_searches_left <= 0 || b.rounds_left <= 0 || b.crop_rounds_left <= 0)
    throw ConfigError("all budgets must be positive");
  SessionState state;
  state.question = std::move(question);
  state.image_ref = std::move(image_ref);
  state.budgets = b;
  state.initial_budgets = b;
  return state;
}

std::set<ActionKind> allowed_actions(const SessionState& state) {
  if (state.phase == Phase::Terminated) throw TerminatedError();
  std::set<ActionKind> out;
  for (auto kind : kAllActionKinds) {
    if (legal_in_phase(kind, state.phase) && !budget_blocker(state, kind)) out.insert(kind);
  }
  return out;
}

Result<Transition, TransitionError> apply_action(const SessionState& state, const protocol::ModelAction& action) {
  if (state.phase == Phase::Terminated) return unexpected(illegal("session is terminated"));
  const auto kind = action.kind();
  if (state.awaiting_forced_answer && kind != ActionKind::Answer) return unexpected(budget_violation(BudgetCounter::Rounds));
  if (!legal_in_phase(kind, state.phase)) {
    return unexpected(illegal(std::string(to_string(kind)) + " is not allowed in phase " +
                              std::string(to_string(state.phase))));
  }
  if (auto blocker = budget_blocker(state, kind)) return unexpected(budget_violation(*blocker));

  if (const auto* select = std::get_if<protocol::SelectCrops>(&action.action)) {
    const auto available = state.pending_crops.size();
    if (select->indices.empty()) return unexpected(illegal("no crops selected"));
    for (int index : select->indices) {
      if (index < 1 || static_cast<std::size_t>(index) > available) {
        return unexpected(illegal("crop index " + std::to_string(index) + " out of range 1.." + std::to_string(available)));
      }
    }
  }

  Transition t{{}, state.phase, state};
  auto& next = t.updated_state;
  auto& b = next.budgets;
  if (kind != ActionKind::Answer) --b.rounds_left;

  std::visit(
      [&](const auto& a) {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, protocol::WholeImageSearch>) {
          --b.image_searches_left;
          ++next.image_search_dispatches;
          t.tool_requests.push_back(ImageSearchRequest{state.image_ref, std::nullopt});
          t.next_phase = Phase::AfterImageSearch;
        } else if constexpr (std::is_same_v<T, protocol::CroppedSearch>) {
          // Grounding only; the image-search unit is charged when crops are dispatched.
          t.tool_requests.push_back(GroundingRequest{state.image_ref, a.description});
          t.next_phase = Phase::AfterGazeCrops;
        } else if constexpr (std::is_same_v<T, protocol::SelectCrops>) {
          --b.image_searches_left;
          --b.crop_rounds_left;
          ++next.image_search_dispatches;
          next.crops_searched += static_cast<int>(a.indices.size());
          for (int index : a.indices)
            t.tool_requests.push_back(ImageSearchRequest{state.pending_crops[static_cast<std::size_t>(index - 1)], index});
          t.next_phase = Phase::AfterImageSearch;
        } else if constexpr (std::is_same_v<T, protocol::TextSearch>) {
          --b.text_searches_left;
          t.tool_requests.push_back(TextSearchRequest{a.query});
          t.next_phase = Phase::AfterTextSearch;
        } else {
          next.final_answer = a.text;
          next.answered = true;
          next.termination = TerminationReason::Answered;
          next.awaiting_forced_answer = false;
          t.next_phase = Phase::Terminated;
        }
      },
      action.action);

  next.phase = t.next_phase;
  next.pending_crops.clear();
  return t;
}

SessionState attach_crops(SessionState state, std::vector<std::string> crop_refs) {
  if (state.phase != Phase::AfterGazeCrops) throw std::logic_error("crops can only be attached after a cropped search");
  if (crop_refs.empty()) {
    state.phase = Phase::AfterImageSearch;
    state.pending_crops.clear();
  } else {
    state.pending_crops = std::move(crop_refs);
  }
  return state;
}

SessionState consume_rejected_turn(SessionState state) {
  if (state.phase == Phase::Terminated) return state;
  if (state.budgets.rounds_left > 0) --state.budgets.rounds_left;
  return state;
}

SessionState record_turn(SessionState state, std::string prompt, std::string model_turn,
                         std::optional<protocol::Observation> observation) {
  state.history.push_back({std::move(prompt), std::move(model_turn), std::move(observation)});
  return state;
}

std::string select_prompt(Phase phase, std::string_view question) {
  std::string_view tmpl;
  switch (phase) {
    case Phase::Initial: tmpl = prompts::round1(); break;
    case Phase::AfterImageSearch: tmpl = prompts::after_image_search(); break;
    case Phase::AfterGazeCrops: tmpl = prompts::after_gaze(); break;
    case Phase::AfterTextSearch: tmpl = prompts::after_text_search(); break;
    case Phase::Terminated: throw TerminatedError();
  }
  return prompts::fill(tmpl, "question", question);
}

std::string select_prompt(const SessionState& state) {
  if (state.phase == Phase::Terminated) throw TerminatedError();
  if (state.awaiting_forced_answer) return prompts::fill(prompts::forced_answer(), "question", state.question);
  return select_prompt(state.phase, state.question);
}

bool needs_exhaustion(const SessionState& state) {
  return state.phase != Phase::Terminated && state.budgets.rounds_left <= 0 && !state.awaiting_forced_answer;
}

SessionState terminate_exhausted(SessionState state, const SessionConfig& config) {
  if (state.phase == Phase::Terminated) return state;
  if (config.forced_answer && !state.awaiting_forced_answer) {
    state.awaiting_forced_answer = true;
    return state;
  }
  state.phase = Phase::Terminated;
  state.termination = TerminationReason::BudgetExhausted;
  state.final_answer = std::string(kFallbackAnswer);
  state.answered = false;
  state.awaiting_forced_answer = false;
  state.pending_crops.clear();
  return state;
}

SessionState terminate(SessionState state, TerminationReason reason) {
  if (state.phase == Phase::Terminated) return state;
  state.phase = Phase::Terminated;
  state.termination = reason;
  state.awaiting_forced_answer = false;
  state.pending_crops.clear();
  if (reason != TerminationReason::Answered) state.answered = false;
  return state;
}

}  // namespace gog::session

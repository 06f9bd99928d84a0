#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace gog {

enum class Phase { Initial, AfterImageSearch, AfterGazeCrops, AfterTextSearch, Terminated };

enum class ActionKind { WholeImageSearch, CroppedSearch, TextSearch, SelectCrops, Answer };

enum class TerminationReason { Answered, BudgetExhausted, InvalidTurn, Error };

std::string_view to_string(Phase phase);
std::string_view to_string(ActionKind kind);
std::string_view to_string(TerminationReason reason);

std::optional<Phase> phase_from_string(std::string_view name);
std::optional<ActionKind> action_kind_from_string(std::string_view name);
std::optional<TerminationReason> termination_from_string(std::string_view name);

inline constexpr std::array<ActionKind, 5> kAllActionKinds = {
    ActionKind::WholeImageSearch, ActionKind::CroppedSearch, ActionKind::TextSearch,
    ActionKind::SelectCrops, ActionKind::Answer};

/// The action menu a phase's prompt offers, before any budget is applied.
bool legal_in_phase(ActionKind kind, Phase phase);

}  // namespace gog

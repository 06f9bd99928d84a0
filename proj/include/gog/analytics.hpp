#pragma once

// Aggregate measurements over finished trajectories: search-behavior
// distribution, gaze correctness and reflection. Every report renders as an
// ordered JSON document and a tab-separated table.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gog/errors.hpp"
#include "gog/gaze.hpp"
#include "gog/protocol.hpp"
#include "gog/trajectory.hpp"

namespace gog::analytics {

enum class BehaviorClass { NoSearch, OneSearch, MixSearch };
enum class ToolType { Text, Image, Crop };

inline constexpr std::array<BehaviorClass, 3> kBehaviorClasses = {BehaviorClass::NoSearch, BehaviorClass::OneSearch,
                                                                  BehaviorClass::MixSearch};
inline constexpr std::array<ToolType, 3> kToolTypes = {ToolType::Text, ToolType::Image, ToolType::Crop};

std::string_view to_string(BehaviorClass c);
std::string_view to_string(ToolType t);

/// Occurrences per tool type. Whole-image search counts as image; a cropped
/// search counts once as crop, and the crop selection that follows it is not
/// counted again.
struct ToolUsage {
  std::array<long, 3> counts{};  // indexed like kToolTypes
  long& operator[](ToolType t) { return counts[static_cast<std::size_t>(t)]; }
  long operator[](ToolType t) const { return counts[static_cast<std::size_t>(t)]; }
  int distinct() const;
};

ToolUsage tool_usage(const std::vector<protocol::Action>& actions);

BehaviorClass classify_behavior(const ToolUsage& usage);
BehaviorClass classify_behavior(const std::vector<protocol::Action>& actions);
BehaviorClass classify_behavior(const trajectory::Trajectory& t);

struct BehaviorSample {
  std::string id;
  std::vector<protocol::Action> actions;
};

struct BehaviorReport {
  std::size_t samples = 0;
  std::array<std::size_t, 3> class_counts{};               // indexed like kBehaviorClasses
  std::array<std::vector<std::string>, 3> class_ids{};     // trajectory ids per class, input order
  std::array<std::size_t, 3> samples_using_tool{};         // indexed like kToolTypes
  std::array<long, 3> tool_occurrences{};

  double ratio(BehaviorClass c) const;
  std::size_t count(BehaviorClass c) const { return class_counts[static_cast<std::size_t>(c)]; }
};

/// Throws EmptyInput on an empty set.
BehaviorReport behavior_distribution(const std::vector<BehaviorSample>& samples, std::size_t parallelism = 4);
BehaviorReport behavior_distribution(const std::vector<trajectory::Trajectory>& trajectories, std::size_t parallelism = 4);

/// Count-weighted combination of two reports; ids are concatenated a then b.
BehaviorReport merge(const BehaviorReport& a, const BehaviorReport& b);

struct GazeReport {
  std::size_t outcomes = 0;
  std::size_t relevant = 0;
  std::size_t errors = 0;
  std::size_t reflected_errors = 0;
  double correctness = 0;                    // relevant / outcomes
  std::optional<double> reflection_on_error; // reflected_errors / errors, absent without errors
};

/// Throws EmptyInput on an empty list and MissingLabel on an unlabeled outcome.
GazeReport gaze_report(const std::vector<gaze::GazeOutcome>& outcomes);

nlohmann::ordered_json to_json(const BehaviorReport& r);
nlohmann::ordered_json to_json(const GazeReport& r);

/// Rows: class, count, ratio.
std::string behavior_table(const BehaviorReport& r);
/// Rows: metric, value; absent values are written as "absent".
std::string gaze_table(const GazeReport& r);

/// Writes <prefix>.json and <prefix>.tsv. Throws std::runtime_error on I/O failure.
void emit_report(const nlohmann::ordered_json& document, const std::string& table, const std::string& prefix);

}  // namespace gog::analytics

#include "gog/analytics.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "gog/parallel.hpp"

namespace gog::analytics {

using nlohmann::ordered_json;

std::string_view to_string(BehaviorClass c) {
  switch (c) {
    case BehaviorClass::NoSearch: return "NoSearch";
    case BehaviorClass::OneSearch: return "OneSearch";
    case BehaviorClass::MixSearch: return "MixSearch";
  }
  return "?";
}

std::string_view to_string(ToolType t) {
  switch (t) {
    case ToolType::Text: return "text";
    case ToolType::Image: return "image";
    case ToolType::Crop: return "crop";
  }
  return "?";
}

int ToolUsage::distinct() const {
  int n = 0;
  for (auto c : counts) n += c > 0 ? 1 : 0;
  return n;
}

ToolUsage tool_usage(const std::vector<protocol::Action>& actions) {
  ToolUsage u;
  for (const auto& a : actions) {
    switch (protocol::kind_of(a)) {
      case ActionKind::TextSearch: ++u[ToolType::Text]; break;
      case ActionKind::WholeImageSearch: ++u[ToolType::Image]; break;
      case ActionKind::CroppedSearch: ++u[ToolType::Crop]; break;
      case ActionKind::SelectCrops:
      case ActionKind::Answer: break;
    }
  }
  return u;
}

BehaviorClass classify_behavior(const ToolUsage& usage) {
  switch (usage.distinct()) {
    case 0: return BehaviorClass::NoSearch;
    case 1: return BehaviorClass::OneSearch;
    default: return BehaviorClass::MixSearch;
  }
}

BehaviorClass classify_behavior(const std::vector<protocol::Action>& actions) {
  return classify_behavior(tool_usage(actions));
}

BehaviorClass classify_behavior(const trajectory::Trajectory& t) { return classify_behavior(t.actions()); }

double BehaviorReport::ratio(BehaviorClass c) const {
  if (samples == 0) throw EmptyInput("ratio of an empty behavior report");
  return static_cast<double>(count(c)) / static_cast<double>(samples);
}

BehaviorReport behavior_distribution(const std::vector<BehaviorSample>& samples, std::size_t parallelism) {
  if (samples.empty()) throw EmptyInput("behavior distribution needs at least one trajectory");
  auto usages = parallel_map(samples.size(), parallelism, [&](std::size_t i) { return tool_usage(samples[i].actions); });
  BehaviorReport r;
  r.samples = samples.size();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto c = static_cast<std::size_t>(classify_behavior(usages[i]));
    ++r.class_counts[c];
    r.class_ids[c].push_back(samples[i].id);
    for (std::size_t t = 0; t < kToolTypes.size(); ++t) {
      r.tool_occurrences[t] += usages[i].counts[t];
      r.samples_using_tool[t] += usages[i].counts[t] > 0 ? 1 : 0;
    }
  }
  return r;
}

BehaviorReport behavior_distribution(const std::vector<trajectory::Trajectory>& trajectories, std::size_t parallelism) {
  std::vector<BehaviorSample> samples;
  samples.reserve(trajectories.size());
  for (const auto& t : trajectories) samples.push_back({t.episode_id, t.actions()});
  return behavior_distribution(samples, parallelism);
}

BehaviorReport merge(const BehaviorReport& a, const BehaviorReport& b) {
  BehaviorReport r;
  r.samples = a.samples + b.samples;
  for (std::size_t i = 0; i < 3; ++i) {
    r.class_counts[i] = a.class_counts[i] + b.class_counts[i];
    r.class_ids[i] = a.class_ids[i];
    r.class_ids[i].insert(r.class_ids[i].end(), b.class_ids[i].begin(), b.class_ids[i].end());
    r.samples_using_tool[i] = a.samples_using_tool[i] + b.samples_using_tool[i];
    r.tool_occurrences[i] = a.tool_occurrences[i] + b.tool_occurrences[i];
  }
  return r;
}

GazeReport gaze_report(const std::vector<gaze::GazeOutcome>& outcomes) {
  if (outcomes.empty()) throw EmptyInput("gaze report needs at least one outcome");
  GazeReport r;
  r.outcomes = outcomes.size();
  for (const auto& o : outcomes) {
    if (!o.relevant) throw MissingLabel("every gaze outcome must carry a relevance label");
    if (*o.relevant) {
      ++r.relevant;
    } else {
      ++r.errors;
      r.reflected_errors += o.reflected ? 1 : 0;
    }
  }
  r.correctness = static_cast<double>(r.relevant) / static_cast<double>(r.outcomes);
  if (r.errors > 0) r.reflection_on_error = static_cast<double>(r.reflected_errors) / static_cast<double>(r.errors);
  return r;
}

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

ordered_json to_json(const BehaviorReport& r) {
  ordered_json classes = ordered_json::array();
  for (auto c : kBehaviorClasses) {
    const auto i = static_cast<std::size_t>(c);
    classes.push_back({{"class", to_string(c)},
                       {"count", r.class_counts[i]},
                       {"ratio", r.samples ? ordered_json(r.ratio(c)) : ordered_json(nullptr)},
                       {"ids", r.class_ids[i]}});
  }
  ordered_json tools = ordered_json::array();
  for (auto t : kToolTypes) {
    const auto i = static_cast<std::size_t>(t);
    tools.push_back({{"tool", to_string(t)}, {"samples", r.samples_using_tool[i]}, {"occurrences", r.tool_occurrences[i]}});
  }
  return {{"samples", r.samples}, {"classes", classes}, {"tools", tools}};
}

ordered_json to_json(const GazeReport& r) {
  return {{"outcomes", r.outcomes},
          {"relevant", r.relevant},
          {"errors", r.errors},
          {"reflected_errors", r.reflected_errors},
          {"correctness", r.correctness},
          {"reflection_on_error", r.reflection_on_error ? ordered_json(*r.reflection_on_error) : ordered_json(nullptr)}};
}

std::string behavior_table(const BehaviorReport& r) {
  std::ostringstream out;
  out << "class\tcount\tratio\n";
  for (auto c : kBehaviorClasses)
    out << to_string(c) << '\t' << r.count(c) << '\t' << (r.samples ? fixed(r.ratio(c), 6) : "absent") << '\n';
  return out.str();
}

std::string gaze_table(const GazeReport& r) {
  std::ostringstream out;
  out << "metric\tvalue\n";
  out << "outcomes\t" << r.outcomes << '\n';
  out << "correctness\t" << fixed(r.correctness, 6) << '\n';
  out << "errors\t" << r.errors << '\n';
  out << "reflection_on_error\t" << (r.reflection_on_error ? fixed(*r.reflection_on_error, 6) : "absent") << '\n';
  return out.str();
}

void emit_report(const ordered_json& document, const std::string& table, const std::string& prefix) {
  auto write = [](const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << body;
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + path);
  };
  write(prefix + ".json", document.dump(2) + "\n");
  write(prefix + ".tsv", table);
}

}  // namespace gog::analytics

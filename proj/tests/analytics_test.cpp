#include <gtest/gtest.h>

#include <random>

#include "gog/analytics.hpp"

using namespace gog;
using namespace gog::analytics;
using namespace gog::protocol;

TEST(Behavior, ClassesByDistinctToolTypes) {
  EXPECT_EQ(classify_behavior(std::vector<Action>{Answer{"a"}}), BehaviorClass::NoSearch);
  EXPECT_EQ(classify_behavior(std::vector<Action>{TextSearch{"q"}, TextSearch{"r"}, Answer{"a"}}),
            BehaviorClass::OneSearch);
  // A cropped search and its selection count once, as crop.
  EXPECT_EQ(classify_behavior(std::vector<Action>{CroppedSearch{"d"}, SelectCrops{{1}}, Answer{"a"}}),
            BehaviorClass::OneSearch);
  EXPECT_EQ(classify_behavior(std::vector<Action>{WholeImageSearch{}, CroppedSearch{"d"}, Answer{"a"}}),
            BehaviorClass::MixSearch);
  EXPECT_EQ(classify_behavior(std::vector<Action>{WholeImageSearch{}, TextSearch{"q"}}), BehaviorClass::MixSearch);
}

TEST(Behavior, ToolUsageCounts) {
  auto u = tool_usage({WholeImageSearch{}, CroppedSearch{"d"}, SelectCrops{{1, 2}}, CroppedSearch{"e"},
                       TextSearch{"q"}, Answer{"a"}});
  EXPECT_EQ(u[ToolType::Image], 1);
  EXPECT_EQ(u[ToolType::Crop], 2);
  EXPECT_EQ(u[ToolType::Text], 1);
  EXPECT_EQ(u.distinct(), 3);
}

TEST(Behavior, HandCountedDistribution) {
  // Ten trajectories classified by hand: 3 NoSearch, 4 OneSearch, 3 MixSearch.
  std::vector<BehaviorSample> samples = {
      {"t0", {Answer{"a"}}},
      {"t1", {TextSearch{"q"}, Answer{"a"}}},
      {"t2", {WholeImageSearch{}, TextSearch{"q"}, Answer{"a"}}},
      {"t3", {}},
      {"t4", {CroppedSearch{"d"}, SelectCrops{{1}}, Answer{"a"}}},
      {"t5", {WholeImageSearch{}, WholeImageSearch{}, Answer{"a"}}},
      {"t6", {CroppedSearch{"d"}, SelectCrops{{1}}, TextSearch{"q"}, Answer{"a"}}},
      {"t7", {Answer{"a"}}},
      {"t8", {TextSearch{"q"}, TextSearch{"r"}, TextSearch{"s"}}},
      {"t9", {WholeImageSearch{}, CroppedSearch{"d"}, SelectCrops{{2}}, TextSearch{"q"}, Answer{"a"}}},
  };
  auto r = behavior_distribution(samples, 3);
  EXPECT_EQ(r.samples, 10u);
  EXPECT_EQ(r.count(BehaviorClass::NoSearch), 3u);
  EXPECT_EQ(r.count(BehaviorClass::OneSearch), 4u);
  EXPECT_EQ(r.count(BehaviorClass::MixSearch), 3u);
  EXPECT_EQ(r.class_ids[0], (std::vector<std::string>{"t0", "t3", "t7"}));
  EXPECT_EQ(r.class_ids[2], (std::vector<std::string>{"t2", "t6", "t9"}));
  EXPECT_DOUBLE_EQ(r.ratio(BehaviorClass::OneSearch), 0.4);
  EXPECT_EQ(r.samples_using_tool[static_cast<std::size_t>(ToolType::Text)], 5u);
  EXPECT_EQ(r.tool_occurrences[static_cast<std::size_t>(ToolType::Text)], 7);
  EXPECT_NE(behavior_table(r).find("OneSearch\t4\t0.400000"), std::string::npos);
}

TEST(Behavior, EmptyInputThrows) {
  EXPECT_THROW(behavior_distribution(std::vector<BehaviorSample>{}), EmptyInput);
}

TEST(Behavior, RatiosSumToOneAndMergeIsCountWeighted) {
  std::mt19937_64 rng(51);
  auto random_samples = [&](std::size_t n) {
    std::vector<BehaviorSample> out;
    for (std::size_t i = 0; i < n; ++i) {
      BehaviorSample s{"s" + std::to_string(i), {}};
      for (int k = 0, m = static_cast<int>(rng() % 5); k < m; ++k) {
        switch (rng() % 3) {
          case 0: s.actions.push_back(TextSearch{"q"}); break;
          case 1: s.actions.push_back(WholeImageSearch{}); break;
          default: s.actions.push_back(CroppedSearch{"d"}); break;
        }
      }
      s.actions.push_back(Answer{"a"});
      out.push_back(std::move(s));
    }
    return out;
  };
  for (int trial = 0; trial < 50; ++trial) {
    auto a = random_samples(1 + rng() % 40), b = random_samples(1 + rng() % 40);
    auto ra = behavior_distribution(a, 4), rb = behavior_distribution(b, 1);
    double sum = 0;
    for (auto c : kBehaviorClasses) sum += ra.ratio(c);
    EXPECT_NEAR(sum, 1.0, 1e-12);
    std::vector<BehaviorSample> both = a;
    both.insert(both.end(), b.begin(), b.end());
    auto combined = behavior_distribution(both, 2);
    auto merged = merge(ra, rb);
    EXPECT_EQ(merged.class_counts, combined.class_counts);
    EXPECT_EQ(merged.class_ids, combined.class_ids);
    EXPECT_EQ(merged.tool_occurrences, combined.tool_occurrences);
  }
}

TEST(Behavior, ParallelismDoesNotChangeResult) {
  std::vector<BehaviorSample> samples;
  for (int i = 0; i < 200; ++i)
    samples.push_back({std::to_string(i), i % 3 ? std::vector<Action>{TextSearch{"q"}} : std::vector<Action>{}});
  EXPECT_EQ(behavior_distribution(samples, 1).class_ids, behavior_distribution(samples, 8).class_ids);
}

TEST(Gaze, ReportCountsAndReflection) {
  std::vector<gaze::GazeOutcome> outcomes = {
      {{1}, true, false}, {{2}, false, true}, {{1}, false, false}, {{3}, true, true}};
  auto r = gaze_report(outcomes);
  EXPECT_EQ(r.outcomes, 4u);
  EXPECT_EQ(r.relevant, 2u);
  EXPECT_EQ(r.errors, 2u);
  EXPECT_EQ(r.reflected_errors, 1u);
  EXPECT_DOUBLE_EQ(r.correctness, 0.5);
  EXPECT_DOUBLE_EQ(*r.reflection_on_error, 0.5);
}

TEST(Gaze, NoErrorsMeansAbsentRate) {
  auto r = gaze_report({{{1}, true, false}});
  EXPECT_FALSE(r.reflection_on_error);
  EXPECT_NE(gaze_table(r).find("reflection_on_error\tabsent"), std::string::npos);
  EXPECT_TRUE(to_json(r)["reflection_on_error"].is_null());
}

TEST(Gaze, Contracts) {
  EXPECT_THROW(gaze_report({}), EmptyInput);
  EXPECT_THROW(gaze_report({{{1}, std::nullopt, false}}), MissingLabel);
}

#include <gtest/gtest.h>

#include <random>

#include "gog/gaze.hpp"
#include "support.hpp"

using namespace gog;
using namespace gog::gaze;
using toolkit::GroundingBox;

namespace {

BBox to_bbox(const oracle::IBox& b) {
  return {static_cast<double>(b.x0), static_cast<double>(b.y0), static_cast<double>(b.x1), static_cast<double>(b.y1)};
}

class CountingSearch final : public toolkit::ImageSearchTool {
 public:
  std::set<std::string> failing;
  toolkit::ToolResult<std::vector<toolkit::ImageSearchResult>> search(std::string_view ref) override {
    if (failing.count(std::string(ref)))
      return unexpected(toolkit::ToolFailure::make("image_search", toolkit::FailureCause::MalformedContent));
    return std::vector<toolkit::ImageSearchResult>{{"thumb:" + std::string(ref), "title", 1}};
  }
};

CropCandidateSet three_candidates(ImageStore& store) {
  store.add_synthetic("img", 100, 100, 1);
  std::vector<GroundingBox> boxes = {
      {{0, 0, 10, 10}, 0.9, "d"}, {{50, 50, 60, 60}, 0.8, "d"}, {{80, 0, 100, 20}, 0.7, "d"}};
  return materialize(dedup_boxes(boxes, 0.7, "d"), store, "img");
}

}  // namespace

TEST(Iou, HandComputedOneSeventh) {
  // Overlap 1x1 = 1, union 4 + 4 - 1 = 7.
  EXPECT_DOUBLE_EQ(iou({0, 0, 2, 2}, {1, 1, 3, 3}), 1.0 / 7.0);
}

TEST(Iou, EdgeCases) {
  EXPECT_EQ(iou({0, 0, 2, 2}, {0, 0, 2, 2}), 1.0);
  EXPECT_EQ(iou({0, 0, 2, 2}, {2, 0, 4, 2}), 0.0);  // touching edges
  EXPECT_EQ(iou({0, 0, 0, 2}, {0, 0, 2, 2}), 0.0);  // empty box
  EXPECT_DOUBLE_EQ(iou({0, 0, 4, 4}, {0, 0, 2, 2}), 0.25);
}

TEST(Iou, MatchesGridCountingOracle) {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> c(0, 20);
  for (int i = 0; i < 2000; ++i) {
    oracle::IBox a{c(rng), c(rng), 0, 0}, b{c(rng), c(rng), 0, 0};
    a.x1 = a.x0 + 1 + c(rng) % 8;
    a.y1 = a.y0 + 1 + c(rng) % 8;
    b.x1 = b.x0 + 1 + c(rng) % 8;
    b.y1 = b.y0 + 1 + c(rng) % 8;
    ASSERT_NEAR(iou(to_bbox(a), to_bbox(b)), oracle::grid_iou(a, b), 1e-12);
    ASSERT_DOUBLE_EQ(iou(to_bbox(a), to_bbox(b)), iou(to_bbox(b), to_bbox(a)));
  }
}

TEST(Dedup, SuppressesAtThreshold) {
  // (0,0,10,10) vs (0,0,10,7): IoU 0.7 exactly, suppressed because the rule is >=.
  std::vector<GroundingBox> boxes = {{{0, 0, 10, 10}, 0.9, ""}, {{0, 0, 10, 7}, 0.8, ""}, {{20, 20, 30, 30}, 0.5, ""}};
  auto set = dedup_boxes(boxes, 0.7);
  ASSERT_EQ(set.candidates.size(), 2u);
  EXPECT_EQ(set.candidates[0].index, 1);
  EXPECT_EQ(set.candidates[1].index, 2);
  EXPECT_EQ(set.candidates[1].box.bbox, (BBox{20, 20, 30, 30}));
}

TEST(Dedup, RejectsUnsortedInputAndBadThreshold) {
  std::vector<GroundingBox> boxes = {{{0, 0, 1, 1}, 0.1, ""}, {{0, 0, 1, 1}, 0.2, ""}};
  EXPECT_THROW(dedup_boxes(boxes, 0.7), std::invalid_argument);
  EXPECT_THROW(dedup_boxes({}, 0.0), std::invalid_argument);
  EXPECT_THROW(dedup_boxes({}, 1.5), std::invalid_argument);
  EXPECT_TRUE(dedup_boxes({}, 0.7).empty());
}

TEST(Dedup, MatchesBruteForceAndInvariants) {
  std::mt19937_64 rng(32);
  for (double threshold : {0.3, 0.5, 0.7}) {
    for (int trial = 0; trial < 500; ++trial) {
      auto raw = oracle::random_box_set(rng, 64, 64);
      // Sorted by score; equal scores left in random order.
      std::shuffle(raw.begin(), raw.end(), rng);
      std::stable_sort(raw.begin(), raw.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
      std::vector<GroundingBox> boxes;
      for (const auto& r : raw) boxes.push_back({to_bbox(r.box), r.score, "q"});

      const auto set = dedup_boxes(boxes, threshold);
      const auto expected = oracle::brute_force_nms(raw, threshold);
      ASSERT_EQ(set.candidates.size(), expected.size());
      for (std::size_t i = 0; i < expected.size(); ++i) {
        EXPECT_EQ(set.candidates[i].box.bbox, to_bbox(raw[expected[i]].box));
        EXPECT_EQ(set.candidates[i].index, static_cast<int>(i) + 1);
      }
      // No two survivors overlap at or above the threshold.
      for (std::size_t i = 0; i < set.candidates.size(); ++i)
        for (std::size_t j = i + 1; j < set.candidates.size(); ++j)
          EXPECT_LT(iou(set.candidates[i].box.bbox, set.candidates[j].box.bbox), threshold);
      // Idempotent.
      std::vector<GroundingBox> again;
      for (const auto& c : set.candidates) again.push_back(c.box);
      EXPECT_EQ(dedup_boxes(again, threshold).candidates.size(), set.candidates.size());
    }
  }
}

TEST(Materialize, CropsInCandidateOrder) {
  ImageStore store;
  auto set = three_candidates(store);
  EXPECT_EQ(set.image_refs(), (std::vector<std::string>{"img@0,0,10,10", "img@50,50,60,60", "img@80,0,100,20"}));
  EXPECT_EQ(store.dimensions(set.candidates[2].image_ref), (std::pair<int, int>{20, 20}));
}

TEST(Dispatch, SearchesSelectedInIndexOrder) {
  ImageStore store;
  auto set = three_candidates(store);
  CountingSearch search;
  auto out = dispatch_selected(set, {1, 3}, search, 2, {0, std::chrono::milliseconds(0)});
  ASSERT_EQ(out.results.sections.size(), 2u);
  EXPECT_EQ(out.results.sections[0].crop_index, 1);
  EXPECT_EQ(out.results.sections[1].crop_index, 3);
  EXPECT_EQ(out.results.sections[1].hits[0].thumbnail, "thumb:img@80,0,100,20");
  EXPECT_FALSE(out.all_failed());
}

TEST(Dispatch, FailedCropGivesEmptySection) {
  ImageStore store;
  auto set = three_candidates(store);
  CountingSearch search;
  search.failing = {"img@50,50,60,60"};
  auto out = dispatch_selected(set, {1, 2}, search, 2, {0, std::chrono::milliseconds(0)});
  EXPECT_EQ(out.failures.size(), 1u);
  EXPECT_TRUE(out.results.sections[1].hits.empty());
  EXPECT_FALSE(out.all_failed());
  EXPECT_TRUE(dispatch_selected(set, {2}, search, 1, {0, std::chrono::milliseconds(0)}).all_failed());
}

TEST(Dispatch, IllegalIndexThrows) {
  ImageStore store;
  auto set = three_candidates(store);
  CountingSearch search;
  EXPECT_THROW(dispatch_selected(set, {4}, search, 1), IllegalIndex);
  EXPECT_THROW(dispatch_selected(set, {0}, search, 1), IllegalIndex);
}

TEST(Reflection, LaterImageSearchMarksGaze) {
  using namespace protocol;
  std::vector<Action> actions = {CroppedSearch{"a"}, SelectCrops{{1}}, CroppedSearch{"b"}, SelectCrops{{2}},
                                 TextSearch{"q"}, Answer{"x"}};
  auto out = detect_reflection(actions);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_TRUE(out[0].reflected);
  EXPECT_FALSE(out[1].reflected);
  EXPECT_EQ(out[1].selected_indices, (std::vector<int>{2}));

  auto whole = detect_reflection({CroppedSearch{"a"}, SelectCrops{{1}}, WholeImageSearch{}});
  EXPECT_TRUE(whole.at(0).reflected);
  EXPECT_TRUE(detect_reflection({TextSearch{"q"}, Answer{"a"}}).empty());
}

TEST(Accuracy, FractionRelevant) {
  std::vector<GazeOutcome> outcomes = {{{1}, true, false}, {{2}, false, true}, {{1}, true, false}, {{3}, true, false}};
  EXPECT_DOUBLE_EQ(crop_selection_accuracy(outcomes), 0.75);
  EXPECT_THROW(crop_selection_accuracy({}), EmptyInput);
  outcomes.push_back({{1}, std::nullopt, false});
  EXPECT_THROW(crop_selection_accuracy(outcomes), MissingLabel);
}

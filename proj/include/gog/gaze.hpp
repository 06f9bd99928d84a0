#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gog/errors.hpp"
#include "gog/image.hpp"
#include "gog/protocol.hpp"
#include "gog/toolkit.hpp"

namespace gog::gaze {

inline constexpr double kDefaultIouThreshold = 0.7;

/// Intersection over union; 0 when either box is empty.
double iou(const BBox& a, const BBox& b);

struct Candidate {
  int index;  // 1-based
  toolkit::GroundingBox box;
  std::string image_ref;  // crop of the searched image, empty until materialized
};

struct CropCandidateSet {
  std::vector<Candidate> candidates;
  std::string source_description;

  bool empty() const { return candidates.empty(); }
  std::vector<std::string> image_refs() const;
};

/// Greedy suppression over boxes sorted by descending score: a box survives
/// unless its IoU with an already kept box is >= threshold. Boxes with equal
/// scores are visited in lexicographic (x0, y0, x1, y1) order, so the result
/// does not depend on how equal-score boxes were ordered on input. Survivors
/// are reindexed from 1. Throws std::invalid_argument when the input is not
/// sorted by score or the threshold is outside (0, 1].
CropCandidateSet dedup_boxes(const std::vector<toolkit::GroundingBox>& boxes, double iou_threshold,
                             std::string description = {});

/// Cuts each candidate's region out of `image_ref`.
CropCandidateSet materialize(CropCandidateSet set, const ImageStore& store, std::string_view image_ref);

struct DispatchResult {
  protocol::ImageSearchResults results;  // one section per selected index, in index order
  std::vector<toolkit::ToolFailure> failures;
  bool all_failed() const { return !failures.empty() && failures.size() == results.sections.size(); }
};

/// Searches the selected crops concurrently. Throws IllegalIndex when an index
/// is not a candidate. A crop whose search fails contributes an empty section
/// and a failure entry.
DispatchResult dispatch_selected(const CropCandidateSet& set, const std::vector<int>& indices,
                                 toolkit::ImageSearchTool& search, std::size_t parallelism,
                                 const toolkit::RetryPolicy& retry = {});

struct GazeOutcome {
  std::vector<int> selected_indices;
  std::optional<bool> relevant;  // supplied label
  bool reflected = false;
};

/// One outcome per SelectCrops, in order. A gaze is reflected when a later
/// CroppedSearch or WholeImageSearch follows it.
std::vector<GazeOutcome> detect_reflection(const std::vector<protocol::Action>& actions);

/// Fraction of outcomes labeled relevant. Throws EmptyInput on an empty list
/// and MissingLabel when any outcome is unlabeled.
double crop_selection_accuracy(const std::vector<GazeOutcome>& outcomes);

}  // namespace gog::gaze

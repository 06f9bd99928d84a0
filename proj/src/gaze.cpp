#include "gog/gaze.hpp"

#include <algorithm>
#include <numeric>
#include <tuple>

#include "gog/parallel.hpp"

namespace gog::gaze {

double iou(const BBox& a, const BBox& b) {
  const double ix = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const double iy = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  const double inter = ix > 0 && iy > 0 ? ix * iy : 0.0;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

std::vector<std::string> CropCandidateSet::image_refs() const {
  std::vector<std::string> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) out.push_back(c.image_ref);
  return out;
}

CropCandidateSet dedup_boxes(const std::vector<toolkit::GroundingBox>& boxes, double iou_threshold,
                             std::string description) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) throw std::invalid_argument("IoU threshold must lie in (0, 1]");
  for (std::size_t i = 1; i < boxes.size(); ++i)
    if (boxes[i].score > boxes[i - 1].score) throw std::invalid_argument("boxes must be sorted by descending score");

  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    const auto& a = boxes[i];
    const auto& b = boxes[j];
    if (a.score != b.score) return a.score > b.score;
    return std::tie(a.bbox.x0, a.bbox.y0, a.bbox.x1, a.bbox.y1) < std::tie(b.bbox.x0, b.bbox.y0, b.bbox.x1, b.bbox.y1);
  });

  CropCandidateSet set;
  set.source_description = std::move(description);
  for (auto i : order) {
    const auto& box = boxes[i];
    const bool suppressed = std::any_of(set.candidates.begin(), set.candidates.end(),
                                        [&](const Candidate& kept) { return iou(kept.box.bbox, box.bbox) >= iou_threshold; });
    if (!suppressed) set.candidates.push_back({static_cast<int>(set.candidates.size()) + 1, box, {}});
  }
  return set;
}

CropCandidateSet materialize(CropCandidateSet set, const ImageStore& store, std::string_view image_ref) {
  for (auto& c : set.candidates) c.image_ref = store.crop(image_ref, c.box.bbox);
  return set;
}

DispatchResult dispatch_selected(const CropCandidateSet& set, const std::vector<int>& indices,
                                 toolkit::ImageSearchTool& search, std::size_t parallelism,
                                 const toolkit::RetryPolicy& retry) {
  for (int index : indices) {
    if (index < 1 || static_cast<std::size_t>(index) > set.candidates.size())
      throw IllegalIndex("crop index " + std::to_string(index) + " is not a candidate (1.." +
                         std::to_string(set.candidates.size()) + ")");
  }
  auto outcomes = parallel_map(indices.size(), parallelism, [&](std::size_t i) {
    const auto& ref = set.candidates[static_cast<std::size_t>(indices[i] - 1)].image_ref;
    return toolkit::with_retry<std::vector<toolkit::ImageSearchResult>>(retry, [&] { return search.search(ref); });
  });

  DispatchResult out;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    protocol::ImageSearchSection section{indices[i], {}};
    if (outcomes[i]) {
      for (const auto& hit : *outcomes[i]) section.hits.push_back({hit.thumbnail_ref, hit.title});
    } else {
      out.failures.push_back(outcomes[i].error());
    }
    out.results.sections.push_back(std::move(section));
  }
  return out;
}

std::vector<GazeOutcome> detect_reflection(const std::vector<protocol::Action>& actions) {
  std::vector<GazeOutcome> out;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const auto* select = std::get_if<protocol::SelectCrops>(&actions[i]);
    if (!select) continue;
    GazeOutcome outcome{select->indices, std::nullopt, false};
    for (std::size_t j = i + 1; j < actions.size() && !outcome.reflected; ++j) {
      const auto kind = protocol::kind_of(actions[j]);
      outcome.reflected = kind == ActionKind::CroppedSearch || kind == ActionKind::WholeImageSearch;
    }
    out.push_back(std::move(outcome));
  }
  return out;
}

double crop_selection_accuracy(const std::vector<GazeOutcome>& outcomes) {
  if (outcomes.empty()) throw EmptyInput("crop selection accuracy needs at least one outcome");
  std::size_t relevant = 0;
  for (const auto& o : outcomes) {
    if (!o.relevant) throw MissingLabel("every gaze outcome must carry a relevance label");
    relevant += *o.relevant ? 1 : 0;
  }
  return static_cast<double>(relevant) / static_cast<double>(outcomes.size());
}

}  // namespace gog::gaze

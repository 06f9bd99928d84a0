#pragma once

// Shared fixtures and independent oracles for the unit and acceptance tests.
// Oracles here deliberately avoid calling the code they check.

#include <algorithm>
#include <cmath>
#include <deque>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "gog/protocol.hpp"
#include "gog/toolkit.hpp"

namespace gog::oracle {

inline std::string data_path(const std::string& name) { return std::string(GOG_DATA_DIR) + "/" + name; }

// ---------------------------------------------------------------------------
// Random well-formed actions

inline std::string random_text(std::mt19937_64& rng, std::size_t max_len) {
  // No '<' or '>' so the text never forms a tag, and no leading/trailing space
  // since payloads are trimmed.
  static const std::string alphabet = "abcdefghijklmnopqrstuvwxyz ABCDEFXYZ0123456789,.?!'-()&\"";
  std::uniform_int_distribution<std::size_t> len(1, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::string s;
  const auto n = len(rng);
  for (std::size_t i = 0; i < n; ++i) s.push_back(alphabet[pick(rng)]);
  while (!s.empty() && s.front() == ' ') s.erase(s.begin());
  while (!s.empty() && s.back() == ' ') s.pop_back();
  if (s.empty()) s = "x";
  return s;
}

inline protocol::ModelAction random_action(std::mt19937_64& rng) {
  protocol::ModelAction a{std::nullopt, protocol::Answer{"x"}};
  if (rng() % 4 != 0) a.think = random_text(rng, 60);
  switch (rng() % 5) {
    case 0: a.action = protocol::WholeImageSearch{}; break;
    case 1: a.action = protocol::CroppedSearch{random_text(rng, 40)}; break;
    case 2: a.action = protocol::TextSearch{random_text(rng, 40)}; break;
    case 3: {
      std::vector<int> idx;
      for (int i = 1; i <= 5; ++i)
        if (rng() % 2) idx.push_back(i);
      if (idx.empty()) idx.push_back(1 + static_cast<int>(rng() % 5));
      a.action = protocol::SelectCrops{idx};
      break;
    }
    default: a.action = protocol::Answer{random_text(rng, 40)}; break;
  }
  return a;
}

/// A phase in which the action is on the menu.
inline Phase phase_for(ActionKind kind) {
  switch (kind) {
    case ActionKind::SelectCrops: return Phase::AfterGazeCrops;
    default: return Phase::Initial;
  }
}

// ---------------------------------------------------------------------------
// Geometry oracles on integer boxes

struct IBox {
  int x0, y0, x1, y1;
};

/// IoU by counting unit cells; exact for integer boxes.
inline double grid_iou(const IBox& a, const IBox& b) {
  long inter = 0, area_a = 0, area_b = 0;
  const int lo_x = std::min(a.x0, b.x0), hi_x = std::max(a.x1, b.x1);
  const int lo_y = std::min(a.y0, b.y0), hi_y = std::max(a.y1, b.y1);
  for (int x = lo_x; x < hi_x; ++x) {
    for (int y = lo_y; y < hi_y; ++y) {
      const bool in_a = x >= a.x0 && x < a.x1 && y >= a.y0 && y < a.y1;
      const bool in_b = x >= b.x0 && x < b.x1 && y >= b.y0 && y < b.y1;
      area_a += in_a;
      area_b += in_b;
      inter += in_a && in_b;
    }
  }
  const long uni = area_a + area_b - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

struct ScoredBox {
  IBox box;
  double score;
};

/// Pairwise suppression: order by score (ties by coordinates), build the full
/// IoU matrix up front, then keep a box iff no earlier kept box overlaps it at
/// or above the threshold. Returns indices into the ordered list's source.
inline std::vector<std::size_t> brute_force_nms(const std::vector<ScoredBox>& boxes, double threshold) {
  std::vector<std::size_t> order(boxes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    const auto& a = boxes[i];
    const auto& b = boxes[j];
    if (a.score != b.score) return a.score > b.score;
    return std::tie(a.box.x0, a.box.y0, a.box.x1, a.box.y1) < std::tie(b.box.x0, b.box.y0, b.box.x1, b.box.y1);
  });
  const auto n = boxes.size();
  std::vector<std::vector<double>> m(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m[i][j] = grid_iou(boxes[order[i]].box, boxes[order[j]].box);
  std::vector<bool> kept(n, false);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) {
    bool suppressed = false;
    for (std::size_t j = 0; j < i; ++j) suppressed = suppressed || (kept[j] && m[i][j] >= threshold);
    kept[i] = !suppressed;
    if (kept[i]) out.push_back(order[i]);
  }
  return out;
}

inline std::vector<ScoredBox> random_box_set(std::mt19937_64& rng, int width, int height) {
  std::uniform_int_distribution<int> count(0, 12);
  std::uniform_int_distribution<int> coord_x(0, width - 1), coord_y(0, height - 1);
  std::uniform_int_distribution<int> score_bucket(0, 20);  // coarse scores force ties
  std::vector<ScoredBox> out;
  const int n = count(rng);
  // Clustered boxes so suppression actually happens.
  const int cx = coord_x(rng), cy = coord_y(rng);
  for (int i = 0; i < n; ++i) {
    std::uniform_int_distribution<int> jitter(-6, 6), size(2, 16);
    int x0 = std::clamp(cx + jitter(rng), 0, width - 2);
    int y0 = std::clamp(cy + jitter(rng), 0, height - 2);
    int x1 = std::min(width, x0 + size(rng));
    int y1 = std::min(height, y0 + size(rng));
    out.push_back({{x0, y0, x1, y1}, score_bucket(rng) / 20.0});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Population statistics oracle (two-pass, long double)

struct MeanStd {
  long double mean;
  long double stddev;
};

inline MeanStd population_stats(const std::vector<double>& xs) {
  long double sum = 0;
  for (double x : xs) sum += x;
  const long double mean = sum / static_cast<long double>(xs.size());
  long double sq = 0;
  for (double x : xs) sq += (x - mean) * (x - mean);
  return {mean, std::sqrt(sq / static_cast<long double>(xs.size()))};
}

// ---------------------------------------------------------------------------
// Canned chat client

class CannedChat final : public toolkit::ChatClient {
 public:
  explicit CannedChat(std::vector<toolkit::ToolResult<std::string>> replies) : replies_(replies.begin(), replies.end()) {}

  toolkit::ToolResult<std::string> complete(const toolkit::ChatRequest& request) override {
    std::lock_guard lock(mutex_);
    requests.push_back(request);
    if (replies_.empty()) return std::string("<answer>out of replies</answer>");
    auto r = replies_.front();
    replies_.pop_front();
    return r;
  }

  std::vector<toolkit::ChatRequest> requests;

 private:
  std::mutex mutex_;
  std::deque<toolkit::ToolResult<std::string>> replies_;
};

inline toolkit::ToolResult<std::string> failure(toolkit::FailureCause cause, int code = 0) {
  return unexpected(toolkit::ToolFailure::make("chat", cause, "canned", code));
}

}  // namespace gog::oracle

#pragma once

// Drives episodes: session state machine + action parser + tools, producing
// persisted trajectory records. Also batch evaluation, grouped rollouts and
// record replay.

#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gog/analytics.hpp"
#include "gog/config.hpp"
#include "gog/datapipe.hpp"
#include "gog/gaze.hpp"
#include "gog/http_tools.hpp"
#include "gog/mock_server.hpp"
#include "gog/mock_tools.hpp"
#include "gog/reward.hpp"
#include "gog/trajectory.hpp"

namespace gog::runner {

/// Monotonic tick source for timings. The logical clock advances by one per
/// reading, which keeps mock-mode records byte-stable.
class Clock {
 public:
  explicit Clock(bool logical) : logical_(logical), origin_(std::chrono::steady_clock::now()) {}
  long now();

 private:
  bool logical_;
  std::chrono::steady_clock::time_point origin_;
  std::atomic<long> ticks_{0};
};

struct Services {
  toolkit::ChatClient& policy;
  toolkit::ImageSearchTool& image_search;
  toolkit::TextSearchTool& text_search;
  toolkit::GroundingTool& grounding;
  toolkit::ImageHost& host;
  const ImageStore& store;
  reward::Judge* judge = nullptr;  // scoring is skipped without a judge
};

struct EpisodeOptions {
  session::SessionConfig session{};
  double iou_threshold = gaze::kDefaultIouThreshold;
  std::size_t tool_parallelism = 4;
  toolkit::RetryPolicy retry{};
  int max_consecutive_invalid_turns = 2;
  double temperature = 0.7;
  double lambda = reward::kDefaultLambda;
  bool logical_clock = true;

  static EpisodeOptions from(const config::RunConfig& c);
};

struct EpisodeInput {
  std::string id;
  std::string question;
  std::string image;
  std::vector<std::string> answers;
  std::uint64_t seed = 0;
};

/// Runs one episode to termination. Tool failures become ToolError
/// observations; invalid turns become TurnRejected observations and cost a
/// round; after `max_consecutive_invalid_turns` in a row the episode ends as
/// InvalidTurn. A failing policy endpoint ends it as Error. Throws
/// session::ConfigError for an empty question or image.
trajectory::Trajectory run_episode(const Services& services, const EpisodeOptions& options, const EpisodeInput& input);

/// User message text for a turn: the previous observation (if any) followed by the phase prompt.
std::string compose_prompt(const std::optional<protocol::Observation>& previous, const session::SessionState& state);

struct ReplayReport {
  std::vector<std::string> mismatches;
  std::optional<reward::RewardBreakdown> reward;  // recomputed from the recorded verdict
  bool ok() const { return mismatches.empty(); }
};

/// Re-executes a record against its own observations and checks that prompts,
/// parsed actions, format scores, budgets and reward come out identical.
ReplayReport replay(const trajectory::Trajectory& record, const EpisodeOptions& options);

// ---------------------------------------------------------------------------
// Environment: services wired from a RunConfig

class Environment {
 public:
  explicit Environment(const config::RunConfig& config);
  ~Environment();

  Services services();
  const config::RunConfig& config() const { return config_; }
  const mock::Corpus* corpus() const { return corpus_.get(); }
  mock::MockServer* server() { return server_.get(); }
  /// Makes a local image path usable in live mode (binary PPM only).
  void ensure_image(const std::string& ref);
  /// Direct-answer sampler for filtering; mock mode scripts it from the records' pass counts.
  toolkit::ChatClient& sampler(const std::vector<datapipe::DatasetRecord>& records);
  reward::Judge& judge() { return *judge_; }

 private:
  config::RunConfig config_;
  std::unique_ptr<mock::Corpus> corpus_;
  std::unique_ptr<mock::MockToolset> mocks_;
  std::unique_ptr<mock::MockServer> server_;
  std::unique_ptr<ImageStore> local_store_;
  // Owned clients for the HTTP and live wirings.
  std::vector<std::unique_ptr<toolkit::ChatClient>> owned_chat_;
  std::unique_ptr<toolkit::WebSearchProvider> owned_web_;
  std::unique_ptr<toolkit::PageReader> owned_reader_;
  std::unique_ptr<toolkit::ImageHost> owned_host_;
  std::unique_ptr<toolkit::ImageSearchTool> owned_image_search_;
  std::unique_ptr<toolkit::GroundingTool> owned_grounding_;
  std::unique_ptr<toolkit::TextSearchPipeline> pipeline_;
  std::unique_ptr<reward::Judge> judge_;
  std::unique_ptr<mock::ScriptedSampler> mock_sampler_;
  std::mutex images_mutex_;

  ImageStore* store_ = nullptr;
  toolkit::ChatClient* policy_ = nullptr;
  toolkit::ChatClient* sampler_ = nullptr;
  toolkit::ImageHost* host_ = nullptr;
  toolkit::ImageSearchTool* image_search_ = nullptr;
  toolkit::GroundingTool* grounding_ = nullptr;
};

// ---------------------------------------------------------------------------
// Batches

struct RecordFailure {
  std::string id;  // empty when the manifest line itself was malformed
  std::size_t line = 0;
  std::string message;
};

struct AccuracySummary {
  std::size_t episodes = 0;
  std::size_t answered = 0;
  std::size_t judged = 0;
  std::size_t correct = 0;
  double accuracy = 0;     // correct / episodes
  double mean_reward = 0;  // over scored episodes
};

struct BatchResult {
  std::vector<trajectory::Trajectory> trajectories;  // manifest order
  std::vector<RecordFailure> failures;
  std::optional<analytics::BehaviorReport> behavior;
  AccuracySummary accuracy;
};

EpisodeInput episode_input(const datapipe::DatasetRecord& record, std::uint64_t seed);

/// Runs every record with bounded concurrency; a failing record is reported
/// and does not stop the batch.
BatchResult run_batch(const Services& services, const EpisodeOptions& options, const datapipe::Manifest& manifest,
                      std::uint64_t seed, std::size_t parallelism);

struct RolloutGroupResult {
  std::string record_id;
  std::vector<trajectory::Trajectory> rollouts;  // G episodes, rollout g seeded with seed + g
  reward::RolloutGroup group;
};

struct RolloutResult {
  std::vector<RolloutGroupResult> groups;
  std::vector<RecordFailure> failures;
  std::vector<datapipe::DatasetRecord> measured;  // pass_count over G attempts, ready for stratification
};

/// G scored rollouts per record with group-normalized advantages. Needs a judge.
RolloutResult run_rollouts(const Services& services, const EpisodeOptions& options, const datapipe::Manifest& manifest,
                           std::uint64_t seed, int group_size, std::size_t parallelism);

AccuracySummary summarize(const std::vector<trajectory::Trajectory>& trajectories);
nlohmann::ordered_json to_json(const AccuracySummary& s);

/// Appends trajectories as JSON lines; safe to call from several threads.
class TrajectoryWriter {
 public:
  explicit TrajectoryWriter(const std::string& path, bool append = true);
  void write(const trajectory::Trajectory& t);

 private:
  std::mutex mutex_;
  std::ofstream out_;
  std::string path_;
};

std::vector<trajectory::Trajectory> load_trajectories(const std::string& path);

}  // namespace gog::runner

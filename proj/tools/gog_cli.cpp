// gog: command-line front end for episodes, batches, rollouts, the dataset
// pipeline stages, reports and the offline mock server.
//
// Exit codes: 0 success, 1 runtime failure, 2 configuration or usage error,
// 3 some records failed while the rest completed.

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "gog/runner.hpp"

namespace fs = std::filesystem;
using namespace gog;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitPartial = 3;

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool mock = false;
  std::string out_dir = "out";
  bool verbose = false;
};

config::RunConfig load_config(const GlobalOptions& g) {
  auto c = g.config_path.empty() ? config::RunConfig{} : config::load(g.config_path);
  config::apply_env(c);
  if (g.mock) c.mock = true;
  if (g.seed) c.seed = *g.seed;
  config::validate(c);
  return c;
}

fs::path out_path(const GlobalOptions& g, const std::string& name) {
  fs::create_directories(g.out_dir);
  return fs::path(g.out_dir) / name;
}

void write_text(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << body;
}

void write_records(const fs::path& path, const std::vector<datapipe::DatasetRecord>& records) {
  datapipe::save_manifest(path.string(), records);
}

datapipe::Manifest read_manifest_or_throw(const std::string& path) {
  auto m = datapipe::load_manifest(path);
  for (const auto& e : m.errors) spdlog::warn("{}:{}: {}", path, e.line, e.message);
  return m;
}

nlohmann::ordered_json failures_json(const std::vector<runner::RecordFailure>& failures) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& f : failures) out.push_back({{"id", f.id}, {"line", f.line}, {"message", f.message}});
  return out;
}

void prepare_images(runner::Environment& env, const std::vector<datapipe::DatasetRecord>& records) {
  if (env.config().mock) return;
  for (const auto& r : records) env.ensure_image(r.image);
}

// ---------------------------------------------------------------------------

int cmd_run(const GlobalOptions& g, const std::string& id, const std::string& question, const std::string& image,
            const std::vector<std::string>& answers) {
  const auto c = load_config(g);
  runner::Environment env(c);
  if (!c.mock) env.ensure_image(image);
  const auto t = runner::run_episode(env.services(), runner::EpisodeOptions::from(c),
                                     runner::EpisodeInput{id, question, image, answers, c.seed});
  runner::TrajectoryWriter writer(out_path(g, "trajectories.jsonl").string());
  writer.write(t);

  nlohmann::ordered_json summary{{"episode_id", t.episode_id},
                                 {"termination", std::string(to_string(t.termination))},
                                 {"turns", t.turns.size()},
                                 {"final_answer", t.final_answer ? nlohmann::ordered_json(*t.final_answer) : nlohmann::ordered_json(nullptr)},
                                 {"verdict", t.verdict ? nlohmann::ordered_json(*t.verdict) : nlohmann::ordered_json(nullptr)},
                                 {"reward", t.reward ? nlohmann::ordered_json(t.reward->total) : nlohmann::ordered_json(nullptr)},
                                 {"behavior", std::string(analytics::to_string(analytics::classify_behavior(t)))},
                                 {"hash", trajectory::trajectory_hash(t)}};
  std::cout << summary.dump(2) << "\n";
  return t.termination == TerminationReason::Error ? kExitFailure : 0;
}

int cmd_batch(const GlobalOptions& g, const std::string& manifest_path) {
  const auto c = load_config(g);
  runner::Environment env(c);
  const auto manifest = read_manifest_or_throw(manifest_path);
  prepare_images(env, manifest.records);
  const auto result = runner::run_batch(env.services(), runner::EpisodeOptions::from(c), manifest, c.seed,
                                        c.episode_parallelism);

  runner::TrajectoryWriter writer(out_path(g, "trajectories.jsonl").string(), false);
  for (const auto& t : result.trajectories) writer.write(t);

  nlohmann::ordered_json summary{{"accuracy", runner::to_json(result.accuracy)},
                                 {"failures", failures_json(result.failures)}};
  if (result.behavior) {
    summary["behavior"] = analytics::to_json(*result.behavior);
    analytics::emit_report(analytics::to_json(*result.behavior), analytics::behavior_table(*result.behavior),
                           out_path(g, "behavior").string());
  }
  write_text(out_path(g, "summary.json"), summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
  return result.failures.empty() ? 0 : kExitPartial;
}

int cmd_rollout(const GlobalOptions& g, const std::string& manifest_path, std::optional<int> group_size) {
  const auto c = load_config(g);
  runner::Environment env(c);
  const auto manifest = read_manifest_or_throw(manifest_path);
  prepare_images(env, manifest.records);
  const auto result = runner::run_rollouts(env.services(), runner::EpisodeOptions::from(c), manifest, c.seed,
                                           group_size.value_or(c.group_size), c.episode_parallelism);

  runner::TrajectoryWriter writer(out_path(g, "rollouts.jsonl").string(), false);
  std::ostringstream groups;
  for (const auto& grp : result.groups) {
    for (const auto& t : grp.rollouts) writer.write(t);
    groups << nlohmann::ordered_json{{"record_id", grp.record_id},
                                     {"rewards", grp.group.rewards},
                                     {"advantages", grp.group.advantages},
                                     {"mean", grp.group.mean},
                                     {"stddev", grp.group.stddev}}
                  .dump()
           << "\n";
  }
  write_text(out_path(g, "groups.jsonl"), groups.str());
  write_records(out_path(g, "measured.jsonl"), result.measured);

  std::size_t rollouts = 0;
  for (const auto& grp : result.groups) rollouts += grp.rollouts.size();
  nlohmann::ordered_json summary{{"groups", result.groups.size()},
                                 {"rollouts", rollouts},
                                 {"failures", failures_json(result.failures)}};
  std::cout << summary.dump(2) << "\n";
  return result.failures.empty() ? 0 : kExitPartial;
}

int cmd_filter(const GlobalOptions& g, const std::string& manifest_path, const std::string& transcripts_path) {
  const auto c = load_config(g);
  const auto manifest = read_manifest_or_throw(manifest_path);
  datapipe::FilterResult result;
  if (!transcripts_path.empty()) {
    std::ifstream in(transcripts_path);
    if (!in) throw std::runtime_error("cannot open " + transcripts_path);
    std::vector<datapipe::SampleTranscript> transcripts;
    for (std::string line; std::getline(in, line);) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      transcripts.push_back(datapipe::transcript_from_json(nlohmann::json::parse(line)));
    }
    result = datapipe::replay_filter(manifest.records, transcripts, c.filter_attempts);
  } else {
    runner::Environment env(c);
    prepare_images(env, manifest.records);
    result = datapipe::uncertainty_filter(manifest.records, env.sampler(manifest.records), env.judge(),
                                          c.filter_attempts, c.episode_parallelism);
  }
  write_records(out_path(g, "kept.jsonl"), result.kept);
  write_records(out_path(g, "discarded.jsonl"), result.discarded);
  write_records(out_path(g, "unresolved.jsonl"), result.unresolved);
  std::ostringstream transcripts;
  for (const auto& t : result.transcripts) transcripts << datapipe::to_json(t).dump() << "\n";
  write_text(out_path(g, "transcripts.jsonl"), transcripts.str());
  for (const auto& f : result.failures) spdlog::warn("{}", f);

  nlohmann::ordered_json summary{{"kept", result.kept.size()},
                                 {"discarded", result.discarded.size()},
                                 {"unresolved", result.unresolved.size()},
                                 {"malformed_lines", manifest.errors.size()}};
  std::cout << summary.dump(2) << "\n";
  return result.unresolved.empty() && manifest.errors.empty() ? 0 : kExitPartial;
}

int cmd_skeleton(const GlobalOptions& g, const std::string& manifest_path) {
  const auto manifest = read_manifest_or_throw(manifest_path);
  std::ostringstream out;
  for (const auto& r : manifest.records) out << datapipe::to_json(datapipe::synthesize_skeleton(r)).dump() << "\n";
  write_text(out_path(g, "skeletons.jsonl"), out.str());
  std::cout << nlohmann::ordered_json{{"skeletons", manifest.records.size()}}.dump(2) << "\n";
  return manifest.errors.empty() ? 0 : kExitPartial;
}

int cmd_stratify(const GlobalOptions& g, const std::string& manifest_path) {
  const auto c = load_config(g);
  const auto manifest = read_manifest_or_throw(manifest_path);
  const auto result = datapipe::stratify(manifest.records, c.band);
  write_records(out_path(g, "stratified.jsonl"), result.records);
  auto subset = [&](const std::vector<std::string>& ids) {
    std::set<std::string> wanted(ids.begin(), ids.end());
    std::vector<datapipe::DatasetRecord> out;
    for (const auto& r : result.records)
      if (wanted.count(r.id)) out.push_back(r);
    return out;
  };
  write_records(out_path(g, "level1.jsonl"), subset(result.level1));
  write_records(out_path(g, "level2.jsonl"), subset(result.level2));
  nlohmann::ordered_json summary{{"level1", result.level1.size()},
                                 {"level2", result.level2.size()},
                                 {"unassigned", result.unassigned.size()}};
  std::cout << summary.dump(2) << "\n";
  return manifest.errors.empty() ? 0 : kExitPartial;
}

std::vector<gaze::GazeOutcome> labeled_outcomes(const std::vector<trajectory::Trajectory>& trajectories,
                                                const std::string& labels_path) {
  // Labels: one JSON object per line, {"episode_id": ..., "relevant": [bool per crop selection]}.
  std::map<std::string, std::vector<bool>> labels;
  std::ifstream in(labels_path);
  if (!in) throw std::runtime_error("cannot open " + labels_path);
  for (std::string line; std::getline(in, line);) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(line);
    labels[j.at("episode_id").get<std::string>()] = j.at("relevant").get<std::vector<bool>>();
  }
  std::vector<gaze::GazeOutcome> out;
  for (const auto& t : trajectories) {
    auto outcomes = gaze::detect_reflection(t.actions());
    const auto it = labels.find(t.episode_id);
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      if (it != labels.end() && i < it->second.size()) outcomes[i].relevant = it->second[i];
      out.push_back(std::move(outcomes[i]));
    }
  }
  return out;
}

int cmd_report(const GlobalOptions& g, const std::string& manifest_path, const std::string& trajectories_path,
               const std::string& labels_path) {
  if (manifest_path.empty() && trajectories_path.empty())
    throw session::ConfigError("report needs --manifest and/or --trajectories");
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();
  if (!manifest_path.empty()) {
    const auto manifest = read_manifest_or_throw(manifest_path);
    const auto report = datapipe::composition_report(manifest.records);
    analytics::emit_report(datapipe::to_json(report), datapipe::composition_table(report),
                           out_path(g, "composition").string());
    summary["composition"] = datapipe::to_json(report);
  }
  if (!trajectories_path.empty()) {
    const auto trajectories = runner::load_trajectories(trajectories_path);
    const auto behavior = analytics::behavior_distribution(trajectories);
    analytics::emit_report(analytics::to_json(behavior), analytics::behavior_table(behavior),
                           out_path(g, "behavior").string());
    summary["behavior"] = analytics::to_json(behavior);
    if (!labels_path.empty()) {
      const auto gaze = analytics::gaze_report(labeled_outcomes(trajectories, labels_path));
      analytics::emit_report(analytics::to_json(gaze), analytics::gaze_table(gaze), out_path(g, "gaze").string());
      summary["gaze"] = analytics::to_json(gaze);
    }
  }
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_replay(const GlobalOptions& g, const std::string& trajectories_path) {
  const auto c = load_config(g);
  const auto options = runner::EpisodeOptions::from(c);
  const auto trajectories = runner::load_trajectories(trajectories_path);
  std::size_t bad = 0;
  for (const auto& t : trajectories) {
    const auto report = runner::replay(t, options);
    if (report.ok()) continue;
    ++bad;
    for (const auto& m : report.mismatches) std::cerr << t.episode_id << ": " << m << "\n";
  }
  std::cout << nlohmann::ordered_json{{"records", trajectories.size()}, {"mismatched", bad}}.dump(2) << "\n";
  return bad == 0 ? 0 : kExitFailure;
}

std::atomic<bool> g_stop{false};

int cmd_mock_serve(const GlobalOptions& g, const std::string& host, int port, std::optional<double> fault_rate) {
  auto c = load_config(g);
  if (fault_rate) c.fault_rate = *fault_rate;
  config::validate(c);
  auto corpus = mock::load_corpus(c.corpus_path.empty() ? mock::default_corpus_path() : c.corpus_path);
  mock::MockServer server(std::move(corpus), {host, port, c.fault_rate, c.seed});
  server.start();
  std::cout << "listening on " << server.base_url() << std::endl;
  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  spdlog::info("served {} requests, {} injected faults", server.requests(), server.faults().injected());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Search-augmented visual question answering agent runtime"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("-c,--config", g.config_path, "JSON run configuration");
  app.add_option("--seed", g.seed, "Seed override");
  app.add_flag("--mock", g.mock, "Force mock mode");
  app.add_option("-o,--out", g.out_dir, "Output directory")->capture_default_str();
  app.add_flag("-v,--verbose", g.verbose, "Debug logging");

  std::function<int()> action;

  auto* run = app.add_subcommand("run", "Run a single episode");
  std::string id = "episode", question, image;
  std::vector<std::string> answers;
  run->add_option("--id", id, "Episode id")->capture_default_str();
  run->add_option("-q,--question", question, "Question")->required();
  run->add_option("-i,--image", image, "Image reference or PPM path")->required();
  run->add_option("-a,--answer", answers, "Ground-truth answer (repeatable)");
  run->callback([&] { action = [&] { return cmd_run(g, id, question, image, answers); }; });

  std::string manifest, transcripts, trajectories, labels;

  auto* batch = app.add_subcommand("batch", "Evaluate every record of a manifest");
  batch->add_option("-m,--manifest", manifest, "Manifest (JSON Lines)")->required();
  batch->callback([&] { action = [&] { return cmd_batch(g, manifest); }; });

  auto* rollout = app.add_subcommand("rollout", "Grouped rollouts with normalized advantages");
  std::optional<int> group;
  rollout->add_option("-m,--manifest", manifest, "Manifest (JSON Lines)")->required();
  rollout->add_option("-g,--group", group, "Rollouts per record (default from config)");
  rollout->callback([&] { action = [&] { return cmd_rollout(g, manifest, group); }; });

  auto* filter = app.add_subcommand("filter", "Uncertainty filtering by repeated direct answers");
  filter->add_option("-m,--manifest", manifest, "Manifest (JSON Lines)")->required();
  filter->add_option("--transcripts", transcripts, "Replay saved sample transcripts instead of sampling");
  filter->callback([&] { action = [&] { return cmd_filter(g, manifest, transcripts); }; });

  auto* skeleton = app.add_subcommand("skeleton", "Emit trajectory skeletons for annotation");
  skeleton->add_option("-m,--manifest", manifest, "Manifest (JSON Lines)")->required();
  skeleton->callback([&] { action = [&] { return cmd_skeleton(g, manifest); }; });

  auto* stratify = app.add_subcommand("stratify", "Assign difficulty levels from measured pass rates");
  stratify->add_option("-m,--manifest", manifest, "Manifest with pass counts")->required();
  stratify->callback([&] { action = [&] { return cmd_stratify(g, manifest); }; });

  auto* report = app.add_subcommand("report", "Composition, behavior and gaze reports");
  report->add_option("-m,--manifest", manifest, "Labeled manifest for the composition table");
  report->add_option("-t,--trajectories", trajectories, "Trajectory records for behavior analytics");
  report->add_option("--gaze-labels", labels, "Relevance labels for crop selections");
  report->callback([&] { action = [&] { return cmd_report(g, manifest, trajectories, labels); }; });

  auto* replay = app.add_subcommand("replay", "Re-execute records against their own observations");
  replay->add_option("-t,--trajectories", trajectories, "Trajectory records")->required();
  replay->callback([&] { action = [&] { return cmd_replay(g, trajectories); }; });

  auto* serve = app.add_subcommand("mock-serve", "Serve the mock tools and models over HTTP");
  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<double> fault_rate;
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->capture_default_str();
  serve->add_option("--fault-rate", fault_rate, "Injected tool failure rate");
  serve->callback([&] { action = [&] { return cmd_mock_serve(g, host, port, fault_rate); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  spdlog::set_level(g.verbose ? spdlog::level::debug : spdlog::level::warn);

  try {
    return action();
  } catch (const session::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const mock::CorpusError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

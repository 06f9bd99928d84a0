#include "gog/runner.hpp"

#include <filesystem>
#include <sstream>
#include <stdexcept>
#include <variant>

#include <spdlog/spdlog.h>

#include "gog/parallel.hpp"

namespace gog::runner {

using protocol::Observation;
using protocol::ObservationKind;
using session::SessionState;
using toolkit::ToolFailure;

long Clock::now() {
  if (logical_) return ++ticks_;
  return static_cast<long>(
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - origin_).count());
}

EpisodeOptions EpisodeOptions::from(const config::RunConfig& c) {
  EpisodeOptions o;
  o.session = {c.budgets, c.forced_answer};
  o.iou_threshold = c.iou_threshold;
  o.tool_parallelism = c.tool_parallelism;
  o.retry = c.retry;
  o.max_consecutive_invalid_turns = c.max_consecutive_invalid_turns;
  o.temperature = c.policy_temperature;
  o.lambda = c.lambda;
  o.logical_clock = c.mock;
  return o;
}

std::string compose_prompt(const std::optional<Observation>& previous, const SessionState& state) {
  if (!previous) return session::select_prompt(state);
  return previous->rendered + "\n\n" + session::select_prompt(state);
}

namespace {

std::string describe(const ToolFailure& f) { return f.tool + ": " + f.message(); }

// Outcome of one model turn before any tool runs. Shared by live runs and replay
// so both apply identical rules to rejected turns.
struct Decision {
  std::optional<protocol::ModelAction> action;
  std::optional<std::string> rejection;
  SessionState state;  // after the transition, or after the rejection was charged
  std::vector<session::ToolRequest> requests;
};

Decision decide(const SessionState& state, std::string_view raw, const EpisodeOptions& options, int& invalid_streak) {
  Decision d{std::nullopt, std::nullopt, state, {}};
  auto parsed = protocol::parse_action(raw, state.phase);
  if (parsed) {
    auto transition = session::apply_action(state, *parsed);
    if (transition) {
      invalid_streak = 0;
      d.action = *parsed;
      d.state = std::move(transition->updated_state);
      d.requests = std::move(transition->tool_requests);
      return d;
    }
    d.rejection = transition.error().message;
  } else {
    d.rejection = parsed.error().message();
  }
  const bool forced = state.awaiting_forced_answer;
  d.state = session::consume_rejected_turn(state);
  ++invalid_streak;
  if (forced) {
    // The single answer-only turn was wasted; fall back to the budget ending.
    d.state = session::terminate_exhausted(d.state, options.session);
  } else if (invalid_streak >= options.max_consecutive_invalid_turns) {
    d.state = session::terminate(d.state, TerminationReason::InvalidTurn);
  }
  return d;
}

struct EpisodeContext {
  const Services& services;
  const EpisodeOptions& options;
  std::optional<gaze::CropCandidateSet> candidates;
  std::vector<std::string>& errors;
};

ObservationKind run_grounding(EpisodeContext& ctx, const session::GroundingRequest& req, Decision& d,
                              trajectory::TurnRecord& turn) {
  auto& s = ctx.services;
  const auto& o = ctx.options;
  auto fail = [&](const ToolFailure& f) -> ObservationKind {
    ctx.errors.push_back(describe(f));
    d.state = session::attach_crops(std::move(d.state), {});
    ctx.candidates.reset();
    return protocol::ToolError{f.tool, f.message()};
  };

  auto boxes = toolkit::with_retry<std::vector<toolkit::GroundingBox>>(
      o.retry, [&] { return s.grounding.ground(req.image_ref, req.description); });
  if (!boxes) return fail(boxes.error());

  auto sorted = *boxes;
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
  gaze::CropCandidateSet set;
  try {
    set = gaze::materialize(gaze::dedup_boxes(sorted, o.iou_threshold, req.description), s.store, req.image_ref);
  } catch (const std::exception& e) {
    return fail(ToolFailure::make("grounding", toolkit::FailureCause::MalformedContent, e.what()));
  }
  if (set.empty()) {
    d.state = session::attach_crops(std::move(d.state), {});
    ctx.candidates.reset();
    return protocol::CropCandidates{req.description, {}};
  }

  const auto refs = set.image_refs();
  auto uploads = parallel_map(refs.size(), o.tool_parallelism, [&](std::size_t i) {
    return toolkit::with_retry<std::string>(o.retry, [&] { return s.host.upload(refs[i]); });
  });
  std::vector<std::string> urls;
  for (const auto& u : uploads) {
    if (!u) return fail(u.error());
    urls.push_back(*u);
  }
  d.state = session::attach_crops(std::move(d.state), refs);
  turn.crop_refs = refs;
  ctx.candidates = std::move(set);
  return protocol::CropCandidates{req.description, std::move(urls)};
}

ObservationKind run_crop_dispatch(EpisodeContext& ctx, const protocol::SelectCrops& select) {
  if (!ctx.candidates) throw std::logic_error("crop selection without candidates");
  auto dispatched = gaze::dispatch_selected(*ctx.candidates, select.indices, ctx.services.image_search,
                                            ctx.options.tool_parallelism, ctx.options.retry);
  ctx.candidates.reset();
  for (const auto& f : dispatched.failures) ctx.errors.push_back(describe(f));
  if (dispatched.all_failed()) {
    const auto& f = dispatched.failures.front();
    return protocol::ToolError{f.tool, f.message()};
  }
  return std::move(dispatched.results);
}

ObservationKind run_image_search(EpisodeContext& ctx, const session::ImageSearchRequest& req) {
  auto hits = toolkit::with_retry<std::vector<toolkit::ImageSearchResult>>(
      ctx.options.retry, [&] { return ctx.services.image_search.search(req.image_ref); });
  if (!hits) {
    ctx.errors.push_back(describe(hits.error()));
    return protocol::ToolError{hits.error().tool, hits.error().message()};
  }
  protocol::ImageSearchSection section{std::nullopt, {}};
  for (const auto& h : *hits) section.hits.push_back({h.thumbnail_ref, h.title});
  return protocol::ImageSearchResults{{std::move(section)}};
}

ObservationKind run_text_search(EpisodeContext& ctx, const session::TextSearchRequest& req) {
  auto summary = ctx.services.text_search.search(req.query);
  if (!summary) {
    ctx.errors.push_back(describe(summary.error()));
    return protocol::ToolError{summary.error().tool, summary.error().message()};
  }
  if (summary->degraded) ctx.errors.push_back("reader: every page read failed; summarized from snippets");
  return protocol::TextSearchSummary{summary->text};
}

std::optional<ObservationKind> execute(EpisodeContext& ctx, Decision& d, trajectory::TurnRecord& turn) {
  if (d.requests.empty()) return std::nullopt;  // Answer
  const auto& first = d.requests.front();
  if (const auto* g = std::get_if<session::GroundingRequest>(&first)) return run_grounding(ctx, *g, d, turn);
  if (const auto* t = std::get_if<session::TextSearchRequest>(&first)) return run_text_search(ctx, *t);
  const auto& img = std::get<session::ImageSearchRequest>(first);
  if (img.crop_index) return run_crop_dispatch(ctx, std::get<protocol::SelectCrops>(d.action->action));
  return run_image_search(ctx, img);
}

}  // namespace

trajectory::Trajectory run_episode(const Services& services, const EpisodeOptions& options, const EpisodeInput& input) {
  Clock clock(options.logical_clock);
  const long started = clock.now();
  auto state = session::new_session(input.question, input.image, options.session);

  trajectory::Trajectory t;
  t.episode_id = input.id;
  t.question = input.question;
  t.image_ref = input.image;
  t.ground_truth = input.answers;
  t.seed = input.seed;
  EpisodeContext ctx{services, options, std::nullopt, t.errors};

  auto main_url = toolkit::with_retry<std::string>(options.retry, [&] { return services.host.upload(input.image); });
  if (!main_url) {
    t.errors.push_back(describe(main_url.error()));
    state = session::terminate(std::move(state), TerminationReason::Error);
  }

  std::vector<toolkit::ChatMessage> messages;
  std::optional<Observation> previous;
  int invalid_streak = 0;
  while (state.phase != Phase::Terminated) {
    if (session::needs_exhaustion(state)) {
      state = session::terminate_exhausted(std::move(state), options.session);
      continue;
    }
    const long turn_started = clock.now();
    trajectory::TurnRecord turn;
    turn.phase = state.phase;
    turn.forced_answer = state.awaiting_forced_answer;
    turn.prompt = compose_prompt(previous, state);
    if (t.turns.empty()) {
      turn.prompt_images = {*main_url};
    } else if (previous) {
      turn.prompt_images = previous->images;
    }
    messages.push_back({"user", turn.prompt, turn.prompt_images});

    toolkit::ChatRequest request{messages, options.temperature, input.seed};
    auto reply = toolkit::with_retry<std::string>(options.retry, [&] { return services.policy.complete(request); });
    if (!reply) {
      auto f = reply.error();
      if (f.tool.empty()) f.tool = "policy";
      t.errors.push_back(describe(f));
      state = session::terminate(std::move(state), TerminationReason::Error);
      break;
    }
    turn.raw_output = *reply;
    messages.push_back({"assistant", turn.raw_output, {}});
    turn.format_score = protocol::score_turn_format(turn.raw_output, turn.phase).score();

    auto d = decide(state, turn.raw_output, options, invalid_streak);
    std::optional<ObservationKind> kind;
    if (d.rejection) {
      turn.rejection = d.rejection;
      t.errors.push_back("turn " + std::to_string(t.turns.size() + 1) + " rejected: " + *d.rejection);
      kind = protocol::TurnRejected{*d.rejection};
    } else {
      turn.action = d.action;
      kind = execute(ctx, d, turn);
    }
    if (kind) turn.observation = protocol::render_observation(std::move(*kind));
    state = session::record_turn(std::move(d.state), turn.prompt, turn.raw_output, turn.observation);
    previous = turn.observation;
    turn.elapsed = clock.now() - turn_started;
    t.turns.push_back(std::move(turn));
  }

  t.termination = state.termination.value_or(TerminationReason::Error);
  t.final_answer = state.final_answer;
  t.answered = state.answered;
  t.budgets_left = state.budgets;
  t.image_search_dispatches = state.image_search_dispatches;
  t.crops_searched = state.crops_searched;

  if (services.judge) {
    auto scored = reward::score_trajectory(t, input.answers, *services.judge, options.lambda);
    if (scored) {
      t.reward = *scored;
      if (scored->judged) t.verdict = scored->r_acc == 1.0;
    } else {
      t.errors.push_back(describe(scored.error()));
    }
  }
  t.elapsed = clock.now() - started;
  return t;
}

// ---------------------------------------------------------------------------
// Replay

ReplayReport replay(const trajectory::Trajectory& record, const EpisodeOptions& options) {
  ReplayReport report;
  auto mismatch = [&](std::size_t turn, const std::string& what) {
    report.mismatches.push_back("turn " + std::to_string(turn + 1) + ": " + what);
  };

  auto state = session::new_session(record.question, record.image_ref, options.session);
  std::optional<Observation> previous;
  int invalid_streak = 0;
  for (std::size_t i = 0; i < record.turns.size(); ++i) {
    const auto& turn = record.turns[i];
    while (session::needs_exhaustion(state)) state = session::terminate_exhausted(std::move(state), options.session);
    if (state.phase == Phase::Terminated) {
      mismatch(i, "recorded after the episode terminated");
      break;
    }
    if (turn.phase != state.phase)
      mismatch(i, "phase " + std::string(to_string(turn.phase)) + " != " + std::string(to_string(state.phase)));
    if (turn.forced_answer != state.awaiting_forced_answer) mismatch(i, "forced-answer flag differs");
    if (compose_prompt(previous, state) != turn.prompt) mismatch(i, "prompt differs");
    if (i > 0 && previous && previous->images != turn.prompt_images) mismatch(i, "prompt images differ");
    if (protocol::score_turn_format(turn.raw_output, state.phase).score() != turn.format_score)
      mismatch(i, "format score differs");

    auto d = decide(state, turn.raw_output, options, invalid_streak);
    if (d.action != turn.action) mismatch(i, "parsed action differs");
    if (d.rejection != turn.rejection) mismatch(i, "rejection differs");
    if (d.state.phase == Phase::AfterGazeCrops) d.state = session::attach_crops(std::move(d.state), turn.crop_refs);
    state = session::record_turn(std::move(d.state), turn.prompt, turn.raw_output, turn.observation);
    previous = turn.observation;
  }
  while (session::needs_exhaustion(state)) state = session::terminate_exhausted(std::move(state), options.session);
  if (state.phase != Phase::Terminated && record.termination == TerminationReason::Error)
    state = session::terminate(std::move(state), TerminationReason::Error);

  if (state.termination != record.termination) report.mismatches.push_back("termination differs");
  if (state.final_answer != record.final_answer) report.mismatches.push_back("final answer differs");
  if (state.answered != record.answered) report.mismatches.push_back("answered flag differs");
  if (!(state.budgets == record.budgets_left)) report.mismatches.push_back("remaining budgets differ");
  if (state.image_search_dispatches != record.image_search_dispatches)
    report.mismatches.push_back("image search dispatch count differs");
  if (state.crops_searched != record.crops_searched) report.mismatches.push_back("crop count differs");

  if (record.reward) {
    reward::RewardBreakdown r;
    r.lambda = record.reward->lambda;
    r.r_fmt = reward::trajectory_format_score(record);
    r.judged = record.verdict.has_value();
    r.r_acc = record.verdict.value_or(false) ? 1.0 : 0.0;
    r.total = reward::combine(r.r_acc, r.r_fmt, r.lambda);
    r.advantage = record.reward->advantage;
    if (r.r_fmt != record.reward->r_fmt) report.mismatches.push_back("format reward differs");
    if (r.total != record.reward->total) report.mismatches.push_back("total reward differs");
    report.reward = r;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Environment

Environment::Environment(const config::RunConfig& c) : config_(c) {
  config::validate(c);
  const http::Endpoint timeouts{"", "", std::chrono::milliseconds(c.timeout_ms)};
  toolkit::ChatClient* summarizer = nullptr;
  toolkit::ChatClient* judge_client = nullptr;
  toolkit::WebSearchProvider* web = nullptr;
  toolkit::PageReader* reader = nullptr;

  auto wire_http = [&](http::Endpoint tools, http::Endpoint model, std::string model_name, http::Endpoint judge,
                       std::string judge_name, http::Endpoint summ, std::string summ_name) {
    owned_host_ = std::make_unique<http::HttpImageHost>(tools, *store_);
    owned_image_search_ = std::make_unique<http::HttpImageSearch>(tools, *owned_host_);
    owned_grounding_ = std::make_unique<http::HttpGrounding>(tools, *owned_host_, *store_, c.grounding_top_n);
    owned_web_ = std::make_unique<http::HttpWebSearch>(tools);
    owned_reader_ = std::make_unique<http::HttpPageReader>(tools);
    owned_chat_.push_back(std::make_unique<http::HttpChatClient>(model, std::move(model_name)));
    owned_chat_.push_back(std::make_unique<http::HttpChatClient>(judge, std::move(judge_name)));
    owned_chat_.push_back(std::make_unique<http::HttpChatClient>(summ, std::move(summ_name)));
    policy_ = owned_chat_[0].get();
    judge_client = owned_chat_[1].get();
    summarizer = owned_chat_[2].get();
    host_ = owned_host_.get();
    image_search_ = owned_image_search_.get();
    grounding_ = owned_grounding_.get();
    web = owned_web_.get();
    reader = owned_reader_.get();
  };

  if (c.mock) {
    corpus_ = std::make_unique<mock::Corpus>(
        mock::load_corpus(c.corpus_path.empty() ? mock::default_corpus_path() : c.corpus_path));
    if (c.mock_transport == config::MockTransport::InProcess) {
      mocks_ = std::make_unique<mock::MockToolset>(*corpus_, c.fault_rate, c.seed, c.grounding_top_n);
      store_ = &mocks_->store;
      policy_ = mocks_->policy.get();
      host_ = mocks_->host.get();
      image_search_ = mocks_->image_search.get();
      grounding_ = mocks_->grounding.get();
      web = mocks_->web_search.get();
      reader = mocks_->reader.get();
      summarizer = mocks_->summarizer.get();
      judge_client = mocks_->judge.get();
    } else {
      server_ = std::make_unique<mock::MockServer>(*corpus_, mock::ServerOptions{"127.0.0.1", 0, c.fault_rate, c.seed});
      server_->start();
      local_store_ = std::make_unique<ImageStore>();
      mock::register_images(*corpus_, *local_store_);
      store_ = local_store_.get();
      auto ep = timeouts;
      ep.base_url = server_->base_url();
      wire_http(ep, ep, "policy", ep, "judge", ep, "summarizer");
      spdlog::debug("mock server listening on {}", ep.base_url);
    }
  } else {
    local_store_ = std::make_unique<ImageStore>();
    store_ = local_store_.get();
    auto endpoint = [&](const config::EndpointConfig& e) {
      return http::Endpoint{e.url, e.api_key, timeouts.timeout};
    };
    auto name = [](const config::EndpointConfig& e, const char* fallback) {
      return e.model.empty() ? std::string(fallback) : e.model;
    };
    wire_http(endpoint(c.tools), endpoint(c.model), name(c.model, "policy"), endpoint(c.judge), name(c.judge, "judge"),
              endpoint(c.summarizer), name(c.summarizer, "summarizer"));
  }
  pipeline_ = std::make_unique<toolkit::TextSearchPipeline>(*web, *reader, *summarizer,
                                                            toolkit::PipelineOptions{c.tool_parallelism, c.retry});
  judge_ = std::make_unique<reward::Judge>(*judge_client, c.judge_style, c.retry);
  sampler_ = policy_;
}

Environment::~Environment() {
  if (server_) server_->stop();
}

Services Environment::services() {
  return Services{*policy_, *image_search_, *pipeline_, *grounding_, *host_, *store_, judge_.get()};
}

void Environment::ensure_image(const std::string& ref) {
  std::lock_guard lock(images_mutex_);
  if (store_->contains(ref)) return;
  if (!std::filesystem::exists(ref)) throw UnknownImage(ref);
  store_->add_ppm_file(ref, ref);
}

toolkit::ChatClient& Environment::sampler(const std::vector<datapipe::DatasetRecord>& records) {
  if (!config_.mock) return *sampler_;
  mock_sampler_ = std::make_unique<mock::ScriptedSampler>();
  for (const auto& r : records) {
    if (!r.answers.empty()) mock_sampler_->set(r.question, r.answers.front(), r.pass_count.value_or(0));
  }
  return *mock_sampler_;
}

// ---------------------------------------------------------------------------
// Batches

EpisodeInput episode_input(const datapipe::DatasetRecord& record, std::uint64_t seed) {
  return {record.id, record.question, record.image, record.answers, seed};
}

namespace {

using EpisodeOutcome = std::variant<trajectory::Trajectory, std::string>;

EpisodeOutcome guarded_episode(const Services& services, const EpisodeOptions& options, const EpisodeInput& input) {
  try {
    return run_episode(services, options, input);
  } catch (const std::exception& e) {
    spdlog::warn("episode {} failed: {}", input.id, e.what());
    return std::string(e.what());
  }
}

std::vector<RecordFailure> line_failures(const datapipe::Manifest& manifest) {
  std::vector<RecordFailure> out;
  for (const auto& e : manifest.errors) out.push_back({"", e.line, e.message});
  return out;
}

}  // namespace

BatchResult run_batch(const Services& services, const EpisodeOptions& options, const datapipe::Manifest& manifest,
                      std::uint64_t seed, std::size_t parallelism) {
  BatchResult result;
  result.failures = line_failures(manifest);
  const auto& records = manifest.records;
  auto outcomes = parallel_map(records.size(), parallelism, [&](std::size_t i) {
    return guarded_episode(services, options, episode_input(records[i], seed));
  });
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (auto* t = std::get_if<trajectory::Trajectory>(&outcomes[i])) {
      result.trajectories.push_back(std::move(*t));
    } else {
      result.failures.push_back({records[i].id, 0, std::get<std::string>(outcomes[i])});
    }
  }
  if (!result.trajectories.empty()) result.behavior = analytics::behavior_distribution(result.trajectories, 1);
  result.accuracy = summarize(result.trajectories);
  return result;
}

RolloutResult run_rollouts(const Services& services, const EpisodeOptions& options, const datapipe::Manifest& manifest,
                           std::uint64_t seed, int group_size, std::size_t parallelism) {
  if (!services.judge) throw std::invalid_argument("rollouts need a judge");
  if (group_size < 2) throw GroupTooSmall("group size must be at least 2");
  RolloutResult result;
  result.failures = line_failures(manifest);
  const auto& records = manifest.records;
  const auto g = static_cast<std::size_t>(group_size);
  auto outcomes = parallel_map(records.size() * g, parallelism, [&](std::size_t k) {
    return guarded_episode(services, options, episode_input(records[k / g], seed + k % g));
  });

  for (std::size_t r = 0; r < records.size(); ++r) {
    RolloutGroupResult group{records[r].id, {}, {}};
    std::optional<std::string> failure;
    for (std::size_t i = 0; i < g && !failure; ++i) {
      auto& outcome = outcomes[r * g + i];
      if (auto* message = std::get_if<std::string>(&outcome)) {
        failure = *message;
      } else {
        auto& t = std::get<trajectory::Trajectory>(outcome);
        if (!t.reward) failure = "rollout " + std::to_string(i) + " could not be scored";
        group.rollouts.push_back(std::move(t));
      }
    }
    if (failure) {
      result.failures.push_back({records[r].id, 0, *failure});
      continue;
    }
    std::vector<double> rewards;
    for (const auto& t : group.rollouts) rewards.push_back(t.reward->total);
    group.group = reward::group_advantages(rewards);
    int passes = 0;
    for (std::size_t i = 0; i < g; ++i) {
      group.rollouts[i].reward->advantage = group.group.advantages[i];
      passes += group.rollouts[i].verdict.value_or(false) ? 1 : 0;
    }
    auto measured = records[r];
    measured.pass_count = passes;
    measured.attempts = group_size;
    result.measured.push_back(std::move(measured));
    result.groups.push_back(std::move(group));
  }
  return result;
}

AccuracySummary summarize(const std::vector<trajectory::Trajectory>& trajectories) {
  AccuracySummary s;
  s.episodes = trajectories.size();
  double reward_sum = 0;
  std::size_t scored = 0;
  for (const auto& t : trajectories) {
    s.answered += t.answered ? 1 : 0;
    if (t.reward) {
      ++scored;
      reward_sum += t.reward->total;
      s.judged += t.reward->judged ? 1 : 0;
    }
    s.correct += t.verdict.value_or(false) ? 1 : 0;
  }
  if (s.episodes) s.accuracy = static_cast<double>(s.correct) / static_cast<double>(s.episodes);
  if (scored) s.mean_reward = reward_sum / static_cast<double>(scored);
  return s;
}

nlohmann::ordered_json to_json(const AccuracySummary& s) {
  return {{"episodes", s.episodes}, {"answered", s.answered},   {"judged", s.judged},
          {"correct", s.correct},   {"accuracy", s.accuracy},   {"mean_reward", s.mean_reward}};
}

TrajectoryWriter::TrajectoryWriter(const std::string& path, bool append)
    : out_(path, std::ios::binary | (append ? std::ios::app : std::ios::trunc)), path_(path) {
  if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
}

void TrajectoryWriter::write(const trajectory::Trajectory& t) {
  const auto line = trajectory::to_jsonl(t);
  std::lock_guard lock(mutex_);
  out_ << line << '\n';
  out_.flush();
  if (!out_) throw std::runtime_error("write failed: " + path_);
}

std::vector<trajectory::Trajectory> load_trajectories(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw trajectory::RecordError("cannot open " + path);
  std::vector<trajectory::Trajectory> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(trajectory::parse_jsonl(line));
    } catch (const std::exception& e) {
      throw trajectory::RecordError(path + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace gog::runner

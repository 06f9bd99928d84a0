#include "gog/reward.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "gog/prompts.hpp"
#include "gog/trajectory.hpp"

namespace gog::reward {

double combine(double r_acc, double r_fmt, double lambda) {
  if (r_acc != 0.0 && r_acc != 1.0) throw RangeError("r_acc must be 0 or 1");
  if (!(r_fmt >= 0.0 && r_fmt <= 1.0)) throw RangeError("r_fmt must lie in [0, 1]");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw RangeError("lambda must lie in [0, 1]");
  return (1.0 - lambda) * r_acc + lambda * r_fmt;
}

RolloutGroup group_advantages(const std::vector<double>& rewards) {
  if (rewards.size() < 2) throw GroupTooSmall("a rollout group needs at least two rewards");
  RolloutGroup g;
  g.rewards = rewards;
  g.advantages.assign(rewards.size(), 0.0);
  const double n = static_cast<double>(rewards.size());
  double sum = 0;
  for (double r : rewards) sum += r;
  g.mean = sum / n;
  if (std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards.front(); })) {
    g.mean = rewards.front();
    return g;
  }
  double ss = 0;
  for (double r : rewards) ss += (r - g.mean) * (r - g.mean);
  g.stddev = std::sqrt(ss / n);
  for (std::size_t i = 0; i < rewards.size(); ++i) g.advantages[i] = (rewards[i] - g.mean) / g.stddev;
  return g;
}

std::string_view to_string(Verdict verdict) { return verdict == Verdict::Correct ? "Correct" : "Incorrect"; }
std::string_view to_string(JudgeStyle style) { return style == JudgeStyle::Bracket ? "bracket" : "xml"; }

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

VerdictParseError parse_error(std::string detail, std::string_view text) { return {std::move(detail), std::string(text)}; }

}  // namespace

Result<Verdict, VerdictParseError> parse_judge_verdict(std::string_view text, JudgeStyle style) {
  if (style == JudgeStyle::Bracket) {
    const auto t = trim(text);
    if (t == "[CORRECT]") return Verdict::Correct;
    if (t == "[INCORRECT]") return Verdict::Incorrect;
    return unexpected(parse_error("expected [CORRECT] or [INCORRECT]", text));
  }
  static constexpr std::string_view kOpen = "<judge>";
  static constexpr std::string_view kClose = "</judge>";
  const auto open = text.find(kOpen);
  if (open == std::string_view::npos) return unexpected(parse_error("missing <judge> block", text));
  const auto close = text.find(kClose, open + kOpen.size());
  if (close == std::string_view::npos) return unexpected(parse_error("unterminated <judge> block", text));
  if (text.find(kOpen, open + kOpen.size()) != std::string_view::npos)
    return unexpected(parse_error("more than one <judge> block", text));
  const auto body = trim(text.substr(open + kOpen.size(), close - open - kOpen.size()));
  if (body == "True") return Verdict::Correct;
  if (body == "False") return Verdict::Incorrect;
  return unexpected(parse_error("judge block must contain True or False", text));
}

std::string judge_prompt(JudgeStyle style, std::string_view question, const std::vector<std::string>& ground_truth,
                         std::string_view prediction) {
  const auto truths = nlohmann::json(ground_truth).dump();
  std::string out;
  if (style == JudgeStyle::Bracket) {
    out = prompts::fill(prompts::judge_bracket(), "gt_str", truths);
  } else {
    out = prompts::fill(prompts::judge_xml(), "ground_truth", truths);
  }
  // The prediction goes last so its text is never scanned for placeholders.
  out = prompts::fill(out, "question", question);
  return prompts::fill(out, "prediction", prediction);
}

toolkit::ToolResult<Verdict> Judge::judge(std::string_view question, const std::vector<std::string>& ground_truth,
                                          std::string_view prediction) {
  toolkit::ChatRequest request;
  request.temperature = 0.0;
  request.messages.push_back({"user", judge_prompt(style_, question, ground_truth, prediction), {}});
  std::string last_reply;
  for (int attempt = 0; attempt < 2; ++attempt) {
    auto reply = toolkit::with_retry<std::string>(retry_, [&] { return client_.complete(request); });
    if (!reply) return unexpected(reply.error());
    auto verdict = parse_judge_verdict(*reply, style_);
    if (verdict) return *verdict;
    last_reply = std::move(*reply);
  }
  return unexpected(toolkit::ToolFailure::make("judge", toolkit::FailureCause::MalformedContent,
                                               "unparseable verdict: " + last_reply.substr(0, 200)));
}

double trajectory_format_score(const trajectory::Trajectory& t) {
  if (t.turns.empty()) return 0.0;
  double sum = 0;
  for (const auto& turn : t.turns) sum += turn.format_score;
  return sum / static_cast<double>(t.turns.size());
}

toolkit::ToolResult<RewardBreakdown> score_trajectory(const trajectory::Trajectory& t,
                                                      const std::vector<std::string>& ground_truth, Judge& judge,
                                                      double lambda) {
  RewardBreakdown r;
  r.lambda = lambda;
  r.r_fmt = trajectory_format_score(t);
  if (t.answered && t.final_answer) {
    auto verdict = judge.judge(t.question, ground_truth, *t.final_answer);
    if (!verdict) return unexpected(verdict.error());
    r.judged = true;
    r.r_acc = *verdict == Verdict::Correct ? 1.0 : 0.0;
  }
  r.total = combine(r.r_acc, r.r_fmt, lambda);
  return r;
}

}  // namespace gog::reward

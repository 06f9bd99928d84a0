#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "gog/errors.hpp"
#include "gog/result.hpp"
#include "gog/toolkit.hpp"

namespace gog::trajectory {
struct Trajectory;
}

namespace gog::reward {

inline constexpr double kDefaultLambda = 0.1;

struct RewardBreakdown {
  double r_acc = 0;  // 0 or 1
  double r_fmt = 0;  // [0, 1]
  double lambda = kDefaultLambda;
  double total = 0;
  double advantage = 0;
  bool judged = false;  // false when the episode ended without an answer
  bool operator==(const RewardBreakdown&) const = default;
};

/// (1 - lambda) * r_acc + lambda * r_fmt. Throws RangeError unless r_acc is 0
/// or 1 and r_fmt, lambda lie in [0, 1].
double combine(double r_acc, double r_fmt, double lambda);

struct RolloutGroup {
  std::vector<double> rewards;
  std::vector<double> advantages;
  double mean = 0;
  double stddev = 0;  // population
};

/// (r_i - mean) / stddev with the population standard deviation. A group whose
/// rewards are all equal gets all-zero advantages. Throws GroupTooSmall for
/// fewer than two rewards.
RolloutGroup group_advantages(const std::vector<double>& rewards);

enum class Verdict { Correct, Incorrect };
enum class JudgeStyle { Bracket, Xml };

std::string_view to_string(Verdict verdict);
std::string_view to_string(JudgeStyle style);

struct VerdictParseError {
  std::string detail;
  std::string text;
};

/// Bracket style: the whole reply, trimmed, is "[CORRECT]" or "[INCORRECT]".
/// XML style: exactly one <judge> block whose trimmed content is "True" or
/// "False". Anything else is a VerdictParseError.
Result<Verdict, VerdictParseError> parse_judge_verdict(std::string_view text, JudgeStyle style);

/// Judge prompt with the fields filled in; ground truths are listed as a JSON array.
std::string judge_prompt(JudgeStyle style, std::string_view question, const std::vector<std::string>& ground_truth,
                         std::string_view prediction);

/// Asks the judge endpoint at temperature 0. Transport failures follow the
/// retry policy; an unparseable verdict is asked once more before giving up
/// with MalformedContent.
class Judge {
 public:
  Judge(toolkit::ChatClient& client, JudgeStyle style, toolkit::RetryPolicy retry = {})
      : client_(client), style_(style), retry_(retry) {}

  toolkit::ToolResult<Verdict> judge(std::string_view question, const std::vector<std::string>& ground_truth,
                                     std::string_view prediction);

  JudgeStyle style() const { return style_; }

 private:
  toolkit::ChatClient& client_;
  JudgeStyle style_;
  toolkit::RetryPolicy retry_;
};

/// Mean of the per-turn format scores; 0 for a trajectory with no turns.
double trajectory_format_score(const trajectory::Trajectory& t);

/// r_acc from the judge on the final answer (0 without a judge call when the
/// episode ended unanswered), r_fmt from the turns, combined with lambda.
toolkit::ToolResult<RewardBreakdown> score_trajectory(const trajectory::Trajectory& t,
                                                      const std::vector<std::string>& ground_truth, Judge& judge,
                                                      double lambda = kDefaultLambda);

}  // namespace gog::reward

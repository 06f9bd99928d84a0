#pragma once

#include <string>
#include <string_view>

namespace gog::prompts {

inline constexpr std::string_view kVersion = "gog-prompts/v1";

namespace detail {
extern const std::string_view kRound1;
extern const std::string_view kAfterImageSearch;
extern const std::string_view kAfterGaze;
extern const std::string_view kAfterTextSearch;
extern const std::string_view kForcedAnswer;
extern const std::string_view kDirectAnswer;
extern const std::string_view kSummarize;
extern const std::string_view kJudgeBracket;
extern const std::string_view kJudgeXml;
}  // namespace detail

// Raw templates, verbatim from resources/prompts/v1.
inline std::string_view round1() { return detail::kRound1; }
inline std::string_view after_image_search() { return detail::kAfterImageSearch; }
inline std::string_view after_gaze() { return detail::kAfterGaze; }
inline std::string_view after_text_search() { return detail::kAfterTextSearch; }
inline std::string_view forced_answer() { return detail::kForcedAnswer; }
inline std::string_view direct_answer() { return detail::kDirectAnswer; }
inline std::string_view summarize() { return detail::kSummarize; }
inline std::string_view judge_bracket() { return detail::kJudgeBracket; }
inline std::string_view judge_xml() { return detail::kJudgeXml; }

/// Replaces every occurrence of "{name}" with value. Unknown placeholders are left alone.
std::string fill(std::string_view tmpl, std::string_view name, std::string_view value);

}  // namespace gog::prompts

#include <gtest/gtest.h>

#include "gog/protocol.hpp"
#include "support.hpp"

using namespace gog;
using namespace gog::protocol;

namespace {

ModelAction parse_ok(std::string_view raw, Phase phase = Phase::Initial) {
  auto r = parse_action(raw, phase);
  EXPECT_TRUE(r.has_value()) << (r ? "" : r.error().message());
  return r ? *r : ModelAction{};
}

ParseErrorKind parse_err(std::string_view raw, Phase phase = Phase::Initial) {
  auto r = parse_action(raw, phase);
  EXPECT_FALSE(r.has_value());
  return r ? ParseErrorKind::NoActionTag : r.error().kind;
}

}  // namespace

TEST(ParseAction, AnswerWithThink) {
  auto a = parse_ok("<think>need ID</think><answer>Paris</answer>");
  EXPECT_EQ(a.think, "need ID");
  EXPECT_EQ(a.action, Action(Answer{"Paris"}));
}

TEST(ParseAction, WholeImageMarkerAsPrompted) {
  EXPECT_EQ(parse_ok("<img_search><img></img_search>").action, Action(WholeImageSearch{}));
  EXPECT_EQ(parse_ok("<img_search><img></img></img_search>").action, Action(WholeImageSearch{}));
  EXPECT_EQ(parse_ok("<img_search> <img> </img_search>").action, Action(WholeImageSearch{}));
}

TEST(ParseAction, CroppedSearchDescription) {
  auto a = parse_ok("<think>t</think>\n<img_search>  the emblem on the front of the car </img_search>");
  EXPECT_EQ(a.action, Action(CroppedSearch{"the emblem on the front of the car"}));
}

TEST(ParseAction, SearchCropIndices) {
  EXPECT_EQ(parse_ok("<search_crop>1,3</search_crop>", Phase::AfterGazeCrops).action, Action(SelectCrops{{1, 3}}));
  EXPECT_EQ(parse_ok("<search_crop> 3, 1 ,3</search_crop>", Phase::AfterGazeCrops).action, Action(SelectCrops{{1, 3}}));
}

TEST(ParseAction, BadIndicesAreMalformed) {
  EXPECT_EQ(parse_err("<search_crop>0</search_crop>", Phase::AfterGazeCrops), ParseErrorKind::MalformedTag);
  EXPECT_EQ(parse_err("<search_crop>1,,2</search_crop>", Phase::AfterGazeCrops), ParseErrorKind::MalformedTag);
  EXPECT_EQ(parse_err("<search_crop>two</search_crop>", Phase::AfterGazeCrops), ParseErrorKind::MalformedTag);
  EXPECT_EQ(parse_err("<search_crop>-1</search_crop>", Phase::AfterGazeCrops), ParseErrorKind::MalformedTag);
}

TEST(ParseAction, MultipleActionTags) {
  auto r = parse_action("<answer>A</answer><text_search>B</text_search>", Phase::Initial);
  ASSERT_FALSE(r);
  EXPECT_EQ(r.error().kind, ParseErrorKind::MultipleActionTags);
  EXPECT_FALSE(r.error().tag.empty());
  EXPECT_LT(r.error().begin, r.error().end);
}

TEST(ParseAction, NoActionTag) {
  EXPECT_EQ(parse_err("just prose"), ParseErrorKind::NoActionTag);
  EXPECT_EQ(parse_err("<think>only thinking</think>"), ParseErrorKind::NoActionTag);
  EXPECT_EQ(parse_err(""), ParseErrorKind::NoActionTag);
}

TEST(ParseAction, UnclosedAndNestedTags) {
  EXPECT_EQ(parse_err("<answer>Paris"), ParseErrorKind::MalformedTag);
  EXPECT_EQ(parse_err("Paris</answer>"), ParseErrorKind::MalformedTag);
  EXPECT_EQ(parse_err("<answer>a <text_search>b</text_search></answer>"), ParseErrorKind::MalformedTag);
  EXPECT_EQ(parse_err("<img_search><img>x</img_search>"), ParseErrorKind::MalformedTag);
}

TEST(ParseAction, EmptyPayload) {
  EXPECT_EQ(parse_err("<answer>   </answer>"), ParseErrorKind::EmptyPayload);
  EXPECT_EQ(parse_err("<text_search></text_search>"), ParseErrorKind::EmptyPayload);
  EXPECT_EQ(parse_err("<img_search> </img_search>"), ParseErrorKind::EmptyPayload);
}

TEST(ParseAction, IllegalForPhase) {
  EXPECT_EQ(parse_err("<search_crop>1</search_crop>", Phase::Initial), ParseErrorKind::IllegalActionForPhase);
  EXPECT_EQ(parse_err("<text_search>q</text_search>", Phase::AfterGazeCrops), ParseErrorKind::IllegalActionForPhase);
  EXPECT_EQ(parse_err("<img_search><img></img_search>", Phase::AfterTextSearch), ParseErrorKind::IllegalActionForPhase);
}

TEST(ParseAction, TagsAreCaseSensitive) { EXPECT_EQ(parse_err("<Answer>x</Answer>"), ParseErrorKind::NoActionTag); }

TEST(ParseAction, StrayTextIsIgnored) {
  auto a = parse_ok("Sure! <think>hm</think> here: <answer>42</answer> done");
  EXPECT_EQ(a.action, Action(Answer{"42"}));
  EXPECT_EQ(scan_turn("Sure! <think>hm</think> here: <answer>42</answer> done").stray_text, "Sure! here: done");
}

TEST(Render, CanonicalForms) {
  EXPECT_EQ(render(Action(WholeImageSearch{})), "<img_search><img></img_search>");
  EXPECT_EQ(render(Action(SelectCrops{{1, 3}})), "<search_crop>1,3</search_crop>");
  EXPECT_EQ(render(ModelAction{"why", TextSearch{"q"}}), "<think>why</think>\n<text_search>q</text_search>");
  EXPECT_EQ(render(ModelAction{std::nullopt, Answer{"a"}}), "<answer>a</answer>");
}

TEST(Render, RoundTripProperty) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 2000; ++i) {
    const auto a = oracle::random_action(rng);
    const auto text = render(a);
    auto parsed = parse_action(text, oracle::phase_for(a.kind()));
    ASSERT_TRUE(parsed) << text << " -> " << parsed.error().message();
    EXPECT_EQ(*parsed, a) << text;
    EXPECT_EQ(render(*parsed), text);
  }
}

TEST(ParseAction, FuzzNeverThrows) {
  std::mt19937_64 rng(12);
  const std::vector<std::string> pieces = {"<think>", "</think>", "<answer>", "</answer>", "<img_search>",
                                           "</img_search>", "<img>", "</img>", "<search_crop>", "</search_crop>",
                                           "<text_search>", "</text_search>", "1,2", "<", ">", "/", " ", "x"};
  for (int i = 0; i < 5000; ++i) {
    std::string s;
    const auto n = rng() % 24;
    for (std::size_t k = 0; k < n; ++k) {
      if (rng() % 3 == 0) {
        s.push_back(static_cast<char>(rng() % 256));
      } else {
        s += pieces[rng() % pieces.size()];
      }
    }
    for (auto phase : {Phase::Initial, Phase::AfterGazeCrops, Phase::AfterTextSearch, Phase::Terminated}) {
      EXPECT_NO_THROW({
        auto r = parse_action(s, phase);
        if (!r) (void)r.error().message();
        (void)score_turn_format(s, phase).score();
      });
    }
  }
}

// ---------------------------------------------------------------------------

TEST(Observation, ImageResultsListed) {
  auto obs = render_observation(ImageSearchResults{{{std::nullopt, {{"thumb1", "Eiffel Tower - wiki"}}}}});
  EXPECT_EQ(obs.rendered,
            "<information>\nImage search returned 1 result:\n"
            "1. Webpage Image: thumb1 Webpage Title: Eiffel Tower - wiki\n</information>");
}

TEST(Observation, EmptyResultsSayZero) {
  auto obs = render_observation(ImageSearchResults{});
  EXPECT_EQ(obs.rendered, "<information>\nImage search returned no results.\n</information>");
}

TEST(Observation, TruncatesToFive) {
  ImageSearchSection section;
  for (int i = 1; i <= 7; ++i) section.hits.push_back({"t" + std::to_string(i), "title " + std::to_string(i)});
  auto obs = render_observation(ImageSearchResults{{section}});
  EXPECT_NE(obs.rendered.find("returned 5 results"), std::string::npos);
  EXPECT_NE(obs.rendered.find("5. Webpage Image: t5"), std::string::npos);
  EXPECT_EQ(obs.rendered.find("t6"), std::string::npos);
  EXPECT_EQ(std::get<ImageSearchResults>(obs.kind).sections[0].hits.size(), 5u);
}

TEST(Observation, InformationWrapperExactlyOnce) {
  for (const auto& kind : {ObservationKind(ImageSearchResults{}), ObservationKind(TextSearchSummary{"s"}),
                           ObservationKind(ToolError{"reader", "Timeout"})}) {
    const auto r = render_observation(kind).rendered;
    EXPECT_EQ(r.find("<information>"), 0u);
    EXPECT_EQ(r.find("<information>", 1), std::string::npos);
    EXPECT_EQ(r.rfind("</information>"), r.size() - std::string("</information>").size());
  }
}

TEST(Observation, CropCandidatesCarryImages) {
  auto obs = render_observation(CropCandidates{"the logo", {"u1", "u2"}});
  EXPECT_EQ(obs.rendered, "Cropped regions for \"the logo\":\nCrop 1: u1\nCrop 2: u2");
  EXPECT_EQ(obs.images, (std::vector<std::string>{"u1", "u2"}));
}

TEST(Observation, DeterministicRendering) {
  ImageSearchResults r{{{2, {{"a", "b"}}}, {3, {}}}};
  EXPECT_EQ(render_observation(r), render_observation(r));
}

// ---------------------------------------------------------------------------

TEST(FormatScore, WellFormedTurnScoresOne) {
  EXPECT_EQ(score_turn_format("<think>x</think><answer>y</answer>", Phase::Initial).score(), 1.0);
}

TEST(FormatScore, MissingThinkIsFourOfFive) {
  const auto report = score_turn_format("<answer>y</answer>", Phase::Initial);
  ASSERT_EQ(report.checks.size(), 5u);
  std::size_t passing = 0;  // count by hand from the check list
  for (const auto& c : report.checks) passing += c.passed ? 1 : 0;
  EXPECT_EQ(passing, 4u);
  EXPECT_EQ(report.score(), 0.8);
}

TEST(FormatScore, NoTagsFailsActionChecks) {
  const auto report = score_turn_format("plain words", Phase::Initial);
  for (const auto& c : report.checks) EXPECT_FALSE(c.passed) << c.name;
  EXPECT_EQ(report.score(), 0.0);
}

TEST(FormatScore, IllegalPhaseLosesOneCheck) {
  EXPECT_EQ(score_turn_format("<think>x</think><search_crop>1</search_crop>", Phase::Initial).score(), 0.8);
}

TEST(FormatScore, ScoreIsPassedFraction) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 500; ++i) {
    auto raw = render(oracle::random_action(rng));
    if (rng() % 2) raw += "<answer>extra</answer>";
    if (rng() % 3 == 0) raw.erase(raw.size() / 2);
    const auto r = score_turn_format(raw, Phase::AfterImageSearch);
    EXPECT_EQ(r.score(), static_cast<double>(r.passed()) / static_cast<double>(r.checks.size()));
    EXPECT_GE(r.score(), 0.0);
    EXPECT_LE(r.score(), 1.0);
  }
}

#include <gtest/gtest.h>

#include <random>

#include "gog/prompts.hpp"
#include "gog/session.hpp"

using namespace gog;
using namespace gog::session;
using protocol::ModelAction;

namespace {

ModelAction act(protocol::Action a) { return {std::string("t"), std::move(a)}; }

SessionState step(const SessionState& s, protocol::Action a) {
  auto t = apply_action(s, act(std::move(a)));
  EXPECT_TRUE(t.has_value()) << (t ? "" : t.error().message);
  return t ? t->updated_state : s;
}

}  // namespace

TEST(Session, NewSessionValidates) {
  EXPECT_THROW(new_session("  ", "img"), ConfigError);
  EXPECT_THROW(new_session("q?", ""), ConfigError);
  SessionConfig bad;
  bad.budgets.rounds_left = 0;
  EXPECT_THROW(new_session("q?", "img", bad), ConfigError);
  auto s = new_session("q?", "img");
  EXPECT_EQ(s.phase, Phase::Initial);
  EXPECT_EQ(s.budgets, (Budgets{3, 3, 5, 5}));
}

TEST(Session, AllowedActionsPerPhase) {
  auto s = new_session("q?", "img");
  EXPECT_EQ(allowed_actions(s), (std::set<ActionKind>{ActionKind::WholeImageSearch, ActionKind::CroppedSearch,
                                                      ActionKind::TextSearch, ActionKind::Answer}));
  s = step(s, protocol::CroppedSearch{"x"});
  s = attach_crops(s, {"img@0,0,1,1"});
  EXPECT_EQ(allowed_actions(s), (std::set<ActionKind>{ActionKind::WholeImageSearch, ActionKind::CroppedSearch,
                                                      ActionKind::SelectCrops, ActionKind::Answer}));
  s = step(s, protocol::SelectCrops{{1}});
  s = step(s, protocol::TextSearch{"q"});
  EXPECT_EQ(allowed_actions(s), (std::set<ActionKind>{ActionKind::TextSearch, ActionKind::Answer}));
}

TEST(Session, WholeImageSearchCharges) {
  auto t = apply_action(new_session("q?", "img"), act(protocol::WholeImageSearch{}));
  ASSERT_TRUE(t);
  EXPECT_EQ(t->next_phase, Phase::AfterImageSearch);
  EXPECT_EQ(t->updated_state.budgets, (Budgets{2, 3, 4, 5}));
  ASSERT_EQ(t->tool_requests.size(), 1u);
  EXPECT_EQ(std::get<ImageSearchRequest>(t->tool_requests[0]), (ImageSearchRequest{"img", std::nullopt}));
}

TEST(Session, HandTracedGazeEpisode) {
  // CroppedSearch -> SelectCrops([1]) -> TextSearch -> Answer, traced by hand:
  //   start                (3,3,5,5)
  //   CroppedSearch        rounds-1                    (3,3,4,5)
  //   SelectCrops([1])     image-1, rounds-1, crop-1   (2,3,3,4)
  //   TextSearch           text-1, rounds-1            (2,2,2,4)
  //   Answer               terminal, no round          (2,2,2,4)
  auto s = new_session("q?", "img");
  s = step(s, protocol::CroppedSearch{"the emblem"});
  EXPECT_EQ(s.phase, Phase::AfterGazeCrops);
  EXPECT_EQ(s.budgets, (Budgets{3, 3, 4, 5}));
  s = attach_crops(s, {"img@0,0,4,4", "img@4,4,8,8"});
  auto t = apply_action(s, act(protocol::SelectCrops{{1}}));
  ASSERT_TRUE(t);
  ASSERT_EQ(t->tool_requests.size(), 1u);
  EXPECT_EQ(std::get<ImageSearchRequest>(t->tool_requests[0]), (ImageSearchRequest{"img@0,0,4,4", 1}));
  s = t->updated_state;
  EXPECT_EQ(s.budgets, (Budgets{2, 3, 3, 4}));
  EXPECT_TRUE(s.pending_crops.empty());
  s = step(s, protocol::TextSearch{"who"});
  EXPECT_EQ(s.budgets, (Budgets{2, 2, 2, 4}));
  s = step(s, protocol::Answer{"x"});
  EXPECT_EQ(s.phase, Phase::Terminated);
  EXPECT_EQ(s.termination, TerminationReason::Answered);
  EXPECT_EQ(s.budgets, (Budgets{2, 2, 2, 4}));
  EXPECT_EQ(s.image_search_dispatches, 1);
  EXPECT_EQ(s.crops_searched, 1);
}

TEST(Session, TextSearchRejectedAfterGazeCrops) {
  auto s = new_session("q?", "img");
  s = step(s, protocol::CroppedSearch{"x"});
  s = attach_crops(s, {"img@0,0,1,1"});
  auto t = apply_action(s, act(protocol::TextSearch{"q"}));
  ASSERT_FALSE(t);
  EXPECT_EQ(t.error().kind, TransitionError::Kind::IllegalTransition);
}

TEST(Session, FailedGazeFallsBack) {
  auto s = step(new_session("q?", "img"), protocol::CroppedSearch{"x"});
  s = attach_crops(s, {});
  EXPECT_EQ(s.phase, Phase::AfterImageSearch);
  EXPECT_FALSE(apply_action(s, act(protocol::SelectCrops{{1}})));
}

TEST(Session, SelectIndexOutOfRange) {
  auto s = step(new_session("q?", "img"), protocol::CroppedSearch{"x"});
  s = attach_crops(s, {"a", "b"});
  auto t = apply_action(s, act(protocol::SelectCrops{{3}}));
  ASSERT_FALSE(t);
  EXPECT_EQ(t.error().kind, TransitionError::Kind::IllegalTransition);
}

TEST(Session, TextBudgetViolation) {
  auto s = new_session("q?", "img");
  for (int i = 0; i < 3; ++i) s = step(s, protocol::TextSearch{"q"});
  auto t = apply_action(s, act(protocol::TextSearch{"q"}));
  ASSERT_FALSE(t);
  EXPECT_EQ(t.error().kind, TransitionError::Kind::BudgetViolation);
  EXPECT_EQ(t.error().counter, BudgetCounter::TextSearches);
}

TEST(Session, ImageBudgetGatesCroppedSearch) {
  SessionConfig cfg;
  cfg.budgets = {1, 3, 5, 5};
  auto s = step(new_session("q?", "img", cfg), protocol::WholeImageSearch{});
  auto t = apply_action(s, act(protocol::CroppedSearch{"x"}));
  ASSERT_FALSE(t);
  EXPECT_EQ(t.error().counter, BudgetCounter::ImageSearches);
}

TEST(Session, RoundExhaustionFallback) {
  SessionConfig cfg;
  cfg.budgets = {3, 3, 1, 5};
  auto s = step(new_session("q?", "img", cfg), protocol::WholeImageSearch{});
  EXPECT_TRUE(needs_exhaustion(s));
  s = terminate_exhausted(s, cfg);
  EXPECT_EQ(s.phase, Phase::Terminated);
  EXPECT_EQ(s.termination, TerminationReason::BudgetExhausted);
  EXPECT_EQ(s.final_answer, std::string(kFallbackAnswer));
  EXPECT_FALSE(s.answered);
}

TEST(Session, ForcedAnswerMode) {
  SessionConfig cfg;
  cfg.budgets = {3, 3, 1, 5};
  cfg.forced_answer = true;
  auto s = step(new_session("q?", "img", cfg), protocol::WholeImageSearch{});
  s = terminate_exhausted(s, cfg);
  EXPECT_TRUE(s.awaiting_forced_answer);
  EXPECT_FALSE(needs_exhaustion(s));
  EXPECT_EQ(select_prompt(s), prompts::fill(prompts::forced_answer(), "question", "q?"));
  EXPECT_EQ(allowed_actions(s), (std::set<ActionKind>{ActionKind::Answer}));
  auto t = apply_action(s, act(protocol::TextSearch{"q"}));
  ASSERT_FALSE(t);
  EXPECT_EQ(t.error().counter, BudgetCounter::Rounds);
  s = step(s, protocol::Answer{"final"});
  EXPECT_EQ(s.termination, TerminationReason::Answered);
}

TEST(Session, RejectedTurnConsumesRound) {
  auto s = consume_rejected_turn(new_session("q?", "img"));
  EXPECT_EQ(s.budgets.rounds_left, 4);
  EXPECT_EQ(s.phase, Phase::Initial);
}

TEST(Session, TerminatedRejectsEverything) {
  auto s = step(new_session("q?", "img"), protocol::Answer{"a"});
  EXPECT_THROW(allowed_actions(s), TerminatedError);
  EXPECT_THROW(select_prompt(s), TerminatedError);
  EXPECT_FALSE(apply_action(s, act(protocol::Answer{"b"})));
}

TEST(Session, PromptSelectionIsPure) {
  for (auto phase : {Phase::Initial, Phase::AfterImageSearch, Phase::AfterGazeCrops, Phase::AfterTextSearch}) {
    EXPECT_EQ(select_prompt(phase, "Why?"), select_prompt(phase, "Why?"));
    EXPECT_NE(select_prompt(phase, "Why?").find("Why?"), std::string::npos);
  }
  EXPECT_NE(select_prompt(Phase::Initial, "q"), select_prompt(Phase::AfterTextSearch, "q"));
}

TEST(Session, BudgetSafetyProperty) {
  std::mt19937_64 rng(21);
  const Budgets initial{3, 3, 5, 5};
  for (int episode = 0; episode < 3000; ++episode) {
    auto s = new_session("q?", "img");
    int image = 0, text = 0, rounds = 0, crops = 0;
    while (s.phase != Phase::Terminated) {
      if (needs_exhaustion(s)) {
        s = terminate_exhausted(s);
        break;
      }
      auto allowed = allowed_actions(s);
      std::vector<ActionKind> menu(allowed.begin(), allowed.end());
      // Bias towards tools so budgets actually run out.
      if (menu.size() > 1 && rng() % 5 != 0) menu.erase(std::remove(menu.begin(), menu.end(), ActionKind::Answer), menu.end());
      const auto kind = menu[rng() % menu.size()];
      protocol::Action a = protocol::Answer{"a"};
      switch (kind) {
        case ActionKind::WholeImageSearch: a = protocol::WholeImageSearch{}; break;
        case ActionKind::CroppedSearch: a = protocol::CroppedSearch{"d"}; break;
        case ActionKind::TextSearch: a = protocol::TextSearch{"q"}; break;
        case ActionKind::SelectCrops: a = protocol::SelectCrops{{1}}; break;
        case ActionKind::Answer: break;
      }
      if (s.phase == Phase::AfterGazeCrops) ASSERT_NE(kind, ActionKind::TextSearch);
      auto t = apply_action(s, act(a));
      ASSERT_TRUE(t) << t.error().message;
      s = t->updated_state;
      image += kind == ActionKind::WholeImageSearch || kind == ActionKind::SelectCrops;
      text += kind == ActionKind::TextSearch;
      rounds += kind != ActionKind::Answer;
      crops += kind == ActionKind::SelectCrops;
      if (kind == ActionKind::CroppedSearch) {
        std::vector<std::string> refs(rng() % 4, "img@0,0,1,1");
        s = attach_crops(s, refs);
      }
    }
    ASSERT_LE(image, initial.image_searches_left);
    ASSERT_LE(text, initial.text_searches_left);
    ASSERT_LE(rounds, initial.rounds_left);
    ASSERT_LE(crops, initial.crop_rounds_left);
    ASSERT_GE(s.budgets.image_searches_left, 0);
    ASSERT_GE(s.budgets.text_searches_left, 0);
    ASSERT_GE(s.budgets.rounds_left, 0);
    ASSERT_GE(s.budgets.crop_rounds_left, 0);
  }
}

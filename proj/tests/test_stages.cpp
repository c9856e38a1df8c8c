#include <doctest.h>

#include "prefgen/errors.h"
#include "prefgen/hashing.h"
#include "prefgen/mock_world.h"
#include "prefgen/prompts.h"
#include "prefgen/stages.h"
#include "support/scripted.h"

using namespace prefgen;
using namespace prefgen::testing;

namespace {

std::string final_step(const std::string& lead, const std::string& answer) {
  return lead + " Final Answer: The final answer is $" + answer + "$. I hope it is correct.";
}

std::unique_ptr<Gateway> mock_gateway(const MockWorldSpec& spec,
                                      std::unique_ptr<StepScorer> prm = nullptr,
                                      std::unique_ptr<TrajectoryScorer> orm = nullptr) {
  auto world = std::make_shared<const MockWorld>(spec);
  GatewayBackends b;
  b.policy = make_mock_generator(world, Role::Policy, 1);
  b.small_policy = make_mock_generator(world, Role::SmallPolicy, 2);
  b.prm = prm ? std::move(prm) : make_mock_prm(world, 3);
  b.orm = orm ? std::move(orm) : std::make_unique<AnswerMatchOrm>();
  return std::make_unique<Gateway>(std::move(b), 16);
}

std::unique_ptr<StepGenerator> fixed(GenerateFn fn) {
  return std::make_unique<FnGenerator>(std::move(fn));
}

Trajectory failed_trajectory(const std::string& text, double reward) {
  Trajectory t;
  t.text = text;
  t.step_count = 2;
  t.final_answer = extract_final_answer(text);
  t.correct = false;
  t.cumulative_reward = reward;
  return t;
}

const Problem kParents{"ex-1",
                       "There were 61 parents in the program and some pupils too. The program "
                       "could seat 44 people. There were 238 people present in the program. How "
                       "many pupils were present in the program?",
                       "177"};

const Problem kPyramid{"ex-2",
                       "If the Great Pyramid of Giza is 20 feet taller than a structure that is "
                       "500 feet tall and 234 feet wider than its height, what is the total sum "
                       "of its height and width in feet?",
                       "1274"};

}  // namespace

TEST_CASE("route truth table") {
  CHECK(route_outcome(true, false).decision == RouteDecision::EmitPair);
  CHECK(route_outcome(false, false).decision == RouteDecision::SelfCorrect);
  CHECK(route_outcome(true, true).decision == RouteDecision::Diversify);
  const auto drop = route_outcome(false, true);
  CHECK(drop.decision == RouteDecision::Drop);
  CHECK(drop.reason == "inverted contrast");
  for (bool a : {false, true})
    for (bool b : {false, true}) {
      CHECK(route_outcome(a, b).decision == route_outcome(a, b).decision);
      CHECK_FALSE(route_outcome(a, b).reason.empty());
      CHECK(parse_route(to_string(route_outcome(a, b).decision)) == route_outcome(a, b).decision);
    }
}

TEST_CASE("defaults") {
  PipelineConfig cfg;
  CHECK(cfg.exploration_budget == 5);
  CHECK(cfg.small_budget() == 10);
  CHECK(cfg.beta == 0.8);
}

TEST_CASE("worked self-correction: failure at 194 corrected to 177") {
  const std::string failed_text =
      "Seats are 44, so 238 - 44 = 194.\n\n" + final_step("Pupils:", "194");
  GatewayBackends b;
  b.policy = fixed([](const RequestContext&, std::string_view prefix, int) {
    REQUIRE(is_correction_prefix(prefix));
    if (solution_region(prefix).empty())
      return steps_of({"Subtract the parents: 238 - 61.", "Subtract the seats: 238 - 44."});
    if (solution_region(prefix).find("61") != std::string_view::npos)
      return steps_of({final_step("238 - 61 = 177.", "177"), final_step("Hmm, 195.", "195")});
    return steps_of({final_step("238 - 44 = 194.", "194"), final_step("Maybe 190.", "190")});
  });
  b.small_policy = fixed([](const RequestContext&, std::string_view, int) {
    return steps_of({"a", "b"});
  });
  b.prm = std::make_unique<FnScorer>([](const RequestContext&, std::string_view,
                                        std::string_view step) {
    return step.find("61") != std::string_view::npos ? 0.9 : 0.4;
  });
  b.orm = std::make_unique<AnswerMatchOrm>();
  Gateway gw(std::move(b), 4);
  PipelineConfig cfg;
  cfg.exploration_budget = 2;
  StageContext ctx{gw, cfg, 7, ExpansionOrder::MaxFirst};

  const auto out = self_correct(kParents, failed_trajectory(failed_text, 1.0), ctx);
  REQUIRE(out.accepted);
  REQUIRE(out.pair);
  CHECK_FALSE(out.reject_reason);
  CHECK(out.rollout.sol_max.final_answer->raw == "177");
  CHECK(out.pair->stage == Stage::SelfCorrection);
  CHECK(out.pair->chosen == out.rollout.sol_max.text);
  CHECK(out.pair->rejected == out.rollout.sol_min.text);
  CHECK(out.pair->prompt == generation_prefix(kParents));
  REQUIRE(out.pair->failed_reward);
  CHECK(*out.pair->failed_reward == 1.0);
  CHECK(out.pair->chosen_reward > 1.0);
  REQUIRE(out.pair->correction_prompt);
  CHECK(out.pair->correction_prompt->find(failed_text) != std::string::npos);
  CHECK(out.pair->correction_prompt->find(self_correction_prompt()) != std::string::npos);
  CHECK(validate_pair(*out.pair));
}

TEST_CASE("self-correction rejections") {
  PipelineConfig cfg;
  SUBCASE("correction failed") {
    MockWorldSpec spec;
    spec.p_step_correct_correction = 0.0;
    auto gw = mock_gateway(spec);
    const auto problem = MockWorld(spec).make_corpus()[3];
    StageContext ctx{*gw, cfg, 5, ExpansionOrder::MaxFirst};
    const auto out = self_correct(problem, failed_trajectory(final_step("x", "1"), 0.0), ctx);
    CHECK_FALSE(out.accepted);
    CHECK_FALSE(out.pair);
    CHECK(out.reject_reason == "correction failed");
  }
  SUBCASE("no superiority with ORM pinned to zero and a low PRM") {
    MockWorldSpec spec;
    spec.p_step_correct_correction = 1.0;
    auto low_prm = std::make_unique<FnScorer>(
        [](const RequestContext&, std::string_view, std::string_view) { return 0.1; });
    auto zero_orm =
        std::make_unique<FnOrm>([](const RequestContext&, std::string_view) { return 0.0; });
    auto gw = mock_gateway(spec, std::move(low_prm), std::move(zero_orm));
    const auto problem = MockWorld(spec).make_corpus()[4];
    StageContext ctx{*gw, cfg, 5, ExpansionOrder::MaxFirst};

    const auto baseline =
        self_correct(problem, failed_trajectory(final_step("x", "1"), -1e9), ctx);
    REQUIRE(baseline.accepted);
    const double achieved = baseline.rollout.sol_max.cumulative_reward;

    auto tie = self_correct(problem, failed_trajectory(final_step("x", "1"), achieved), ctx);
    CHECK_FALSE(tie.accepted);
    CHECK(tie.reject_reason == "no superiority");
    auto above =
        self_correct(problem, failed_trajectory(final_step("x", "1"), achieved + 0.5), ctx);
    CHECK(above.reject_reason == "no superiority");
  }
  SUBCASE("abort") {
    GatewayBackends b;
    b.policy = fixed([](const RequestContext&, std::string_view, int)
                         -> std::vector<GeneratedStep> { throw RolloutAbort("down"); });
    b.small_policy = fixed([](const RequestContext&, std::string_view, int) {
      return steps_of({"a", "b"});
    });
    b.prm = std::make_unique<FnScorer>(
        [](const RequestContext&, std::string_view, std::string_view) { return 0.5; });
    b.orm = std::make_unique<AnswerMatchOrm>();
    Gateway gw(std::move(b), 4);
    StageContext ctx{gw, cfg, 5, ExpansionOrder::MaxFirst};
    const auto out = self_correct(kParents, failed_trajectory("x", 0.0), ctx);
    CHECK(out.reject_reason == "abort");
  }
}

TEST_CASE("diversity uses the small policy with twice the budget") {
  MockWorldSpec spec;
  spec.p_step_correct_policy = 1.0;
  auto gw = mock_gateway(spec);
  PipelineConfig cfg;
  const auto corpus = MockWorld(spec).make_corpus();
  StageContext ctx{*gw, cfg, derive_problem_seed(0, corpus[0].id), ExpansionOrder::MaxFirst};
  const auto s1 = run_stage1(corpus[0], ctx);
  REQUIRE(s1.route);
  REQUIRE(s1.route->decision == RouteDecision::Diversify);
  const auto out = diversify(corpus[0], s1.rollout.sol_max, ctx);
  REQUIRE_FALSE(out.rollout.max_chain.levels.empty());
  CHECK(out.rollout.max_chain.levels[0].generated == 10);
  CHECK(out.rollout.expansions % 10 == 0);
  CHECK(out.rollout.sol_min.generator == Role::SmallPolicy);
  if (out.accepted) {
    CHECK(out.pair->chosen == s1.rollout.sol_max.text);
    CHECK_FALSE(out.pair->rejected_correct);
    CHECK(out.pair->stage == Stage::Diversity);
  }
}

TEST_CASE("diversity rejects when the small policy never errs") {
  MockWorldSpec spec;
  spec.p_step_correct_policy = 1.0;
  spec.p_step_correct_small = 1.0;
  auto gw = mock_gateway(spec);
  PipelineConfig cfg;
  const auto p = MockWorld(spec).make_corpus()[1];
  StageContext ctx{*gw, cfg, 3, ExpansionOrder::MaxFirst};
  const auto s1 = run_stage1(p, ctx);
  const auto out = diversify(p, s1.rollout.sol_max, ctx);
  CHECK_FALSE(out.accepted);
  CHECK(out.reject_reason == "no incorrect found");
}

TEST_CASE("worked diversity: pyramid 1274") {
  GatewayBackends b;
  b.policy = fixed([](const RequestContext&, std::string_view prefix, int) {
    if (solution_region(prefix).empty())
      return steps_of({"Height is 500 + 20 = 520 feet.", "The pyramid stands 520 feet tall."});
    return steps_of({final_step("Width is 520 + 234 = 754, total 520 + 754 = 1274.", "1274"),
                     final_step("Width 754, so the sum is 1274.", "1274")});
  });
  b.small_policy = fixed([](const RequestContext&, std::string_view prefix, int n) {
    std::vector<GeneratedStep> out;
    const bool first = solution_region(prefix).empty();
    for (int i = 0; i < n; ++i) {
      if (first) {
        out.push_back({"Height guess " + std::to_string(500 + i) + ".", 0.5, false});
      } else {
        const std::string ans = (i % 2 == 0) ? "1274" : std::to_string(1254 + i);
        out.push_back({final_step("Sum variant " + std::to_string(i) + ".", ans), 0.5, false});
      }
    }
    return out;
  });
  b.prm = std::make_unique<FnScorer>([](const RequestContext&, std::string_view,
                                        std::string_view step) {
    return step.find("1274") != std::string_view::npos ? 0.9 : 0.5;
  });
  b.orm = std::make_unique<AnswerMatchOrm>();
  Gateway gw(std::move(b), 4);
  PipelineConfig cfg;
  cfg.exploration_budget = 2;
  StageContext ctx{gw, cfg, 1, ExpansionOrder::MaxFirst};

  const auto s1 = run_stage1(kPyramid, ctx);
  REQUIRE(s1.route);
  CHECK(s1.route->decision == RouteDecision::Diversify);
  CHECK(s1.rollout.sol_max.final_answer->raw == "1274");
  CHECK(s1.rollout.sol_min.final_answer->raw == "1274");
  CHECK_FALSE(s1.outcome);

  const auto out = diversify(kPyramid, s1.rollout.sol_max, ctx);
  REQUIRE(out.accepted);
  CHECK(out.pair->chosen == s1.rollout.sol_max.text);
  CHECK(out.pair->rejected.find("1274") == std::string::npos);
  CHECK_FALSE(out.pair->rejected_correct);
  CHECK(out.rollout.max_chain.levels[0].generated == 4);
  CHECK(validate_pair(*out.pair));

  Trajectory wrong = s1.rollout.sol_max;
  wrong.correct = false;
  CHECK_THROWS_AS(diversify(kPyramid, wrong, ctx), ContractViolation);
}

TEST_CASE("stage 1 routes forced by the mock policy") {
  for (double p_step : {0.0, 1.0}) {
    MockWorldSpec spec;
    spec.p_step_correct_policy = p_step;
    spec.n_problems = 40;
    auto gw = mock_gateway(spec);
    PipelineConfig cfg;
    for (const auto& p : MockWorld(spec).make_corpus()) {
      StageContext ctx{*gw, cfg, derive_problem_seed(9, p.id), ExpansionOrder::MaxFirst};
      const auto s1 = run_stage1(p, ctx);
      REQUIRE(s1.route);
      CHECK(s1.route->decision ==
            (p_step == 1.0 ? RouteDecision::Diversify : RouteDecision::SelfCorrect));
    }
  }
}

TEST_CASE("stage 1 emits valid contrast pairs") {
  MockWorldSpec spec;
  spec.n_problems = 80;
  auto gw = mock_gateway(spec);
  PipelineConfig cfg;
  int emitted = 0;
  for (const auto& p : MockWorld(spec).make_corpus()) {
    StageContext ctx{*gw, cfg, derive_problem_seed(2, p.id), ExpansionOrder::MaxFirst};
    const auto s1 = run_stage1(p, ctx);
    if (!s1.route || s1.route->decision != RouteDecision::EmitPair) {
      CHECK_FALSE(s1.outcome);
      continue;
    }
    REQUIRE(s1.outcome);
    CHECK(s1.outcome->accepted == s1.outcome->pair.has_value());
    if (s1.outcome->pair) {
      ++emitted;
      CHECK(validate_pair(*s1.outcome->pair));
      CHECK(s1.outcome->pair->chosen_correct);
      CHECK_FALSE(s1.outcome->pair->rejected_correct);
    }
  }
  CHECK(emitted > 0);
}

TEST_CASE("stage invariants hold across a mock corpus") {
  MockWorldSpec spec;
  spec.n_problems = 150;
  auto gw = mock_gateway(spec);
  PipelineConfig cfg;
  int s2 = 0, s3 = 0;
  for (const auto& p : MockWorld(spec).make_corpus()) {
    StageContext ctx{*gw, cfg, derive_problem_seed(4, p.id), ExpansionOrder::MaxFirst};
    const auto s1 = run_stage1(p, ctx);
    if (!s1.route) continue;
    if (s1.route->decision == RouteDecision::SelfCorrect) {
      const auto out = self_correct(p, s1.rollout.sol_max, ctx);
      CHECK(out.accepted == out.pair.has_value());
      CHECK(out.accepted != out.reject_reason.has_value());
      if (out.pair) {
        ++s2;
        CHECK(out.pair->chosen_correct);
        CHECK(out.pair->chosen_reward > s1.rollout.sol_max.cumulative_reward);
      }
    } else if (s1.route->decision == RouteDecision::Diversify) {
      const auto out = diversify(p, s1.rollout.sol_max, ctx);
      CHECK(out.accepted == out.pair.has_value());
      if (out.pair) {
        ++s3;
        CHECK_FALSE(out.pair->rejected_correct);
        CHECK(out.rollout.sol_min.generator == Role::SmallPolicy);
        CHECK(s1.rollout.sol_max.generator == Role::Policy);
      }
    }
  }
  CHECK(s2 > 0);
  CHECK(s3 > 0);
}

TEST_CASE("step-level pairs share the committed prefix") {
  MockWorldSpec spec;
  spec.n_problems = 60;
  auto gw = mock_gateway(spec);
  PipelineConfig cfg;
  cfg.step_level_pairs = true;
  int seen = 0;
  for (const auto& p : MockWorld(spec).make_corpus()) {
    StageContext ctx{*gw, cfg, derive_problem_seed(8, p.id), ExpansionOrder::MaxFirst};
    const auto s1 = run_stage1(p, ctx);
    if (!s1.outcome || !s1.outcome->accepted) continue;
    for (const auto& sp : s1.outcome->step_pairs) {
      ++seen;
      REQUIRE(sp.step_level);
      const auto t = static_cast<std::size_t>(*sp.step_level);
      std::string expected_prompt = generation_prefix(p);
      for (std::size_t k = 0; k < t; ++k)
        expected_prompt += s1.rollout.max_chain.steps[k].text + "\n\n";
      CHECK(sp.prompt == expected_prompt);
      CHECK(sp.chosen.rfind(s1.rollout.max_chain.steps[t].text, 0) == 0);
      CHECK(sp.rejected != s1.rollout.max_chain.steps[t].text);
      CHECK(validate_pair(sp));
    }
  }
  CHECK(seen > 0);
}

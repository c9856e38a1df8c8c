#include "prefgen/stages.h"

#include "prefgen/errors.h"
#include "prefgen/prompts.h"

namespace prefgen {

std::string_view to_string(RouteDecision decision) {
  switch (decision) {
    case RouteDecision::EmitPair: return "emit_pair";
    case RouteDecision::SelfCorrect: return "self_correct";
    case RouteDecision::Diversify: return "diversify";
    case RouteDecision::Drop: return "drop";
  }
  return "unknown";
}

std::optional<RouteDecision> parse_route(std::string_view name) {
  if (name == "emit_pair") return RouteDecision::EmitPair;
  if (name == "self_correct") return RouteDecision::SelfCorrect;
  if (name == "diversify") return RouteDecision::Diversify;
  if (name == "drop") return RouteDecision::Drop;
  return std::nullopt;
}

StageRoute route_outcome(bool sol_max_correct, bool sol_min_correct) {
  if (sol_max_correct && !sol_min_correct) return {RouteDecision::EmitPair, "contrast"};
  if (!sol_max_correct && !sol_min_correct) return {RouteDecision::SelfCorrect, "both incorrect"};
  if (sol_max_correct && sol_min_correct) return {RouteDecision::Diversify, "both correct"};
  return {RouteDecision::Drop, "inverted contrast"};
}

namespace {

RolloutRequest make_request(const Problem& problem, const StageContext& ctx, Role role,
                            int budget, RewardMode mode, Stage stage, std::string root) {
  RolloutRequest req;
  req.problem = &problem;
  req.policy_role = role;
  req.budget = budget;
  req.reward_mode = mode;
  req.stage = stage;
  req.root_prefix = std::move(root);
  req.settings = ctx.config.search();
  req.order = ctx.order;
  req.seed = ctx.seed;
  return req;
}

StageOutcome reject(StageOutcome outcome, std::string reason) {
  outcome.accepted = false;
  outcome.pair.reset();
  outcome.step_pairs.clear();
  outcome.reject_reason = std::move(reason);
  return outcome;
}

// Accepts `pair` if it validates, else rejects with the validation reason.
StageOutcome accept(StageOutcome outcome, PreferencePair pair) {
  if (auto check = validate_pair(pair); !check) return reject(std::move(outcome), check.reason);
  outcome.accepted = true;
  outcome.reject_reason.reset();
  outcome.pair = std::move(pair);
  return outcome;
}

}  // namespace

std::vector<PreferencePair> step_level_pairs(const Problem& problem,
                                             const RolloutResult& rollout,
                                             const std::string& root_prefix,
                                             double prm_floor) {
  std::vector<PreferencePair> out;
  const ChainState& chain = rollout.max_chain;
  std::string prefix = root_prefix;
  for (std::size_t t = 0; t < chain.levels.size() && t < chain.steps.size(); ++t) {
    const LevelRecord& level = chain.levels[t];
    if (level.candidates.size() >= 2) {
      std::vector<double> rewards, prms;
      for (const auto& c : level.candidates) {
        rewards.push_back(c.reward.total);
        prms.push_back(c.prm);
      }
      const std::size_t sibling = plausible_argmin(rewards, prms, prm_floor, level.committed);

      PreferencePair p;
      p.problem_id = problem.id;
      p.prompt = prefix;
      p.stage = rollout.stage;
      double chosen_reward = 0.0;
      for (std::size_t k = t; k < chain.steps.size(); ++k) {
        if (k > t) p.chosen.append(kStepDelimiter);
        p.chosen.append(chain.steps[k].text);
        chosen_reward += chain.steps[k].reward.total;
      }
      p.rejected = level.candidates[sibling].text;
      p.chosen_reward = chosen_reward;
      p.rejected_reward = level.candidates[sibling].reward.total;
      p.chosen_correct = rollout.sol_max.correct;
      p.rejected_correct = false;
      p.step_level = static_cast<int>(t);
      if (validate_pair(p)) out.push_back(std::move(p));
    }
    prefix.append(chain.steps[t].text);
    prefix.append(kStepDelimiter);
  }
  return out;
}

Stage1Result run_stage1(const Problem& problem, StageContext& ctx) {
  if (problem.question.empty() || problem.answer.empty())
    throw ContractViolation("problem " + problem.id + " lacks a question or answer");
  const std::string root = generation_prefix(problem);
  Stage1Result result;
  result.rollout = rollout(ctx.gateway,
                           make_request(problem, ctx, Role::Policy, ctx.config.exploration_budget,
                                        RewardMode::Stage1, Stage::SelfGeneration, root));
  if (result.rollout.aborted) return result;

  result.route = route_outcome(result.rollout.sol_max.correct, result.rollout.sol_min.correct);
  if (result.route->decision != RouteDecision::EmitPair) return result;

  StageOutcome outcome;
  outcome.stage = Stage::SelfGeneration;
  outcome.rollout = result.rollout;
  PreferencePair pair;
  pair.problem_id = problem.id;
  pair.prompt = root;
  pair.chosen = result.rollout.sol_max.text;
  pair.rejected = result.rollout.sol_min.text;
  pair.stage = Stage::SelfGeneration;
  pair.chosen_reward = result.rollout.sol_max.cumulative_reward;
  pair.rejected_reward = result.rollout.sol_min.cumulative_reward;
  pair.chosen_correct = result.rollout.sol_max.correct;
  pair.rejected_correct = result.rollout.sol_min.correct;
  outcome = accept(std::move(outcome), std::move(pair));
  if (outcome.accepted && ctx.config.step_level_pairs) {
    outcome.step_pairs = step_level_pairs(problem, result.rollout, root, ctx.config.prm_floor);
  }
  result.outcome = std::move(outcome);
  return result;
}

StageOutcome self_correct(const Problem& problem, const Trajectory& failed,
                          StageContext& ctx) {
  const std::string root = correction_prefix(problem, failed.text);
  StageOutcome outcome;
  outcome.stage = Stage::SelfCorrection;
  outcome.rollout = rollout(ctx.gateway,
                            make_request(problem, ctx, Role::Policy,
                                         ctx.config.exploration_budget, RewardMode::Stage2,
                                         Stage::SelfCorrection, root));
  const RolloutResult& r = outcome.rollout;
  if (r.aborted) return reject(std::move(outcome), "abort");
  if (!r.sol_max.correct) return reject(std::move(outcome), "correction failed");
  if (!(r.sol_max.cumulative_reward > failed.cumulative_reward))
    return reject(std::move(outcome), "no superiority");

  PreferencePair pair;
  pair.problem_id = problem.id;
  pair.prompt = generation_prefix(problem);
  pair.chosen = r.sol_max.text;
  pair.rejected = r.sol_min.text;
  pair.stage = Stage::SelfCorrection;
  pair.chosen_reward = r.sol_max.cumulative_reward;
  pair.rejected_reward = r.sol_min.cumulative_reward;
  pair.chosen_correct = r.sol_max.correct;
  pair.rejected_correct = r.sol_min.correct;
  pair.failed_reward = failed.cumulative_reward;
  pair.correction_prompt = root;
  return accept(std::move(outcome), std::move(pair));
}

StageOutcome diversify(const Problem& problem, const Trajectory& stage1_max,
                       StageContext& ctx) {
  if (!stage1_max.correct)
    throw ContractViolation("diversify requires a correct stage-1 max trajectory");
  const std::string root = generation_prefix(problem);
  StageOutcome outcome;
  outcome.stage = Stage::Diversity;
  outcome.rollout = rollout(ctx.gateway,
                            make_request(problem, ctx, Role::SmallPolicy,
                                         ctx.config.small_budget(), RewardMode::Stage2,
                                         Stage::Diversity, root));
  const RolloutResult& r = outcome.rollout;
  if (r.aborted) return reject(std::move(outcome), "abort");
  if (r.sol_min.correct) return reject(std::move(outcome), "no incorrect found");

  PreferencePair pair;
  pair.problem_id = problem.id;
  pair.prompt = root;
  pair.chosen = stage1_max.text;
  pair.rejected = r.sol_min.text;
  pair.stage = Stage::Diversity;
  pair.chosen_reward = stage1_max.cumulative_reward;
  pair.rejected_reward = r.sol_min.cumulative_reward;
  pair.chosen_correct = stage1_max.correct;
  pair.rejected_correct = r.sol_min.correct;
  return accept(std::move(outcome), std::move(pair));
}

}  // namespace prefgen

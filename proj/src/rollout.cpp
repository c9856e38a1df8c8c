#include "prefgen/rollout.h"

#include <future>
#include <numeric>

#include "prefgen/errors.h"

namespace prefgen {

std::string_view to_string(Termination termination) {
  switch (termination) {
    case Termination::Running: return "running";
    case Termination::FinalAnswer: return "final_answer";
    case Termination::DepthLimit: return "depth_limit";
    case Termination::Aborted: return "aborted";
  }
  return "unknown";
}

std::string ChainState::solution_text() const {
  std::string out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i > 0) out.append(kStepDelimiter);
    out.append(steps[i].text);
  }
  return out;
}

int expansion_bound(int budget, int levels) {
  if (levels <= 0) return 0;
  return budget + 2 * budget * (levels - 1);
}

std::vector<CandidateStep> score_candidates(Gateway& gateway,
                                            const RequestContext& ctx,
                                            const ChainState& chain,
                                            std::span<const GeneratedStep> generated,
                                            RewardMode mode, double epsilon) {
  const int t = static_cast<int>(chain.steps.size());
  const CandidateStep* prev = chain.steps.empty() ? nullptr : &chain.steps.back();
  const double pol_prev = prev ? prev->policy_likelihood : 1.0;
  const double prm_prev = prev ? prev->prm : 1.0;

  std::string solution_so_far;
  if (mode == RewardMode::Stage2) {
    solution_so_far = chain.solution_text();
    if (!solution_so_far.empty()) solution_so_far.append(kStepDelimiter);
  }

  std::vector<CandidateStep> scored;
  scored.reserve(generated.size());
  for (const auto& g : generated) {
    if (g.duplicate || g.text.empty()) continue;
    CandidateStep c;
    c.text = g.text;
    c.level = t;
    c.policy_likelihood = g.policy_likelihood;
    c.prm = gateway.score_step_prm(ctx, chain.prefix_text, g.text);
    if (mode == RewardMode::Stage1) {
      c.reward = stage1_reward(t, c.prm, c.policy_likelihood, pol_prev, prm_prev, epsilon);
    } else {
      const double orm = gateway.score_trajectory_orm(ctx, solution_so_far + g.text);
      c.reward = stage2_reward(t, c.prm, orm, c.policy_likelihood, pol_prev, prm_prev,
                               epsilon);
    }
    scored.push_back(std::move(c));
  }
  return scored;
}

namespace {

std::vector<double> totals_of(std::span<const CandidateStep> candidates) {
  std::vector<double> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) out.push_back(c.reward.total);
  return out;
}

std::vector<double> prms_of(std::span<const CandidateStep> candidates) {
  std::vector<double> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) out.push_back(c.prm);
  return out;
}

}  // namespace

ChainState commit_index(ChainState chain, std::span<const CandidateStep> candidates,
                        std::size_t index) {
  if (index >= candidates.size()) throw InsufficientCandidates("commit index out of range");
  CandidateStep step = candidates[index];
  step.level = static_cast<int>(chain.steps.size());
  chain.prefix_text.append(step.text);
  chain.prefix_text.append(kStepDelimiter);
  if (step.text.find(kAnswerMarker) != std::string::npos) {
    chain.terminated = true;
    chain.termination = Termination::FinalAnswer;
  }
  chain.steps.push_back(std::move(step));
  return chain;
}

ChainState commit_step(ChainState chain, std::span<const CandidateStep> candidates,
                       ChainKind mode, double prm_floor) {
  if (candidates.empty()) throw InsufficientCandidates("no candidates to commit");
  const auto rewards = totals_of(candidates);
  std::size_t index = 0;
  if (mode == ChainKind::Max) {
    index = argmax_reward(rewards);
  } else {
    index = plausible_argmin(rewards, prms_of(candidates), prm_floor);
  }
  return commit_index(std::move(chain), candidates, index);
}

namespace {

struct Expansion {
  ChainState chain;
  int generated = 0;
};

void apply_depth_limit(ChainState& chain, int max_depth) {
  if (!chain.terminated && static_cast<int>(chain.steps.size()) >= max_depth) {
    chain.terminated = true;
    chain.termination = Termination::DepthLimit;
  }
}

// Reads only `chain`; safe to run for both chains concurrently.
Expansion expand_chain(Gateway& gateway, const RolloutRequest& request,
                       const RequestContext& ctx, ChainState chain) {
  const auto generated = gateway.generate_steps(request.policy_role, ctx, chain.prefix_text,
                                                request.budget);
  auto candidates = score_candidates(gateway, ctx, chain, generated, request.reward_mode,
                                     request.settings.epsilon);
  const int level = static_cast<int>(chain.steps.size());
  const ChainKind kind = chain.kind;
  chain = commit_step(std::move(chain), candidates, kind, request.settings.prm_floor);
  LevelRecord record;
  record.level = level;
  record.generated = request.budget;
  record.committed = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].text == chain.steps.back().text) record.committed = i;
  }
  record.candidates = std::move(candidates);
  chain.levels.push_back(std::move(record));
  apply_depth_limit(chain, request.settings.max_depth);
  return {std::move(chain), request.budget};
}

}  // namespace

RolloutResult rollout(Gateway& gateway, const RolloutRequest& request) {
  if (request.problem == nullptr) throw ContractViolation("rollout without a problem");
  if (request.budget < 2) throw ContractViolation("rollout budget must be >= 2");
  if (request.settings.max_depth < 1) throw ContractViolation("max_depth must be >= 1");
  if (request.policy_role != Role::Policy && request.policy_role != Role::SmallPolicy)
    throw ContractViolation("rollout needs a policy role");

  const Problem& problem = *request.problem;
  const RequestContext ctx{&problem, request.seed};

  RolloutResult result;
  result.problem_id = problem.id;
  result.stage = request.stage;

  ChainState max_chain;
  max_chain.kind = ChainKind::Max;
  max_chain.prefix_text = request.root_prefix;
  ChainState min_chain = max_chain;
  min_chain.kind = ChainKind::Min;

  try {
    // Level 0: one shared fan-out from the root.
    const auto generated = gateway.generate_steps(request.policy_role, ctx,
                                                  request.root_prefix, request.budget);
    result.expansions += request.budget;
    auto pool = score_candidates(gateway, ctx, max_chain, generated, request.reward_mode,
                                 request.settings.epsilon);
    const auto selection = select_extremes(totals_of(pool), prms_of(pool),
                                           request.settings.prm_floor);
    max_chain = commit_index(std::move(max_chain), pool, selection.max_index);
    min_chain = commit_index(std::move(min_chain), pool, selection.min_index);
    LevelRecord level0{0, request.budget, pool, selection.max_index};
    max_chain.levels.push_back(level0);
    level0.committed = selection.min_index;
    min_chain.levels.push_back(std::move(level0));
    apply_depth_limit(max_chain, request.settings.max_depth);
    apply_depth_limit(min_chain, request.settings.max_depth);
    result.levels = 1;

    while (!max_chain.terminated || !min_chain.terminated) {
      const bool expand_max = !max_chain.terminated;
      const bool expand_min = !min_chain.terminated;
      if (request.order == ExpansionOrder::Concurrent && expand_max && expand_min) {
        auto pending = std::async(std::launch::async, expand_chain, std::ref(gateway),
                                  std::cref(request), std::cref(ctx), std::move(min_chain));
        auto max_out = expand_chain(gateway, request, ctx, std::move(max_chain));
        auto min_out = pending.get();
        max_chain = std::move(max_out.chain);
        min_chain = std::move(min_out.chain);
        result.expansions += max_out.generated + min_out.generated;
      } else {
        auto run = [&](ChainState& chain) {
          auto out = expand_chain(gateway, request, ctx, std::move(chain));
          chain = std::move(out.chain);
          result.expansions += out.generated;
        };
        if (request.order == ExpansionOrder::MinFirst) {
          if (expand_min) run(min_chain);
          if (expand_max) run(max_chain);
        } else {
          if (expand_max) run(max_chain);
          if (expand_min) run(min_chain);
        }
      }
      ++result.levels;
    }
  } catch (const RolloutAbort& e) {
    result.aborted = true;
    result.abort_reason = e.what();
  } catch (const InsufficientCandidates& e) {
    result.aborted = true;
    result.abort_reason = e.what();
  }

  if (result.aborted) {
    if (!max_chain.terminated) max_chain.termination = Termination::Aborted;
    if (!min_chain.terminated) min_chain.termination = Termination::Aborted;
    max_chain.terminated = min_chain.terminated = true;
  }
  result.sol_max = finalize_trajectory(max_chain, problem, request.stage, request.policy_role);
  result.sol_min = finalize_trajectory(min_chain, problem, request.stage, request.policy_role);
  result.max_chain = std::move(max_chain);
  result.min_chain = std::move(min_chain);
  return result;
}

Trajectory finalize_trajectory(const ChainState& chain, const Problem& problem,
                               Stage stage, Role generator) {
  Trajectory traj;
  traj.text = chain.solution_text();
  traj.step_count = chain.steps.size();
  traj.stage = stage;
  traj.generator = generator;
  traj.final_answer = extract_final_answer(traj.text);
  traj.correct = chain.termination != Termination::Aborted && traj.final_answer &&
                 grade_answer(traj.final_answer->raw, problem.answer);
  traj.cumulative_reward = 0.0;
  for (const auto& step : chain.steps) traj.cumulative_reward += step.reward.total;
  return traj;
}

}  // namespace prefgen

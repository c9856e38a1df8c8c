#include "prefgen/reward.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "prefgen/errors.h"

namespace prefgen {
namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ContractViolation(what);
}

bool in_unit(double x) { return x >= 0.0 && x <= 1.0; }
bool in_likelihood_range(double x) { return x > 0.0 && x <= 1.0; }

double advantage(double pol_t, double pol_prev, double prm_prev, double epsilon) {
  return (pol_t - pol_prev) / std::max(prm_prev, epsilon);
}

void check_common(int t, double prm_t, double pol_t, double pol_prev, double prm_prev,
                  double epsilon) {
  require(t >= 0, "step index must be >= 0");
  require(in_unit(prm_t), "prm_t must lie in [0, 1]");
  require(epsilon > 0.0 && std::isfinite(epsilon), "epsilon must be positive");
  if (t == 0) return;
  require(in_likelihood_range(pol_t), "pol_t must lie in (0, 1]");
  require(in_likelihood_range(pol_prev), "pol_prev must lie in (0, 1]");
  require(in_unit(prm_prev), "prm_prev must lie in [0, 1]");
}

}  // namespace

RewardBreakdown stage1_reward(int t, double prm_t, double pol_t, double pol_prev,
                              double prm_prev, double epsilon) {
  check_common(t, prm_t, pol_t, pol_prev, prm_prev, epsilon);
  RewardBreakdown r;
  r.prm = prm_t;
  r.advantage = t == 0 ? 0.0 : advantage(pol_t, pol_prev, prm_prev, epsilon);
  r.total = r.prm + r.orm_shaping + r.advantage;
  return r;
}

RewardBreakdown stage2_reward(int t, double prm_t, double orm_sol, double pol_t,
                              double pol_prev, double prm_prev, double epsilon) {
  check_common(t, prm_t, pol_t, pol_prev, prm_prev, epsilon);
  require(in_unit(orm_sol), "orm_sol must lie in [0, 1]");
  RewardBreakdown r;
  r.prm = prm_t;
  r.orm_shaping = orm_sol;
  r.advantage = t == 0 ? 0.0 : advantage(pol_t, pol_prev, prm_prev, epsilon);
  r.total = r.prm + r.orm_shaping + r.advantage;
  return r;
}

std::size_t argmax_reward(std::span<const double> rewards) {
  if (rewards.empty()) throw InsufficientCandidates("no candidates to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < rewards.size(); ++i)
    if (rewards[i] > rewards[best]) best = i;
  return best;
}

std::size_t plausible_argmin(std::span<const double> rewards,
                             std::span<const double> prm_scores, double prm_floor,
                             std::size_t exclude) {
  if (rewards.size() != prm_scores.size())
    throw ContractViolation("rewards and prm scores differ in length");
  auto scan = [&](bool plausible_only) {
    std::size_t best = rewards.size();
    for (std::size_t i = 0; i < rewards.size(); ++i) {
      if (i == exclude) continue;
      if (plausible_only && prm_scores[i] < prm_floor) continue;
      if (best == rewards.size() || rewards[i] < rewards[best]) best = i;
    }
    return best;
  };
  std::size_t best = scan(true);
  if (best == rewards.size()) best = scan(false);
  if (best == rewards.size()) throw InsufficientCandidates("no candidate left for the min chain");
  return best;
}

ExtremeSelection select_extremes(std::span<const double> rewards,
                                 std::span<const double> prm_scores,
                                 double prm_floor) {
  if (rewards.size() < 2)
    throw InsufficientCandidates("need at least 2 candidates, got " +
                                 std::to_string(rewards.size()));
  ExtremeSelection sel;
  sel.rewards.assign(rewards.begin(), rewards.end());
  sel.max_index = argmax_reward(rewards);
  sel.min_index = plausible_argmin(rewards, prm_scores, prm_floor, sel.max_index);
  return sel;
}

}  // namespace prefgen

#pragma once

// Shaped step rewards and extreme-candidate selection.
//
//   stage 1:  R(s_0) = prm(s_0)
//             R(s_t) = prm(s_t) + (pi(s_t) - pi(s_{t-1})) / max(prm(s_{t-1}), eps)
//   stage 2/3 adds ORM(Sol) to both branches.

#include <cstddef>
#include <span>
#include <vector>

namespace prefgen {

inline constexpr double kAdvantageEpsilon = 1e-6;
inline constexpr double kDefaultPrmFloor = 0.05;

enum class RewardMode { Stage1, Stage2 };

struct RewardBreakdown {
  double prm = 0.0;
  double advantage = 0.0;
  double orm_shaping = 0.0;
  double total = 0.0;  // prm + orm_shaping + advantage
};

RewardBreakdown stage1_reward(int t, double prm_t, double pol_t, double pol_prev,
                              double prm_prev, double epsilon = kAdvantageEpsilon);

RewardBreakdown stage2_reward(int t, double prm_t, double orm_sol, double pol_t,
                              double pol_prev, double prm_prev,
                              double epsilon = kAdvantageEpsilon);

struct ExtremeSelection {
  std::size_t max_index = 0;
  std::size_t min_index = 0;
  std::vector<double> rewards;
};

// Argmax over all rewards; ties go to the lowest index.
std::size_t argmax_reward(std::span<const double> rewards);

// Argmin over candidates with prm >= prm_floor, skipping `exclude`. Falls back
// to all non-excluded candidates when none is plausible. Ties go to the
// lowest index. Requires at least one non-excluded candidate.
std::size_t plausible_argmin(std::span<const double> rewards,
                             std::span<const double> prm_scores, double prm_floor,
                             std::size_t exclude = static_cast<std::size_t>(-1));

// max_index = argmax; min_index = plausible_argmin excluding max_index, so
// the two are always distinct. Throws InsufficientCandidates below two
// candidates.
ExtremeSelection select_extremes(std::span<const double> rewards,
                                 std::span<const double> prm_scores,
                                 double prm_floor);

}  // namespace prefgen

#pragma once

// Deterministic stand-in for the policy and PRM roles. Every answer is a pure
// function of (per-problem seed, role seed, prefix), so replaying a run with
// the same configuration reproduces it byte for byte.
//
// A mock solution is an arithmetic walk: step k adds a planned delta to a
// running total, and the last step states the total in the final-answer
// format. An erroneous step adds a positive perturbation that persists to the
// end, so a trajectory is correct iff none of its steps is erroneous.

#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

#include "prefgen/backend.h"

namespace prefgen {

struct MockWorldSpec {
  int n_problems = 500;
  double p_step_correct_policy = 0.8;
  double p_step_correct_small = 0.5;
  // Step correctness for the policy when the prefix is a self-correction
  // prompt.
  double p_step_correct_correction = 0.7;
  int steps_per_problem = 4;
  // 1: the PRM returns the fixed table (0.9 correct / 0.1 erroneous).
  // 0: the PRM is uniform noise, uncorrelated with correctness.
  double prm_discrimination = 0.3;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const MockWorldSpec&) const = default;
};

class MockWorld {
 public:
  static constexpr double kCorrectStepPrm = 0.9;
  static constexpr double kErrorStepPrm = 0.1;

  explicit MockWorld(MockWorldSpec spec);

  const MockWorldSpec& spec() const { return spec_; }

  // n_problems synthetic problems with integer answers, ids "mock-00000"...
  std::vector<Problem> make_corpus() const;

  std::vector<GeneratedStep> generate(Role role, std::uint64_t role_seed,
                                      const RequestContext& ctx,
                                      std::string_view prefix, int n) const;

  double prm(std::uint64_t prm_seed, const RequestContext& ctx,
             std::string_view prefix, std::string_view step) const;

  // True when `step` continues `prefix` with the planned delta.
  bool step_is_correct(const RequestContext& ctx, std::string_view prefix,
                       std::string_view step) const;

 private:
  MockWorldSpec spec_;
};

std::unique_ptr<StepGenerator> make_mock_generator(
    std::shared_ptr<const MockWorld> world, Role role, std::uint64_t role_seed);
std::unique_ptr<StepScorer> make_mock_prm(std::shared_ptr<const MockWorld> world,
                                          std::uint64_t prm_seed);

}  // namespace prefgen

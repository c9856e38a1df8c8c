#pragma once

// Dual-chain pruned rollout. Level 0 expands `budget` candidates from the
// root prompt and seeds a max chain and a min chain with distinct extremes.
// Every later level expands `budget` candidates per live chain from that
// chain's own prefix; the max chain commits the argmax-reward candidate and
// the min chain the plausible argmin. All other branches are discarded.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "prefgen/backend.h"
#include "prefgen/reward.h"
#include "prefgen/types.h"

namespace prefgen {

enum class ChainKind { Max, Min };
enum class Termination { Running, FinalAnswer, DepthLimit, Aborted };

std::string_view to_string(Termination termination);

struct CandidateStep {
  std::string text;
  int level = 0;
  double prm = 0.0;
  double policy_likelihood = 1.0;
  RewardBreakdown reward;
};

// One expansion: the deduplicated, scored candidate set and the index the
// chain committed.
struct LevelRecord {
  int level = 0;
  int generated = 0;
  std::vector<CandidateStep> candidates;
  std::size_t committed = 0;
};

struct ChainState {
  ChainKind kind = ChainKind::Max;
  std::vector<CandidateStep> steps;
  std::string prefix_text;
  bool terminated = false;
  Termination termination = Termination::Running;
  std::vector<LevelRecord> levels;

  std::string solution_text() const;
};

struct SearchSettings {
  int max_depth = 10;
  double prm_floor = kDefaultPrmFloor;
  double epsilon = kAdvantageEpsilon;
};

enum class ExpansionOrder { MaxFirst, MinFirst, Concurrent };

struct RolloutRequest {
  const Problem* problem = nullptr;
  Role policy_role = Role::Policy;
  int budget = 5;
  RewardMode reward_mode = RewardMode::Stage1;
  Stage stage = Stage::SelfGeneration;
  std::string root_prefix;
  SearchSettings settings;
  ExpansionOrder order = ExpansionOrder::MaxFirst;
  std::uint64_t seed = 0;  // per-problem derived seed
};

struct RolloutResult {
  std::string problem_id;
  Stage stage = Stage::SelfGeneration;
  Trajectory sol_max;
  Trajectory sol_min;
  ChainState max_chain;
  ChainState min_chain;
  int expansions = 0;  // candidates requested from the policy
  int levels = 0;
  bool aborted = false;
  std::string abort_reason;
};

// Upper bound on expansions for a rollout that expands `levels` levels.
int expansion_bound(int budget, int levels);

RolloutResult rollout(Gateway& gateway, const RolloutRequest& request);

// Scores a generated candidate set for a chain whose committed steps are
// `chain.steps`. Duplicate texts are dropped, keeping the first occurrence.
std::vector<CandidateStep> score_candidates(Gateway& gateway,
                                            const RequestContext& ctx,
                                            const ChainState& chain,
                                            std::span<const GeneratedStep> generated,
                                            RewardMode mode, double epsilon);

// Appends the argmax (Max) or plausible argmin (Min) candidate.
ChainState commit_step(ChainState chain, std::span<const CandidateStep> candidates,
                       ChainKind mode, double prm_floor);

// Appends candidates[index]; sets terminated on a final-answer step.
ChainState commit_index(ChainState chain, std::span<const CandidateStep> candidates,
                        std::size_t index);

Trajectory finalize_trajectory(const ChainState& chain, const Problem& problem,
                               Stage stage, Role generator);

}  // namespace prefgen

#pragma once

// Routing of stage-1 outcomes and the two follow-up stages.
//
//   (max correct, min correct) -> route
//   (true,  false)             -> EmitPair     stage-1 pair
//   (false, false)             -> SelfCorrect  stage 2 on the failed max chain
//   (true,  true)              -> Diversify    stage 3 with the small policy
//   (false, true)              -> Drop         inverted contrast

#include <optional>
#include <string>
#include <vector>

#include "prefgen/backend.h"
#include "prefgen/config.h"
#include "prefgen/pairs.h"
#include "prefgen/rollout.h"

namespace prefgen {

enum class RouteDecision { EmitPair, SelfCorrect, Diversify, Drop };

std::string_view to_string(RouteDecision decision);
std::optional<RouteDecision> parse_route(std::string_view name);

struct StageRoute {
  RouteDecision decision = RouteDecision::Drop;
  std::string reason;
};

StageRoute route_outcome(bool sol_max_correct, bool sol_min_correct);

struct StageOutcome {
  Stage stage = Stage::SelfGeneration;
  std::optional<PreferencePair> pair;
  std::vector<PreferencePair> step_pairs;  // only with step_level_pairs
  RolloutResult rollout;
  bool accepted = false;
  std::optional<std::string> reject_reason;
};

struct StageContext {
  Gateway& gateway;
  const PipelineConfig& config;
  std::uint64_t seed = 0;  // per-problem derived seed
  ExpansionOrder order = ExpansionOrder::MaxFirst;
};

struct Stage1Result {
  RolloutResult rollout;
  std::optional<StageRoute> route;      // absent when the rollout aborted
  std::optional<StageOutcome> outcome;  // present for EmitPair
};

Stage1Result run_stage1(const Problem& problem, StageContext& ctx);

// `failed` is the stage-1 max-chain trajectory.
StageOutcome self_correct(const Problem& problem, const Trajectory& failed,
                          StageContext& ctx);

// `stage1_max` is the correct stage-1 max-chain trajectory; it becomes the
// chosen side of the pair.
StageOutcome diversify(const Problem& problem, const Trajectory& stage1_max,
                       StageContext& ctx);

// Shared-prefix pairs along a chain: at each level, the committed step (and
// the rest of the chain) against the lowest-reward plausible sibling.
std::vector<PreferencePair> step_level_pairs(const Problem& problem,
                                             const RolloutResult& rollout,
                                             const std::string& root_prefix,
                                             double prm_floor);

}  // namespace prefgen

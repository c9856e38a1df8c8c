#include "prefgen/backend.h"

#include <cmath>
#include <unordered_set>

#include "prefgen/errors.h"

namespace prefgen {

BackendConfig BackendConfig::defaults_for(Role role) {
  BackendConfig cfg;
  cfg.role = role;
  switch (role) {
    case Role::Policy: cfg.model_name = "policy"; break;
    case Role::SmallPolicy: cfg.model_name = "small-policy"; break;
    case Role::Prm: cfg.model_name = "prm"; break;
    case Role::Orm: cfg.model_name = "answer-match"; break;
  }
  return cfg;
}

double AnswerMatchOrm::score(const RequestContext& ctx,
                             std::string_view solution_text) {
  if (ctx.problem == nullptr) throw ContractViolation("ORM request without a problem");
  auto answer = extract_final_answer(solution_text);
  if (!answer) return 0.0;
  return grade_answer(answer->raw, ctx.problem->answer) ? 1.0 : 0.0;
}

double clamp_unit_score(double value) {
  if (!std::isfinite(value)) throw RolloutAbort("backend returned a non-finite score");
  if (value < 0.0) return 0.0;
  if (value > 1.0) return 1.0;
  return value;
}

class Gateway::InflightSlot {
 public:
  explicit InflightSlot(std::counting_semaphore<kMaxInflight>& sem) : sem_(sem) {
    sem_.acquire();
  }
  ~InflightSlot() { sem_.release(); }
  InflightSlot(const InflightSlot&) = delete;
  InflightSlot& operator=(const InflightSlot&) = delete;

 private:
  std::counting_semaphore<kMaxInflight>& sem_;
};

namespace {

std::ptrdiff_t checked_inflight(int max_inflight) {
  if (max_inflight < 1 || max_inflight > Gateway::kMaxInflight)
    throw ContractViolation("max_inflight must be in [1, 4096]");
  return max_inflight;
}

}  // namespace

Gateway::Gateway(GatewayBackends backends, int max_inflight)
    : backends_(std::move(backends)), inflight_(checked_inflight(max_inflight)) {
  if (!backends_.policy || !backends_.small_policy || !backends_.prm || !backends_.orm)
    throw ContractViolation("gateway requires all four backends");
}

std::vector<GeneratedStep> Gateway::generate_steps(Role role,
                                                   const RequestContext& ctx,
                                                   std::string_view prefix,
                                                   int n) {
  if (n < 2) throw ContractViolation("generate_steps requires n >= 2");
  StepGenerator* generator = nullptr;
  if (role == Role::Policy) generator = backends_.policy.get();
  if (role == Role::SmallPolicy) generator = backends_.small_policy.get();
  if (generator == nullptr) throw ContractViolation("generate_steps needs a policy role");

  std::vector<GeneratedStep> steps;
  {
    InflightSlot slot(inflight_);
    steps = generator->generate(ctx, prefix, n);
  }
  if (steps.size() < static_cast<std::size_t>(n)) {
    throw RolloutAbort("backend returned " + std::to_string(steps.size()) +
                       " of " + std::to_string(n) + " candidates");
  }
  steps.resize(static_cast<std::size_t>(n));

  std::unordered_set<std::string_view> seen;
  for (auto& step : steps) {
    if (!std::isfinite(step.policy_likelihood) || step.policy_likelihood <= 0.0)
      throw RolloutAbort("backend returned an invalid policy likelihood");
    if (step.policy_likelihood > 1.0) step.policy_likelihood = 1.0;
    step.duplicate = !seen.insert(step.text).second;
  }
  return steps;
}

double Gateway::score_step_prm(const RequestContext& ctx, std::string_view prefix,
                               std::string_view step) {
  if (step.empty()) throw ContractViolation("score_step_prm requires a non-empty step");
  InflightSlot slot(inflight_);
  return clamp_unit_score(backends_.prm->score(ctx, prefix, step));
}

double Gateway::score_trajectory_orm(const RequestContext& ctx,
                                     std::string_view solution_text) {
  InflightSlot slot(inflight_);
  return clamp_unit_score(backends_.orm->score(ctx, solution_text));
}

}  // namespace prefgen

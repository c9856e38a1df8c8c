#pragma once

// Uniform access to the four model roles. Concrete backends may misbehave
// (short candidate lists, out-of-range scores); the Gateway is the boundary
// that enforces exact candidate counts and score ranges.

#include <chrono>
#include <cstdint>
#include <memory>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "prefgen/types.h"

namespace prefgen {

struct BackendConfig {
  Role role = Role::Policy;
  std::string endpoint = "mock";  // base URL, or "mock"
  std::string model_name;
  double temperature = 0.8;  // ignored by scoring roles
  int max_step_tokens = 256;
  std::chrono::milliseconds request_timeout{30000};
  int max_retries = 3;
  std::chrono::milliseconds retry_base_delay{500};
  std::chrono::milliseconds retry_max_delay{8000};
  std::uint64_t seed = 0;

  bool is_mock() const { return endpoint == "mock"; }
  static BackendConfig defaults_for(Role role);

  bool operator==(const BackendConfig&) const = default;
};

struct StepScore {
  double prm = 0.0;                // [0, 1]
  double policy_likelihood = 1.0;  // (0, 1]
};

struct GeneratedStep {
  std::string text;
  double policy_likelihood = 1.0;  // exp(mean token log-probability)
  bool duplicate = false;          // same text as an earlier candidate
};

// Identifies the problem a request belongs to. `seed` is the per-problem
// derived seed; mock backends key all randomness on it.
struct RequestContext {
  const Problem* problem = nullptr;
  std::uint64_t seed = 0;
};

class StepGenerator {
 public:
  virtual ~StepGenerator() = default;
  virtual std::vector<GeneratedStep> generate(const RequestContext& ctx,
                                              std::string_view prefix,
                                              int n) = 0;
};

class StepScorer {
 public:
  virtual ~StepScorer() = default;
  virtual double score(const RequestContext& ctx, std::string_view prefix,
                       std::string_view step) = 0;
};

class TrajectoryScorer {
 public:
  virtual ~TrajectoryScorer() = default;
  virtual double score(const RequestContext& ctx,
                       std::string_view solution_text) = 0;
};

// ORM used when no remote ORM is configured: 1 when the extracted final
// answer matches the ground truth, else 0.
class AnswerMatchOrm final : public TrajectoryScorer {
 public:
  double score(const RequestContext& ctx,
               std::string_view solution_text) override;
};

struct GatewayBackends {
  std::unique_ptr<StepGenerator> policy;
  std::unique_ptr<StepGenerator> small_policy;
  std::unique_ptr<StepScorer> prm;
  std::unique_ptr<TrajectoryScorer> orm;
};

class Gateway {
 public:
  static constexpr std::ptrdiff_t kMaxInflight = 4096;

  Gateway(GatewayBackends backends, int max_inflight);

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  // Exactly n candidates or RolloutAbort. Duplicate texts are flagged.
  std::vector<GeneratedStep> generate_steps(Role role, const RequestContext& ctx,
                                            std::string_view prefix, int n);

  // pi_prm(step | prefix), clamped into [0, 1].
  double score_step_prm(const RequestContext& ctx, std::string_view prefix,
                        std::string_view step);

  // ORM(Sol), clamped into [0, 1].
  double score_trajectory_orm(const RequestContext& ctx,
                              std::string_view solution_text);

 private:
  class InflightSlot;

  GatewayBackends backends_;
  std::counting_semaphore<kMaxInflight> inflight_;
};

// Clamps into [0, 1]; non-finite values are a backend failure.
double clamp_unit_score(double value);

}  // namespace prefgen

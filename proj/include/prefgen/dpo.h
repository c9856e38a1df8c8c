#pragma once

// DPO objective on sequence log-probabilities, its analytic gradient, and a
// tabular softmax policy for desk-scale training runs.
//
//   a = logp_theta(y_c) - logp_ref(y_c)
//   b = logp_theta(y_r) - logp_ref(y_r)
//   z = beta * (a - b)
//   loss = -log sigma(z) = softplus(-z)
//   d loss / d logp_theta(y_c) = -beta * sigma(-z)
//   d loss / d logp_theta(y_r) = +beta * sigma(-z)

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "prefgen/pairs.h"

namespace prefgen::dpo {

struct DpoExample {
  double logp_theta_chosen = 0.0;
  double logp_theta_rejected = 0.0;
  double logp_ref_chosen = 0.0;
  double logp_ref_rejected = 0.0;
};

struct DpoParams {
  double beta = 0.8;
};

double sigmoid(double z);
// log(1 + exp(x)) without overflow.
double softplus(double x);

double preference_logit(const DpoExample& ex, const DpoParams& params);
double dpo_loss(const DpoExample& ex, const DpoParams& params);

struct DpoGrad {
  double d_chosen = 0.0;
  double d_rejected = 0.0;
};

DpoGrad dpo_grad(const DpoExample& ex, const DpoParams& params);

// Mean of per-example losses. Throws EmptyBatch.
double batch_loss(std::span<const DpoExample> examples, const DpoParams& params);

// Softmax over responses within each context. A context's response
// probabilities sum to one.
class ToyPolicy {
 public:
  void set_logit(const std::string& context, const std::string& response, double logit);
  double logit(const std::string& context, const std::string& response) const;
  bool contains(const std::string& context, const std::string& response) const;

  // log p(response | context). Throws ScoreError for unknown entries.
  double logprob(const std::string& context, const std::string& response) const;

  std::vector<std::string> contexts() const;
  std::vector<std::string> responses(const std::string& context) const;

  // Adds -step * gradient to every logit in `context`.
  void apply_update(const std::string& context, const std::map<std::string, double>& grad,
                    double step);

  bool operator==(const ToyPolicy&) const = default;

 private:
  std::map<std::string, std::map<std::string, double>> logits_;
};

// One context per distinct prompt, one response per distinct chosen/rejected
// text; logits drawn uniformly from [-0.1, 0.1] with a seeded generator.
ToyPolicy make_toy_policy(std::span<const PreferencePair> pairs, std::uint64_t seed);

DpoExample make_example(const ToyPolicy& policy, const ToyPolicy& reference,
                        const PreferencePair& pair);

struct TracePoint {
  int step = 0;
  double loss = 0.0;
  double margin = 0.0;  // mean logp_theta(chosen) - logp_theta(rejected)
};

struct TrainTrace {
  std::vector<TracePoint> points;  // one per step, plus the final state
};

// Full-batch gradient descent on batch_loss. lr = 0 leaves the policy
// unchanged; lr < 0 or steps <= 0 is a contract violation.
ToyPolicy toy_train(ToyPolicy policy, const ToyPolicy& reference,
                    std::span<const PreferencePair> pairs, int steps, double lr,
                    const DpoParams& params = {}, TrainTrace* trace = nullptr);

double mean_margin(const ToyPolicy& policy, std::span<const PreferencePair> pairs);

struct SequenceLogprob {
  double value = 0.0;
  bool degenerate = false;  // empty response
};

// Sum of response-token log-probabilities.
SequenceLogprob sequence_logprob(std::span<const double> response_token_logprobs);
SequenceLogprob sequence_logprob(const ToyPolicy& policy, const std::string& prompt,
                                 const std::string& response);

// CSV with header "step,loss,margin".
void write_margin_csv(const TrainTrace& trace, const std::filesystem::path& path);

// Separable set for the toy trainer: `n_contexts` prompts, each with one
// chosen and `rejected_per_context` rejected responses.
std::vector<PreferencePair> synthetic_pairs(int n_contexts, int rejected_per_context,
                                            std::uint64_t seed);

struct SelfCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Closed-form loss values, finite-difference gradient agreement on
// `n_examples` random examples, and a short toy training run.
std::vector<SelfCheck> run_self_checks(std::uint64_t seed, int n_examples = 1000);

}  // namespace prefgen::dpo

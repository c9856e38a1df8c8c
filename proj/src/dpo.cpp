#include "prefgen/dpo.h"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>
#include <algorithm>

#include "prefgen/errors.h"

namespace prefgen::dpo {
namespace {

void require_finite(const DpoExample& ex, const DpoParams& params) {
  if (!std::isfinite(ex.logp_theta_chosen) || !std::isfinite(ex.logp_theta_rejected) ||
      !std::isfinite(ex.logp_ref_chosen) || !std::isfinite(ex.logp_ref_rejected))
    throw ContractViolation("DPO log-probabilities must be finite");
  if (!(params.beta > 0.0) || !std::isfinite(params.beta))
    throw ContractViolation("beta must be positive and finite");
}

}  // namespace

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double preference_logit(const DpoExample& ex, const DpoParams& params) {
  const double a = ex.logp_theta_chosen - ex.logp_ref_chosen;
  const double b = ex.logp_theta_rejected - ex.logp_ref_rejected;
  return params.beta * (a - b);
}

double dpo_loss(const DpoExample& ex, const DpoParams& params) {
  require_finite(ex, params);
  return softplus(-preference_logit(ex, params));
}

DpoGrad dpo_grad(const DpoExample& ex, const DpoParams& params) {
  require_finite(ex, params);
  const double g = params.beta * sigmoid(-preference_logit(ex, params));
  return {-g, g};
}

double batch_loss(std::span<const DpoExample> examples, const DpoParams& params) {
  if (examples.empty()) throw EmptyBatch();
  double sum = 0.0;
  for (const auto& ex : examples) sum += dpo_loss(ex, params);
  return sum / static_cast<double>(examples.size());
}

void ToyPolicy::set_logit(const std::string& context, const std::string& response,
                          double logit) {
  logits_[context][response] = logit;
}

double ToyPolicy::logit(const std::string& context, const std::string& response) const {
  auto c = logits_.find(context);
  if (c == logits_.end()) throw ScoreError("unknown context");
  auto r = c->second.find(response);
  if (r == c->second.end()) throw ScoreError("unknown response for context");
  return r->second;
}

bool ToyPolicy::contains(const std::string& context, const std::string& response) const {
  auto c = logits_.find(context);
  return c != logits_.end() && c->second.count(response) > 0;
}

double ToyPolicy::logprob(const std::string& context, const std::string& response) const {
  auto c = logits_.find(context);
  if (c == logits_.end()) throw ScoreError("unknown context");
  auto r = c->second.find(response);
  if (r == c->second.end()) throw ScoreError("unknown response for context");
  double max_logit = -std::numeric_limits<double>::infinity();
  for (const auto& [_, v] : c->second) max_logit = std::max(max_logit, v);
  double sum = 0.0;
  for (const auto& [_, v] : c->second) sum += std::exp(v - max_logit);
  return r->second - max_logit - std::log(sum);
}

std::vector<std::string> ToyPolicy::contexts() const {
  std::vector<std::string> out;
  for (const auto& [c, _] : logits_) out.push_back(c);
  return out;
}

std::vector<std::string> ToyPolicy::responses(const std::string& context) const {
  std::vector<std::string> out;
  auto c = logits_.find(context);
  if (c == logits_.end()) return out;
  for (const auto& [r, _] : c->second) out.push_back(r);
  return out;
}

void ToyPolicy::apply_update(const std::string& context,
                             const std::map<std::string, double>& grad, double step) {
  auto c = logits_.find(context);
  if (c == logits_.end()) throw ScoreError("unknown context");
  if (step == 0.0) return;
  for (const auto& [response, g] : grad) {
    auto r = c->second.find(response);
    if (r == c->second.end()) throw ScoreError("unknown response for context");
    r->second -= step * g;
  }
}

ToyPolicy make_toy_policy(std::span<const PreferencePair> pairs, std::uint64_t seed) {
  std::set<std::pair<std::string, std::string>> entries;
  for (const auto& p : pairs) {
    entries.emplace(p.prompt, p.chosen);
    entries.emplace(p.prompt, p.rejected);
  }
  std::mt19937_64 rng(seed);
  ToyPolicy policy;
  for (const auto& [context, response] : entries) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    policy.set_logit(context, response, 0.2 * u - 0.1);
  }
  return policy;
}

DpoExample make_example(const ToyPolicy& policy, const ToyPolicy& reference,
                        const PreferencePair& pair) {
  return {policy.logprob(pair.prompt, pair.chosen), policy.logprob(pair.prompt, pair.rejected),
          reference.logprob(pair.prompt, pair.chosen),
          reference.logprob(pair.prompt, pair.rejected)};
}

double mean_margin(const ToyPolicy& policy, std::span<const PreferencePair> pairs) {
  if (pairs.empty()) throw EmptyBatch();
  double sum = 0.0;
  for (const auto& p : pairs)
    sum += policy.logprob(p.prompt, p.chosen) - policy.logprob(p.prompt, p.rejected);
  return sum / static_cast<double>(pairs.size());
}

namespace {

TracePoint measure(int step, const ToyPolicy& policy, const ToyPolicy& reference,
                   std::span<const PreferencePair> pairs, const DpoParams& params) {
  std::vector<DpoExample> batch;
  batch.reserve(pairs.size());
  for (const auto& p : pairs) batch.push_back(make_example(policy, reference, p));
  return {step, batch_loss(batch, params), mean_margin(policy, pairs)};
}

}  // namespace

ToyPolicy toy_train(ToyPolicy policy, const ToyPolicy& reference,
                    std::span<const PreferencePair> pairs, int steps, double lr,
                    const DpoParams& params, TrainTrace* trace) {
  if (steps <= 0) throw ContractViolation("toy_train requires steps > 0");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ContractViolation("toy_train requires lr >= 0");
  if (pairs.empty()) throw EmptyBatch();
  for (const auto& p : pairs) {
    if (!policy.contains(p.prompt, p.chosen) || !policy.contains(p.prompt, p.rejected) ||
        !reference.contains(p.prompt, p.chosen) || !reference.contains(p.prompt, p.rejected))
      throw ContractViolation("pair " + p.problem_id + " is not in the policy table");
  }

  const double inv_n = 1.0 / static_cast<double>(pairs.size());
  for (int step = 0; step < steps; ++step) {
    if (trace) trace->points.push_back(measure(step, policy, reference, pairs, params));

    // d loss / d logit(c, r') = sum over pairs of
    //   d_chosen * ([r' = y_c] - p(r')) + d_rejected * ([r' = y_r] - p(r'))
    std::map<std::string, std::map<std::string, double>> grads;
    for (const auto& p : pairs) {
      const DpoGrad g = dpo_grad(make_example(policy, reference, p), params);
      auto& ctx_grad = grads[p.prompt];
      const double shared = g.d_chosen + g.d_rejected;
      for (const auto& response : policy.responses(p.prompt)) {
        const double prob = std::exp(policy.logprob(p.prompt, response));
        double coef = 0.0;
        if (response == p.chosen) coef += g.d_chosen;
        if (response == p.rejected) coef += g.d_rejected;
        coef -= shared * prob;
        ctx_grad[response] += coef * inv_n;
      }
    }
    for (const auto& [context, grad] : grads) policy.apply_update(context, grad, lr);
  }
  if (trace) trace->points.push_back(measure(steps, policy, reference, pairs, params));
  return policy;
}

SequenceLogprob sequence_logprob(std::span<const double> response_token_logprobs) {
  SequenceLogprob out;
  out.degenerate = response_token_logprobs.empty();
  for (double lp : response_token_logprobs) out.value += lp;
  return out;
}

SequenceLogprob sequence_logprob(const ToyPolicy& policy, const std::string& prompt,
                                 const std::string& response) {
  SequenceLogprob out;
  out.degenerate = response.empty();
  out.value = policy.logprob(prompt, response);
  return out;
}

void write_margin_csv(const TrainTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ExportError("cannot write " + path.string());
  out << "step,loss,margin\n" << std::setprecision(17);
  for (const auto& p : trace.points) out << p.step << ',' << p.loss << ',' << p.margin << '\n';
  if (!out) throw ExportError("write failed for " + path.string());
}

std::vector<PreferencePair> synthetic_pairs(int n_contexts, int rejected_per_context,
                                            std::uint64_t seed) {
  if (n_contexts <= 0 || rejected_per_context <= 0)
    throw ContractViolation("synthetic_pairs needs positive sizes");
  std::mt19937_64 rng(seed);
  std::vector<PreferencePair> pairs;
  for (int c = 0; c < n_contexts; ++c) {
    const std::string prompt = "context " + std::to_string(c) + " #" + std::to_string(rng() % 1000);
    const std::string chosen = "good answer " + std::to_string(c);
    for (int r = 0; r < rejected_per_context; ++r) {
      PreferencePair p;
      p.problem_id = "synthetic-" + std::to_string(c);
      p.prompt = prompt;
      p.chosen = chosen;
      p.rejected = "bad answer " + std::to_string(c) + "." + std::to_string(r);
      p.chosen_reward = 1.0;
      p.rejected_reward = 0.0;
      pairs.push_back(std::move(p));
    }
  }
  return pairs;
}

std::vector<SelfCheck> run_self_checks(std::uint64_t seed, int n_examples) {
  std::vector<SelfCheck> checks;
  auto add = [&](std::string name, bool ok, std::string detail) {
    checks.push_back({std::move(name), ok, std::move(detail)});
  };
  auto fmt = [](double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
  };

  {
    const double loss = dpo_loss({0.0, 0.0, 0.0, 0.0}, {0.8});
    const double err = std::abs(loss - std::log(2.0));
    add("loss at z=0 is ln 2", err < 1e-9, "error " + fmt(err));
  }
  {
    const double loss = dpo_loss({1.0, 0.0, 0.0, 0.0}, {0.8});
    const double err = std::abs(loss - std::log1p(std::exp(-0.8)));
    add("loss at beta=0.8, a-b=1", err < 1e-9, "error " + fmt(err));
  }
  {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> lp(-20.0, 0.0);
    std::uniform_real_distribution<double> beta(0.05, 2.0);
    const double h = 1e-5;
    double worst = 0.0;
    for (int i = 0; i < n_examples; ++i) {
      DpoExample ex{lp(rng), lp(rng), lp(rng), lp(rng)};
      const DpoParams params{beta(rng)};
      const DpoGrad g = dpo_grad(ex, params);
      auto fd = [&](double DpoExample::*field) {
        DpoExample up = ex, down = ex;
        up.*field += h;
        down.*field -= h;
        return (dpo_loss(up, params) - dpo_loss(down, params)) / (2.0 * h);
      };
      const double fc = fd(&DpoExample::logp_theta_chosen);
      const double fr = fd(&DpoExample::logp_theta_rejected);
      auto rel = [](double a, double b) {
        return std::abs(a - b) / std::max(std::abs(b), 1e-3);
      };
      worst = std::max({worst, rel(g.d_chosen, fc), rel(g.d_rejected, fr)});
    }
    add("gradient vs central difference", worst < 1e-6,
        std::to_string(n_examples) + " examples, worst relative error " + fmt(worst));
  }
  {
    const auto pairs = synthetic_pairs(8, 3, seed);
    const ToyPolicy ref = make_toy_policy(pairs, seed);
    const double before = mean_margin(ref, pairs);
    const ToyPolicy trained = toy_train(ref, ref, pairs, 200, 0.1);
    const double after = mean_margin(trained, pairs);
    add("toy training raises margin", after > before,
        "margin " + fmt(before) + " -> " + fmt(after));
  }
  return checks;
}

}  // namespace prefgen::dpo

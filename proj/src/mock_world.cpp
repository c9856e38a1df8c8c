#include "prefgen/mock_world.h"

#include <array>
#include <charconv>
#include <string>

#include "prefgen/errors.h"
#include "prefgen/hashing.h"
#include "prefgen/prompts.h"

namespace prefgen {
namespace {

constexpr std::string_view kTotalPhrase = "the total to ";

constexpr std::array<std::string_view, 16> kLeads = {
    "we add",
    "the next quantity contributes",
    "combining with the next given amount adds",
    "the following term in the problem adds",
    "accounting for the next group adds",
    "the subsequent part of the question contributes",
    "including the next value adds",
    "we carry forward the next amount of",
    "the next relation in the problem gives an increase of",
    "reading off the next figure adds",
    "the next piece of information contributes",
    "moving to the next condition we add",
    "the next count in the statement adds",
    "after that the problem adds",
    "the next step of the computation adds",
    "we then include",
};

constexpr std::array<std::string_view, 8> kClauses = {
    "",
    " as stated in the problem",
    " from the given information",
    " according to the question",
    " based on the previous result",
    " using the stated relation",
    " by direct computation",
    " following the problem setup",
};

struct WalkState {
  int step_index = 0;
  long long running = 0;
};

std::optional<long long> parse_total(std::string_view text) {
  const auto pos = text.rfind(kTotalPhrase);
  if (pos == std::string_view::npos) return std::nullopt;
  const char* first = text.data() + pos + kTotalPhrase.size();
  const char* last = text.data() + text.size();
  long long value = 0;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr == first) return std::nullopt;
  return value;
}

WalkState parse_state(std::string_view prefix) {
  std::string_view region = solution_region(prefix);
  WalkState state;
  std::size_t pos = 0;
  while (pos < region.size()) {
    auto next = region.find(kStepDelimiter, pos);
    if (next == std::string_view::npos) next = region.size();
    if (next > pos) ++state.step_index;
    pos = next + kStepDelimiter.size();
  }
  state.running = parse_total(region).value_or(0);
  return state;
}

struct Plan {
  long long target = 0;
  bool integer_gold = true;
  std::string gold;
};

Plan make_plan(const Problem& problem) {
  Plan plan;
  plan.gold = problem.answer;
  auto exact = parse_exact_number(normalize_answer(problem.answer));
  if (exact && denominator(*exact) == 1 &&
      abs(numerator(*exact)) < boost::multiprecision::cpp_int(1'000'000'000'000LL)) {
    plan.target = static_cast<long long>(numerator(*exact));
  } else {
    plan.integer_gold = false;
    plan.target = 100 + static_cast<long long>(fnv1a64(problem.answer) % 900);
  }
  return plan;
}

long long planned_delta(long long target, int steps, int k) {
  const long long base = target / steps;
  if (k < steps - 1) return base;
  if (k == steps - 1) return target - base * (steps - 1);
  return 0;
}

const Problem& require_problem(const RequestContext& ctx) {
  if (ctx.problem == nullptr) throw ContractViolation("mock request without a problem");
  return *ctx.problem;
}

std::uint64_t role_salt(Role role) {
  return fnv1a64(to_string(role));
}

}  // namespace

void MockWorldSpec::validate() const {
  auto unit = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!unit(p_step_correct_policy) || !unit(p_step_correct_small) ||
      !unit(p_step_correct_correction) || !unit(prm_discrimination))
    throw ConfigError("mock world probabilities must lie in [0, 1]");
  if (steps_per_problem < 1) throw ConfigError("mock world needs steps_per_problem >= 1");
  if (n_problems < 0) throw ConfigError("mock world needs n_problems >= 0");
}

MockWorld::MockWorld(MockWorldSpec spec) : spec_(spec) { spec_.validate(); }

std::vector<Problem> MockWorld::make_corpus() const {
  static constexpr std::array<std::string_view, 4> kItems = {
      "crates", "books", "tickets", "seedlings"};
  static constexpr std::array<std::string_view, 4> kPlaces = {
      "a warehouse", "a library", "a theater", "a greenhouse"};
  std::vector<Problem> corpus;
  corpus.reserve(static_cast<std::size_t>(spec_.n_problems));
  for (int i = 0; i < spec_.n_problems; ++i) {
    const std::uint64_t h = hash_combine(mix64(spec_.seed), static_cast<std::uint64_t>(i));
    const long long answer = 10 + static_cast<long long>(h % 1991);
    char id[32];
    std::snprintf(id, sizeof id, "mock-%05d", i);
    const auto item = kItems[(h >> 20) % kItems.size()];
    const auto place = kPlaces[(h >> 24) % kPlaces.size()];
    Problem p;
    p.id = id;
    p.question = "Over " + std::to_string(spec_.steps_per_problem) +
                 " deliveries, " + std::string(place) + " receives " +
                 std::string(item) + " in batches described in its ledger (#" +
                 std::to_string(i) + "). How many " + std::string(item) +
                 " does it receive in total?";
    p.answer = std::to_string(answer);
    corpus.push_back(std::move(p));
  }
  return corpus;
}

std::vector<GeneratedStep> MockWorld::generate(Role role, std::uint64_t role_seed,
                                               const RequestContext& ctx,
                                               std::string_view prefix,
                                               int n) const {
  const Problem& problem = require_problem(ctx);
  double p_correct = 0.0;
  switch (role) {
    case Role::Policy:
      p_correct = is_correction_prefix(prefix) ? spec_.p_step_correct_correction
                                               : spec_.p_step_correct_policy;
      break;
    case Role::SmallPolicy: p_correct = spec_.p_step_correct_small; break;
    default: throw ContractViolation("mock generation needs a policy role");
  }

  const Plan plan = make_plan(problem);
  const WalkState state = parse_state(prefix);
  const int steps = spec_.steps_per_problem;
  const int k = state.step_index;
  const long long delta = planned_delta(plan.target, steps, k);
  const bool final_step = k >= steps - 1;

  std::uint64_t base = hash_combine(ctx.seed, spec_.seed);
  base = hash_combine(base, role_seed ^ role_salt(role));
  base = hash_combine(base, prefix);

  std::vector<GeneratedStep> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const std::uint64_t h = hash_combine(base, static_cast<std::uint64_t>(i));
    const bool correct = unit_interval(hash_combine(h, 1)) < p_correct;
    const long long error = correct ? 0 : 1 + static_cast<long long>(hash_combine(h, 2) % 20);
    const long long added = delta + error;
    const long long total = state.running + added;

    std::string text = "Step " + std::to_string(k + 1) + ": ";
    text += kLeads[hash_combine(h, 3) % kLeads.size()];
    text += " " + std::to_string(added);
    text += kClauses[hash_combine(h, 4) % kClauses.size()];
    text += ", bringing ";
    text += kTotalPhrase;
    text += std::to_string(total) + ".";
    if (final_step) {
      const std::string stated = (!plan.integer_gold && total == plan.target)
                                     ? plan.gold
                                     : std::to_string(total);
      text += " Final Answer: The final answer is $" + stated +
              "$. I hope it is correct.";
    }
    GeneratedStep step;
    step.text = std::move(text);
    step.policy_likelihood = 0.2 + 0.8 * unit_interval(hash_combine(h, 5));
    out.push_back(std::move(step));
  }
  return out;
}

bool MockWorld::step_is_correct(const RequestContext& ctx, std::string_view prefix,
                                std::string_view step) const {
  const Plan plan = make_plan(require_problem(ctx));
  const WalkState state = parse_state(prefix);
  const auto total = parse_total(step);
  if (!total) return false;
  return *total == state.running + planned_delta(plan.target, spec_.steps_per_problem,
                                                 state.step_index);
}

double MockWorld::prm(std::uint64_t prm_seed, const RequestContext& ctx,
                      std::string_view prefix, std::string_view step) const {
  const double table = step_is_correct(ctx, prefix, step) ? kCorrectStepPrm : kErrorStepPrm;
  const double d = spec_.prm_discrimination;
  if (d >= 1.0) return table;
  std::uint64_t h = hash_combine(ctx.seed, spec_.seed);
  h = hash_combine(h, prm_seed ^ role_salt(Role::Prm));
  h = hash_combine(h, prefix);
  h = hash_combine(h, step);
  return d * table + (1.0 - d) * unit_interval(h);
}

namespace {

class MockGenerator final : public StepGenerator {
 public:
  MockGenerator(std::shared_ptr<const MockWorld> world, Role role, std::uint64_t seed)
      : world_(std::move(world)), role_(role), seed_(seed) {}

  std::vector<GeneratedStep> generate(const RequestContext& ctx,
                                      std::string_view prefix, int n) override {
    return world_->generate(role_, seed_, ctx, prefix, n);
  }

 private:
  std::shared_ptr<const MockWorld> world_;
  Role role_;
  std::uint64_t seed_;
};

class MockPrm final : public StepScorer {
 public:
  MockPrm(std::shared_ptr<const MockWorld> world, std::uint64_t seed)
      : world_(std::move(world)), seed_(seed) {}

  double score(const RequestContext& ctx, std::string_view prefix,
               std::string_view step) override {
    return world_->prm(seed_, ctx, prefix, step);
  }

 private:
  std::shared_ptr<const MockWorld> world_;
  std::uint64_t seed_;
};

}  // namespace

std::unique_ptr<StepGenerator> make_mock_generator(
    std::shared_ptr<const MockWorld> world, Role role, std::uint64_t role_seed) {
  return std::make_unique<MockGenerator>(std::move(world), role, role_seed);
}

std::unique_ptr<StepScorer> make_mock_prm(std::shared_ptr<const MockWorld> world,
                                          std::uint64_t prm_seed) {
  return std::make_unique<MockPrm>(std::move(world), prm_seed);
}

}  // namespace prefgen

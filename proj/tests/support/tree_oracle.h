#pragma once

// Brute-force reference for the dual-chain rollout: enumerates the full
// candidate tree below the root (every node expanded, nothing pruned), then
// reads off the chains by argmax / plausible argmin at every node.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "prefgen/answer.h"
#include "prefgen/mock_world.h"

namespace prefgen::testing {

struct OracleNode {
  std::string text;
  double prm = 0.0;
  double likelihood = 1.0;
  double reward = 0.0;
  bool final_answer = false;
  std::vector<OracleNode> children;
};

struct OracleChains {
  std::vector<std::string> max_steps;
  std::vector<std::string> min_steps;
  std::size_t nodes = 0;  // candidates in the full tree
  bool degenerate = false;  // fewer than two distinct level-0 candidates
};

class TreeOracle {
 public:
  TreeOracle(const MockWorld& world, std::uint64_t policy_seed, std::uint64_t prm_seed,
             int budget, int max_depth, double prm_floor)
      : world_(world),
        policy_seed_(policy_seed),
        prm_seed_(prm_seed),
        budget_(budget),
        max_depth_(max_depth),
        floor_(prm_floor) {}

  OracleChains solve(const Problem& problem, std::uint64_t seed, const std::string& root) {
    ctx_ = {&problem, seed};
    nodes_ = 0;
    const auto level0 = expand(root, 0, 1.0, 1.0);
    OracleChains out;
    out.nodes = nodes_;
    if (level0.size() < 2) {
      out.degenerate = true;
      return out;
    }

    // Level 0: distinct extremes from the shared pool.
    std::size_t best = 0;
    for (std::size_t i = 1; i < level0.size(); ++i)
      if (level0[i].reward > level0[best].reward) best = i;
    const std::size_t worst = low_index(level0, best);

    walk(level0[best], true, out.max_steps);
    walk(level0[worst], false, out.min_steps);
    out.nodes = nodes_;
    return out;
  }

 private:
  std::size_t low_index(const std::vector<OracleNode>& c, std::size_t skip) const {
    bool plausible = false;
    for (std::size_t i = 0; i < c.size(); ++i)
      if (i != skip && c[i].prm >= floor_) plausible = true;
    std::size_t pick = c.size();
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (i == skip || (plausible && c[i].prm < floor_)) continue;
      if (pick == c.size() || c[i].reward < c[pick].reward) pick = i;
    }
    return pick;
  }

  // Expands every node to the depth limit.
  std::vector<OracleNode> expand(const std::string& prefix, int depth, double pol_prev,
                                 double prm_prev) {
    std::vector<OracleNode> out;
    std::set<std::string> seen;
    for (const auto& g : world_.generate(Role::Policy, policy_seed_, ctx_, prefix, budget_)) {
      if (!seen.insert(g.text).second) continue;
      OracleNode n;
      n.text = g.text;
      n.likelihood = std::min(g.policy_likelihood, 1.0);
      n.prm = world_.prm(prm_seed_, ctx_, prefix, g.text);
      const double denom = prm_prev > 1e-6 ? prm_prev : 1e-6;
      n.reward = depth == 0 ? n.prm : n.prm + (n.likelihood - pol_prev) / denom;
      n.final_answer = g.text.find(kAnswerMarker) != std::string::npos;
      ++nodes_;
      if (!n.final_answer && depth + 1 < max_depth_)
        n.children = expand(prefix + g.text + "\n\n", depth + 1, n.likelihood, n.prm);
      out.push_back(std::move(n));
    }
    return out;
  }

  void walk(const OracleNode& start, bool maximize,
            std::vector<std::string>& steps) const {
    const OracleNode* node = &start;
    for (;;) {
      steps.push_back(node->text);
      if (node->children.empty()) return;
      const auto& c = node->children;
      std::size_t pick = 0;
      if (maximize) {
        for (std::size_t i = 1; i < c.size(); ++i)
          if (c[i].reward > c[pick].reward) pick = i;
      } else {
        pick = low_index(c, c.size());
      }
      node = &c[pick];
    }
  }

  const MockWorld& world_;
  std::uint64_t policy_seed_;
  std::uint64_t prm_seed_;
  int budget_;
  int max_depth_;
  double floor_;
  RequestContext ctx_;
  std::size_t nodes_ = 0;
};

}  // namespace prefgen::testing

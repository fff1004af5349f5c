#pragma once

#include "perfstop/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace perfstop::oracle {

/// Nested description of a scenario tree, used to build and serialize trees.
struct TreeSpec {
    double price = 0.0;
    std::vector<TreeSpec> children;
};

struct TreeNode {
    double price;
    int parent;  // -1 for the root
    int level;
    std::vector<int> children;
    double running_max;
    double drawdown;
    int leaf_begin;  // leaves of the subtree occupy [leaf_begin, leaf_end) in leaf order
    int leaf_end;
    int subtree_end;  // the subtree occupies node indices [index, subtree_end)
};

/// Finite outcome set Ω on the level times 0 = t_0 < ... < t_depth = T.
///
/// Nodes are histories, leaves are scenarios. Every leaf sits at level depth,
/// ψ_0 > ψ_1 > ... > ψ_depth = 0. Nodes are stored in preorder, so each
/// subtree's leaves form a contiguous range.
class ScenarioTree {
public:
    ScenarioTree(std::vector<double> level_times, std::vector<double> psi, const TreeSpec& root);

    int depth() const noexcept { return static_cast<int>(level_times_.size()) - 1; }
    const std::vector<double>& level_times() const noexcept { return level_times_; }
    const std::vector<double>& psi() const noexcept { return psi_; }
    const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
    const TreeNode& node(int i) const { return nodes_.at(static_cast<std::size_t>(i)); }
    /// Node indices of the leaves, in preorder.
    const std::vector<int>& leaves() const noexcept { return leaves_; }
    bool is_leaf(int i) const { return node(i).children.empty(); }

    /// Estimated regret of stopping at node i: max{drawdown, ψ at its level}.
    double stop_regret(int i) const { return std::max(node(i).drawdown, psi_[static_cast<std::size_t>(node(i).level)]); }

    /// Root-to-leaf node indices of scenario `leaf_pos` (position in leaves()).
    std::vector<int> scenario(int leaf_pos) const;

    TreeSpec to_spec() const;

private:
    std::vector<double> level_times_;
    std::vector<double> psi_;
    std::vector<TreeNode> nodes_;
    std::vector<int> leaves_;
};

/// Per-node stop decision. Canonical form: terminal nodes reached by the rule
/// stop, nodes strictly below a stopping node are never reached and hold 0.
struct TreeStoppingRule {
    std::vector<std::uint8_t> stop;

    bool operator==(const TreeStoppingRule&) const = default;
};

inline constexpr std::uint64_t kDefaultRuleCap = 1'000'000;
inline constexpr int kMaxDepth = 5;
inline constexpr int kMaxBranching = 3;
/// Margin for the strict inequalities of the optimality checks.
inline constexpr double kStrictTol = 1e-12;

/// Number of distinct adapted rules, count(v) = 1 + Π_children count(c), count(leaf) = 1.
/// Saturates at UINT64_MAX.
std::uint64_t rule_count(const ScenarioTree& tree, int node = 0);

/// All adapted rules in canonical form. Throws SizeError above `cap`.
std::vector<TreeStoppingRule> enumerate_rules(const ScenarioTree& tree, std::uint64_t cap = kDefaultRuleCap);

TreeStoppingRule stop_at_root_rule(const ScenarioTree& tree);
TreeStoppingRule hold_to_horizon_rule(const ScenarioTree& tree);

/// Stops at the first node whose drawdown reaches ψ at its level.
TreeStoppingRule perfect_rule_on_tree(const ScenarioTree& tree);

/// True iff no proper ancestor of `node` stops under `rule`.
bool is_admissible(const ScenarioTree& tree, const TreeStoppingRule& rule, int node);

/// Node at which `rule` stops along scenario `leaf_pos`.
int stop_node(const ScenarioTree& tree, const TreeStoppingRule& rule, int leaf_pos);

struct TreeRegret {
    double worst_case;
    std::vector<int> leaf_positions;  // scenarios through the history node
    std::vector<double> per_leaf;     // R for each of them
};

/// Worst-case estimated regret over the scenarios through `history_node`.
/// Throws DomainError if the rule stops strictly before that node.
TreeRegret tree_estimated_regret(const ScenarioTree& tree, const TreeStoppingRule& rule, int history_node);

struct RuleAssessment {
    bool admissible = false;
    double worst_case = 0.0;
    double best_worst_case = 0.0;  // minimum over all admissible rules
    bool optimal = false;
    bool pareto_optimal = false;
    std::optional<TreeStoppingRule> dominated_by;
};

/// Brute-force check of optimality and Pareto optimality of `rule` at a node.
RuleAssessment assess_rule(const ScenarioTree& tree, const TreeStoppingRule& rule, int node,
                           std::uint64_t cap = kDefaultRuleCap);

struct TreeAssumptions {
    /// Every non-terminal node has a continuation whose later prices all stay
    /// strictly below the node's price.
    bool declining_continuation = true;
    /// At the first crossing on every scenario, the drawdown stays strictly
    /// below ψ of the previous level (discrete stand-in for path continuity).
    bool bounded_overshoot = true;
    std::vector<int> nodes_without_declining_continuation;
    std::vector<int> overshooting_leaves;

    bool hold() const noexcept { return declining_continuation && bounded_overshoot; }
};

TreeAssumptions check_assumptions(const ScenarioTree& tree);

struct Counterexample {
    std::string kind;  // not_optimal, pareto_dominated, condition_A, condition_B, another_perfect_rule
    int node;
    int leaf;  // scenario position, -1 when not scenario specific
    TreeStoppingRule rule;
    std::string detail;
};

struct VerificationReport {
    bool passed = true;
    TreeAssumptions assumptions;
    std::uint64_t n_rules = 0;
    int nodes_checked = 0;
    std::vector<Counterexample> counterexamples;
};

/// Exhaustive check, at every node where the crossing rule is admissible, of
/// optimality, Pareto optimality and conditions (A)/(B) against every adapted
/// rule, plus uniqueness: every other rule fails optimality or Pareto
/// optimality at some node where it is admissible.
VerificationReport verify_perfection(const ScenarioTree& tree, std::uint64_t cap = kDefaultRuleCap);

struct TreeGenConfig {
    int depth = 4;
    int max_branching = 3;
    double horizon = 1.0;
    /// Redraw trees with more rules than this.
    std::uint64_t rule_cap = 100'000;
    /// Build trees satisfying both TreeAssumptions.
    bool enforce_assumptions = true;
};

/// Random tree with uniform level times, affine ψ_k = g (depth - k) and
/// dyadic prices, so every comparison is exact in floating point.
ScenarioTree random_tree(const TreeGenConfig& config, RandomStream& rng);

void to_json(nlohmann::json& j, const ScenarioTree& tree);
ScenarioTree tree_from_json(const nlohmann::json& j);
void to_json(nlohmann::json& j, const VerificationReport& report);

}  // namespace perfstop::oracle

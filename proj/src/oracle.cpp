#include "perfstop/oracle.hpp"

#include "perfstop/errors.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

namespace perfstop::oracle {

namespace {

constexpr std::uint64_t kSaturated = std::numeric_limits<std::uint64_t>::max();

std::uint64_t sat_mul(std::uint64_t a, std::uint64_t b) {
    if (a != 0 && b > kSaturated / a) return kSaturated;
    return a * b;
}

std::uint64_t sat_add(std::uint64_t a, std::uint64_t b) { return a > kSaturated - b ? kSaturated : a + b; }

}  // namespace

ScenarioTree::ScenarioTree(std::vector<double> level_times, std::vector<double> psi, const TreeSpec& root)
    : level_times_(std::move(level_times)), psi_(std::move(psi)) {
    if (level_times_.size() < 2) throw ParameterError("scenario tree: depth must be >= 1");
    if (psi_.size() != level_times_.size()) throw ParameterError("scenario tree: need one ψ value per level");
    if (level_times_.front() != 0.0) throw ParameterError("scenario tree: first level time must be 0");
    for (std::size_t k = 1; k < level_times_.size(); ++k) {
        if (!(level_times_[k] > level_times_[k - 1])) {
            throw ParameterError("scenario tree: level times must be strictly increasing");
        }
        if (!(psi_[k] < psi_[k - 1])) throw ParameterError("scenario tree: ψ must be strictly decreasing");
    }
    if (psi_.back() != 0.0) throw ParameterError("scenario tree: ψ at the horizon must be 0");

    const int depth = static_cast<int>(level_times_.size()) - 1;
    // preorder flattening with running maxima
    const std::function<int(const TreeSpec&, int, int, double)> add =
        [&](const TreeSpec& spec, int parent, int level, double parent_max) -> int {
        if (!std::isfinite(spec.price)) throw ParameterError("scenario tree: non-finite price");
        const int index = static_cast<int>(nodes_.size());
        const double m = parent < 0 ? spec.price : std::max(parent_max, spec.price);
        nodes_.push_back({spec.price, parent, level, {}, m, m - spec.price, 0, 0, 0});
        nodes_[static_cast<std::size_t>(index)].leaf_begin = static_cast<int>(leaves_.size());
        if (spec.children.empty()) {
            if (level != depth) {
                throw ParameterError("scenario tree: every scenario must reach the horizon (node " +
                                     std::to_string(index) + " stops at level " + std::to_string(level) + ")");
            }
            leaves_.push_back(index);
        } else {
            if (level == depth) throw ParameterError("scenario tree: nodes at the horizon cannot have children");
            for (const TreeSpec& c : spec.children) {
                const int ci = add(c, index, level + 1, m);
                nodes_[static_cast<std::size_t>(index)].children.push_back(ci);
            }
        }
        auto& n = nodes_[static_cast<std::size_t>(index)];
        n.leaf_end = static_cast<int>(leaves_.size());
        n.subtree_end = static_cast<int>(nodes_.size());
        return index;
    };
    add(root, -1, 0, 0.0);
    if (!(psi_.front() > 0.0)) throw ParameterError("scenario tree: root drawdown 0 must be below ψ_0");
}

std::vector<int> ScenarioTree::scenario(int leaf_pos) const {
    std::vector<int> path;
    for (int v = leaves_.at(static_cast<std::size_t>(leaf_pos)); v >= 0; v = node(v).parent) path.push_back(v);
    return {path.rbegin(), path.rend()};
}

TreeSpec ScenarioTree::to_spec() const {
    const std::function<TreeSpec(int)> build = [&](int v) {
        TreeSpec s{node(v).price, {}};
        for (int c : node(v).children) s.children.push_back(build(c));
        return s;
    };
    return build(0);
}

std::uint64_t rule_count(const ScenarioTree& tree, int node) {
    const TreeNode& n = tree.node(node);
    if (n.children.empty()) return 1;
    std::uint64_t product = 1;
    for (int c : n.children) product = sat_mul(product, rule_count(tree, c));
    return sat_add(1, product);
}

namespace {

/// Walks all sub-rules at a node. Before each callback, `stop` holds the
/// decisions on the subtree (zero below stopping nodes) and `regret` holds R
/// for every scenario of the subtree, indexed by leaf position.
class SubRuleEnumerator {
public:
    explicit SubRuleEnumerator(const ScenarioTree& tree)
        : tree_(tree), stop(tree.nodes().size(), 0), regret(tree.leaves().size(), 0.0) {}

    void run(int v, const std::function<void()>& visit) {
        const TreeNode& n = tree_.node(v);
        std::fill(stop.begin() + v, stop.begin() + n.subtree_end, 0);
        stop[static_cast<std::size_t>(v)] = 1;
        std::fill(regret.begin() + n.leaf_begin, regret.begin() + n.leaf_end, tree_.stop_regret(v));
        visit();
        if (n.children.empty()) return;
        stop[static_cast<std::size_t>(v)] = 0;
        product(n.children, 0, visit);
    }

    const ScenarioTree& tree_;
    std::vector<std::uint8_t> stop;
    std::vector<double> regret;

private:
    void product(const std::vector<int>& children, std::size_t i, const std::function<void()>& visit) {
        if (i == children.size()) {
            visit();
            return;
        }
        run(children[i], [&] { product(children, i + 1, visit); });
    }
};

std::vector<double> per_leaf_regret(const ScenarioTree& tree, const TreeStoppingRule& rule) {
    std::vector<double> r(tree.leaves().size());
    for (std::size_t l = 0; l < r.size(); ++l) r[l] = tree.stop_regret(stop_node(tree, rule, static_cast<int>(l)));
    return r;
}

double range_max(const std::vector<double>& v, int begin, int end) {
    double m = -std::numeric_limits<double>::infinity();
    for (int i = begin; i < end; ++i) m = std::max(m, v[static_cast<std::size_t>(i)]);
    return m;
}

/// a <= b everywhere on the range and a < b somewhere.
bool dominates(const std::vector<double>& a, const std::vector<double>& b, int begin, int end) {
    bool strict = false;
    for (int i = begin; i < end; ++i) {
        const auto k = static_cast<std::size_t>(i);
        if (a[k] > b[k] + kStrictTol) return false;
        if (a[k] < b[k] - kStrictTol) strict = true;
    }
    return strict;
}

void check_rule_shape(const ScenarioTree& tree, const TreeStoppingRule& rule) {
    if (rule.stop.size() != tree.nodes().size()) throw ParameterError("stopping rule does not match the tree size");
}

std::vector<std::uint8_t> admissible_nodes(const ScenarioTree& tree, const std::vector<std::uint8_t>& stop) {
    std::vector<std::uint8_t> adm(tree.nodes().size(), 0);
    adm[0] = 1;
    for (std::size_t v = 0; v < adm.size(); ++v) {
        if (!adm[v] || stop[v]) continue;
        for (int c : tree.nodes()[v].children) adm[static_cast<std::size_t>(c)] = 1;
    }
    return adm;
}

std::string sub_rule_label(int node) { return "sub-rule at node " + std::to_string(node); }

}  // namespace

std::vector<TreeStoppingRule> enumerate_rules(const ScenarioTree& tree, std::uint64_t cap) {
    const std::uint64_t count = rule_count(tree);
    if (count > cap) {
        std::ostringstream msg;
        msg << "enumerate_rules: " << (count == kSaturated ? std::string("more than 2^64") : std::to_string(count))
            << " rules exceed the cap of " << cap;
        throw SizeError(msg.str());
    }
    std::vector<TreeStoppingRule> rules;
    rules.reserve(count);
    SubRuleEnumerator e(tree);
    e.run(0, [&] { rules.push_back({e.stop}); });
    return rules;
}

TreeStoppingRule stop_at_root_rule(const ScenarioTree& tree) {
    TreeStoppingRule r{std::vector<std::uint8_t>(tree.nodes().size(), 0)};
    r.stop[0] = 1;
    return r;
}

TreeStoppingRule hold_to_horizon_rule(const ScenarioTree& tree) {
    TreeStoppingRule r{std::vector<std::uint8_t>(tree.nodes().size(), 0)};
    for (int leaf : tree.leaves()) r.stop[static_cast<std::size_t>(leaf)] = 1;
    return r;
}

TreeStoppingRule perfect_rule_on_tree(const ScenarioTree& tree) {
    TreeStoppingRule r{std::vector<std::uint8_t>(tree.nodes().size(), 0)};
    const auto& psi = tree.psi();
    const std::function<void(int)> walk = [&](int v) {
        const TreeNode& n = tree.node(v);
        if (n.children.empty() || n.drawdown >= psi[static_cast<std::size_t>(n.level)]) {
            r.stop[static_cast<std::size_t>(v)] = 1;
            return;
        }
        for (int c : n.children) walk(c);
    };
    walk(0);
    return r;
}

bool is_admissible(const ScenarioTree& tree, const TreeStoppingRule& rule, int node) {
    check_rule_shape(tree, rule);
    for (int v = tree.node(node).parent; v >= 0; v = tree.node(v).parent) {
        if (rule.stop[static_cast<std::size_t>(v)]) return false;
    }
    return true;
}

int stop_node(const ScenarioTree& tree, const TreeStoppingRule& rule, int leaf_pos) {
    check_rule_shape(tree, rule);
    for (int v : tree.scenario(leaf_pos)) {
        if (rule.stop[static_cast<std::size_t>(v)]) return v;
    }
    return tree.leaves().at(static_cast<std::size_t>(leaf_pos));  // terminal stop is forced
}

TreeRegret tree_estimated_regret(const ScenarioTree& tree, const TreeStoppingRule& rule, int history_node) {
    if (!is_admissible(tree, rule, history_node)) {
        throw DomainError("rule stops before history node " + std::to_string(history_node));
    }
    const TreeNode& h = tree.node(history_node);
    TreeRegret out{-std::numeric_limits<double>::infinity(), {}, {}};
    for (int l = h.leaf_begin; l < h.leaf_end; ++l) {
        const double r = tree.stop_regret(stop_node(tree, rule, l));
        out.leaf_positions.push_back(l);
        out.per_leaf.push_back(r);
        out.worst_case = std::max(out.worst_case, r);
    }
    return out;
}

RuleAssessment assess_rule(const ScenarioTree& tree, const TreeStoppingRule& rule, int node, std::uint64_t cap) {
    check_rule_shape(tree, rule);
    RuleAssessment a;
    a.admissible = is_admissible(tree, rule, node);
    if (!a.admissible) return a;
    if (rule_count(tree, node) > cap) throw SizeError("assess_rule: sub-rule count exceeds the cap");
    const TreeNode& n = tree.node(node);
    const std::vector<double> own = per_leaf_regret(tree, rule);
    a.worst_case = range_max(own, n.leaf_begin, n.leaf_end);
    a.best_worst_case = std::numeric_limits<double>::infinity();
    SubRuleEnumerator e(tree);
    e.run(node, [&] {
        a.best_worst_case = std::min(a.best_worst_case, range_max(e.regret, n.leaf_begin, n.leaf_end));
        if (!a.dominated_by && dominates(e.regret, own, n.leaf_begin, n.leaf_end)) {
            a.dominated_by = TreeStoppingRule{e.stop};
        }
    });
    a.optimal = a.worst_case <= a.best_worst_case + kStrictTol;
    a.pareto_optimal = !a.dominated_by.has_value();
    return a;
}

TreeAssumptions check_assumptions(const ScenarioTree& tree) {
    TreeAssumptions out;
    const std::function<bool(int, double)> declines = [&](int v, double threshold) {
        for (int c : tree.node(v).children) {
            if (tree.node(c).price < threshold && (tree.is_leaf(c) || declines(c, threshold))) return true;
        }
        return false;
    };
    for (int v = 0; v < static_cast<int>(tree.nodes().size()); ++v) {
        if (!tree.is_leaf(v) && !declines(v, tree.node(v).price)) {
            out.declining_continuation = false;
            out.nodes_without_declining_continuation.push_back(v);
        }
    }
    const auto& psi = tree.psi();
    for (int l = 0; l < static_cast<int>(tree.leaves().size()); ++l) {
        for (int v : tree.scenario(l)) {
            const TreeNode& n = tree.node(v);
            if (n.drawdown < psi[static_cast<std::size_t>(n.level)]) continue;
            if (n.level > 0 && !(n.drawdown < psi[static_cast<std::size_t>(n.level - 1)] - kStrictTol)) {
                out.bounded_overshoot = false;
                out.overshooting_leaves.push_back(l);
            }
            break;
        }
    }
    return out;
}

VerificationReport verify_perfection(const ScenarioTree& tree, std::uint64_t cap) {
    VerificationReport report;
    report.assumptions = check_assumptions(tree);
    report.n_rules = rule_count(tree);
    if (report.n_rules > cap) {
        std::ostringstream msg;
        msg << "verify_perfection: " << report.n_rules << " rules exceed the cap of " << cap;
        throw SizeError(msg.str());
    }
    const std::size_t n_nodes = tree.nodes().size();
    const TreeStoppingRule sigma = perfect_rule_on_tree(tree);
    const std::vector<double> sigma_regret = per_leaf_regret(tree, sigma);
    const std::vector<std::uint8_t> sigma_adm = admissible_nodes(tree, sigma.stop);
    const auto add = [&](std::string kind, int node, int leaf, std::vector<std::uint8_t> rule, std::string detail) {
        report.passed = false;
        report.counterexamples.push_back({std::move(kind), node, leaf, {std::move(rule)}, std::move(detail)});
    };

    // best worst-case value per node over all admissible sub-rules
    std::vector<double> best(n_nodes, std::numeric_limits<double>::quiet_NaN());
    const auto best_at = [&](int v) {
        auto& b = best[static_cast<std::size_t>(v)];
        if (std::isnan(b)) {
            const TreeNode& n = tree.node(v);
            b = std::numeric_limits<double>::infinity();
            SubRuleEnumerator e(tree);
            e.run(v, [&] { b = std::min(b, range_max(e.regret, n.leaf_begin, n.leaf_end)); });
        }
        return b;
    };

    for (int v = 0; v < static_cast<int>(n_nodes); ++v) {
        if (!sigma_adm[static_cast<std::size_t>(v)]) continue;
        ++report.nodes_checked;
        const TreeNode& n = tree.node(v);
        const bool sigma_stops_here = sigma.stop[static_cast<std::size_t>(v)] != 0;
        const double sigma_worst = range_max(sigma_regret, n.leaf_begin, n.leaf_end);
        double best_worst = std::numeric_limits<double>::infinity();
        bool dominated = false;
        bool a_failed = false;
        SubRuleEnumerator e(tree);
        e.run(v, [&] {
            best_worst = std::min(best_worst, range_max(e.regret, n.leaf_begin, n.leaf_end));
            if (!dominated && dominates(e.regret, sigma_regret, n.leaf_begin, n.leaf_end)) {
                dominated = true;
                add("pareto_dominated", v, -1, e.stop, sub_rule_label(v) + " dominates the crossing rule");
            }
            // (A): a rule that waits past the crossing node loses on some scenario
            if (sigma_stops_here && !a_failed && !e.stop[static_cast<std::size_t>(v)]) {
                bool worse_somewhere = false;
                for (int l = n.leaf_begin; l < n.leaf_end && !worse_somewhere; ++l) {
                    worse_somewhere = e.regret[static_cast<std::size_t>(l)] >
                                      sigma_regret[static_cast<std::size_t>(l)] + kStrictTol;
                }
                if (!worse_somewhere) {
                    a_failed = true;
                    add("condition_A", v, -1, e.stop, sub_rule_label(v) + " delays without increasing regret");
                }
            }
        });
        best[static_cast<std::size_t>(v)] = best_worst;
        if (sigma_worst > best_worst + kStrictTol) {
            std::ostringstream msg;
            msg << "crossing rule worst case " << sigma_worst << " > minimum " << best_worst;
            add("not_optimal", v, -1, sigma.stop, msg.str());
        }
        // (B): stopping here, before the crossing, is worse on every scenario
        if (!sigma_stops_here) {
            const double early = tree.stop_regret(v);
            for (int l = n.leaf_begin; l < n.leaf_end; ++l) {
                if (!(early > sigma_regret[static_cast<std::size_t>(l)] + kStrictTol)) {
                    std::ostringstream msg;
                    msg << "stopping at node " << v << " gives " << early << ", crossing rule gives "
                        << sigma_regret[static_cast<std::size_t>(l)];
                    add("condition_B", v, l, stop_at_root_rule(tree).stop, msg.str());
                    break;
                }
            }
        }
    }

    // uniqueness: every other rule must fail optimality or Pareto optimality somewhere it is admissible
    SubRuleEnumerator all(tree);
    all.run(0, [&] {
        if (all.stop == sigma.stop) return;
        const std::vector<double>& tau_regret = all.regret;
        const auto witness_at = [&](int v, bool full_search) {
            const TreeNode& n = tree.node(v);
            if (range_max(tau_regret, n.leaf_begin, n.leaf_end) > best_at(v) + kStrictTol) return true;
            if (sigma_adm[static_cast<std::size_t>(v)] &&
                dominates(sigma_regret, tau_regret, n.leaf_begin, n.leaf_end)) {
                return true;
            }
            if (!full_search) return false;
            bool found = false;
            SubRuleEnumerator e(tree);
            e.run(v, [&] { found = found || dominates(e.regret, tau_regret, n.leaf_begin, n.leaf_end); });
            return found;
        };
        // first nodes where the two rules part ways, both still running
        std::vector<int> stack{0};
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            const auto k = static_cast<std::size_t>(v);
            if (all.stop[k] != sigma.stop[k]) {
                if (witness_at(v, false)) return;
            } else if (!all.stop[k]) {
                for (int c : tree.node(v).children) stack.push_back(c);
            }
        }
        const std::vector<double> tau_copy = tau_regret;
        const std::vector<std::uint8_t> tau_stop = all.stop;
        const std::vector<std::uint8_t> tau_adm = admissible_nodes(tree, tau_stop);
        for (int v = 0; v < static_cast<int>(n_nodes); ++v) {
            if (!tau_adm[static_cast<std::size_t>(v)]) continue;
            const TreeNode& n = tree.node(v);
            if (range_max(tau_copy, n.leaf_begin, n.leaf_end) > best_at(v) + kStrictTol) return;
            bool found = false;
            SubRuleEnumerator e(tree);
            e.run(v, [&] { found = found || dominates(e.regret, tau_copy, n.leaf_begin, n.leaf_end); });
            if (found) return;
        }
        add("another_perfect_rule", 0, -1, tau_stop, "rule is optimal and Pareto optimal wherever admissible");
    });
    return report;
}

ScenarioTree random_tree(const TreeGenConfig& config, RandomStream& rng) {
    if (config.depth < 1 || config.max_branching < 1) throw ParameterError("random_tree: depth and branching must be >= 1");
    if (config.depth > kMaxDepth || config.max_branching > kMaxBranching) {
        std::ostringstream msg;
        msg << "random_tree: depth " << config.depth << " / branching " << config.max_branching
            << " exceed the caps " << kMaxDepth << " / " << kMaxBranching;
        throw SizeError(msg.str());
    }
    if (!(config.horizon > 0.0)) throw ParameterError("random_tree: horizon must be > 0");
    const int depth = config.depth;
    const auto pick = [&rng](int n) { return static_cast<int>(rng.uniform() * n); };

    for (int attempt = 0; attempt < 10000; ++attempt) {
        const double gap = 0.25 * (1 + pick(4));
        std::vector<double> times(static_cast<std::size_t>(depth) + 1), psi(times.size());
        for (int k = 0; k <= depth; ++k) {
            times[static_cast<std::size_t>(k)] = k == depth ? config.horizon : config.horizon * k / depth;
            psi[static_cast<std::size_t>(k)] = gap * (depth - k);
        }
        const std::function<TreeSpec(int, double, double, bool)> grow = [&](int level, double price, double m,
                                                                          bool crossed) {
            TreeSpec node{price, {}};
            if (level == depth) return node;
            const double d = m - price;
            const double psi_here = psi[static_cast<std::size_t>(level)];
            crossed = crossed || d >= psi_here;
            const bool constrain = config.enforce_assumptions && !crossed;
            const int branching = 1 + pick(config.max_branching);
            for (int c = 0; c < branching; ++c) {
                double child;
                if (c == 0 && config.enforce_assumptions) {
                    // strictly declining child; before the crossing it stays within ψ of the running max
                    child = constrain ? price - (psi_here - d) * 0.25 * (1 + pick(3)) : price - 0.25 * (1 + pick(2));
                } else {
                    child = price + 0.25 * (pick(8) - 3);
                    if (constrain && std::max(m, child) - child >= psi_here) child = price + 0.25 * pick(5);
                }
                node.children.push_back(grow(level + 1, child, std::max(m, child), crossed));
            }
            return node;
        };
        ScenarioTree tree(times, psi, grow(0, 0.0, 0.0, false));
        if (rule_count(tree) > config.rule_cap) continue;
        return tree;
    }
    throw SolverError("random_tree: could not draw a tree within the rule cap");
}

namespace {

nlohmann::json spec_to_json(const TreeSpec& s) {
    nlohmann::json j = {{"price", s.price}};
    if (!s.children.empty()) {
        auto& children = j["children"] = nlohmann::json::array();
        for (const auto& c : s.children) children.push_back(spec_to_json(c));
    }
    return j;
}

TreeSpec spec_from_json(const nlohmann::json& j) {
    TreeSpec s{j.at("price").get<double>(), {}};
    if (j.contains("children")) {
        for (const auto& c : j.at("children")) s.children.push_back(spec_from_json(c));
    }
    return s;
}

nlohmann::json rule_to_json(const TreeStoppingRule& r) {
    nlohmann::json nodes = nlohmann::json::array();
    for (std::size_t v = 0; v < r.stop.size(); ++v) {
        if (r.stop[v]) nodes.push_back(v);
    }
    return nodes;
}

}  // namespace

void to_json(nlohmann::json& j, const ScenarioTree& tree) {
    j = {{"level_times", tree.level_times()}, {"psi", tree.psi()}, {"root", spec_to_json(tree.to_spec())}};
}

ScenarioTree tree_from_json(const nlohmann::json& j) {
    try {
        return ScenarioTree(j.at("level_times").get<std::vector<double>>(), j.at("psi").get<std::vector<double>>(),
                            spec_from_json(j.at("root")));
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("tree JSON: ") + e.what());
    }
}

void to_json(nlohmann::json& j, const VerificationReport& report) {
    j = nlohmann::json::object();
    j["passed"] = report.passed;
    j["n_rules"] = report.n_rules;
    j["nodes_checked"] = report.nodes_checked;
    j["assumptions"] = {{"declining_continuation", report.assumptions.declining_continuation},
                        {"bounded_overshoot", report.assumptions.bounded_overshoot},
                        {"nodes_without_declining_continuation",
                         report.assumptions.nodes_without_declining_continuation},
                        {"overshooting_leaves", report.assumptions.overshooting_leaves}};
    auto& list = j["counterexamples"] = nlohmann::json::array();
    for (const auto& c : report.counterexamples) {
        list.push_back({{"kind", c.kind},
                        {"node", c.node},
                        {"leaf", c.leaf},
                        {"stop_nodes", rule_to_json(c.rule)},
                        {"detail", c.detail}});
    }
}

}  // namespace perfstop::oracle

#pragma once

/// Prior-guided Monte Carlo tree search.
///
/// Each decision phase runs M rollouts from the base node down to a
/// terminal node.  Children are built with the same bound and dominance
/// gates as branch-and-bound, the next branch is sampled from the policy
/// prior, and every terminal cost is backed up as the best terminal cost
/// and sequence of all its ancestors.  After the rollouts the base node
/// advances one step along its best terminal sequence.  There are no visit
/// counts or action values.

#include <algorithm>
#include <cstdint>
#include <memory>
#include <random>
#include <stdexcept>
#include <vector>

#include "model.hpp"
#include "policy.hpp"
#include "search_state.hpp"

namespace radarsched::mcts {

using search::TaskSet;

struct MctsConfig {
    int rollouts = 50;
    std::uint64_t seed = 0;
    std::shared_ptr<const policy::PolicyWeights> weights;  // null: uniform prior
    int n_p = policy::kDefaultNp;                          // branch cap without weights
    search::GateConfig gates;
};

struct Branch {
    int task = -1;   // internal index
    int child = -1;  // node index
    double prior = 0.0;
};

struct MctsNode {
    explicit MctsNode(int K) : state(K) {}

    int parent = -1;
    int task = -1;  // task appended to reach this node
    search::PartialState state;
    TaskSet nd;
    TaskSet d;
    std::vector<Branch> branches;
    bool expanded = false;
    bool terminal = false;
    bool closed = false;  // every terminal below has been reached
    bool has_termination = false;
    Cost best_cost = kInfiniteCost;
    std::vector<int> best_sequence;  // internal indices
};

struct MctsResult {
    std::vector<TaskId> sequence;
    Schedule schedule;
    Cost cost = 0;
    std::uint64_t visited_nodes = 0;
    std::uint64_t stale_prunes = 0;
    std::uint64_t prior_fallbacks = 0;
    std::uint64_t fallback_rollouts = 0;
    std::uint64_t rollouts = 0;
};

class Search {
public:
    Search(const ProblemInstance& inst, MctsConfig cfg)
        : inst_(&inst), p_(inst), cfg_(std::move(cfg)), rng_(cfg_.seed)
    {
        if (cfg_.rollouts < 1) throw ArgumentError("mcts: rollouts must be at least 1");
        if (cfg_.weights) {
            if (cfg_.weights->K != inst.K)
                throw ArgumentError("mcts: weights expect K = " + std::to_string(cfg_.weights->K) +
                                    ", instance has K = " + std::to_string(inst.K));
            cfg_.n_p = cfg_.weights->n_p;
        }
        if (cfg_.n_p < 1) throw ArgumentError("mcts: branch cap must be positive");
        nodes_.emplace_back(p_.K);
        nodes_[0].nd = p_.all;
        visited_ = 1;
    }

    const MctsNode& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
    int node_count() const { return static_cast<int>(nodes_.size()); }
    Cost upper_bound() const { return ub_; }
    std::uint64_t visited_nodes() const { return visited_; }
    const search::Problem& problem() const { return p_; }
    const std::vector<Cost>& upper_bound_history() const { return ub_history_; }

    /// Builds the children of `n` once, moving dominated and over-cap
    /// candidates to its dominated set, then attaches the prior.
    void expand(int n)
    {
        if (at(n).expanded) return;
        at(n).expanded = true;
        if (at(n).terminal) return;

        int accepted = 0;
        for (int a : at(n).nd.members()) {
            if (accepted == cfg_.n_p) {
                move_to_dominated(n, a);
                continue;
            }
            ++visited_;
            const TaskSet candidates = [&] {
                TaskSet c = at(n).nd | at(n).d;
                c.reset(a);
                return c;
            }();
            auto out = search::make_child(p_, at(n).state, a, candidates, ub_, cfg_.gates);
            if (!out.accepted()) {
                move_to_dominated(n, a);
                continue;
            }
            ++accepted;
            const int c = add_child(n, a, out.state, out.candidates);
            if (out.terminal()) {
                at(c).terminal = true;
                at(c).expanded = true;
                finish(c, at(c).state.cost());
            }
        }
        if (at(n).branches.empty()) {
            become_terminal(n);
            return;
        }
        attach_prior(n);
    }

    /// Samples an open child of an expanded node from its prior.  Children
    /// whose recorded cost now exceeds the upper bound are moved to the
    /// dominated set and the draw is repeated.  Returns -1 when the node ran
    /// out of branches and became terminal, or has no open child left.
    int select_branch(int n)
    {
        for (;;) {
            auto& br = at(n).branches;
            if (br.empty()) {
                become_terminal(n);
                return -1;
            }
            double total = 0.0;
            std::size_t open = 0;
            for (const auto& b : br) {
                if (at(b.child).closed) continue;
                total += b.prior;
                ++open;
            }
            if (open == 0) {
                at(n).closed = true;
                return -1;
            }
            std::size_t pick = br.size();
            if (total > 0.0) {
                double u = std::uniform_real_distribution<double>(0.0, total)(rng_);
                for (std::size_t i = 0; i < br.size(); ++i) {
                    if (at(br[i].child).closed) continue;
                    pick = i;
                    if (u < br[i].prior) break;
                    u -= br[i].prior;
                }
            } else {
                ++prior_fallbacks_;
                auto j = std::uniform_int_distribution<std::size_t>(0, open - 1)(rng_);
                for (std::size_t i = 0; i < br.size(); ++i) {
                    if (at(br[i].child).closed) continue;
                    if (j-- == 0) {
                        pick = i;
                        break;
                    }
                }
            }
            const Branch chosen = br[pick];
            if (recorded_cost(chosen.child) > ub_) {
                ++stale_prunes_;
                br.erase(br.begin() + static_cast<std::ptrdiff_t>(pick));
                move_to_dominated(n, chosen.task);
                continue;
            }
            return chosen.child;
        }
    }

    /// Partial cost of an open node, full cost of a terminal one.
    Cost recorded_cost(int n) const
    {
        return node(n).terminal ? node(n).best_cost : node(n).state.cost();
    }

    /// Records a terminal cost on `n` and all its ancestors (min rule).
    void backup(int n, Cost cost, const std::vector<int>& sequence)
    {
        for (int x = n; x >= 0; x = at(x).parent) {
            auto& nd = at(x);
            if (!nd.has_termination || nd.best_cost > cost) {
                nd.has_termination = true;
                nd.best_cost = cost;
                nd.best_sequence = sequence;
            }
        }
    }

    /// One rollout from `base` to a terminal node.  Returns false when the
    /// subtree under `base` is already closed.
    bool simulate(int base)
    {
        if (at(base).closed) return false;
        ++rollouts_;
        int n = base;
        expand(n);
        while (!at(n).branches.empty()) {
            int c = select_branch(n);
            if (c < 0) break;
            n = c;
            expand(n);
        }
        close_upwards(n, base);
        return true;
    }

    /// Child of `base` on its best terminal sequence.
    int decide(int base)
    {
        if (!at(base).has_termination) fallback_rollout(base);
        const auto& best = at(base).best_sequence;
        const auto depth = static_cast<std::size_t>(at(base).state.depth);
        if (best.size() <= depth) throw std::logic_error("mcts: base node is its own best terminal");
        const int next = best[depth];
        for (const auto& b : at(base).branches)
            if (b.task == next) return b.child;
        throw std::logic_error("mcts: best terminal sequence leaves the tree");
    }

    /// Greedy descent used when no rollout reached a terminal node: follow
    /// the highest-prior branch, or else the earliest-start remaining task,
    /// with only deadline dropping applied.
    void fallback_rollout(int base)
    {
        ++fallback_rollouts_;
        int n = base;
        for (;;) {
            auto& br = at(n).branches;
            int next = -1;
            if (!br.empty()) {
                auto best = std::max_element(br.begin(), br.end(),
                                             [](const Branch& x, const Branch& y) { return x.prior < y.prior; });
                next = best->child;
            } else {
                TaskSet remaining = at(n).nd | at(n).d;
                if (remaining.empty()) {
                    at(n).terminal = true;
                    at(n).expanded = true;
                    finish(n, at(n).state.cost());
                    return;
                }
                const int a = remaining.first();
                remaining.reset(a);
                ++visited_;
                auto out = search::make_child(p_, at(n).state, a, remaining, kInfiniteCost,
                                              search::GateConfig{false, false, false});
                at(n).nd = at(n).nd | at(n).d;
                at(n).d = TaskSet{};
                next = add_child(n, a, out.state, out.candidates);
                at(n).branches.back().prior = 1.0;
            }
            n = next;
        }
    }

    MctsResult run()
    {
        int base = 0;
        if (p_.N > 0) {
            for (;;) {
                for (int m = 0; m < cfg_.rollouts; ++m)
                    if (!simulate(base)) break;
                if (at(base).branches.empty()) break;
                base = decide(base);
                if (at(base).terminal) break;
            }
        }
        MctsResult res;
        const auto& best = at(base).has_termination ? at(base).best_sequence : std::vector<int>{};
        res.sequence = p_.ids(best);
        res.schedule = schedule_from_sequence(*inst_, res.sequence);
        res.cost = res.schedule.total_cost;
        res.visited_nodes = visited_;
        res.stale_prunes = stale_prunes_;
        res.prior_fallbacks = prior_fallbacks_;
        res.fallback_rollouts = fallback_rollouts_;
        res.rollouts = rollouts_;
        return res;
    }

    std::vector<int> sequence_of(int n) const
    {
        std::vector<int> seq(static_cast<std::size_t>(node(n).state.depth));
        for (int x = n; node(x).parent >= 0; x = node(x).parent)
            seq[static_cast<std::size_t>(node(x).state.depth - 1)] = node(x).task;
        return seq;
    }

private:
    MctsNode& at(int i) { return nodes_[static_cast<std::size_t>(i)]; }

    /// Marks terminal nodes and nodes whose children are all closed, from
    /// `n` up to `top`.
    void close_upwards(int n, int top)
    {
        for (int x = n;; x = at(x).parent) {
            auto& nd = at(x);
            if (nd.terminal) nd.closed = true;
            if (!nd.closed && nd.expanded && !nd.branches.empty())
                nd.closed = std::all_of(nd.branches.begin(), nd.branches.end(),
                                        [&](const Branch& b) { return node(b.child).closed; });
            if (!nd.closed || x == top) return;
        }
    }

    void move_to_dominated(int n, int a)
    {
        at(n).nd.reset(a);
        at(n).d.set(a);
    }

    int add_child(int n, int a, const search::PartialState& state, const TaskSet& candidates)
    {
        MctsNode child(p_.K);
        child.parent = n;
        child.task = a;
        child.state = state;
        child.nd = candidates;
        nodes_.push_back(std::move(child));
        const int c = static_cast<int>(nodes_.size()) - 1;
        at(n).branches.push_back({a, c, 0.0});
        return c;
    }

    /// Node with nothing left to branch on: its dominated tasks are dropped.
    void become_terminal(int n)
    {
        at(n).terminal = true;
        finish(n, at(n).state.cost() + p_.drop_sum(at(n).d));
    }

    void finish(int n, Cost cost)
    {
        if (cost < ub_) {
            ub_ = cost;
            ub_history_.push_back(cost);
        }
        backup(n, cost, sequence_of(n));
    }

    void attach_prior(int n)
    {
        auto& nd = at(n);
        if (!cfg_.weights) {
            for (auto& b : nd.branches) b.prior = 1.0 / static_cast<double>(nd.branches.size());
            return;
        }
        std::vector<Task> nd_tasks, d_tasks;
        for (const auto& b : nd.branches) nd_tasks.push_back(p_.task(b.task));
        nd.d.for_each([&](int i) { d_tasks.push_back(p_.task(i)); });
        auto prior = policy::prior_over(nd_tasks, d_tasks, nd.state.availability(), *cfg_.weights);
        if (prior.fallback) ++prior_fallbacks_;
        for (std::size_t i = 0; i < nd.branches.size(); ++i) nd.branches[i].prior = prior.probs[i];
    }

    const ProblemInstance* inst_;
    search::Problem p_;
    MctsConfig cfg_;
    std::mt19937_64 rng_;
    std::vector<MctsNode> nodes_;
    Cost ub_ = kInfiniteCost;
    std::vector<Cost> ub_history_;
    std::uint64_t visited_ = 0;
    std::uint64_t stale_prunes_ = 0;
    std::uint64_t prior_fallbacks_ = 0;
    std::uint64_t fallback_rollouts_ = 0;
    std::uint64_t rollouts_ = 0;
};

inline MctsResult solve_mcts(const ProblemInstance& inst, const MctsConfig& cfg = {})
{
    validate(inst);
    return Search(inst, cfg).run();
}

}  // namespace radarsched::mcts

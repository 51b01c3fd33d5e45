#pragma once

// Depth-first branch-and-bound over task sequences with deadline dropping,
// optional search-trace recording for policy training, and a brute-force
// oracle used to verify it.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "heuristics.hpp"
#include "model.hpp"
#include "search_state.hpp"

namespace radarsched::bnb {

using search::Gate;
using search::GateConfig;
using search::TaskSet;

/// One recorded node: branch candidates split into not-dominated (nd) and
/// dominated (d), the channel availability, and the best next task.
struct TraceRecord {
    std::vector<TaskId> sequence;  // T of the node
    std::vector<TaskId> nd;
    std::vector<TaskId> d;
    std::vector<Time> g;
    TaskId astar = 0;
    Cost best_cost = 0;
};

struct SearchTrace {
    std::vector<TraceRecord> records;
};

struct BnBOptions {
    bool record_trace = false;
    std::optional<std::uint64_t> node_budget;
    GateConfig gates;
    bool warm_start = false;  // initialise UB from the best EST/ED heuristic
    std::function<void(Cost)> on_upper_bound;  // called on every UB improvement
};

struct BnBResult {
    std::vector<TaskId> best_sequence;
    Cost best_cost = kInfiniteCost;
    std::uint64_t visited_nodes = 0;
    bool optimal = true;  // false when the node budget ran out
    Schedule schedule;
    std::optional<SearchTrace> trace;
};

namespace detail {

struct Frame {
    explicit Frame(int K) : state(K) {}

    search::PartialState state;
    TaskSet pf;
    TaskSet ns;
    TaskSet nd;
    bool has_termination = false;
    Cost best_terminal_cost = kInfiniteCost;
    std::vector<int> best_terminal_sequence;

    void offer(Cost c, const std::vector<int>& seq)
    {
        if (!has_termination || c < best_terminal_cost) {
            has_termination = true;
            best_terminal_cost = c;
            best_terminal_sequence = seq;
        }
    }
};

}  // namespace detail

inline BnBResult solve_bnb(const ProblemInstance& inst, const BnBOptions& opt = {})
{
    validate(inst);
    const search::Problem p(inst);
    BnBResult res;
    if (opt.record_trace) res.trace.emplace();

    Cost ub = kInfiniteCost;
    std::vector<int> best;  // internal indices
    if (opt.warm_start) {
        for (auto order : {heuristics::Order::EST, heuristics::Order::ED}) {
            auto h = heuristics::solve_heuristic(inst, {order, true});
            if (h.schedule.total_cost < ub) {
                ub = h.schedule.total_cost;
                best.clear();
                for (TaskId id : h.sequence) best.push_back(p.index(id));
            }
        }
    }

    std::vector<detail::Frame> stack;
    stack.reserve(static_cast<std::size_t>(p.N) + 2);
    std::vector<int> path;  // T of the top frame
    path.reserve(static_cast<std::size_t>(p.N));

    stack.emplace_back(p.K);
    stack.back().pf = p.all;
    res.visited_nodes = 1;

    auto emit = [&](const detail::Frame& s) {
        TraceRecord rec;
        rec.sequence = p.ids(path);
        int astar = s.best_terminal_sequence[path.size()];
        TaskSet nd = s.nd;
        // A terminal child can hold the best sequence after failing only the
        // bound; keep the label inside the not-dominated set.
        nd.set(astar);
        rec.nd = p.ids(nd.members());
        rec.d = p.ids((s.ns - nd).members());
        rec.g = s.state.availability();
        rec.astar = p.id(astar);
        rec.best_cost = s.best_terminal_cost;
        res.trace->records.push_back(std::move(rec));
    };

    while (!stack.empty()) {
        detail::Frame& s = stack.back();
        if (!s.pf.empty()) {
            const int a = s.pf.first();
            s.pf.reset(a);
            const TaskSet candidates = s.pf | s.ns;
            s.ns.set(a);

            if (opt.node_budget && res.visited_nodes >= *opt.node_budget) {
                res.optimal = false;
                break;
            }
            ++res.visited_nodes;

            auto child = search::make_child(p, s.state, a, candidates, ub, opt.gates);
            if (opt.record_trace && child.dominance_passed && child.terminal()) {
                path.push_back(a);
                s.offer(child.state.cost(), path);
                path.pop_back();
            }
            if (child.accepted()) {
                s.nd.set(a);
                detail::Frame next(p.K);
                next.state = child.state;
                next.pf = child.candidates;
                stack.push_back(std::move(next));
                path.push_back(a);
            }
        } else {
            const Cost c = s.state.cost();
            if (s.ns.empty() && c < ub) {
                ub = c;
                best = path;
                if (opt.on_upper_bound) opt.on_upper_bound(ub);
            }
            if (opt.record_trace && s.has_termination) {
                if (stack.size() > 1) stack[stack.size() - 2].offer(s.best_terminal_cost, s.best_terminal_sequence);
                emit(s);
            }
            stack.pop_back();
            if (!path.empty()) path.pop_back();
        }
    }

    res.best_sequence = p.ids(best);
    res.schedule = schedule_from_sequence(inst, res.best_sequence);
    res.best_cost = res.schedule.total_cost;
    return res;
}

// Sequence-level views of the pruning gates.

namespace detail {

inline search::PartialState replay(const search::Problem& p, std::span<const TaskId> seq)
{
    search::PartialState st(p.K);
    for (TaskId id : seq) st.append(p, p.index(id));
    return st;
}

}  // namespace detail

/// True iff the mapped execution times of `seq` are non-decreasing.
inline bool start_times_dominance(const ProblemInstance& inst, std::span<const TaskId> seq)
{
    check_sequence(inst, seq);
    auto mapped = map_sequence_to_schedule(inst, seq);
    for (std::size_t i = 1; i < seq.size(); ++i)
        if (mapped.schedule.at(seq[i]).exec < mapped.schedule.at(seq[i - 1]).exec) return false;
    return true;
}

inline bool is_active(const ProblemInstance& inst, std::span<const TaskId> seq,
                      std::span<const TaskId> pf)
{
    check_sequence(inst, seq);
    if (seq.empty()) throw ArgumentError("is_active: sequence must be nonempty");
    search::Problem p(inst);
    auto st = detail::replay(p, seq);
    TaskSet cand;
    for (TaskId id : pf) cand.set(p.index(id));
    return search::is_active(p, st, cand);
}

inline bool is_lows_active(const ProblemInstance& inst, std::span<const TaskId> seq)
{
    check_sequence(inst, seq);
    if (seq.empty()) throw ArgumentError("is_lows_active: sequence must be nonempty");
    search::Problem p(inst);
    auto parent = detail::replay(p, seq.first(seq.size() - 1));
    auto child = parent;
    child.append(p, p.index(seq.back()));
    return search::is_lows_active(p, parent, child);
}

/// Outcome of appending `a` to `seq` with the given remaining tasks.
struct ChildReport {
    Gate gate;
    bool dominance_passed;
    Cost partial_cost;
    std::vector<TaskId> candidates;  // after deadline dropping
    std::vector<TaskId> dropped;
};

inline ChildReport make_child(const ProblemInstance& inst, std::span<const TaskId> seq,
                              std::span<const TaskId> dropped, TaskId a,
                              std::span<const TaskId> remaining, Cost ub,
                              const GateConfig& gates = {})
{
    check_sequence(inst, seq);
    search::Problem p(inst);
    auto st = detail::replay(p, seq);
    for (TaskId id : dropped) st.drop(p, p.index(id));
    TaskSet cand;
    for (TaskId id : remaining)
        if (id != a) cand.set(p.index(id));
    auto out = search::make_child(p, st, p.index(a), cand, ub, gates);
    return {out.gate, out.dominance_passed, out.state.cost(), p.ids(out.candidates.members()),
            p.ids(out.state.dropped.members())};
}

class OracleRefused : public Error {
public:
    using Error::Error;
};

inline constexpr int kOracleMaxTasks = 10;

/// Enumerates every ordered subset of tasks, maps it, and keeps the best
/// viable one with the remaining tasks dropped.  Prefixes that already miss
/// a deadline are cut since appending never moves earlier tasks.
inline BnBResult exhaustive_oracle(const ProblemInstance& inst)
{
    validate(inst);
    const int N = inst.size();
    if (N > kOracleMaxTasks)
        throw OracleRefused("exhaustive_oracle: N = " + std::to_string(N) + " exceeds " +
                            std::to_string(kOracleMaxTasks));
    BnBResult res;
    std::vector<TaskId> seq;
    std::vector<char> used(static_cast<std::size_t>(N), 0);

    std::function<void()> visit = [&] {
        ++res.visited_nodes;
        auto mapped = map_sequence_to_schedule(inst, seq);
        if (!is_viable(inst, mapped.schedule)) return;
        Cost c = cost_of(inst, mapped.schedule);
        if (c < res.best_cost) {
            res.best_cost = c;
            res.best_sequence = seq;
        }
        for (TaskId id = 1; id <= N; ++id) {
            auto& u = used[static_cast<std::size_t>(id - 1)];
            if (u) continue;
            u = 1;
            seq.push_back(id);
            visit();
            seq.pop_back();
            u = 0;
        }
    };
    visit();
    res.schedule = schedule_from_sequence(inst, res.best_sequence);
    return res;
}

}  // namespace radarsched::bnb

#pragma once

// Queue-based down-selection heuristics (EST first, ED first) with
// optional adjacent-swap repair.

#include <algorithm>
#include <functional>
#include <vector>

#include "model.hpp"

namespace radarsched::heuristics {

enum class Order { EST, ED };

struct HeuristicConfig {
    Order order = Order::EST;
    bool swap_enabled = false;
};

/// Tasks by non-increasing dropping cost, smaller id first on ties.
inline std::vector<TaskId> priority_order(const ProblemInstance& inst)
{
    std::vector<TaskId> s(inst.tasks.size());
    std::iota(s.begin(), s.end(), 1);
    std::stable_sort(s.begin(), s.end(), [&](TaskId a, TaskId b) {
        return inst.task(a).drop > inst.task(b).drop;
    });
    return s;
}

inline std::vector<TaskId> order_ds(const ProblemInstance& inst, std::vector<TaskId> ds, Order order)
{
    auto key = [&](TaskId id) { return order == Order::EST ? inst.task(id).r : inst.task(id).d; };
    std::sort(ds.begin(), ds.end(), [&](TaskId a, TaskId b) {
        return key(a) != key(b) ? key(a) < key(b) : a < b;
    });
    return ds;
}

inline bool sequence_viable(const ProblemInstance& inst, std::span<const TaskId> seq)
{
    return is_viable(inst, map_sequence_to_schedule(inst, seq).schedule);
}

struct SwapResult {
    bool viable = false;
    std::vector<TaskId> sequence;
};

/// Tries T, then each single adjacent exchange of the original T.
inline SwapResult try_adjacent_swaps(const ProblemInstance& inst, const std::vector<TaskId>& T)
{
    if (sequence_viable(inst, T)) return {true, T};
    std::vector<TaskId> tj = T;
    for (std::size_t j = 0; j + 1 < T.size(); ++j) {
        std::swap(tj[j], tj[j + 1]);
        if (sequence_viable(inst, tj)) return {true, tj};
        std::swap(tj[j], tj[j + 1]);
    }
    return {false, T};
}

/// One down-selection step, reported through the optional observer.
struct DownSelectStep {
    TaskId candidate = 0;
    bool kept = false;
    std::vector<TaskId> ds;  // after the decision
};

struct HeuristicResult {
    Schedule schedule;
    std::vector<TaskId> sequence;  // the recorded viable sequence
    std::vector<TaskId> selected;  // DS
};

inline HeuristicResult solve_heuristic(const ProblemInstance& inst, const HeuristicConfig& cfg,
                                       const std::function<void(const DownSelectStep&)>& observe = {})
{
    HeuristicResult res;
    for (TaskId i : priority_order(inst)) {
        res.selected.push_back(i);
        auto T = order_ds(inst, res.selected, cfg.order);
        SwapResult attempt = cfg.swap_enabled ? try_adjacent_swaps(inst, T)
                                              : SwapResult{sequence_viable(inst, T), T};
        if (attempt.viable)
            res.sequence = std::move(attempt.sequence);
        else
            res.selected.pop_back();
        if (observe) observe({i, attempt.viable, res.selected});
    }
    res.schedule = schedule_from_sequence(inst, res.sequence);
    return res;
}

inline const char* name(const HeuristicConfig& cfg)
{
    if (cfg.order == Order::EST) return cfg.swap_enabled ? "est_sw" : "est";
    return cfg.swap_enabled ? "ed_sw" : "ed";
}

}  // namespace radarsched::heuristics

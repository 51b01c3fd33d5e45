#pragma once

// Incremental partial schedules and the pruning gates shared by the
// branch-and-bound and tree-search solvers.
//
// Tasks are re-indexed internally by (start time, id) so that the lowest
// set bit of a TaskSet is always the earliest-start task.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "model.hpp"

namespace radarsched::search {

inline constexpr int kMaxTasks = 128;
inline constexpr int kMaxChannels = 8;

class TaskSet {
public:
    static TaskSet first_n(int n)
    {
        TaskSet s;
        for (int i = 0; i < n; ++i) s.set(i);
        return s;
    }

    void set(int i) { words_[word(i)] |= bit(i); }
    void reset(int i) { words_[word(i)] &= ~bit(i); }
    bool test(int i) const { return (words_[word(i)] & bit(i)) != 0; }
    bool empty() const { return (words_[0] | words_[1]) == 0; }
    int count() const { return std::popcount(words_[0]) + std::popcount(words_[1]); }

    /// Lowest member, -1 when empty.
    int first() const
    {
        if (words_[0]) return std::countr_zero(words_[0]);
        if (words_[1]) return 64 + std::countr_zero(words_[1]);
        return -1;
    }

    template <class F>
    void for_each(F&& f) const
    {
        for (int w = 0; w < 2; ++w)
            for (std::uint64_t x = words_[w]; x; x &= x - 1) f(64 * w + std::countr_zero(x));
    }

    std::vector<int> members() const
    {
        std::vector<int> out;
        out.reserve(static_cast<std::size_t>(count()));
        for_each([&](int i) { out.push_back(i); });
        return out;
    }

    friend TaskSet operator|(TaskSet a, const TaskSet& b)
    {
        a.words_[0] |= b.words_[0];
        a.words_[1] |= b.words_[1];
        return a;
    }
    friend TaskSet operator&(TaskSet a, const TaskSet& b)
    {
        a.words_[0] &= b.words_[0];
        a.words_[1] &= b.words_[1];
        return a;
    }
    friend TaskSet operator-(TaskSet a, const TaskSet& b)
    {
        a.words_[0] &= ~b.words_[0];
        a.words_[1] &= ~b.words_[1];
        return a;
    }
    friend bool operator==(const TaskSet&, const TaskSet&) = default;

private:
    static std::size_t word(int i) { return static_cast<std::size_t>(i >> 6); }
    static std::uint64_t bit(int i) { return std::uint64_t{1} << (i & 63); }

    std::array<std::uint64_t, 2> words_{};
};

/// Instance with tasks sorted by (r, id).
struct Problem {
    explicit Problem(const ProblemInstance& inst) : instance(&inst), K(inst.K), N(inst.size())
    {
        if (N > kMaxTasks)
            throw ArgumentError("search: at most " + std::to_string(kMaxTasks) + " tasks supported");
        if (K > kMaxChannels)
            throw ArgumentError("search: at most " + std::to_string(kMaxChannels) + " channels supported");
        tasks = inst.tasks;
        std::sort(tasks.begin(), tasks.end(),
                  [](const Task& a, const Task& b) { return a.r != b.r ? a.r < b.r : a.id < b.id; });
        index_of.assign(static_cast<std::size_t>(N) + 1, -1);
        for (int i = 0; i < N; ++i) index_of[static_cast<std::size_t>(tasks[static_cast<std::size_t>(i)].id)] = i;
        all = TaskSet::first_n(N);
    }

    const Task& task(int idx) const { return tasks[static_cast<std::size_t>(idx)]; }
    TaskId id(int idx) const { return task(idx).id; }
    int index(TaskId id) const { return index_of[static_cast<std::size_t>(id)]; }

    std::vector<TaskId> ids(const std::vector<int>& idx) const
    {
        std::vector<TaskId> out;
        out.reserve(idx.size());
        for (int i : idx) out.push_back(id(i));
        return out;
    }

    Cost drop_sum(const TaskSet& s) const
    {
        Cost c = 0;
        s.for_each([&](int i) { c += task(i).drop; });
        return c;
    }

    const ProblemInstance* instance;
    int K;
    int N;
    std::vector<Task> tasks;
    std::vector<int> index_of;
    TaskSet all;
};

/// Last task placed on a channel, its start, and the channel's
/// availability before it was placed.
struct ChannelTail {
    int task = -1;
    Time start = 0;
    Time before = 0;
};

struct PartialState {
    explicit PartialState(int k = 1) : K(k) {}

    int K;
    std::array<Time, kMaxChannels> avail{};
    std::array<ChannelTail, kMaxChannels> tail{};
    int last_task = -1;
    int last_channel = -1;
    Time last_start = 0;
    Cost tardiness = 0;
    Cost dropping = 0;
    TaskSet dropped;
    int depth = 0;

    Cost cost() const { return tardiness + dropping; }

    int earliest_channel() const
    {
        int k = 0;
        for (int i = 1; i < K; ++i)
            if (avail[static_cast<std::size_t>(i)] < avail[static_cast<std::size_t>(k)]) k = i;
        return k;
    }
    Time min_avail() const { return avail[static_cast<std::size_t>(earliest_channel())]; }

    std::vector<Time> availability() const
    {
        return {avail.begin(), avail.begin() + K};
    }

    void append(const Problem& p, int a)
    {
        const Task& t = p.task(a);
        int k = earliest_channel();
        auto ku = static_cast<std::size_t>(k);
        Time e = std::max(t.r, avail[ku]);
        tail[ku] = {a, e, avail[ku]};
        avail[ku] = e + t.len;
        last_task = a;
        last_channel = k;
        last_start = e;
        tardiness += t.w * (e - t.r);
        ++depth;
    }

    void drop(const Problem& p, int b)
    {
        dropped.set(b);
        dropping += p.task(b).drop;
    }
};

enum class Gate { accepted, start_times, active, lows, bound };

inline const char* to_string(Gate g)
{
    switch (g) {
    case Gate::accepted: return "accepted";
    case Gate::start_times: return "start_times";
    case Gate::active: return "active";
    case Gate::lows: return "lows";
    case Gate::bound: return "bound";
    }
    return "?";
}

struct GateConfig {
    bool start_times = true;
    bool active = true;
    bool lows = true;
};

/// Execution times along the sequence must be non-decreasing.
inline bool start_times_ok(const PartialState& parent, const PartialState& child)
{
    return parent.last_task < 0 || child.last_start >= parent.last_start;
}

/// False when some candidate fits entirely in the idle gap before the last
/// appended task on its channel.
inline bool is_active(const Problem& p, const PartialState& child, const TaskSet& candidates)
{
    const auto& slot = child.tail[static_cast<std::size_t>(child.last_channel)];
    const Time gap_start = slot.before;
    const Time e_a = slot.start;
    if (e_a == gap_start) return true;
    bool active = true;
    candidates.for_each([&](int b) {
        if (!active) return;
        const Task& t = p.task(b);
        Time s = std::max(t.r, gap_start);
        if (s + t.len <= e_a && s <= t.d) active = false;
    });
    return active;
}

namespace detail {

struct Placed {
    Time end;   // channel availability afterwards
    Cost cost;  // tardiness, or dropping cost when the start misses the deadline
};

inline Placed place_after(const Task& t, Time avail)
{
    Time s = std::max(t.r, avail);
    if (s > t.d) return {avail, t.drop};
    return {s + t.len, t.w * (s - t.r)};
}

}  // namespace detail

/// Exchange test between the newly appended task and the last task of every
/// timeline as it stood before the append.  Fails when some exchange
/// strictly lowers the pair cost while leaving every affected channel
/// available no later than before.  A task pushed past its deadline by the
/// exchange counts as dropped.
inline bool is_lows_active(const Problem& p, const PartialState& parent, const PartialState& child)
{
    const int a = child.last_task;
    const int k = child.last_channel;
    const Task& ta = p.task(a);
    const Time e_a = child.last_start;
    const Time end_a = e_a + ta.len;
    const Cost cost_a = ta.w * (e_a - ta.r);

    for (int j = 0; j < parent.K; ++j) {
        const ChannelTail& slot = parent.tail[static_cast<std::size_t>(j)];
        if (slot.task < 0) continue;
        const Task& tb = p.task(slot.task);
        const Time end_b = slot.start + tb.len;
        const Cost original = cost_a + tb.w * (slot.start - tb.r);
        if (j == k) {
            auto first = detail::place_after(ta, slot.before);
            auto second = detail::place_after(tb, first.end);
            if (first.cost + second.cost < original && second.end <= end_a) return false;
        } else {
            auto on_j = detail::place_after(ta, slot.before);
            auto on_k = detail::place_after(tb, parent.avail[static_cast<std::size_t>(k)]);
            if (on_j.cost + on_k.cost < original && on_j.end <= end_b && on_k.end <= end_a)
                return false;
        }
    }
    return true;
}

struct ChildOutcome {
    Gate gate = Gate::accepted;
    bool dominance_passed = false;  // start-times, active and LOWS gates all cleared
    PartialState state;
    TaskSet candidates;  // possible-first set of the child after deadline drops

    bool accepted() const { return gate == Gate::accepted; }
    bool terminal() const { return candidates.empty(); }
};

/// Builds the child T|a.  `candidates` are the tasks that may follow it
/// (a excluded).  Gates run in this order: start-times dominance, deadline
/// dropping, active, LOWS-active, cost bound.
inline ChildOutcome make_child(const Problem& p, const PartialState& parent, int a,
                               const TaskSet& candidates, Cost ub, const GateConfig& cfg = {})
{
    ChildOutcome out{Gate::accepted, false, parent, {}};
    out.state.append(p, a);
    if (cfg.start_times && !start_times_ok(parent, out.state)) {
        out.gate = Gate::start_times;
        return out;
    }
    const Time gmin = out.state.min_avail();
    candidates.for_each([&](int b) {
        if (p.task(b).d < gmin)
            out.state.drop(p, b);
        else
            out.candidates.set(b);
    });
    if (cfg.active && !is_active(p, out.state, out.candidates)) {
        out.gate = Gate::active;
        return out;
    }
    if (cfg.lows && !is_lows_active(p, parent, out.state)) {
        out.gate = Gate::lows;
        return out;
    }
    out.dominance_passed = true;
    if (out.state.cost() >= ub) out.gate = Gate::bound;
    return out;
}

}  // namespace radarsched::search

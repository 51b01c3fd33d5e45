#pragma once

/// Problem model for scheduling radar dwells on K identical timelines.
///
/// A task may start anywhere in [r, d]; starting late costs w per
/// millisecond of delay, never starting costs the dropping cost.  All
/// quantities are integers so that costs compare exactly.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace radarsched {

using Time = std::int64_t;
using Cost = std::int64_t;
using TaskId = int;

inline constexpr Cost kInfiniteCost = std::numeric_limits<Cost>::max();

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input to a function (nonpositive sizes, ids out of range).
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// A value that violates a model invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

class MalformedSchedule : public Error {
public:
    using Error::Error;
};

class MalformedSequence : public Error {
public:
    using Error::Error;
};

struct Task {
    TaskId id = 0;
    Time r = 0;     // start time
    Time d = 0;     // deadline on the execution time
    Time len = 1;   // dwell length
    Cost w = 1;     // tardiness weight per ms
    Cost drop = 0;  // dropping cost

    friend bool operator==(const Task&, const Task&) = default;
};

struct ProblemInstance {
    int K = 1;
    Time window = 100;
    std::vector<Task> tasks;

    int size() const { return static_cast<int>(tasks.size()); }
    const Task& task(TaskId id) const { return tasks[static_cast<std::size_t>(id - 1)]; }

    friend bool operator==(const ProblemInstance&, const ProblemInstance&) = default;
};

inline void validate(const Task& t)
{
    auto where = "task " + std::to_string(t.id) + ": ";
    if (t.d < t.r) throw ValidationError(where + "deadline d precedes start time r");
    if (t.r < 0) throw ValidationError(where + "start time r is negative");
    if (t.len <= 0) throw ValidationError(where + "length must be positive");
    if (t.w <= 0) throw ValidationError(where + "tardiness weight must be positive");
    if (t.drop < 0) throw ValidationError(where + "dropping cost is negative");
}

inline void validate(const ProblemInstance& inst)
{
    if (inst.K < 1) throw ValidationError("instance: K must be at least 1");
    for (std::size_t i = 0; i < inst.tasks.size(); ++i) {
        if (inst.tasks[i].id != static_cast<TaskId>(i + 1))
            throw ValidationError("instance: task ids must be contiguous 1..N, found id " +
                                  std::to_string(inst.tasks[i].id) + " at position " +
                                  std::to_string(i + 1));
        validate(inst.tasks[i]);
    }
}

/// Channel 0 means the task is dropped.
struct Assignment {
    int channel = 0;
    Time exec = 0;

    bool scheduled() const { return channel != 0; }
    friend bool operator==(const Assignment&, const Assignment&) = default;
};

struct Schedule {
    std::vector<Assignment> by_task;  // indexed by id - 1
    Cost total_cost = 0;

    const Assignment& at(TaskId id) const { return by_task[static_cast<std::size_t>(id - 1)]; }
    int dropped_count() const
    {
        return static_cast<int>(std::count_if(by_task.begin(), by_task.end(),
                                              [](const Assignment& a) { return !a.scheduled(); }));
    }
};

/// Availability time g_i of every channel.
struct ChannelState {
    std::vector<Time> g;

    explicit ChannelState(int K = 1) : g(static_cast<std::size_t>(K), 0) {}

    /// Earliest available channel, smallest index on ties (0-based).
    int earliest() const
    {
        return static_cast<int>(std::min_element(g.begin(), g.end()) - g.begin());
    }
    Time min_available() const { return *std::min_element(g.begin(), g.end()); }
};

inline Cost cost_of(const ProblemInstance& inst, const Schedule& s)
{
    if (s.by_task.size() != inst.tasks.size())
        throw MalformedSchedule("schedule covers " + std::to_string(s.by_task.size()) +
                                " tasks, instance has " + std::to_string(inst.tasks.size()));
    Cost total = 0;
    for (std::size_t i = 0; i < inst.tasks.size(); ++i) {
        const Task& t = inst.tasks[i];
        const Assignment& a = s.by_task[i];
        if (a.channel < 0 || a.channel > inst.K)
            throw MalformedSchedule("task " + std::to_string(t.id) + ": channel " +
                                    std::to_string(a.channel) + " out of range");
        total += a.scheduled() ? t.w * (a.exec - t.r) : t.drop;
    }
    return total;
}

inline void check_sequence(const ProblemInstance& inst, std::span<const TaskId> seq)
{
    std::vector<char> seen(inst.tasks.size(), 0);
    for (TaskId id : seq) {
        if (id < 1 || id > inst.size())
            throw MalformedSequence("unknown task id " + std::to_string(id));
        auto& flag = seen[static_cast<std::size_t>(id - 1)];
        if (flag) throw MalformedSequence("duplicate task id " + std::to_string(id));
        flag = 1;
    }
}

struct MappedSchedule {
    Schedule schedule;  // tasks outside the sequence are marked dropped
    ChannelState channels;
};

/// Sequence to schedule mapping: each task in turn goes to the earliest
/// available channel and starts at max(r, g).  Deadlines are not checked.
inline MappedSchedule map_sequence_to_schedule(const ProblemInstance& inst,
                                               std::span<const TaskId> seq)
{
    check_sequence(inst, seq);
    MappedSchedule out{Schedule{std::vector<Assignment>(inst.tasks.size()), 0},
                       ChannelState(inst.K)};
    for (TaskId id : seq) {
        const Task& t = inst.task(id);
        int k = out.channels.earliest();
        Time e = std::max(t.r, out.channels.g[static_cast<std::size_t>(k)]);
        out.channels.g[static_cast<std::size_t>(k)] = e + t.len;
        out.schedule.by_task[static_cast<std::size_t>(id - 1)] = {k + 1, e};
    }
    out.schedule.total_cost = cost_of(inst, out.schedule);
    return out;
}

inline bool is_viable(const ProblemInstance& inst, const Schedule& s)
{
    for (std::size_t i = 0; i < s.by_task.size() && i < inst.tasks.size(); ++i)
        if (s.by_task[i].scheduled() && s.by_task[i].exec > inst.tasks[i].d) return false;
    return true;
}

inline Cost tardiness_cost(const ProblemInstance& inst, std::span<const TaskId> seq)
{
    auto mapped = map_sequence_to_schedule(inst, seq);
    Cost c = 0;
    for (TaskId id : seq) c += inst.task(id).w * (mapped.schedule.at(id).exec - inst.task(id).r);
    return c;
}

inline Cost dropping_cost(const ProblemInstance& inst, std::span<const TaskId> dropped)
{
    Cost c = 0;
    for (TaskId id : dropped) {
        if (id < 1 || id > inst.size())
            throw MalformedSchedule("unknown task id " + std::to_string(id));
        c += inst.task(id).drop;
    }
    return c;
}

/// Schedule that maps `seq` and drops every other task.
inline Schedule schedule_from_sequence(const ProblemInstance& inst, std::span<const TaskId> seq)
{
    return map_sequence_to_schedule(inst, seq).schedule;
}

struct IntRange {
    std::int64_t lo = 0;
    std::int64_t hi = 0;  // inclusive
};

/// Parameter distributions for random instances.  Draws are uniform
/// integers over inclusive ranges.  With resolution > 1 every quantity is
/// drawn on a finer grid (1/resolution ms) and stored in scaled integer
/// units: times and weights scaled by resolution, dropping costs by
/// resolution^2 so that w * (e - r) and D stay commensurable.
struct GenerationParams {
    Time window = 100;
    IntRange slack{2, 12};     // d - r
    IntRange length{2, 11};
    IntRange drop{100, 500};
    IntRange weight{1, 5};
    int resolution = 1;
};

inline ProblemInstance generate_instance(std::uint64_t seed, int N, int K,
                                         const GenerationParams& p = {})
{
    if (N <= 0) throw ArgumentError("generate_instance: N must be positive");
    if (K <= 0) throw ArgumentError("generate_instance: K must be positive");
    if (p.resolution <= 0) throw ArgumentError("generate_instance: resolution must be positive");
    if (p.window < 0 || p.slack.lo < 0 || p.length.lo <= 0 || p.weight.lo <= 0 || p.drop.lo < 0)
        throw ArgumentError("generate_instance: parameter ranges violate task invariants");

    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(N), static_cast<std::uint32_t>(K)};
    std::mt19937_64 rng(seq);
    const std::int64_t res = p.resolution;
    auto draw = [&](IntRange range, std::int64_t scale) {
        std::uniform_int_distribution<std::int64_t> dist(range.lo * scale, range.hi * scale);
        return dist(rng);
    };

    ProblemInstance inst;
    inst.K = K;
    inst.window = p.window * res;
    inst.tasks.reserve(static_cast<std::size_t>(N));
    for (int n = 1; n <= N; ++n) {
        Task t;
        t.id = n;
        t.r = draw({0, p.window}, res);
        t.d = t.r + draw(p.slack, res);
        t.len = draw(p.length, res);
        t.drop = draw(p.drop, res * res);
        t.w = draw(p.weight, res);
        inst.tasks.push_back(t);
    }
    validate(inst);
    return inst;
}

}  // namespace radarsched

#include <gtest/gtest.h>

#include <map>

#include <radarsched/bnb.hpp>
#include <radarsched/mcts.hpp>

using namespace radarsched;
using namespace radarsched::mcts;

namespace {

ProblemInstance make(int K, std::vector<Task> tasks)
{
    ProblemInstance inst;
    inst.K = K;
    inst.tasks = std::move(tasks);
    return inst;
}

ProblemInstance small_instance(std::uint64_t seed)
{
    const int N = 4 + static_cast<int>(seed % 5);
    const int K = 1 + static_cast<int>((seed / 5) % 2);
    GenerationParams gp;
    gp.window = 10 * N / K;
    return generate_instance(seed, N, K, gp);
}

int child_for(const Search& s, int n, TaskId id)
{
    const int a = s.problem().index(id);
    for (const auto& b : s.node(n).branches)
        if (b.task == a) return b.child;
    return -1;
}

MctsConfig with(int M, std::uint64_t seed)
{
    MctsConfig c;
    c.rollouts = M;
    c.seed = seed;
    return c;
}

}  // namespace

TEST(SolveMcts, SingleTask)
{
    auto inst = make(2, {{1, 6, 9, 3, 2, 40}});
    for (int M : {1, 5, 50}) {
        auto r = solve_mcts(inst, with(M, 0));
        EXPECT_EQ(r.cost, 0);
        EXPECT_EQ(r.schedule.at(1).exec, 6);
    }
}

TEST(SolveMcts, EmptyInstance)
{
    ProblemInstance inst;
    inst.K = 1;
    auto r = solve_mcts(inst);
    EXPECT_EQ(r.cost, 0);
    EXPECT_TRUE(r.sequence.empty());
}

TEST(SolveMcts, NeverBeatsBnbAndOftenMatches)
{
    int equal = 0;
    const int n = 200;
    for (int s = 0; s < n; ++s) {
        auto inst = small_instance(static_cast<std::uint64_t>(s));
        auto opt = bnb::solve_bnb(inst).best_cost;
        auto r = solve_mcts(inst, with(50, static_cast<std::uint64_t>(s)));
        ASSERT_GE(r.cost, opt) << "seed " << s;
        EXPECT_EQ(r.cost, cost_of(inst, r.schedule));
        EXPECT_TRUE(is_viable(inst, r.schedule));
        if (r.cost == opt) ++equal;
    }
    EXPECT_GE(equal, n * 60 / 100);
}

TEST(SolveMcts, TinyTreesReachTheOracle)
{
    int equal = 0;
    const int n = 100;
    for (int s = 0; s < n; ++s) {
        GenerationParams gp;
        gp.window = 40;
        auto inst = generate_instance(7000 + static_cast<std::uint64_t>(s), 4, 1, gp);
        auto r = solve_mcts(inst, with(200, static_cast<std::uint64_t>(s)));
        if (r.cost == bnb::exhaustive_oracle(inst).best_cost) ++equal;
    }
    EXPECT_GE(equal, n * 95 / 100);
}

TEST(SolveMcts, Deterministic)
{
    auto inst = generate_instance(44, 25, 4);
    auto a = solve_mcts(inst, with(10, 3));
    auto b = solve_mcts(inst, with(10, 3));
    EXPECT_EQ(a.sequence, b.sequence);
    EXPECT_EQ(a.cost, b.cost);
    EXPECT_EQ(a.visited_nodes, b.visited_nodes);
}

TEST(SolveMcts, ConfigErrors)
{
    auto inst = generate_instance(1, 5, 2);
    EXPECT_THROW(solve_mcts(inst, with(0, 0)), ArgumentError);
    MctsConfig c;
    c.weights = std::make_shared<policy::PolicyWeights>(policy::initial_weights(26, 3, 0));
    EXPECT_THROW(solve_mcts(inst, c), ArgumentError);
}

TEST(SolveMcts, RunsWithNetworkPrior)
{
    auto w = std::make_shared<policy::PolicyWeights>(policy::initial_weights(30, 2, 5));
    for (std::uint64_t s = 0; s < 5; ++s) {
        auto inst = generate_instance(s, 12, 2);
        MctsConfig c = with(10, s);
        c.weights = w;
        auto r = solve_mcts(inst, c);
        EXPECT_GE(r.cost, bnb::solve_bnb(inst).best_cost);
        EXPECT_EQ(r.cost, cost_of(inst, r.schedule));
    }
}

TEST(SolveMcts, UpperBoundNeverIncreases)
{
    for (std::uint64_t s = 0; s < 20; ++s) {
        auto inst = generate_instance(s, 20, 4);
        Search search(inst, with(20, s));
        auto r = search.run();
        const auto& h = search.upper_bound_history();
        ASSERT_FALSE(h.empty());
        for (std::size_t i = 1; i < h.size(); ++i) EXPECT_LT(h[i], h[i - 1]);
        EXPECT_LE(h.back(), r.cost);
    }
}

TEST(SolveMcts, MoreRolloutsVisitMoreNodes)
{
    std::uint64_t prev = 0;
    for (int M : {1, 10, 50}) {
        std::uint64_t total = 0;
        for (std::uint64_t s = 0; s < 20; ++s) total += solve_mcts(generate_instance(s, 20, 4), with(M, s)).visited_nodes;
        EXPECT_GE(total, prev);
        prev = total;
    }
}

TEST(SolveMcts, SingleRolloutFollowsItsOwnPath)
{
    // With one rollout per phase every decision takes the first step of the
    // best terminal found so far, so the result is that terminal.
    for (std::uint64_t s = 0; s < 20; ++s) {
        auto inst = generate_instance(s, 15, 2);
        Search search(inst, with(1, s));
        auto r = search.run();
        EXPECT_EQ(r.cost, cost_of(inst, r.schedule));
        EXPECT_EQ(r.cost, search.node(0).best_cost);
    }
}

TEST(Expand, CapsBranchesAtNp)
{
    std::vector<Task> tasks;
    for (TaskId id = 1; id <= 8; ++id) tasks.push_back({id, 0, 100, 5, 1, 10});
    auto inst = make(8, tasks);
    MctsConfig c = with(1, 0);
    c.n_p = 5;
    Search s(inst, c);
    s.expand(0);
    EXPECT_EQ(s.node(0).branches.size(), 5u);
    EXPECT_EQ(s.node(0).d.count(), 3);
    EXPECT_EQ(s.node(0).nd.count(), 5);
    for (const auto& b : s.node(0).branches) EXPECT_NEAR(b.prior, 0.2, 1e-12);
}

TEST(Expand, AllChildrenBoundedMakesTerminal)
{
    auto inst = make(1, {{1, 0, 100, 10, 5, 3}, {2, 0, 100, 10, 5, 3}});
    Search s(inst, with(1, 0));
    s.expand(0);
    ASSERT_EQ(s.node(0).branches.size(), 2u);
    const int a = child_for(s, 0, 1);
    const int b = child_for(s, 0, 2);
    s.expand(a);  // finds 1,2 at cost 50
    EXPECT_EQ(s.upper_bound(), 50);
    EXPECT_TRUE(s.node(0).has_termination);
    EXPECT_EQ(s.node(0).best_cost, 50);

    s.expand(b);  // 2,1 also costs 50, which is not below the bound
    EXPECT_TRUE(s.node(b).terminal);
    EXPECT_TRUE(s.node(b).branches.empty());
    EXPECT_EQ(s.node(b).best_cost, 0 + 3);
    EXPECT_EQ(s.upper_bound(), 3);
    EXPECT_EQ(s.node(0).best_cost, 3);
}

TEST(Select, SingleBranch)
{
    auto inst = make(1, {{1, 0, 100, 5, 1, 10}});
    Search s(inst, with(1, 0));
    s.expand(0);
    ASSERT_EQ(s.node(0).branches.size(), 1u);
    for (int i = 0; i < 20; ++i) EXPECT_EQ(s.select_branch(0), s.node(0).branches[0].child);
}

TEST(Select, UniformFrequencies)
{
    std::vector<Task> tasks;
    for (TaskId id = 1; id <= 4; ++id) tasks.push_back({id, 0, 100, 5, 1, 10});
    Search s(make(4, tasks), with(1, 17));
    s.expand(0);
    ASSERT_EQ(s.node(0).branches.size(), 4u);
    std::map<int, int> hits;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) ++hits[s.select_branch(0)];
    ASSERT_EQ(hits.size(), 4u);
    for (const auto& [child, n] : hits) EXPECT_NEAR(n / static_cast<double>(draws), 0.25, 0.02);
}

TEST(Select, StaleChildIsPruned)
{
    // Branching on 2 first drops 3 by deadline, so that child is created at
    // cost 120 while the bound is still infinite.
    auto inst = make(1, {{1, 0, 1000, 1, 1, 500}, {2, 0, 1000, 50, 1, 500}, {3, 0, 10, 1, 1, 120}});
    Search s(inst, with(1, 5));
    s.expand(0);
    const int stale = child_for(s, 0, 2);
    ASSERT_GE(stale, 0);
    EXPECT_EQ(s.recorded_cost(stale), 120);

    const int a = child_for(s, 0, 1);
    s.expand(a);
    const int ac = child_for(s, a, 3);
    ASSERT_GE(ac, 0);
    s.expand(ac);
    ASSERT_LT(s.upper_bound(), 120);

    for (int i = 0; i < 100; ++i) {
        int c = s.select_branch(0);
        ASSERT_NE(c, stale);
    }
    EXPECT_LT(child_for(s, 0, 2), 0);
    EXPECT_TRUE(s.node(0).d.test(s.problem().index(2)));
    EXPECT_FALSE(s.node(0).nd.test(s.problem().index(2)));
}

TEST(Backup, MinRule)
{
    auto inst = make(1, {{1, 0, 100, 10, 5, 3}, {2, 0, 100, 10, 5, 3}});
    Search s(inst, with(1, 0));
    s.expand(0);
    const int a = child_for(s, 0, 1);
    s.backup(a, 40, {0, 1});
    EXPECT_TRUE(s.node(a).has_termination);
    EXPECT_EQ(s.node(0).best_cost, 40);
    s.backup(a, 70, {0});
    EXPECT_EQ(s.node(0).best_cost, 40);
    EXPECT_EQ(s.node(0).best_sequence, (std::vector<int>{0, 1}));
    s.backup(a, 10, {0});
    EXPECT_EQ(s.node(a).best_cost, 10);
    EXPECT_EQ(s.node(0).best_cost, 10);
}

TEST(Decide, FollowsBestSequence)
{
    auto inst = generate_instance(12, 10, 2);
    Search s(inst, with(5, 1));
    for (int m = 0; m < 5; ++m) s.simulate(0);
    ASSERT_TRUE(s.node(0).has_termination);
    const int next = s.decide(0);
    EXPECT_EQ(s.node(next).parent, 0);
    EXPECT_EQ(s.node(next).task, s.node(0).best_sequence[0]);
    EXPECT_EQ(s.node(next).best_cost, s.node(0).best_cost);
}

TEST(Decide, FallbackRolloutReachesATerminal)
{
    auto inst = generate_instance(3, 10, 2);
    Search s(inst, with(1, 0));
    s.expand(0);
    s.fallback_rollout(0);
    ASSERT_TRUE(s.node(0).has_termination);
    auto seq = s.problem().ids(s.node(0).best_sequence);
    EXPECT_EQ(cost_of(inst, schedule_from_sequence(inst, seq)), s.node(0).best_cost);
    EXPECT_GE(s.decide(0), 1);
}

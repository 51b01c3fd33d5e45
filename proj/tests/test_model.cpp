#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <radarsched/instance_io.hpp>
#include <radarsched/model.hpp>

using namespace radarsched;

namespace {

ProblemInstance make(int K, std::vector<Task> tasks)
{
    ProblemInstance inst;
    inst.K = K;
    inst.tasks = std::move(tasks);
    return inst;
}

Task task(TaskId id, Time r, Time d, Time len, Cost w = 1, Cost drop = 100)
{
    return {id, r, d, len, w, drop};
}

}  // namespace

TEST(CostOf, AllDroppedIsSumOfDroppingCosts)
{
    auto inst = make(2, {task(1, 0, 5, 3, 1, 120), task(2, 1, 4, 2, 2, 300), task(3, 2, 9, 1, 3, 45)});
    Schedule s{std::vector<Assignment>(3), 0};
    EXPECT_EQ(cost_of(inst, s), 465);
}

TEST(CostOf, EveryTaskAtItsStartTimeCostsNothing)
{
    auto inst = make(3, {task(1, 0, 5, 3), task(2, 1, 4, 2), task(3, 2, 9, 1)});
    auto mapped = map_sequence_to_schedule(inst, std::vector<TaskId>{1, 2, 3});
    EXPECT_EQ(mapped.schedule.at(1).exec, 0);
    EXPECT_EQ(mapped.schedule.at(2).exec, 1);
    EXPECT_EQ(mapped.schedule.at(3).exec, 2);
    EXPECT_EQ(cost_of(inst, mapped.schedule), 0);
}

TEST(CostOf, SingleChannelTwoTasksHandComputed)
{
    // A(r=0,len=5,w=2), B(r=0,len=3,w=4); A then B: B waits 5 ms at weight 4.
    auto inst = make(1, {task(1, 0, 100, 5, 2), task(2, 0, 100, 3, 4)});
    auto mapped = map_sequence_to_schedule(inst, std::vector<TaskId>{1, 2});
    EXPECT_EQ(mapped.schedule.at(1).exec, 0);
    EXPECT_EQ(mapped.schedule.at(2).exec, 5);
    EXPECT_EQ(mapped.schedule.total_cost, 20);
    EXPECT_EQ(tardiness_cost(inst, std::vector<TaskId>{1, 2}), 20);
}

TEST(CostOf, RejectsScheduleOfWrongSize)
{
    auto inst = make(1, {task(1, 0, 5, 1)});
    Schedule s{std::vector<Assignment>(2), 0};
    EXPECT_THROW(cost_of(inst, s), MalformedSchedule);
}

TEST(CostOf, RejectsChannelOutOfRange)
{
    auto inst = make(1, {task(1, 0, 5, 1)});
    Schedule s{{Assignment{2, 0}}, 0};
    EXPECT_THROW(cost_of(inst, s), MalformedSchedule);
}

TEST(Mapping, TwoChannelsEarliestAvailableSmallestIndex)
{
    auto inst = make(2, {task(1, 0, 100, 5), task(2, 0, 100, 3), task(3, 1, 100, 2)});
    auto m = map_sequence_to_schedule(inst, std::vector<TaskId>{1, 2, 3});
    EXPECT_EQ(m.schedule.at(1), (Assignment{1, 0}));
    EXPECT_EQ(m.schedule.at(2), (Assignment{2, 0}));
    EXPECT_EQ(m.schedule.at(3), (Assignment{2, 3}));
    EXPECT_EQ(m.channels.g, (std::vector<Time>{5, 5}));
}

TEST(Mapping, TieGoesToSmallestChannel)
{
    auto inst = make(3, {task(1, 4, 100, 2)});
    auto m = map_sequence_to_schedule(inst, std::vector<TaskId>{1});
    EXPECT_EQ(m.schedule.at(1).channel, 1);
}

TEST(Mapping, EmptySequence)
{
    auto inst = make(3, {task(1, 0, 5, 1), task(2, 0, 5, 1)});
    auto m = map_sequence_to_schedule(inst, std::vector<TaskId>{});
    EXPECT_EQ(m.channels.g, (std::vector<Time>{0, 0, 0}));
    EXPECT_EQ(m.schedule.dropped_count(), 2);
}

TEST(Mapping, SingleTaskStartsAtItsStartTime)
{
    auto inst = make(1, {task(1, 7, 9, 2)});
    auto m = map_sequence_to_schedule(inst, std::vector<TaskId>{1});
    EXPECT_EQ(m.schedule.at(1).exec, 7);
    EXPECT_EQ(m.channels.g, (std::vector<Time>{9}));
}

TEST(Mapping, DuplicateAndUnknownIdsAreMalformed)
{
    auto inst = make(1, {task(1, 0, 5, 1), task(2, 0, 5, 1)});
    EXPECT_THROW(map_sequence_to_schedule(inst, std::vector<TaskId>{1, 1}), MalformedSequence);
    EXPECT_THROW(map_sequence_to_schedule(inst, std::vector<TaskId>{3}), MalformedSequence);
    EXPECT_THROW(map_sequence_to_schedule(inst, std::vector<TaskId>{0}), MalformedSequence);
}

TEST(Mapping, DeadlineViolationsAreNotRejected)
{
    auto inst = make(1, {task(1, 0, 0, 5), task(2, 0, 2, 5)});
    auto m = map_sequence_to_schedule(inst, std::vector<TaskId>{1, 2});
    EXPECT_EQ(m.schedule.at(2).exec, 5);
    EXPECT_FALSE(is_viable(inst, m.schedule));
}

TEST(Viability, DeadlineBindsTheStartNotTheFinish)
{
    auto inst = make(1, {task(1, 0, 4, 9)});
    EXPECT_TRUE(is_viable(inst, Schedule{{Assignment{1, 0}}, 0}));
    EXPECT_FALSE(is_viable(inst, Schedule{{Assignment{1, 5}}, 0}));
    EXPECT_TRUE(is_viable(inst, Schedule{{Assignment{0, 0}}, 0}));
}

TEST(DroppingCost, Examples)
{
    auto inst = make(1, {task(1, 0, 5, 1, 1, 300), task(2, 0, 5, 1, 1, 150)});
    EXPECT_EQ(dropping_cost(inst, std::vector<TaskId>{}), 0);
    EXPECT_EQ(dropping_cost(inst, std::vector<TaskId>{1}), 300);
    EXPECT_THROW(dropping_cost(inst, std::vector<TaskId>{4}), MalformedSchedule);
}

TEST(MappingProperty, RandomSequencesRespectStartTimesAndNeverOverlap)
{
    std::mt19937 rng(7);
    for (int s = 0; s < 200; ++s) {
        auto inst = generate_instance(s, 12, 1 + s % 4);
        std::vector<TaskId> seq(12);
        std::iota(seq.begin(), seq.end(), 1);
        std::shuffle(seq.begin(), seq.end(), rng);
        seq.resize(static_cast<std::size_t>(1 + s % 12));
        auto m = map_sequence_to_schedule(inst, seq);
        std::vector<Time> last_end(static_cast<std::size_t>(inst.K), 0);
        for (TaskId id : seq) {
            const auto& a = m.schedule.at(id);
            ASSERT_GE(a.exec, inst.task(id).r);
            ASSERT_GE(a.exec, last_end[static_cast<std::size_t>(a.channel - 1)]);
            last_end[static_cast<std::size_t>(a.channel - 1)] = a.exec + inst.task(id).len;
        }
        EXPECT_EQ(last_end, m.channels.g);
        EXPECT_EQ(m.schedule.total_cost, tardiness_cost(inst, seq) + [&] {
            Cost c = 0;
            for (const Task& t : inst.tasks)
                if (!m.schedule.at(t.id).scheduled()) c += t.drop;
            return c;
        }());
    }
}

TEST(Generate, DeterministicForASeed)
{
    EXPECT_EQ(generate_instance(42, 30, 4), generate_instance(42, 30, 4));
    EXPECT_NE(generate_instance(42, 30, 4), generate_instance(43, 30, 4));
}

TEST(Generate, DefaultRangesHold)
{
    for (std::uint64_t s = 0; s < 50; ++s) {
        auto inst = generate_instance(s, 40, 4);
        ASSERT_EQ(inst.size(), 40);
        for (std::size_t i = 0; i < inst.tasks.size(); ++i) {
            const Task& t = inst.tasks[i];
            EXPECT_EQ(t.id, static_cast<TaskId>(i + 1));
            EXPECT_GE(t.r, 0);
            EXPECT_LE(t.r, 100);
            EXPECT_GE(t.d - t.r, 2);
            EXPECT_LE(t.d - t.r, 12);
            EXPECT_GE(t.len, 2);
            EXPECT_LE(t.len, 11);
            EXPECT_GE(t.drop, 100);
            EXPECT_LE(t.drop, 500);
            EXPECT_GE(t.w, 1);
            EXPECT_LE(t.w, 5);
        }
    }
}

TEST(Generate, ResolutionScalesUnits)
{
    GenerationParams p;
    p.resolution = 10;
    auto inst = generate_instance(3, 40, 2, p);
    EXPECT_EQ(inst.window, 1000);
    for (const Task& t : inst.tasks) {
        EXPECT_LE(t.r, 1000);
        EXPECT_GE(t.d - t.r, 20);
        EXPECT_LE(t.d - t.r, 120);
        EXPECT_GE(t.drop, 10000);
        EXPECT_LE(t.drop, 50000);
        EXPECT_GE(t.w, 10);
        EXPECT_LE(t.w, 50);
    }
}

TEST(Generate, RejectsNonPositiveSizes)
{
    EXPECT_THROW(generate_instance(0, 0, 4), ArgumentError);
    EXPECT_THROW(generate_instance(0, 4, 0), ArgumentError);
    EXPECT_NO_THROW(generate_instance(0, 1, 1));
}

TEST(Validate, RejectsBrokenTasks)
{
    EXPECT_THROW(validate(make(1, {task(1, 5, 4, 1)})), ValidationError);
    EXPECT_THROW(validate(make(1, {task(1, 0, 4, 0)})), ValidationError);
    EXPECT_THROW(validate(make(1, {task(1, 0, 4, 1, 0)})), ValidationError);
    EXPECT_THROW(validate(make(1, {task(1, 0, 4, 1, 1, -1)})), ValidationError);
    EXPECT_THROW(validate(make(0, {task(1, 0, 4, 1)})), ValidationError);
    EXPECT_THROW(validate(make(1, {task(2, 0, 4, 1)})), ValidationError);
}

TEST(InstanceIo, RoundTripThroughFile)
{
    auto inst = generate_instance(11, 25, 3);
    auto path = std::filesystem::temp_directory_path() / "radarsched_roundtrip.json";
    write_instance(inst, path);
    EXPECT_EQ(read_instance(path), inst);
    std::filesystem::remove(path);
}

TEST(InstanceIo, MissingFieldIsNamed)
{
    const std::string text = R"({"K":1,"tasks":[{"id":1,"r":0,"d":4,"w":1,"drop":3}]})";
    try {
        parse_instance(text, "x.json");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("'len'"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("x.json"), std::string::npos) << e.what();
    }
}

TEST(InstanceIo, DeadlineBeforeStartIsValidationError)
{
    const std::string text = R"({"K":1,"tasks":[{"id":1,"r":5,"d":4,"len":2,"w":1,"drop":3}]})";
    EXPECT_THROW(parse_instance(text), ValidationError);
}

TEST(InstanceIo, SyntaxErrorReportsLine)
{
    const std::string text = "{\n\"K\": 1,\n\"tasks\": [\n  {\"id\": 1,, }\n]}";
    try {
        parse_instance(text, "bad.json");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("bad.json:4:"), std::string::npos) << e.what();
    }
}

TEST(InstanceIo, WrongTypeIsReported)
{
    EXPECT_THROW(parse_instance(R"({"K":"two","tasks":[]})"), ParseError);
    EXPECT_THROW(parse_instance(R"({"K":1,"tasks":{}})"), ParseError);
    EXPECT_THROW(parse_instance(R"([1,2])"), ParseError);
}

TEST(ScheduleCsv, DroppedTasksUseChannelZero)
{
    auto inst = make(1, {task(1, 0, 10, 3), task(2, 0, 10, 3)});
    auto s = schedule_from_sequence(inst, std::vector<TaskId>{2});
    std::ostringstream out;
    write_schedule_csv(s, out);
    EXPECT_EQ(out.str(), "task_id,channel,exec_time\n1,0,0\n2,1,0\n");
}

#pragma once

// Search traces as JSON lines, one record per line:
//   {"seq":[ids],"nd":[ids],"d":[ids],"g":[...],"astar":id,"best_cost":int,
//    "tasks":{"id":{"r","d","len","w","drop"}}}
// "tasks" holds every task in nd and d so a record can be encoded on its own.

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bnb.hpp"
#include "instance_io.hpp"

namespace radarsched {

struct TraceSample {
    std::vector<TaskId> sequence;
    std::vector<Task> nd;
    std::vector<Task> d;
    std::vector<Time> g;
    TaskId astar = 0;
    Cost best_cost = 0;
};

inline nlohmann::json trace_record_json(const ProblemInstance& inst, const bnb::TraceRecord& rec)
{
    nlohmann::json tasks = nlohmann::json::object();
    auto add = [&](TaskId id) {
        const Task& t = inst.task(id);
        tasks[std::to_string(id)] = {{"r", t.r}, {"d", t.d}, {"len", t.len}, {"w", t.w}, {"drop", t.drop}};
    };
    for (TaskId id : rec.nd) add(id);
    for (TaskId id : rec.d) add(id);
    return {{"seq", rec.sequence}, {"nd", rec.nd},     {"d", rec.d},        {"g", rec.g},
            {"astar", rec.astar},  {"best_cost", rec.best_cost}, {"tasks", std::move(tasks)}};
}

inline void write_trace_jsonl(const ProblemInstance& inst, const bnb::SearchTrace& trace, std::ostream& out)
{
    for (const auto& rec : trace.records) out << trace_record_json(inst, rec).dump() << '\n';
}

inline TraceSample trace_sample_from_json(const nlohmann::json& j, const std::string& where)
{
    TraceSample s;
    auto ids = [&](const char* field) {
        auto it = j.find(field);
        if (it == j.end() || !it->is_array()) throw ParseError(where + ": missing array '" + field + "'");
        return it->get<std::vector<TaskId>>();
    };
    const auto& tasks = j.at("tasks");
    auto lookup = [&](TaskId id) {
        auto key = std::to_string(id);
        if (!tasks.contains(key)) throw ParseError(where + ": task " + key + " missing from 'tasks'");
        const auto& t = tasks.at(key);
        return Task{id,
                    detail::required_int(t, "r", where),
                    detail::required_int(t, "d", where),
                    detail::required_int(t, "len", where),
                    detail::required_int(t, "w", where),
                    detail::required_int(t, "drop", where)};
    };
    if (j.contains("seq")) s.sequence = ids("seq");
    for (TaskId id : ids("nd")) s.nd.push_back(lookup(id));
    for (TaskId id : ids("d")) s.d.push_back(lookup(id));
    s.g = j.at("g").get<std::vector<Time>>();
    s.astar = j.at("astar").get<TaskId>();
    s.best_cost = j.at("best_cost").get<Cost>();
    return s;
}

inline std::vector<TraceSample> read_trace_jsonl(std::istream& in, const std::string& source = "trace")
{
    std::vector<TraceSample> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = source + ":" + std::to_string(lineno);
        try {
            out.push_back(trace_sample_from_json(nlohmann::json::parse(line), where));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(where + ": " + e.what());
        }
    }
    return out;
}

}  // namespace radarsched

#pragma once

// Instance JSON files and schedule CSV export.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "model.hpp"

namespace radarsched {

class ParseError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline std::int64_t required_int(const nlohmann::json& obj, const char* field,
                                 const std::string& where)
{
    auto it = obj.find(field);
    if (it == obj.end()) throw ParseError(where + ": missing field '" + field + "'");
    if (!it->is_number_integer())
        throw ParseError(where + ": field '" + field + "' must be an integer");
    return it->get<std::int64_t>();
}

inline int line_of(const std::string& text, std::size_t byte)
{
    byte = std::min(byte, text.size());
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

}  // namespace detail

inline nlohmann::json to_json(const ProblemInstance& inst)
{
    nlohmann::json tasks = nlohmann::json::array();
    for (const Task& t : inst.tasks)
        tasks.push_back({{"id", t.id}, {"r", t.r}, {"d", t.d}, {"len", t.len}, {"w", t.w},
                         {"drop", t.drop}});
    return {{"K", inst.K}, {"window", inst.window}, {"tasks", std::move(tasks)}};
}

/// Builds and validates an instance.  `source` prefixes error messages.
inline ProblemInstance instance_from_json(const nlohmann::json& j, const std::string& source = "instance")
{
    if (!j.is_object()) throw ParseError(source + ": top level must be an object");
    ProblemInstance inst;
    inst.K = static_cast<int>(detail::required_int(j, "K", source));
    inst.window = j.contains("window") ? detail::required_int(j, "window", source) : 100;
    auto it = j.find("tasks");
    if (it == j.end()) throw ParseError(source + ": missing field 'tasks'");
    if (!it->is_array()) throw ParseError(source + ": field 'tasks' must be an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
        const auto& jt = (*it)[i];
        std::string where = source + ": tasks[" + std::to_string(i) + "]";
        if (!jt.is_object()) throw ParseError(where + ": must be an object");
        Task t;
        t.id = static_cast<TaskId>(detail::required_int(jt, "id", where));
        t.r = detail::required_int(jt, "r", where);
        t.d = detail::required_int(jt, "d", where);
        t.len = detail::required_int(jt, "len", where);
        t.w = detail::required_int(jt, "w", where);
        t.drop = detail::required_int(jt, "drop", where);
        inst.tasks.push_back(t);
    }
    try {
        validate(inst);
    } catch (const ValidationError& e) {
        throw ValidationError(source + ": " + e.what());
    }
    return inst;
}

inline ProblemInstance parse_instance(const std::string& text, const std::string& source = "instance")
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(source + ":" + std::to_string(detail::line_of(text, e.byte)) + ": " + e.what());
    }
    return instance_from_json(j, source);
}

inline ProblemInstance read_instance(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ParseError(path.string() + ": cannot open");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_instance(buf.str(), path.string());
}

inline void write_instance(const ProblemInstance& inst, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) throw Error(path.string() + ": cannot open for writing");
    out << to_json(inst).dump(1) << '\n';
}

/// `task_id,channel,exec_time`, channel 0 for dropped tasks.
inline void write_schedule_csv(const Schedule& s, std::ostream& out)
{
    out << "task_id,channel,exec_time\n";
    for (std::size_t i = 0; i < s.by_task.size(); ++i) {
        const auto& a = s.by_task[i];
        out << (i + 1) << ',' << a.channel << ',' << (a.scheduled() ? a.exec : 0) << '\n';
    }
}

}  // namespace radarsched

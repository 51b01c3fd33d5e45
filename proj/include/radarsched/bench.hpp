#pragma once

// Experiment harness behind the command line tool: seeded instance sets,
// per-solver runs on a worker pool, metrics CSVs and summary tables.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "bnb.hpp"
#include "heuristics.hpp"
#include "instance_io.hpp"
#include "mcts.hpp"
#include "trace_io.hpp"
#include "weights_io.hpp"

namespace radarsched::bench {

namespace fs = std::filesystem;

inline const std::vector<std::string>& known_solvers()
{
    static const std::vector<std::string> names{"bnb", "mcts", "est", "est_sw", "ed", "ed_sw"};
    return names;
}

/// B&B above this size needs an explicit node budget.
inline constexpr int kBnbUnboundedMaxN = 45;

struct ExperimentSpec {
    std::vector<std::string> solvers = known_solvers();
    std::vector<int> N{40};
    int K = 4;
    std::vector<int> M{50};
    int instances = 100;
    std::uint64_t seed = 0;
    Time window = 100;
    std::string prior = "uniform";  // or "trained"
    std::string weights;            // container path, required for the trained prior
    std::optional<std::uint64_t> node_budget;
    int threads = 0;  // 0: hardware concurrency
};

inline ExperimentSpec preset(const std::string& name)
{
    ExperimentSpec s;
    if (name == "paper") {
        s.N = {25, 30, 35, 40, 45, 50};
        s.M = {50};
        s.instances = 1000;
        s.node_budget = 50'000'000;
    } else if (name == "desk") {
        s.N = {20, 25, 30, 35};
        s.M = {1, 10, 50};
        s.instances = 20;
        s.node_budget = 5'000'000;
    } else {
        throw ArgumentError("unknown preset '" + name + "' (expected paper or desk)");
    }
    return s;
}

inline nlohmann::json to_json(const ExperimentSpec& s)
{
    nlohmann::json j{{"solvers", s.solvers}, {"N", s.N},           {"K", s.K},
                     {"M", s.M},             {"instances", s.instances}, {"seed", s.seed},
                     {"window", s.window},   {"prior", s.prior},   {"threads", s.threads}};
    if (!s.weights.empty()) j["weights"] = s.weights;
    if (s.node_budget) j["node_budget"] = *s.node_budget;
    return j;
}

inline void validate(const ExperimentSpec& s)
{
    if (s.solvers.empty()) throw ArgumentError("spec: no solvers listed");
    for (const auto& name : s.solvers)
        if (std::find(known_solvers().begin(), known_solvers().end(), name) == known_solvers().end())
            throw ArgumentError("spec: unknown solver '" + name + "'");
    if (s.N.empty()) throw ArgumentError("spec: N list is empty");
    for (int n : s.N)
        if (n < 1 || n > search::kMaxTasks)
            throw ArgumentError("spec: N = " + std::to_string(n) + " outside [1, " +
                                std::to_string(search::kMaxTasks) + "]");
    if (s.K < 1 || s.K > search::kMaxChannels)
        throw ArgumentError("spec: K must be in [1, " + std::to_string(search::kMaxChannels) + "]");
    for (int m : s.M)
        if (m < 1) throw ArgumentError("spec: every M must be at least 1");
    if (s.instances < 1) throw ArgumentError("spec: instances must be positive");
    if (s.window < 0) throw ArgumentError("spec: window must be nonnegative");
    if (s.prior != "uniform" && s.prior != "trained")
        throw ArgumentError("spec: prior must be 'uniform' or 'trained'");
    const bool has = [&](const char* n) {
        return std::find(s.solvers.begin(), s.solvers.end(), n) != s.solvers.end();
    }("mcts");
    if (has && s.M.empty()) throw ArgumentError("spec: mcts requested with an empty M list");
    if (has && s.prior == "trained") {
        if (s.weights.empty()) throw ArgumentError("spec: trained prior requested but no weights file given");
        if (!fs::exists(s.weights)) throw ArgumentError("spec: weights file '" + s.weights + "' does not exist");
    }
    if (!s.node_budget && std::find(s.solvers.begin(), s.solvers.end(), "bnb") != s.solvers.end())
        for (int n : s.N)
            if (n > kBnbUnboundedMaxN)
                throw ArgumentError("spec: bnb at N = " + std::to_string(n) + " needs an explicit node_budget");
}

inline ExperimentSpec spec_from_json(const nlohmann::json& j, const std::string& source = "spec")
{
    if (!j.is_object()) throw ParseError(source + ": top level must be an object");
    static const std::vector<std::string> allowed{"solvers", "N",      "K",     "M",           "instances", "seed",
                                                  "window",  "prior", "weights", "node_budget", "threads",  "preset"};
    for (const auto& [key, _] : j.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ParseError(source + ": unknown field '" + key + "'");
    ExperimentSpec s = j.contains("preset") ? preset(j.at("preset").get<std::string>()) : ExperimentSpec{};
    try {
        if (j.contains("solvers")) s.solvers = j.at("solvers").get<std::vector<std::string>>();
        if (j.contains("N")) s.N = j.at("N").get<std::vector<int>>();
        if (j.contains("K")) s.K = j.at("K").get<int>();
        if (j.contains("M")) s.M = j.at("M").get<std::vector<int>>();
        if (j.contains("instances")) s.instances = j.at("instances").get<int>();
        if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("window")) s.window = j.at("window").get<Time>();
        if (j.contains("prior")) s.prior = j.at("prior").get<std::string>();
        if (j.contains("weights")) s.weights = j.at("weights").get<std::string>();
        if (j.contains("node_budget")) {
            if (j.at("node_budget").is_null())
                s.node_budget.reset();
            else
                s.node_budget = j.at("node_budget").get<std::uint64_t>();
        }
        if (j.contains("threads")) s.threads = j.at("threads").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(source + ": " + e.what());
    }
    return s;
}

inline ExperimentSpec read_spec(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw ParseError(path.string() + ": cannot open");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return spec_from_json(j, path.string());
}

namespace detail {

inline std::uint64_t mix(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace detail

/// Seed of instance `index` in the size-N set.
inline std::uint64_t instance_seed(std::uint64_t seed, int N, int index)
{
    return detail::mix(detail::mix(seed ^ detail::mix(static_cast<std::uint64_t>(N))) +
                       static_cast<std::uint64_t>(index));
}

inline ProblemInstance make_instance(const ExperimentSpec& s, int N, int index)
{
    GenerationParams gp;
    gp.window = s.window;
    return generate_instance(instance_seed(s.seed, N, index), N, s.K, gp);
}

inline std::string instance_name(int N, int index)
{
    std::ostringstream os;
    os << "N" << N << "_" << std::setw(4) << std::setfill('0') << index;
    return os.str();
}

struct MetricsRow {
    std::string solver;
    int N = 0;
    int K = 0;
    int M = 0;  // 0 for solvers without rollouts
    int instance_id = 0;
    Cost cost = 0;
    std::uint64_t nodes = 0;
    int dropped = 0;
    double wall_ms = 0.0;
    bool budget_exhausted = false;
    Schedule schedule;
};

struct RunOptions {
    bool timing = true;  // false writes wall_ms = 0 so reruns are byte-identical
    std::shared_ptr<const policy::PolicyWeights> weights;
};

/// Runs one solver on one instance.
inline MetricsRow run_solver(const std::string& solver, const ProblemInstance& inst, int M,
                             std::uint64_t seed, const ExperimentSpec& spec, const RunOptions& opt)
{
    MetricsRow row;
    row.solver = solver;
    row.N = inst.size();
    row.K = inst.K;
    const auto t0 = std::chrono::steady_clock::now();
    if (solver == "bnb") {
        bnb::BnBOptions o;
        o.node_budget = spec.node_budget;
        auto r = bnb::solve_bnb(inst, o);
        row.cost = r.best_cost;
        row.nodes = r.visited_nodes;
        row.budget_exhausted = !r.optimal;
        row.schedule = std::move(r.schedule);
    } else if (solver == "mcts") {
        mcts::MctsConfig c;
        c.rollouts = M;
        c.seed = seed;
        c.weights = opt.weights;
        auto r = mcts::solve_mcts(inst, c);
        row.M = M;
        row.cost = r.cost;
        row.nodes = r.visited_nodes;
        row.schedule = std::move(r.schedule);
    } else {
        heuristics::HeuristicConfig c;
        if (solver == "est") c = {heuristics::Order::EST, false};
        else if (solver == "est_sw") c = {heuristics::Order::EST, true};
        else if (solver == "ed") c = {heuristics::Order::ED, false};
        else if (solver == "ed_sw") c = {heuristics::Order::ED, true};
        else throw ArgumentError("unknown solver '" + solver + "'");
        auto r = heuristics::solve_heuristic(inst, c);
        row.cost = r.schedule.total_cost;
        row.schedule = std::move(r.schedule);
    }
    if (opt.timing)
        row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    row.dropped = row.schedule.dropped_count();
    return row;
}

/// Runs `count` jobs on `threads` workers; results are stored by job index.
template <class Job>
void parallel_for(int count, int threads, Job&& job)
{
    int n = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    n = std::min(n, count);
    if (n <= 1) {
        for (int i = 0; i < count; ++i) job(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t)
        pool.emplace_back([&] {
            for (int i = next++; i < count; i = next++) {
                try {
                    job(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

inline std::shared_ptr<const policy::PolicyWeights> load_spec_weights(const ExperimentSpec& s)
{
    if (s.prior != "trained") return nullptr;
    auto w = std::make_shared<policy::PolicyWeights>(policy::load_weights(s.weights));
    if (w->K != s.K)
        throw ArgumentError("weights '" + s.weights + "' expect K = " + std::to_string(w->K) + ", spec has K = " +
                            std::to_string(s.K));
    return w;
}

/// Every (solver, N, M, instance) run of a spec, in a fixed order.
inline std::vector<MetricsRow> run_experiment(const ExperimentSpec& s, RunOptions opt = {})
{
    validate(s);
    if (!opt.weights) opt.weights = load_spec_weights(s);
    struct Job {
        std::string solver;
        int N, M, index;
    };
    std::vector<Job> jobs;
    for (int N : s.N)
        for (const auto& solver : s.solvers) {
            std::vector<int> ms = solver == "mcts" ? s.M : std::vector<int>{0};
            for (int M : ms)
                for (int i = 0; i < s.instances; ++i) jobs.push_back({solver, N, M, i});
        }
    std::vector<MetricsRow> rows(jobs.size());
    parallel_for(static_cast<int>(jobs.size()), s.threads, [&](int j) {
        const Job& job = jobs[static_cast<std::size_t>(j)];
        auto inst = make_instance(s, job.N, job.index);
        const std::uint64_t seed = detail::mix(instance_seed(s.seed, job.N, job.index) ^
                                               detail::mix(static_cast<std::uint64_t>(job.M)));
        auto row = run_solver(job.solver, inst, job.M, seed, s, opt);
        row.instance_id = job.index;
        rows[static_cast<std::size_t>(j)] = std::move(row);
    });
    return rows;
}

inline constexpr const char* kMetricsHeader = "solver,N,K,M,instance_id,cost,nodes,dropped,wall_ms";

inline void write_metrics_csv(const std::vector<MetricsRow>& rows, std::ostream& out)
{
    out << kMetricsHeader << '\n';
    for (const auto& r : rows) {
        out << r.solver << ',' << r.N << ',' << r.K << ',' << r.M << ',' << r.instance_id << ',' << r.cost << ','
            << r.nodes << ',' << r.dropped << ',' << std::fixed << std::setprecision(3) << r.wall_ms << '\n';
        out.unsetf(std::ios::floatfield);
    }
}

/// Instances on which a solver ran out of node budget.
inline void write_flags_csv(const std::vector<MetricsRow>& rows, std::ostream& out)
{
    out << "solver,N,K,M,instance_id,flag\n";
    for (const auto& r : rows)
        if (r.budget_exhausted)
            out << r.solver << ',' << r.N << ',' << r.K << ',' << r.M << ',' << r.instance_id << ",node_budget\n";
}

inline std::vector<MetricsRow> read_metrics_csv(std::istream& in, const std::string& source = "metrics")
{
    std::string line;
    if (!std::getline(in, line) || line != kMetricsHeader)
        throw ParseError(source + ":1: expected header '" + std::string(kMetricsHeader) + "'");
    std::vector<MetricsRow> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
        if (f.size() != 9)
            throw ParseError(source + ":" + std::to_string(lineno) + ": expected 9 fields, found " +
                             std::to_string(f.size()));
        try {
            MetricsRow r;
            r.solver = f[0];
            r.N = std::stoi(f[1]);
            r.K = std::stoi(f[2]);
            r.M = std::stoi(f[3]);
            r.instance_id = std::stoi(f[4]);
            r.cost = std::stoll(f[5]);
            r.nodes = std::stoull(f[6]);
            r.dropped = std::stoi(f[7]);
            r.wall_ms = std::stod(f[8]);
            rows.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw ParseError(source + ":" + std::to_string(lineno) + ": malformed number");
        }
    }
    return rows;
}

struct SummaryRow {
    std::string solver;
    int N = 0;
    int K = 0;
    int M = 0;
    int instances = 0;
    double mean_cost = 0.0;
    double mean_nodes = 0.0;
    double no_drop_probability = 0.0;
    double median_wall_ms = 0.0;
    double p95_wall_ms = 0.0;
};

/// Fraction of runs with no dropped task.
inline double no_drop_probability(const std::vector<MetricsRow>& rows)
{
    if (rows.empty()) return 0.0;
    auto n = std::count_if(rows.begin(), rows.end(), [](const MetricsRow& r) { return r.dropped == 0; });
    return static_cast<double>(n) / static_cast<double>(rows.size());
}

/// Nearest-rank percentile.
inline double percentile(std::vector<double> v, double q)
{
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
    return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

/// One row per (solver, N, K, M), ordered by N, then by solver as listed
/// in known_solvers(), then M.
inline std::vector<SummaryRow> summarize(const std::vector<MetricsRow>& rows)
{
    auto rank = [](const std::string& s) {
        auto it = std::find(known_solvers().begin(), known_solvers().end(), s);
        return static_cast<int>(it - known_solvers().begin());
    };
    std::map<std::tuple<int, int, int, std::string, int>, std::vector<const MetricsRow*>> groups;
    for (const auto& r : rows) groups[{r.N, r.K, rank(r.solver), r.solver, r.M}].push_back(&r);
    std::vector<SummaryRow> out;
    for (const auto& [key, group] : groups) {
        SummaryRow s;
        s.solver = std::get<3>(key);
        s.N = std::get<0>(key);
        s.K = std::get<1>(key);
        s.M = std::get<4>(key);
        s.instances = static_cast<int>(group.size());
        std::vector<double> walls;
        std::vector<MetricsRow> copy;
        for (const MetricsRow* r : group) {
            s.mean_cost += static_cast<double>(r->cost);
            s.mean_nodes += static_cast<double>(r->nodes);
            walls.push_back(r->wall_ms);
            copy.push_back(*r);
        }
        s.mean_cost /= s.instances;
        s.mean_nodes /= s.instances;
        s.no_drop_probability = no_drop_probability(copy);
        s.median_wall_ms = percentile(walls, 0.5);
        s.p95_wall_ms = percentile(walls, 0.95);
        out.push_back(std::move(s));
    }
    return out;
}

inline void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& out)
{
    out << "solver,N,K,M,instances,mean_cost,mean_nodes,no_drop_probability,median_wall_ms,p95_wall_ms\n";
    out << std::fixed;
    for (const auto& s : rows)
        out << s.solver << ',' << s.N << ',' << s.K << ',' << s.M << ',' << s.instances << ',' << std::setprecision(2)
            << s.mean_cost << ',' << s.mean_nodes << ',' << std::setprecision(4) << s.no_drop_probability << ','
            << std::setprecision(3) << s.median_wall_ms << ',' << s.p95_wall_ms << '\n';
    out.unsetf(std::ios::floatfield);
}

// Subcommands.  Each writes into `out_dir` and returns what it wrote.

inline void ensure_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(dir.string() + ": cannot create directory: " + ec.message());
}

inline std::ofstream open_out(const fs::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(path.string() + ": cannot open for writing");
    return out;
}

inline std::vector<fs::path> cmd_generate(const ExperimentSpec& s, const fs::path& out_dir)
{
    validate(s);
    ensure_dir(out_dir / "instances");
    std::vector<fs::path> written;
    for (int N : s.N)
        for (int i = 0; i < s.instances; ++i) {
            auto path = out_dir / "instances" / (instance_name(N, i) + ".json");
            write_instance(make_instance(s, N, i), path);
            written.push_back(path);
        }
    auto spec_out = open_out(out_dir / "spec.json");
    spec_out << to_json(s).dump(2) << '\n';
    return written;
}

struct SolveOptions {
    bool timing = true;
    bool schedules = false;  // also write one schedule CSV per run
};

inline std::vector<MetricsRow> cmd_solve(const ExperimentSpec& s, const fs::path& out_dir, const SolveOptions& opt = {})
{
    RunOptions ro;
    ro.timing = opt.timing;
    auto rows = run_experiment(s, ro);
    ensure_dir(out_dir);
    {
        auto out = open_out(out_dir / "metrics.csv");
        write_metrics_csv(rows, out);
    }
    {
        auto out = open_out(out_dir / "flags.csv");
        write_flags_csv(rows, out);
    }
    if (opt.schedules) {
        ensure_dir(out_dir / "schedules");
        for (const auto& r : rows) {
            std::string name = r.solver + (r.M ? "_M" + std::to_string(r.M) : "") + "_" + instance_name(r.N, r.instance_id);
            auto out = open_out(out_dir / "schedules" / (name + ".csv"));
            write_schedule_csv(r.schedule, out);
        }
    }
    return rows;
}

/// B&B with trace recording on every instance; one JSONL file per instance
/// plus a metrics CSV for the recorded runs.
inline std::vector<MetricsRow> cmd_record(const ExperimentSpec& s, const fs::path& out_dir, const SolveOptions& opt = {})
{
    validate(s);
    ensure_dir(out_dir / "traces");
    struct Job {
        int N, index;
    };
    std::vector<Job> jobs;
    for (int N : s.N)
        for (int i = 0; i < s.instances; ++i) jobs.push_back({N, i});
    std::vector<MetricsRow> rows(jobs.size());
    parallel_for(static_cast<int>(jobs.size()), s.threads, [&](int j) {
        const Job& job = jobs[static_cast<std::size_t>(j)];
        auto inst = make_instance(s, job.N, job.index);
        const auto t0 = std::chrono::steady_clock::now();
        bnb::BnBOptions o;
        o.record_trace = true;
        o.node_budget = s.node_budget;
        auto r = bnb::solve_bnb(inst, o);
        MetricsRow row;
        row.solver = "bnb";
        row.N = job.N;
        row.K = s.K;
        row.instance_id = job.index;
        row.cost = r.best_cost;
        row.nodes = r.visited_nodes;
        row.dropped = r.schedule.dropped_count();
        row.budget_exhausted = !r.optimal;
        if (opt.timing)
            row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        auto out = open_out(out_dir / "traces" / (instance_name(job.N, job.index) + ".jsonl"));
        write_trace_jsonl(inst, *r.trace, out);
        rows[static_cast<std::size_t>(j)] = std::move(row);
    });
    {
        auto out = open_out(out_dir / "metrics.csv");
        write_metrics_csv(rows, out);
    }
    {
        auto out = open_out(out_dir / "flags.csv");
        write_flags_csv(rows, out);
    }
    return rows;
}

inline std::vector<SummaryRow> cmd_compare(const std::vector<fs::path>& metrics_files, const fs::path& out_dir)
{
    if (metrics_files.empty()) throw ArgumentError("compare: no metrics files given");
    std::vector<MetricsRow> rows;
    for (const auto& p : metrics_files) {
        std::ifstream in(p);
        if (!in) throw ParseError(p.string() + ": cannot open");
        auto part = read_metrics_csv(in, p.string());
        rows.insert(rows.end(), part.begin(), part.end());
    }
    auto summary = summarize(rows);
    ensure_dir(out_dir);
    auto out = open_out(out_dir / "summary.csv");
    write_summary_csv(summary, out);
    return summary;
}

}  // namespace radarsched::bench

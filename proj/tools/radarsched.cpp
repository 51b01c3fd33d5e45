// radarsched: generate instance sets, run solvers, record B&B traces and
// summarize metrics.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <radarsched/bench.hpp>

namespace fs = std::filesystem;
using namespace radarsched;

namespace {

struct Common {
    std::string spec;
    std::string preset;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c)
{
    cmd->add_option("--spec", c.spec, "Experiment spec JSON file");
    cmd->add_option("--preset", c.preset, "Named preset used when no spec is given")
        ->check(CLI::IsMember({"paper", "desk"}));
    cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
    cmd->add_option("--seed", c.seed, "Overrides the spec seed");
}

bench::ExperimentSpec load(const Common& c)
{
    bench::ExperimentSpec s;
    if (!c.spec.empty())
        s = bench::read_spec(c.spec);
    else if (!c.preset.empty())
        s = bench::preset(c.preset);
    else
        throw ArgumentError("either --spec or --preset is required");
    if (c.seed) s.seed = *c.seed;
    return s;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Radar task scheduling solvers and experiment harness"};
    app.require_subcommand(1);

    Common gen_c, solve_c, rec_c;
    bool no_timing = false, schedules = false;
    std::string weights;

    auto* gen = app.add_subcommand("generate", "Write the seeded instance set of a spec");
    add_common(gen, gen_c);

    auto* solve = app.add_subcommand("solve", "Run every solver of a spec and write metrics.csv");
    add_common(solve, solve_c);
    solve->add_option("--weights", weights, "Policy weight container (selects the trained prior)");
    solve->add_flag("--no-timing", no_timing, "Write wall_ms as 0 for byte-identical reruns");
    solve->add_flag("--schedules", schedules, "Also write one schedule CSV per run");

    auto* rec = app.add_subcommand("record", "Run B&B with trace recording and write JSONL traces");
    add_common(rec, rec_c);
    bool rec_no_timing = false;
    rec->add_flag("--no-timing", rec_no_timing, "Write wall_ms as 0 for byte-identical reruns");

    std::vector<std::string> metrics;
    std::string cmp_out = "out";
    auto* cmp = app.add_subcommand("compare", "Summarize one or more metrics CSVs into summary.csv");
    cmp->add_option("metrics", metrics, "Metrics CSV files")->required()->check(CLI::ExistingFile);
    cmp->add_option("--out", cmp_out, "Output directory")->capture_default_str();

    std::string inst_path, solver = "mcts", sched_weights;
    int rollouts = 50;
    std::uint64_t sched_seed = 0;
    std::optional<std::uint64_t> budget;
    auto* one = app.add_subcommand("schedule", "Solve a single instance file and print its schedule CSV");
    one->add_option("--instance", inst_path, "Instance JSON file")->required()->check(CLI::ExistingFile);
    one->add_option("--solver", solver, "Solver")->check(CLI::IsMember(bench::known_solvers()))->capture_default_str();
    one->add_option("-M,--rollouts", rollouts, "MCTS rollouts per decision")->capture_default_str();
    one->add_option("--seed", sched_seed, "MCTS sampling seed")->capture_default_str();
    one->add_option("--weights", sched_weights, "Policy weight container");
    one->add_option("--node-budget", budget, "B&B node budget");

    std::string init_out;
    int init_np = policy::kDefaultNp, init_k = 4;
    std::uint64_t init_seed = 0;
    auto* init = app.add_subcommand("init-weights", "Write an untrained weight container (uniform prior)");
    init->add_option("--out", init_out, "Output file")->required();
    init->add_option("--np", init_np, "Network input width")->capture_default_str();
    init->add_option("-K", init_k, "Channels")->capture_default_str();
    init->add_option("--seed", init_seed, "Initialisation seed")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            auto s = load(gen_c);
            auto files = bench::cmd_generate(s, gen_c.out);
            std::cout << "wrote " << files.size() << " instances to " << (fs::path(gen_c.out) / "instances").string()
                      << '\n';
        } else if (*solve) {
            auto s = load(solve_c);
            if (!weights.empty()) {
                s.weights = weights;
                s.prior = "trained";
            }
            auto rows = bench::cmd_solve(s, solve_c.out, {!no_timing, schedules});
            bench::write_summary_csv(bench::summarize(rows), std::cout);
            auto flagged = std::count_if(rows.begin(), rows.end(), [](const auto& r) { return r.budget_exhausted; });
            if (flagged) std::cerr << flagged << " run(s) hit the node budget, see flags.csv\n";
        } else if (*rec) {
            auto s = load(rec_c);
            auto rows = bench::cmd_record(s, rec_c.out, {!rec_no_timing, false});
            std::cout << "recorded " << rows.size() << " traces to " << (fs::path(rec_c.out) / "traces").string()
                      << '\n';
        } else if (*cmp) {
            std::vector<fs::path> paths(metrics.begin(), metrics.end());
            auto summary = bench::cmd_compare(paths, cmp_out);
            bench::write_summary_csv(summary, std::cout);
        } else if (*one) {
            auto inst = read_instance(inst_path);
            bench::ExperimentSpec s;
            s.K = inst.K;
            s.node_budget = budget;
            bench::RunOptions ro;
            if (!sched_weights.empty())
                ro.weights = std::make_shared<policy::PolicyWeights>(policy::load_weights(sched_weights));
            auto row = bench::run_solver(solver, inst, rollouts, sched_seed, s, ro);
            write_schedule_csv(row.schedule, std::cout);
            std::cerr << solver << ": cost " << row.cost << ", nodes " << row.nodes << ", dropped " << row.dropped
                      << (row.budget_exhausted ? ", node budget exhausted" : "") << '\n';
        } else if (*init) {
            policy::save_weights(policy::initial_weights(init_np, init_k, init_seed), init_out);
            std::cout << "wrote " << init_out << '\n';
        }
    } catch (const radarsched::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

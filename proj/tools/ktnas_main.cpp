#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ktnas/csv.hpp"
#include "ktnas/errors.hpp"
#include "ktnas/harness.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct OracleFlags {
    std::string path;
    std::vector<int> negate;
    std::string space = "nas201";
    int nodes = 4;
    int ops = 5;
    int tasks = 2;
    double tau = 0.8;
    double tau_tol = 0.05;
    double lambda = 0.0;
    bool lambda_set = false;
    std::uint64_t seed = 1;
    bool synth = false;
};

struct PlanFlags {
    std::vector<std::string> algorithms;
    std::vector<std::uint64_t> seeds;
    std::uint64_t seed_start = 1;
    int seed_count = 0;
    std::string config_path;
    std::vector<std::string> sets;
    std::string out_dir;
    bool force = false;
};

void add_oracle_flags(CLI::App* cmd, OracleFlags& flags, bool for_generation) {
    if (!for_generation) {
        cmd->add_option("--oracle", flags.path, "Fitness table CSV to search on");
        cmd->add_option("--negate-task", flags.negate, "Task column to sign-flip on load (repeatable)");
        cmd->add_flag("--synth", flags.synth, "Synthesize the landscape instead of loading one");
    }
    cmd->add_option("--space", flags.space, "Search space: nas201 or generic")
        ->check(CLI::IsMember({"nas201", "generic"}));
    cmd->add_option("--nodes", flags.nodes, "Cell nodes for the generic space");
    cmd->add_option("--ops", flags.ops, "Operation count for the generic space");
    cmd->add_option("--tasks", flags.tasks, "Number of tasks to synthesize");
    cmd->add_option("--tau", flags.tau, "Target pairwise Kendall tau");
    cmd->add_option("--tau-tol", flags.tau_tol, "Accepted deviation from the target tau");
    auto* lambda = cmd->add_option("--lambda", flags.lambda, "Fix the shared-score weight, skip the search");
    cmd->callback([&flags, lambda]() { flags.lambda_set = lambda->count() > 0; });
    cmd->add_option(for_generation ? "--seed" : "--landscape-seed", flags.seed, "Landscape generator seed");
}

void add_plan_flags(CLI::App* cmd, PlanFlags& flags) {
    cmd->add_option("--algorithm", flags.algorithms, "Algorithm to run (repeatable)")
        ->check(CLI::IsMember({ktnas::kAlgorithmKtnas, ktnas::kAlgorithmRandomTransfer,
                               ktnas::kAlgorithmRea, ktnas::kAlgorithmRs}));
    cmd->add_option("--seeds", flags.seeds, "Run seeds")->delimiter(',');
    cmd->add_option("--seed-start", flags.seed_start, "First seed when --seed-count is used");
    cmd->add_option("--seed-count", flags.seed_count, "Run seeds seed-start..seed-start+count-1");
    cmd->add_option("--config", flags.config_path, "key = value configuration file");
    cmd->add_option("--set", flags.sets, "Configuration override key=value (repeatable)");
    cmd->add_option("--out-dir", flags.out_dir, "Output directory (default $KTNAS_OUT_DIR or .)");
    cmd->add_flag("--force", flags.force, "Overwrite existing output files");
}

ktnas::SearchSpaceSpec resolve_space(const OracleFlags& flags) {
    if (flags.space == "nas201") return ktnas::SearchSpaceSpec::nas201();
    return ktnas::SearchSpaceSpec::generic(flags.nodes, flags.ops);
}

ktnas::SynthesizedLandscape synthesize(const OracleFlags& flags) {
    ktnas::LandscapeSpec spec;
    spec.space = resolve_space(flags);
    spec.n_tasks = flags.tasks;
    spec.target_tau = flags.tau;
    spec.tau_tolerance = flags.tau_tol;
    if (flags.lambda_set) spec.lambda_override = flags.lambda;
    return ktnas::synthesize_landscape(spec, flags.seed);
}

ktnas::TabularOracle resolve_oracle(const OracleFlags& flags) {
    if (!flags.path.empty()) return ktnas::load_tabular(flags.path, flags.negate);
    if (!flags.synth) throw ktnas::ContractError("provide --oracle FILE or --synth");
    return std::move(synthesize(flags).oracle);
}

fs::path resolve_out_dir(const PlanFlags& flags) {
    if (!flags.out_dir.empty()) return flags.out_dir;
    if (const char* env = std::getenv("KTNAS_OUT_DIR"); env && *env) return env;
    return ".";
}

std::vector<std::uint64_t> resolve_seeds(const PlanFlags& flags) {
    if (!flags.seeds.empty()) return flags.seeds;
    std::vector<std::uint64_t> seeds;
    const int count = flags.seed_count > 0 ? flags.seed_count : 1;
    for (int i = 0; i < count; ++i) seeds.push_back(flags.seed_start + static_cast<std::uint64_t>(i));
    return seeds;
}

ktnas::EngineConfig resolve_config(const PlanFlags& flags) {
    ktnas::EngineConfig config;
    if (!flags.config_path.empty()) config = ktnas::load_config_file(flags.config_path, config);
    for (const auto& entry : flags.sets) {
        const auto eq = entry.find('=');
        if (eq == std::string::npos)
            throw ktnas::ContractError("--set expects key=value, got '" + entry + "'");
        ktnas::apply_config_entry(config, entry.substr(0, eq), entry.substr(eq + 1));
    }
    return config;
}

std::vector<ktnas::CompletedRun> run_plan(const OracleFlags& oracle_flags, const PlanFlags& plan_flags,
                                          const std::vector<std::string>& default_algorithms,
                                          ktnas::ExperimentPlan& plan_out) {
    auto oracle = resolve_oracle(oracle_flags);
    ktnas::ExperimentPlan plan;
    plan.algorithms = plan_flags.algorithms.empty() ? default_algorithms : plan_flags.algorithms;
    plan.seeds = resolve_seeds(plan_flags);
    plan.config = resolve_config(plan_flags);
    plan.config.n_tasks = oracle.num_tasks();
    plan_out = plan;
    return ktnas::execute_plan(plan, oracle);
}

void write_run_outputs(const fs::path& out_dir, const std::vector<ktnas::CompletedRun>& runs,
                       const ktnas::ExperimentPlan& plan, bool force) {
    fs::create_directories(out_dir);
    const long budget = ktnas::effective_censor_budget(runs, plan.config.eval_budget_per_task);
    ktnas::write_trace_csv((out_dir / "trace.csv").string(), runs, force);
    ktnas::write_finals_csv((out_dir / "finals.csv").string(), runs, force);
    ktnas::write_summary_csv((out_dir / "summary.csv").string(), ktnas::summarize_runs(runs, budget), force);
    ktnas::write_hts_csv((out_dir / "hts.csv").string(), runs, force);
}

int cmd_gen_landscape(const OracleFlags& flags, const std::string& out, const std::string& out_dir_flag,
                      bool force) {
    fs::path out_path;
    if (!out.empty()) {
        out_path = out;
    } else {
        PlanFlags dir_only;
        dir_only.out_dir = out_dir_flag;
        out_path = resolve_out_dir(dir_only) / "landscape.csv";
    }
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());

    auto landscape = synthesize(flags);
    ktnas::ensure_writable(out_path.string(), force);
    ktnas::write_tabular(landscape.oracle, out_path.string());

    const auto& space = landscape.oracle.space();
    json meta;
    meta["seed"] = flags.seed;
    meta["tasks"] = flags.tasks;
    meta["target_tau"] = flags.tau;
    meta["tau_tolerance"] = flags.tau_tol;
    meta["lambda"] = landscape.lambda;
    meta["realized_tau"] = landscape.realized_tau;
    meta["space"]["nodes"] = space.num_nodes;
    meta["space"]["ops"] = space.op_set;
    const fs::path meta_path = out_path.string() + ".meta.json";
    ktnas::ensure_writable(meta_path.string(), force);
    std::ofstream meta_out(meta_path, std::ios::binary);
    if (!meta_out) throw ktnas::DataError("cannot open '" + meta_path.string() + "' for writing");
    meta_out << meta.dump(2) << '\n';

    std::cout << "wrote " << out_path.string() << " (" << landscape.oracle.num_keys() << " rows, "
              << flags.tasks << " tasks, lambda " << ktnas::format_double(landscape.lambda) << ")\n"
              << "wrote " << meta_path.string() << '\n';
    return 0;
}

int cmd_run(const OracleFlags& oracle_flags, const PlanFlags& plan_flags) {
    ktnas::ExperimentPlan plan;
    const auto runs = run_plan(oracle_flags, plan_flags, {ktnas::kAlgorithmKtnas}, plan);
    const fs::path out_dir = resolve_out_dir(plan_flags);
    write_run_outputs(out_dir, runs, plan, plan_flags.force);

    const long budget = ktnas::effective_censor_budget(runs, plan.config.eval_budget_per_task);
    for (const auto& row : ktnas::summarize_runs(runs, budget)) {
        std::cout << row.algorithm << " task " << row.task << ": median evals "
                  << ktnas::format_double(row.median_evals) << ", success "
                  << ktnas::format_double(row.success_rate) << ", best "
                  << ktnas::format_double(row.best_mean) << " +- " << ktnas::format_double(row.best_sd)
                  << '\n';
    }
    std::cout << "wrote " << (out_dir / "trace.csv").string() << ", " << (out_dir / "finals.csv").string()
              << ", " << (out_dir / "summary.csv").string() << ", " << (out_dir / "hts.csv").string() << '\n';
    return 0;
}

int cmd_compare(const OracleFlags& oracle_flags, const PlanFlags& plan_flags) {
    const std::vector<std::string> all_algorithms = {ktnas::kAlgorithmKtnas,
                                                     ktnas::kAlgorithmRandomTransfer, ktnas::kAlgorithmRea,
                                                     ktnas::kAlgorithmRs};
    ktnas::ExperimentPlan plan;
    const auto runs = run_plan(oracle_flags, plan_flags, all_algorithms, plan);
    const fs::path out_dir = resolve_out_dir(plan_flags);
    write_run_outputs(out_dir, runs, plan, plan_flags.force);

    const long budget = ktnas::effective_censor_budget(runs, plan.config.eval_budget_per_task);
    const auto rows = ktnas::compare_runs(runs, plan.algorithms, budget);
    ktnas::write_compare_csv((out_dir / "compare.csv").string(), rows, plan.config.n_tasks,
                             plan_flags.force);

    for (const auto& row : rows) {
        std::cout << row.algorithm << ": median total evals " << ktnas::format_double(row.median_total);
        if (row.algorithm != plan.algorithms.front())
            std::cout << ", p(" << plan.algorithms.front() << " fewer) = "
                      << ktnas::format_double(row.p_value);
        std::cout << '\n';
    }
    std::cout << "wrote " << (out_dir / "compare.csv").string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-task evolutionary architecture search over tabular fitness oracles"};
    app.require_subcommand(1);

    OracleFlags gen_flags;
    std::string gen_out;
    std::string gen_out_dir;
    bool gen_force = false;
    auto* gen = app.add_subcommand("gen-landscape", "Synthesize a rank-correlated fitness table");
    add_oracle_flags(gen, gen_flags, true);
    gen->add_option("--out", gen_out, "Output CSV path (default <out-dir>/landscape.csv)");
    gen->add_option("--out-dir", gen_out_dir, "Output directory (default $KTNAS_OUT_DIR or .)");
    gen->add_flag("--force", gen_force, "Overwrite existing output files");

    OracleFlags run_oracle;
    PlanFlags run_flags;
    auto* run = app.add_subcommand("run", "Run algorithms and emit trace/summary CSVs");
    add_oracle_flags(run, run_oracle, false);
    add_plan_flags(run, run_flags);

    OracleFlags cmp_oracle;
    PlanFlags cmp_flags;
    auto* cmp = app.add_subcommand("compare", "Rank algorithms by evaluations-to-optimum");
    add_oracle_flags(cmp, cmp_oracle, false);
    add_plan_flags(cmp, cmp_flags);

    try {
        app.parse(argc, argv);
        if (gen->parsed()) return cmd_gen_landscape(gen_flags, gen_out, gen_out_dir, gen_force);
        if (run->parsed()) return cmd_run(run_oracle, run_flags);
        if (cmp->parsed()) return cmd_compare(cmp_oracle, cmp_flags);
        return 1;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const ktnas::ContractError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const ktnas::DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}

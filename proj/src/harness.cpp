#include "ktnas/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>

#include "ktnas/csv.hpp"
#include "ktnas/errors.hpp"
#include "ktnas/stats.hpp"

namespace ktnas {

namespace {

std::uint64_t parse_u64(const std::string& field, const std::string& context) {
    std::uint64_t value = 0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end)
        throw DataError(context + ": expected an unsigned integer, got '" + field + "'");
    return value;
}

int parse_int(const std::string& field, const std::string& context) {
    const long value = parse_long(field, context);
    if (value < static_cast<long>(std::numeric_limits<int>::min()) ||
        value > static_cast<long>(std::numeric_limits<int>::max()))
        throw DataError(context + ": value out of range: " + field);
    return static_cast<int>(value);
}

std::string trim(const std::string& s) {
    std::size_t begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return {};
    std::size_t end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::ofstream open_out(const std::string& path, bool force) {
    ensure_writable(path, force);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    return out;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "' for reading");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

void expect_line(const std::vector<std::string>& lines, std::size_t index, const std::string& wanted,
                 const std::string& path) {
    if (lines.size() <= index || lines[index] != wanted)
        throw DataError(path + ": line " + std::to_string(index + 1) + " must be '" + wanted + "'");
}

const TaskResult& final_for_task(const RunTrace& trace, int task) {
    for (const auto& result : trace.finals)
        if (result.task == task) return result;
    throw ContractError("trace has no result for task " + std::to_string(task));
}

}  // namespace

std::vector<CompletedRun> execute_plan(const ExperimentPlan& plan, const TabularOracle& oracle) {
    std::vector<CompletedRun> runs;
    runs.reserve(plan.algorithms.size() * plan.seeds.size());
    for (const auto& algorithm : plan.algorithms) {
        for (const auto seed : plan.seeds) {
            EngineConfig config = plan.config;
            config.seed = seed;
            CompletedRun run;
            run.algorithm = algorithm;
            run.seed = seed;
            try {
                run.trace = run_algorithm(algorithm, config, oracle.fresh_clone());
            } catch (const DataError& err) {
                throw DataError("algorithm " + algorithm + ", seed " + std::to_string(seed) + ": " +
                                err.what());
            }
            runs.push_back(std::move(run));
        }
    }
    return runs;
}

long effective_censor_budget(const std::vector<CompletedRun>& runs, long configured) {
    if (configured > 0) return configured;
    long budget = 1;
    for (const auto& run : runs)
        for (const auto& result : run.trace.finals) budget = std::max(budget, result.unique_evals);
    return budget;
}

double evals_to_optimum_or_censored(const RunTrace& trace, int task, long budget) {
    const auto& result = final_for_task(trace, task);
    if (result.evals_to_optimum) {
        const long evals = *result.evals_to_optimum;
        if (budget > 0 && evals > budget) return static_cast<double>(budget);
        return static_cast<double>(evals);
    }
    if (budget <= 0)
        throw ContractError("task " + std::to_string(task) +
                            " never served its optimum and no censoring budget was given");
    return static_cast<double>(budget);
}

double total_evals_to_optimum(const RunTrace& trace, long budget) {
    double total = 0.0;
    for (const auto& result : trace.finals)
        total += evals_to_optimum_or_censored(trace, result.task, budget);
    return total;
}

std::vector<SummaryRow> summarize_runs(const std::vector<CompletedRun>& runs, long budget) {
    std::vector<std::string> algorithms;
    int n_tasks = 0;
    for (const auto& run : runs) {
        if (std::find(algorithms.begin(), algorithms.end(), run.algorithm) == algorithms.end())
            algorithms.push_back(run.algorithm);
        n_tasks = std::max(n_tasks, static_cast<int>(run.trace.finals.size()));
    }

    std::vector<SummaryRow> rows;
    for (const auto& algorithm : algorithms) {
        for (int task = 0; task < n_tasks; ++task) {
            std::vector<double> evals, bests;
            int successes = 0;
            for (const auto& run : runs) {
                if (run.algorithm != algorithm) continue;
                const auto& result = final_for_task(run.trace, task);
                evals.push_back(evals_to_optimum_or_censored(run.trace, task, budget));
                bests.push_back(result.best_fitness);
                if (result.evals_to_optimum && (budget <= 0 || *result.evals_to_optimum <= budget))
                    ++successes;
            }
            if (evals.empty()) continue;
            SummaryRow row;
            row.algorithm = algorithm;
            row.task = task;
            row.runs = static_cast<int>(evals.size());
            row.median_evals = median(evals);
            row.iqr_low = quantile(evals, 0.25);
            row.iqr_high = quantile(evals, 0.75);
            row.success_rate = static_cast<double>(successes) / static_cast<double>(evals.size());
            row.best_mean = mean(bests);
            row.best_sd = sample_stddev(bests);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

std::vector<CompareRow> compare_runs(const std::vector<CompletedRun>& runs,
                                     const std::vector<std::string>& algorithms, long budget) {
    if (algorithms.empty()) throw ContractError("compare needs at least one algorithm");

    int n_tasks = 0;
    for (const auto& run : runs) n_tasks = std::max(n_tasks, static_cast<int>(run.trace.finals.size()));

    auto totals_of = [&](const std::string& algorithm) {
        std::vector<double> totals;
        for (const auto& run : runs)
            if (run.algorithm == algorithm) totals.push_back(total_evals_to_optimum(run.trace, budget));
        return totals;
    };
    const auto subject_totals = totals_of(algorithms.front());

    std::vector<CompareRow> rows;
    for (std::size_t i = 0; i < algorithms.size(); ++i) {
        const auto totals = totals_of(algorithms[i]);
        CompareRow row;
        row.algorithm = algorithms[i];
        row.runs = static_cast<int>(totals.size());
        row.median_total = totals.empty() ? std::nan("") : median(totals);
        for (int task = 0; task < n_tasks; ++task) {
            std::vector<double> per_task;
            for (const auto& run : runs)
                if (run.algorithm == algorithms[i])
                    per_task.push_back(evals_to_optimum_or_censored(run.trace, task, budget));
            row.median_per_task.push_back(per_task.empty() ? std::nan("") : median(per_task));
        }
        if (i == 0 || subject_totals.empty() || totals.empty())
            row.p_value = std::nan("");
        else
            row.p_value = mann_whitney_less(subject_totals, totals).p_one_sided;
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace {

const char* kTraceHeader =
    "algorithm,seed,task,generation,best_fitness,unique_evals,mean_tp_rank,tp_pos_count,tp_neg_count";
const char* kSummaryHeader =
    "algorithm,task,runs,median_evals,iqr_low,iqr_high,success_rate,best_mean,best_sd";
const char* kHtsHeader = "algorithm,seed,task,generation,encoding,label";
const char* kFinalsHeader =
    "algorithm,seed,task,best_fitness,best_encoding,found_optimum,evals_to_optimum,unique_evals";

}  // namespace

void write_trace_csv(const std::string& path, const std::vector<CompletedRun>& runs, bool force) {
    auto out = open_out(path, force);
    out << kTraceSchema << '\n' << kTraceHeader << '\n';
    for (const auto& run : runs) {
        for (const auto& record : run.trace.records) {
            out << join_csv({run.algorithm, std::to_string(run.seed), std::to_string(record.task),
                             std::to_string(record.generation), format_double(record.best_fitness),
                             std::to_string(record.unique_evals), format_double(record.mean_tp_rank),
                             std::to_string(record.tp_pos_count), std::to_string(record.tp_neg_count)})
                << '\n';
        }
    }
}

std::vector<TraceRow> read_trace_csv(const std::string& path) {
    const auto lines = read_lines(path);
    expect_line(lines, 0, kTraceSchema, path);
    expect_line(lines, 1, kTraceHeader, path);
    std::vector<TraceRow> rows;
    for (std::size_t i = 2; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const std::string context = path + ":" + std::to_string(i + 1);
        const auto fields = split_csv_line(lines[i]);
        if (fields.size() != 9) throw DataError(context + ": expected 9 fields, got " + std::to_string(fields.size()));
        TraceRow row;
        row.algorithm = fields[0];
        row.seed = parse_u64(fields[1], context);
        row.record.task = parse_int(fields[2], context);
        row.record.generation = parse_int(fields[3], context);
        row.record.best_fitness = parse_double(fields[4], context);
        row.record.unique_evals = parse_long(fields[5], context);
        row.record.mean_tp_rank = parse_double(fields[6], context);
        row.record.tp_pos_count = parse_int(fields[7], context);
        row.record.tp_neg_count = parse_int(fields[8], context);
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows, bool force) {
    auto out = open_out(path, force);
    out << kSummarySchema << '\n' << kSummaryHeader << '\n';
    for (const auto& row : rows) {
        out << join_csv({row.algorithm, std::to_string(row.task), std::to_string(row.runs),
                         format_double(row.median_evals), format_double(row.iqr_low),
                         format_double(row.iqr_high), format_double(row.success_rate),
                         format_double(row.best_mean), format_double(row.best_sd)})
            << '\n';
    }
}

std::vector<SummaryRow> read_summary_csv(const std::string& path) {
    const auto lines = read_lines(path);
    expect_line(lines, 0, kSummarySchema, path);
    expect_line(lines, 1, kSummaryHeader, path);
    std::vector<SummaryRow> rows;
    for (std::size_t i = 2; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const std::string context = path + ":" + std::to_string(i + 1);
        const auto fields = split_csv_line(lines[i]);
        if (fields.size() != 9) throw DataError(context + ": expected 9 fields, got " + std::to_string(fields.size()));
        SummaryRow row;
        row.algorithm = fields[0];
        row.task = parse_int(fields[1], context);
        row.runs = parse_int(fields[2], context);
        row.median_evals = parse_double(fields[3], context);
        row.iqr_low = parse_double(fields[4], context);
        row.iqr_high = parse_double(fields[5], context);
        row.success_rate = parse_double(fields[6], context);
        row.best_mean = parse_double(fields[7], context);
        row.best_sd = parse_double(fields[8], context);
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_compare_csv(const std::string& path, const std::vector<CompareRow>& rows, int n_tasks, bool force) {
    auto out = open_out(path, force);
    std::vector<std::string> header = {"algorithm", "runs", "median_total"};
    for (int task = 0; task < n_tasks; ++task) header.push_back("median_task_" + std::to_string(task));
    header.push_back("p_value");
    out << kCompareSchema << '\n' << join_csv(header) << '\n';
    for (const auto& row : rows) {
        if (static_cast<int>(row.median_per_task.size()) != n_tasks)
            throw ContractError("compare row for '" + row.algorithm + "' covers " +
                                std::to_string(row.median_per_task.size()) + " tasks, expected " +
                                std::to_string(n_tasks));
        std::vector<std::string> fields = {row.algorithm, std::to_string(row.runs),
                                           format_double(row.median_total)};
        for (double value : row.median_per_task) fields.push_back(format_double(value));
        fields.push_back(format_double(row.p_value));
        out << join_csv(fields) << '\n';
    }
}

void write_hts_csv(const std::string& path, const std::vector<CompletedRun>& runs, bool force) {
    auto out = open_out(path, force);
    out << kHtsSchema << '\n' << kHtsHeader << '\n';
    for (const auto& run : runs) {
        for (const auto& record : run.trace.records) {
            for (const auto& [encoding, label] : record.labeled_tp) {
                out << join_csv({run.algorithm, std::to_string(run.seed), std::to_string(record.task),
                                 std::to_string(record.generation), encoding, std::to_string(label)})
                    << '\n';
            }
        }
    }
}

void write_finals_csv(const std::string& path, const std::vector<CompletedRun>& runs, bool force) {
    auto out = open_out(path, force);
    out << kFinalsSchema << '\n' << kFinalsHeader << '\n';
    for (const auto& run : runs) {
        for (const auto& result : run.trace.finals) {
            out << join_csv({run.algorithm, std::to_string(run.seed), std::to_string(result.task),
                             format_double(result.best_fitness), result.best_encoding,
                             result.found_optimum ? "1" : "0",
                             result.evals_to_optimum ? std::to_string(*result.evals_to_optimum) : "",
                             std::to_string(result.unique_evals)})
                << '\n';
        }
    }
}

std::vector<FinalsRow> read_finals_csv(const std::string& path) {
    const auto lines = read_lines(path);
    expect_line(lines, 0, kFinalsSchema, path);
    expect_line(lines, 1, kFinalsHeader, path);
    std::vector<FinalsRow> rows;
    for (std::size_t i = 2; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const std::string context = path + ":" + std::to_string(i + 1);
        const auto fields = split_csv_line(lines[i]);
        if (fields.size() != 8) throw DataError(context + ": expected 8 fields, got " + std::to_string(fields.size()));
        FinalsRow row;
        row.algorithm = fields[0];
        row.seed = parse_u64(fields[1], context);
        row.result.task = parse_int(fields[2], context);
        row.result.best_fitness = parse_double(fields[3], context);
        row.result.best_encoding = fields[4];
        if (fields[5] != "0" && fields[5] != "1")
            throw DataError(context + ": found_optimum must be 0 or 1, got '" + fields[5] + "'");
        row.result.found_optimum = fields[5] == "1";
        if (!fields[6].empty()) row.result.evals_to_optimum = parse_long(fields[6], context);
        if (row.result.found_optimum != row.result.evals_to_optimum.has_value())
            throw DataError(context + ": found_optimum disagrees with evals_to_optimum");
        row.result.unique_evals = parse_long(fields[7], context);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<CompletedRun> runs_from_finals(const std::vector<FinalsRow>& rows) {
    std::vector<CompletedRun> runs;
    for (const auto& row : rows) {
        auto it = std::find_if(runs.begin(), runs.end(), [&](const CompletedRun& run) {
            return run.algorithm == row.algorithm && run.seed == row.seed;
        });
        if (it == runs.end()) {
            CompletedRun run;
            run.algorithm = row.algorithm;
            run.seed = row.seed;
            run.trace.algorithm = row.algorithm;
            run.trace.seed = row.seed;
            runs.push_back(std::move(run));
            it = runs.end() - 1;
        }
        it->trace.finals.push_back(row.result);
    }
    return runs;
}

void apply_config_entry(EngineConfig& config, const std::string& key, const std::string& value) {
    const std::string context = "config key '" + key + "'";
    auto as_bool = [&]() {
        if (value == "true" || value == "1") return true;
        if (value == "false" || value == "0") return false;
        throw DataError(context + ": expected true/false, got '" + value + "'");
    };
    if (key == "n_tasks") config.n_tasks = parse_int(value, context);
    else if (key == "population_size") config.population_size = parse_int(value, context);
    else if (key == "transfer_count") config.transfer_count = parse_int(value, context);
    else if (key == "saved_generations") config.saved_generations = parse_int(value, context);
    else if (key == "ranking_ratio") config.ranking_ratio = parse_double(value, context);
    else if (key == "max_generations") config.max_generations = parse_int(value, context);
    else if (key == "tournament_size") config.tournament_size = parse_int(value, context);
    else if (key == "crossover_probability") config.crossover_probability = parse_double(value, context);
    else if (key == "mutation_probability") config.mutation_probability = parse_double(value, context);
    else if (key == "offspring_count") config.offspring_count = parse_int(value, context);
    else if (key == "eval_budget_per_task") config.eval_budget_per_task = parse_long(value, context);
    else if (key == "stop_on_optimum") config.stop_on_optimum = as_bool();
    else if (key == "positive_cap") config.positive_cap = static_cast<std::size_t>(parse_long(value, context));
    else if (key == "seed") config.seed = parse_u64(value, context);
    else if (key == "embedding_sample_archs") config.embedding.sample_archs = parse_int(value, context);
    else if (key == "embedding_num_walks") config.embedding.walks.num_walks = parse_int(value, context);
    else if (key == "embedding_walk_len") config.embedding.walks.walk_len = parse_int(value, context);
    else if (key == "embedding_p") config.embedding.walks.p = parse_double(value, context);
    else if (key == "embedding_q") config.embedding.walks.q = parse_double(value, context);
    else if (key == "embedding_dim") config.embedding.train.dim = parse_int(value, context);
    else if (key == "embedding_window") config.embedding.train.window = parse_int(value, context);
    else if (key == "embedding_negatives") config.embedding.train.negatives = parse_int(value, context);
    else if (key == "embedding_epochs") config.embedding.train.epochs = parse_int(value, context);
    else if (key == "embedding_lr_start") config.embedding.train.lr_start = parse_double(value, context);
    else if (key == "embedding_lr_end") config.embedding.train.lr_end = parse_double(value, context);
    else throw DataError("unknown config key '" + key + "'");
}

EngineConfig load_config_file(const std::string& path, EngineConfig base) {
    const auto lines = read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string line = lines[i];
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError(path + ":" + std::to_string(i + 1) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw DataError(path + ":" + std::to_string(i + 1) + ": expected 'key = value'");
        try {
            apply_config_entry(base, key, value);
        } catch (const DataError& err) {
            throw DataError(path + ":" + std::to_string(i + 1) + ": " + err.what());
        }
    }
    return base;
}

}  // namespace ktnas

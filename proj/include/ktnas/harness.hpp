#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ktnas/engine.hpp"
#include "ktnas/oracle.hpp"

namespace ktnas {

inline constexpr const char* kTraceSchema = "# ktnas-trace v1";
inline constexpr const char* kSummarySchema = "# ktnas-summary v1";
inline constexpr const char* kCompareSchema = "# ktnas-compare v1";
inline constexpr const char* kHtsSchema = "# ktnas-hts v1";
inline constexpr const char* kFinalsSchema = "# ktnas-finals v1";

struct ExperimentPlan {
    std::vector<std::string> algorithms;
    std::vector<std::uint64_t> seeds;
    EngineConfig config;  // seed field is overwritten per run
};

struct CompletedRun {
    std::string algorithm;
    std::uint64_t seed = 0;
    RunTrace trace;
};

// Runs every (algorithm, seed) pair on a fresh oracle clone, in a fixed
// order, so identical plans give identical results files.
std::vector<CompletedRun> execute_plan(const ExperimentPlan& plan, const TabularOracle& oracle);

// The censoring point used for aggregation: the configured per-task budget
// when positive, otherwise the largest unique-evaluation count any task of
// any run reached (the end of observation).
long effective_censor_budget(const std::vector<CompletedRun>& runs, long configured);

// Evaluations until the task optimum was served; censored runs count as
// `budget`. budget <= 0 means uncensored (requires the optimum was found).
double evals_to_optimum_or_censored(const RunTrace& trace, int task, long budget);
double total_evals_to_optimum(const RunTrace& trace, long budget);

struct SummaryRow {
    std::string algorithm;
    int task = 0;
    int runs = 0;
    double median_evals = 0.0;   // censored at budget
    double iqr_low = 0.0;        // 25th percentile
    double iqr_high = 0.0;       // 75th percentile
    double success_rate = 0.0;   // optimum served within budget
    double best_mean = 0.0;      // final best fitness across seeds
    double best_sd = 0.0;
};

std::vector<SummaryRow> summarize_runs(const std::vector<CompletedRun>& runs, long budget);

struct CompareRow {
    std::string algorithm;
    int runs = 0;
    double median_total = 0.0;
    std::vector<double> median_per_task;
    // One-sided p-value that the first algorithm needs fewer total
    // evaluations than this row's; NaN on the first row itself.
    double p_value = 1.0;
};

// Ranked comparison of the first algorithm against every other one on total
// evaluations-to-optimum (censored runs ranked worst via budget).
std::vector<CompareRow> compare_runs(const std::vector<CompletedRun>& runs,
                                     const std::vector<std::string>& algorithms, long budget);

// trace CSV: schema comment, header, one row per generation record.
// columns: algorithm,seed,task,generation,best_fitness,unique_evals,
//          mean_tp_rank,tp_pos_count,tp_neg_count
void write_trace_csv(const std::string& path, const std::vector<CompletedRun>& runs, bool force);

struct TraceRow {
    std::string algorithm;
    std::uint64_t seed = 0;
    TraceRecord record;
};

std::vector<TraceRow> read_trace_csv(const std::string& path);

void write_summary_csv(const std::string& path, const std::vector<SummaryRow>& rows, bool force);
std::vector<SummaryRow> read_summary_csv(const std::string& path);

void write_compare_csv(const std::string& path, const std::vector<CompareRow>& rows, int n_tasks, bool force);

// Per-generation transfer judgements:
// algorithm,seed,task,generation,encoding,label.
void write_hts_csv(const std::string& path, const std::vector<CompletedRun>& runs, bool force);

// Per-run terminal results: algorithm,seed,task,best_fitness,best_encoding,
// found_optimum,evals_to_optimum,unique_evals. evals_to_optimum is empty
// when the optimum was never served. Together with runs_from_finals this
// file carries everything the summary and comparison aggregations consume.
void write_finals_csv(const std::string& path, const std::vector<CompletedRun>& runs, bool force);

struct FinalsRow {
    std::string algorithm;
    std::uint64_t seed = 0;
    TaskResult result;
};

std::vector<FinalsRow> read_finals_csv(const std::string& path);

// Regroups finals rows into (algorithm, seed) runs in first-appearance
// order; the rebuilt traces carry finals only, which is all the summary
// and comparison functions read.
std::vector<CompletedRun> runs_from_finals(const std::vector<FinalsRow>& rows);

// key = value lines, '#' comments. Unknown keys raise DataError naming them.
EngineConfig load_config_file(const std::string& path, EngineConfig base = {});
void apply_config_entry(EngineConfig& config, const std::string& key, const std::string& value);

}  // namespace ktnas

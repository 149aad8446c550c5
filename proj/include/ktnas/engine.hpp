#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ktnas/embedding.hpp"
#include "ktnas/oracle.hpp"
#include "ktnas/transfer.hpp"

namespace ktnas {

struct EmbeddingBuildParams {
    Node2vecParams walks;
    SkipgramParams train;
    int sample_archs = 512;  // uniform samples joined with the initial populations
};

struct EngineConfig {
    int n_tasks = 2;
    int population_size = 10;       // K
    int transfer_count = 4;         // M
    int saved_generations = 5;      // negative-set window m
    double ranking_ratio = 20.0;    // r, percent of Z counted as a good landing
    int max_generations = 100;      // T, counted in populations (init = generation 1)
    int tournament_size = 5;
    double crossover_probability = 1.0;
    double mutation_probability = 1.0;
    int offspring_count = 0;        // 0 -> population_size
    long eval_budget_per_task = 0;  // 0 -> unlimited
    bool stop_on_optimum = true;
    std::size_t positive_cap = 0;   // 0 -> positives accumulate unbounded
    std::uint64_t seed = 0;
    EmbeddingBuildParams embedding;

    int effective_offspring() const { return offspring_count > 0 ? offspring_count : population_size; }

    // allow_zero_transfer relaxes M >= 1 (the no-transfer ablation case).
    void validate(bool allow_zero_transfer = false) const;
};

struct TraceRecord {
    int task = 0;
    int generation = 0;
    double best_fitness = 0.0;  // best-so-far on the task
    long unique_evals = 0;
    double mean_tp_rank = 0.0;  // NaN when the generation carries no TP
    int tp_pos_count = 0;       // labels assigned to the previous TP this generation
    int tp_neg_count = 0;
    std::vector<std::pair<std::string, int>> labeled_tp;  // (encoding, +-1)
};

struct TaskResult {
    int task = 0;
    std::string best_encoding;
    double best_fitness = 0.0;
    bool found_optimum = false;
    std::optional<long> evals_to_optimum;  // oracle serve index of the optimum
    long unique_evals = 0;
};

struct RunTrace {
    std::string algorithm;
    std::uint64_t seed = 0;
    std::vector<TraceRecord> records;
    std::vector<TaskResult> finals;
};

struct TaskState {
    int task = 0;
    int generation = 1;                         // population index, init = 1
    std::vector<Individual> population;         // P_t
    std::vector<Individual> transfer;           // transfer population entering the next step
    std::vector<Individual> pending_offspring;  // offspring awaiting label judgement
    std::unordered_set<std::string> parent_pool;  // encodings the pending offspring came from
    HistoricalTransferredSet hts;
    double best_fitness = 0.0;
    std::string best_encoding;
};

enum class TransferMode {
    rank,     // archive-guided selection
    uniform,  // ablation: uniform choice among the pooled candidates
};

// Synchronous multi-population loop: every generation each task reads the
// other tasks' generation-t populations, refreshes its transfer population,
// breeds, and only then does any population advance to t+1.
class MultiTaskEngine {
   public:
    MultiTaskEngine(EngineConfig config, TabularOracle oracle, TransferMode mode = TransferMode::rank);

    // Samples the initial populations, trains the shared token embedding,
    // draws the initial transfer populations, evaluates, selects P_1.
    void initialize();

    void step();        // one generation across all tasks
    bool done() const;  // generation cap reached or every task resolved

    // initialize() + step() until done; returns the collected trace.
    RunTrace run();

    const std::vector<TaskState>& states() const { return states_; }
    const TabularOracle& oracle() const { return oracle_; }
    const EmbeddingCache* embedding() const { return embedding_ ? &*embedding_ : nullptr; }
    std::vector<TraceRecord> take_records() { return std::move(records_); }
    std::vector<TaskResult> finals() const;

   private:
    void evaluate(std::vector<Individual>& group, int task);
    std::vector<Individual> breed(const std::vector<Individual>& pool, int task, Rng& rng);
    std::vector<Individual> top_k(std::vector<Individual> pool, int task) const;
    void record_generation(const TaskState& state, double mean_tp_rank, int pos, int neg,
                           std::vector<std::pair<std::string, int>> labeled);
    bool task_resolved(int task) const;
    const std::vector<double>& embedding_of(const Individual& ind);

    EngineConfig config_;
    TabularOracle oracle_;
    TransferMode mode_;
    Rng rng_;
    std::optional<EmbeddingCache> embedding_;
    std::vector<TaskState> states_;
    std::vector<TraceRecord> records_;
    bool initialized_ = false;
};

RunTrace run_ktnas(const EngineConfig& config, TabularOracle oracle);
RunTrace run_random_transfer(const EngineConfig& config, TabularOracle oracle);

// Independent per-task baselines sharing the trace format (one record per
// population_size unique evaluations). Transfer metrics are left empty.
RunTrace baseline_random_search(const EngineConfig& config, TabularOracle oracle);
RunTrace baseline_regularized_evolution(const EngineConfig& config, TabularOracle oracle);

inline constexpr const char* kAlgorithmKtnas = "ktnas";
inline constexpr const char* kAlgorithmRandomTransfer = "ktnas-random-transfer";
inline constexpr const char* kAlgorithmRea = "rea";
inline constexpr const char* kAlgorithmRs = "rs";

// Dispatch by CLI algorithm id; DataError on unknown names.
RunTrace run_algorithm(const std::string& algorithm, const EngineConfig& config, TabularOracle oracle);

}  // namespace ktnas

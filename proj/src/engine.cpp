#include "ktnas/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ktnas/errors.hpp"

namespace ktnas {

namespace {

constexpr std::uint64_t kEmbedStream = 0x656d6264;  // walks + trainer
constexpr std::uint64_t kRsStream = 0x72730000;     // + task
constexpr std::uint64_t kReaStream = 0x72650000;    // + task

// Stable order: fitness descending, encoding ascending, pool position last.
std::vector<std::size_t> rank_order(const std::vector<Individual>& pool, int task) {
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return ranks_before(pool[a].fitness_on(task), pool[a].encoding, pool[b].fitness_on(task),
                            pool[b].encoding);
    });
    return order;
}

double mean_transfer_rank(const std::vector<Individual>& pool, std::size_t tp_begin, std::size_t tp_end,
                          int task) {
    if (tp_begin == tp_end) return std::nan("");
    const auto order = rank_order(pool, task);
    double sum = 0.0;
    for (std::size_t pos = 0; pos < order.size(); ++pos)
        if (order[pos] >= tp_begin && order[pos] < tp_end) sum += static_cast<double>(pos + 1);
    return sum / static_cast<double>(tp_end - tp_begin);
}

// Uniform sample of `count` distinct indices from [0, n) via partial shuffle.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count, Rng& rng) {
    if (count > n) throw ContractError("cannot sample " + std::to_string(count) + " of " + std::to_string(n));
    std::vector<std::size_t> indices(n);
    std::iota(indices.begin(), indices.end(), 0);
    for (std::size_t pick = 0; pick < count; ++pick) {
        const std::size_t j = pick + rng.uniform_index(n - pick);
        std::swap(indices[pick], indices[j]);
    }
    indices.resize(count);
    return indices;
}

}  // namespace

void EngineConfig::validate(bool allow_zero_transfer) const {
    if (n_tasks < 1) throw ContractError("need at least one task");
    if (population_size < 1) throw ContractError("population size must be >= 1");
    if (transfer_count < 0) throw ContractError("transfer count must be >= 0");
    if (!allow_zero_transfer && transfer_count < 1)
        throw ContractError("transfer count must be >= 1");
    if (transfer_count > 0) {
        if (n_tasks < 2) throw ContractError("transfer needs at least two tasks");
        if (transfer_count > population_size * (n_tasks - 1))
            throw ContractError("transfer count exceeds the pooled candidate population");
    }
    if (saved_generations < 1) throw ContractError("saved generations must be >= 1");
    if (ranking_ratio <= 0.0 || ranking_ratio > 100.0) throw ContractError("ranking ratio outside (0, 100]");
    if (max_generations < 1) throw ContractError("generation cap must be >= 1");
    if (tournament_size < 1) throw ContractError("tournament size must be >= 1");
    if (crossover_probability < 0.0 || crossover_probability > 1.0)
        throw ContractError("crossover probability outside [0, 1]");
    if (mutation_probability < 0.0 || mutation_probability > 1.0)
        throw ContractError("mutation probability outside [0, 1]");
    if (offspring_count < 0) throw ContractError("offspring count must be >= 0");
    if (eval_budget_per_task < 0) throw ContractError("evaluation budget must be >= 0");
    if (embedding.sample_archs < 0) throw ContractError("embedding sample count must be >= 0");
}

MultiTaskEngine::MultiTaskEngine(EngineConfig config, TabularOracle oracle, TransferMode mode)
    : config_(std::move(config)), oracle_(std::move(oracle)), mode_(mode), rng_(config_.seed) {
    config_.validate(mode_ == TransferMode::uniform);
    if (config_.n_tasks != oracle_.num_tasks())
        throw DataError("config expects " + std::to_string(config_.n_tasks) + " tasks, oracle has " +
                        std::to_string(oracle_.num_tasks()));
}

void MultiTaskEngine::evaluate(std::vector<Individual>& group, int task) {
    for (auto& ind : group) ind.fitness[task] = oracle_.evaluate(task, ind.encoding);
}

const std::vector<double>& MultiTaskEngine::embedding_of(const Individual& ind) {
    return embedding_->embed(ind.arch, ind.encoding);
}

std::vector<Individual> MultiTaskEngine::top_k(std::vector<Individual> pool, int task) const {
    std::stable_sort(pool.begin(), pool.end(), [&](const Individual& a, const Individual& b) {
        return ranks_before(a.fitness_on(task), a.encoding, b.fitness_on(task), b.encoding);
    });
    if (pool.size() > static_cast<std::size_t>(config_.population_size))
        pool.resize(static_cast<std::size_t>(config_.population_size));
    return pool;
}

std::vector<Individual> MultiTaskEngine::breed(const std::vector<Individual>& pool, int task, Rng& rng) {
    const auto& space = oracle_.space();
    const int wanted = config_.effective_offspring();
    std::vector<Individual> children;
    children.reserve(static_cast<std::size_t>(wanted));
    while (static_cast<int>(children.size()) < wanted) {
        const auto& pa = pool[tournament_select(pool, task, config_.tournament_size, rng)];
        const auto& pb = pool[tournament_select(pool, task, config_.tournament_size, rng)];
        Architecture arch_a, arch_b;
        std::vector<std::string> parents_a, parents_b;
        if (rng.bernoulli(config_.crossover_probability)) {
            std::tie(arch_a, arch_b) = crossover(pa.arch, pb.arch, rng);
            parents_a = {pa.encoding, pb.encoding};
            parents_b = parents_a;
        } else {
            arch_a = pa.arch;
            arch_b = pb.arch;
            parents_a = {pa.encoding};
            parents_b = {pb.encoding};
        }
        auto child_a = make_individual(mutate(space, arch_a, config_.mutation_probability, rng), task);
        child_a.parents = std::move(parents_a);
        children.push_back(std::move(child_a));
        if (static_cast<int>(children.size()) < wanted) {
            auto child_b = make_individual(mutate(space, arch_b, config_.mutation_probability, rng), task);
            child_b.parents = std::move(parents_b);
            children.push_back(std::move(child_b));
        }
    }
    return children;
}

void MultiTaskEngine::record_generation(const TaskState& state, double mean_tp_rank, int pos, int neg,
                                        std::vector<std::pair<std::string, int>> labeled) {
    TraceRecord record;
    record.task = state.task;
    record.generation = state.generation;
    record.best_fitness = state.best_fitness;
    record.unique_evals = oracle_.unique_evaluations(state.task);
    record.mean_tp_rank = mean_tp_rank;
    record.tp_pos_count = pos;
    record.tp_neg_count = neg;
    record.labeled_tp = std::move(labeled);
    records_.push_back(std::move(record));
}

void MultiTaskEngine::initialize() {
    if (initialized_) throw ContractError("engine already initialized");
    initialized_ = true;

    const auto& space = oracle_.space();
    const int n = config_.n_tasks;
    const int k = config_.population_size;

    // Draw order: every task's initial population first (task-major), then
    // the embedding corpus on its own stream, then the transfer draws.
    std::vector<std::vector<Individual>> initial(static_cast<std::size_t>(n));
    for (int task = 0; task < n; ++task) {
        initial[static_cast<std::size_t>(task)].reserve(static_cast<std::size_t>(k));
        for (int i = 0; i < k; ++i)
            initial[static_cast<std::size_t>(task)].push_back(
                make_individual(random_architecture(space, rng_), task));
    }

    if (mode_ == TransferMode::rank) {
        Rng embed_rng(mix_seed(config_.seed, kEmbedStream));
        auto catalog = TokenCatalog::for_space(space);
        std::vector<std::vector<int>> corpus;
        auto add_walks = [&](const Architecture& arch) {
            auto walks = generate_walks(to_graph(space, arch, catalog), config_.embedding.walks, embed_rng);
            for (auto& walk : walks) corpus.push_back(std::move(walk));
        };
        for (int i = 0; i < config_.embedding.sample_archs; ++i)
            add_walks(random_architecture(space, embed_rng));
        for (const auto& population : initial)
            for (const auto& ind : population) add_walks(ind.arch);
        auto model = train_skipgram(corpus, catalog.size(), config_.embedding.train, embed_rng);
        model.walk_params = config_.embedding.walks;
        model.seed = mix_seed(config_.seed, kEmbedStream);
        embedding_.emplace(space, std::move(catalog), std::move(model));
    }

    states_.clear();
    states_.reserve(static_cast<std::size_t>(n));
    for (int task = 0; task < n; ++task) {
        TaskState state{.task = task,
                        .generation = 1,
                        .population = {},
                        .transfer = {},
                        .pending_offspring = {},
                        .parent_pool = {},
                        .hts = HistoricalTransferredSet(config_.saved_generations, config_.positive_cap),
                        .best_fitness = 0.0,
                        .best_encoding = {}};

        std::vector<Individual> others;
        for (int j = 0; j < n; ++j)
            if (j != task)
                others.insert(others.end(), initial[static_cast<std::size_t>(j)].begin(),
                              initial[static_cast<std::size_t>(j)].end());
        for (std::size_t idx : sample_without_replacement(others.size(),
                                                          static_cast<std::size_t>(config_.transfer_count), rng_)) {
            Individual tp = others[idx];
            tp.is_transferred = true;
            state.transfer.push_back(std::move(tp));
        }

        std::vector<Individual> pool = initial[static_cast<std::size_t>(task)];
        pool.insert(pool.end(), state.transfer.begin(), state.transfer.end());
        evaluate(pool, task);
        const std::size_t tp_begin = static_cast<std::size_t>(k);
        // Keep the evaluated copies in the transfer population as well.
        for (std::size_t i = tp_begin; i < pool.size(); ++i) state.transfer[i - tp_begin] = pool[i];
        const double tp_rank = mean_transfer_rank(pool, tp_begin, pool.size(), task);

        state.parent_pool.clear();
        for (const auto& ind : pool) state.parent_pool.insert(ind.encoding);

        state.population = top_k(pool, task);
        state.best_fitness = state.population.front().fitness_on(task);
        state.best_encoding = state.population.front().encoding;

        record_generation(state, tp_rank, 0, 0, {});
        states_.push_back(std::move(state));
    }
}

bool MultiTaskEngine::task_resolved(int task) const {
    if (config_.stop_on_optimum && oracle_.serve_index(task, oracle_.optimum_encoding(task))) return true;
    if (config_.eval_budget_per_task > 0 &&
        oracle_.unique_evaluations(task) >= config_.eval_budget_per_task)
        return true;
    return false;
}

bool MultiTaskEngine::done() const {
    if (!initialized_) return false;
    if (states_.front().generation >= config_.max_generations) return true;
    for (int task = 0; task < config_.n_tasks; ++task)
        if (!task_resolved(task)) return false;
    return true;
}

void MultiTaskEngine::step() {
    if (!initialized_) throw ContractError("step before initialize");

    // Generation-t snapshot: every task's transfer selection reads these,
    // no matter how far the loop below has already advanced other tasks.
    std::vector<std::vector<Individual>> snapshot;
    snapshot.reserve(states_.size());
    for (const auto& state : states_) snapshot.push_back(state.population);

    for (auto& state : states_) {
        const int task = state.task;
        const int t = state.generation;

        // (1) Judge the previous generation's transfer population against
        // Z_{t-1}, which is exactly the current population.
        int pos = 0, neg = 0;
        std::vector<std::pair<std::string, int>> labeled;
        if (!state.transfer.empty()) {
            const auto labels = classify_transferred(state.transfer, state.population,
                                                     state.pending_offspring, state.parent_pool,
                                                     config_.ranking_ratio, task);
            std::vector<HTSEntry> entries;
            entries.reserve(labels.size());
            for (std::size_t i = 0; i < labels.size(); ++i) {
                (labels[i] == TransferLabel::positive ? pos : neg) += 1;
                labeled.emplace_back(state.transfer[i].encoding, label_value(labels[i]));
                if (mode_ == TransferMode::rank)
                    entries.push_back(HTSEntry{state.transfer[i].encoding,
                                               embedding_of(state.transfer[i]), labels[i], t});
            }
            if (mode_ == TransferMode::rank) state.hts.update(t, entries);
        }

        // (2) Pool the other tasks' generation-t populations.
        std::vector<Individual> candidates;
        for (int j = 0; j < config_.n_tasks; ++j)
            if (j != task)
                candidates.insert(candidates.end(), snapshot[static_cast<std::size_t>(j)].begin(),
                                  snapshot[static_cast<std::size_t>(j)].end());

        // (3) Refresh the transfer population and evaluate it here.
        std::vector<std::size_t> chosen;
        if (config_.transfer_count > 0) {
            if (mode_ == TransferMode::rank) {
                std::vector<std::vector<double>> cand_embeddings;
                cand_embeddings.reserve(candidates.size());
                for (const auto& cand : candidates) cand_embeddings.push_back(embedding_of(cand));
                const auto ranks = transfer_rank(state.hts.entries(), cand_embeddings);
                chosen = select_transfer_population(ranks.phi, static_cast<std::size_t>(config_.transfer_count),
                                                    rng_);
            } else {
                chosen = sample_without_replacement(candidates.size(),
                                                    static_cast<std::size_t>(config_.transfer_count), rng_);
            }
        }
        std::vector<Individual> transfer;
        transfer.reserve(chosen.size());
        for (std::size_t idx : chosen) {
            Individual tp = candidates[idx];
            tp.is_transferred = true;
            transfer.push_back(std::move(tp));
        }
        evaluate(transfer, task);

        // (4)-(5) Breed from P ∪ TP and evaluate the offspring.
        std::vector<Individual> parents = state.population;
        parents.insert(parents.end(), transfer.begin(), transfer.end());
        auto offspring = breed(parents, task, rng_);
        evaluate(offspring, task);

        // (6) Survivor selection over P ∪ TP ∪ O.
        std::vector<Individual> pool = state.population;
        pool.insert(pool.end(), transfer.begin(), transfer.end());
        pool.insert(pool.end(), offspring.begin(), offspring.end());
        const double tp_rank = mean_transfer_rank(pool, state.population.size(),
                                                  state.population.size() + transfer.size(), task);
        auto next_population = top_k(pool, task);

        // (7) Advance the state and write the trace row.
        state.parent_pool.clear();
        for (const auto& ind : state.population) state.parent_pool.insert(ind.encoding);
        for (const auto& ind : transfer) state.parent_pool.insert(ind.encoding);
        state.population = std::move(next_population);
        state.transfer = std::move(transfer);
        state.pending_offspring = std::move(offspring);
        state.generation = t + 1;
        if (ranks_before(state.population.front().fitness_on(task), state.population.front().encoding,
                         state.best_fitness, state.best_encoding)) {
            state.best_fitness = state.population.front().fitness_on(task);
            state.best_encoding = state.population.front().encoding;
        }
        record_generation(state, tp_rank, pos, neg, std::move(labeled));
    }
}

std::vector<TaskResult> MultiTaskEngine::finals() const {
    std::vector<TaskResult> results;
    results.reserve(states_.size());
    for (const auto& state : states_) {
        TaskResult result;
        result.task = state.task;
        result.best_encoding = state.best_encoding;
        result.best_fitness = state.best_fitness;
        const auto serve = oracle_.serve_index(state.task, oracle_.optimum_encoding(state.task));
        result.found_optimum = serve.has_value();
        if (serve) result.evals_to_optimum = *serve;
        result.unique_evals = oracle_.unique_evaluations(state.task);
        results.push_back(std::move(result));
    }
    return results;
}

RunTrace MultiTaskEngine::run() {
    initialize();
    while (!done()) step();
    RunTrace trace;
    trace.algorithm = mode_ == TransferMode::rank ? kAlgorithmKtnas : kAlgorithmRandomTransfer;
    trace.seed = config_.seed;
    trace.records = std::move(records_);
    trace.finals = finals();
    return trace;
}

RunTrace run_ktnas(const EngineConfig& config, TabularOracle oracle) {
    return MultiTaskEngine(config, std::move(oracle), TransferMode::rank).run();
}

RunTrace run_random_transfer(const EngineConfig& config, TabularOracle oracle) {
    return MultiTaskEngine(config, std::move(oracle), TransferMode::uniform).run();
}

namespace {

struct BaselineBookkeeping {
    const EngineConfig& config;
    TabularOracle& oracle;
    int task;
    std::vector<TraceRecord>& records;
    double best = -std::numeric_limits<double>::infinity();
    std::string best_encoding = {};
    long last_row_evals = 0;

    void observe(const std::string& encoding, double fitness) {
        if (best_encoding.empty() || ranks_before(fitness, encoding, best, best_encoding)) {
            best = fitness;
            best_encoding = encoding;
        }
        maybe_row(false);
    }

    void maybe_row(bool final_row) {
        const long evals = oracle.unique_evaluations(task);
        const bool boundary = evals - last_row_evals >= config.population_size;
        if (!boundary && !(final_row && evals > last_row_evals)) return;
        TraceRecord record;
        record.task = task;
        record.generation = static_cast<int>(records.size()) + 1;
        record.best_fitness = best;
        record.unique_evals = evals;
        record.mean_tp_rank = std::nan("");
        records.push_back(std::move(record));
        last_row_evals = evals;
    }

    bool resolved() const {
        if (config.stop_on_optimum && oracle.serve_index(task, oracle.optimum_encoding(task))) return true;
        if (config.eval_budget_per_task > 0 &&
            oracle.unique_evaluations(task) >= config.eval_budget_per_task)
            return true;
        return oracle.unique_evaluations(task) >= static_cast<long>(oracle.num_keys());
    }
};

void require_terminating(const EngineConfig& config) {
    if (config.eval_budget_per_task <= 0 && !config.stop_on_optimum)
        throw ContractError("baselines need an evaluation budget or optimum stopping");
}

void fix_generation_numbers(std::vector<TraceRecord>& records, int task_start) {
    int generation = 0;
    for (std::size_t i = static_cast<std::size_t>(task_start); i < records.size(); ++i)
        records[i].generation = ++generation;
}

RunTrace finish_baseline(const char* algorithm, const EngineConfig& config, TabularOracle& oracle,
                         std::vector<TraceRecord> records,
                         const std::vector<std::pair<double, std::string>>& bests) {
    RunTrace trace;
    trace.algorithm = algorithm;
    trace.seed = config.seed;
    trace.records = std::move(records);
    for (int task = 0; task < config.n_tasks; ++task) {
        TaskResult result;
        result.task = task;
        result.best_fitness = bests[static_cast<std::size_t>(task)].first;
        result.best_encoding = bests[static_cast<std::size_t>(task)].second;
        const auto serve = oracle.serve_index(task, oracle.optimum_encoding(task));
        result.found_optimum = serve.has_value();
        if (serve) result.evals_to_optimum = *serve;
        result.unique_evals = oracle.unique_evaluations(task);
        trace.finals.push_back(std::move(result));
    }
    return trace;
}

}  // namespace

RunTrace baseline_random_search(const EngineConfig& config, TabularOracle oracle) {
    config.validate(true);
    require_terminating(config);
    const auto& space = oracle.space();
    std::vector<TraceRecord> records;
    std::vector<std::pair<double, std::string>> bests;

    for (int task = 0; task < config.n_tasks; ++task) {
        Rng rng(mix_seed(config.seed, kRsStream + static_cast<std::uint64_t>(task)));
        BaselineBookkeeping book{config, oracle, task, records};
        const int row_start = static_cast<int>(records.size());
        while (!book.resolved()) {
            // Unique sampling: redraw until an unseen genotype comes up.
            Architecture arch = random_architecture(space, rng);
            std::string enc = encode(arch);
            while (oracle.serve_index(task, enc)) {
                arch = random_architecture(space, rng);
                enc = encode(arch);
            }
            book.observe(enc, oracle.evaluate(task, enc));
        }
        book.maybe_row(true);
        fix_generation_numbers(records, row_start);
        bests.emplace_back(book.best, book.best_encoding);
    }
    return finish_baseline(kAlgorithmRs, config, oracle, std::move(records), bests);
}

RunTrace baseline_regularized_evolution(const EngineConfig& config, TabularOracle oracle) {
    config.validate(true);
    require_terminating(config);
    const auto& space = oracle.space();
    std::vector<TraceRecord> records;
    std::vector<std::pair<double, std::string>> bests;

    for (int task = 0; task < config.n_tasks; ++task) {
        Rng rng(mix_seed(config.seed, kReaStream + static_cast<std::uint64_t>(task)));
        BaselineBookkeeping book{config, oracle, task, records};
        const int row_start = static_cast<int>(records.size());

        std::vector<Individual> population;  // aging queue, oldest first
        for (int i = 0; i < config.population_size && !book.resolved(); ++i) {
            auto ind = make_individual(random_architecture(space, rng), task);
            ind.fitness[task] = oracle.evaluate(task, ind.encoding);
            book.observe(ind.encoding, ind.fitness_on(task));
            population.push_back(std::move(ind));
        }
        while (!book.resolved()) {
            const auto& parent = population[tournament_select(population, task, config.tournament_size, rng)];
            auto child = make_individual(mutate(space, parent.arch, 1.0, rng), task);
            child.parents = {parent.encoding};
            child.fitness[task] = oracle.evaluate(task, child.encoding);
            book.observe(child.encoding, child.fitness_on(task));
            population.push_back(std::move(child));
            population.erase(population.begin());  // age out the oldest
        }
        book.maybe_row(true);
        fix_generation_numbers(records, row_start);
        bests.emplace_back(book.best, book.best_encoding);
    }
    return finish_baseline(kAlgorithmRea, config, oracle, std::move(records), bests);
}

RunTrace run_algorithm(const std::string& algorithm, const EngineConfig& config, TabularOracle oracle) {
    if (algorithm == kAlgorithmKtnas) return run_ktnas(config, std::move(oracle));
    if (algorithm == kAlgorithmRandomTransfer) return run_random_transfer(config, std::move(oracle));
    if (algorithm == kAlgorithmRea) return baseline_regularized_evolution(config, std::move(oracle));
    if (algorithm == kAlgorithmRs) return baseline_random_search(config, std::move(oracle));
    throw DataError("unknown algorithm '" + algorithm + "'");
}

}  // namespace ktnas

#include "ktnas/engine.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "ktnas/errors.hpp"
#include "ktnas/stats.hpp"

using namespace ktnas;

namespace {

EngineConfig cheap_embedding(EngineConfig config) {
    config.embedding.sample_archs = 4;
    config.embedding.walks.num_walks = 1;
    config.embedding.walks.walk_len = 6;
    config.embedding.train.dim = 6;
    config.embedding.train.window = 2;
    config.embedding.train.negatives = 2;
    config.embedding.train.epochs = 1;
    return config;
}

// 8-key space with fitness task0 = binary gene value, task1 = its mirror.
TabularOracle value_oracle() {
    std::vector<std::string> keys;
    std::vector<double> t0, t1;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c) {
                keys.push_back(std::to_string(a) + ":" + std::to_string(b) + ":" + std::to_string(c));
                const double value = 4 * a + 2 * b + c;
                t0.push_back(value);
                t1.push_back(7.0 - value);
            }
    return TabularOracle(SearchSpaceSpec::generic(3, 2), keys, {t0, t1}, {});
}

TabularOracle mixed_landscape(int n_tasks, std::uint64_t seed) {
    LandscapeSpec spec;
    spec.space = SearchSpaceSpec::generic(3, 3);  // 27 genotypes
    spec.n_tasks = n_tasks;
    spec.lambda_override = 0.5;
    return synthesize_landscape(spec, seed).oracle;
}

TabularOracle additive_landscape(std::uint64_t seed) {
    LandscapeSpec spec;
    spec.space = SearchSpaceSpec::generic(4, 3);  // 729 genotypes
    spec.n_tasks = 1;
    return synthesize_landscape(spec, seed).oracle;  // single task: pure shared score
}

void check_traces_equal(const RunTrace& a, const RunTrace& b) {
    CHECK(a.algorithm == b.algorithm);
    CHECK(a.seed == b.seed);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        const auto& ra = a.records[i];
        const auto& rb = b.records[i];
        CHECK(ra.task == rb.task);
        CHECK(ra.generation == rb.generation);
        CHECK(ra.best_fitness == rb.best_fitness);
        CHECK(ra.unique_evals == rb.unique_evals);
        CHECK((std::isnan(ra.mean_tp_rank) ? std::isnan(rb.mean_tp_rank)
                                           : ra.mean_tp_rank == rb.mean_tp_rank));
        CHECK(ra.tp_pos_count == rb.tp_pos_count);
        CHECK(ra.tp_neg_count == rb.tp_neg_count);
        CHECK(ra.labeled_tp == rb.labeled_tp);
    }
    REQUIRE(a.finals.size() == b.finals.size());
    for (std::size_t i = 0; i < a.finals.size(); ++i) {
        CHECK(a.finals[i].best_encoding == b.finals[i].best_encoding);
        CHECK(a.finals[i].best_fitness == b.finals[i].best_fitness);
        CHECK(a.finals[i].found_optimum == b.finals[i].found_optimum);
        CHECK(a.finals[i].evals_to_optimum == b.finals[i].evals_to_optimum);
        CHECK(a.finals[i].unique_evals == b.finals[i].unique_evals);
    }
}

}  // namespace

TEST_CASE("configuration bounds") {
    EngineConfig config;
    CHECK_NOTHROW(config.validate());
    auto expect_invalid = [](EngineConfig bad) { CHECK_THROWS_AS(bad.validate(), ContractError); };
    {
        EngineConfig bad;
        bad.n_tasks = 0;
        expect_invalid(bad);
    }
    {
        EngineConfig bad;
        bad.population_size = 0;
        expect_invalid(bad);
    }
    {
        EngineConfig bad;
        bad.transfer_count = -1;
        expect_invalid(bad);
    }
    {
        EngineConfig bad;
        bad.n_tasks = 1;  // transfer needs a donor task
        expect_invalid(bad);
    }
    {
        EngineConfig bad;
        bad.n_tasks = 2;
        bad.population_size = 3;
        bad.transfer_count = 4;  // > K * (N - 1)
        expect_invalid(bad);
    }
    {
        EngineConfig bad;
        bad.saved_generations = 0;
        expect_invalid(bad);
    }
    {
        EngineConfig bad;
        bad.ranking_ratio = 0.0;
        expect_invalid(bad);
    }
    {
        EngineConfig bad;
        bad.ranking_ratio = 100.5;
        expect_invalid(bad);
    }
    {
        EngineConfig bad;
        bad.max_generations = 0;
        expect_invalid(bad);
    }
    {
        EngineConfig bad;
        bad.tournament_size = 0;
        expect_invalid(bad);
    }
    {
        EngineConfig bad;
        bad.crossover_probability = 1.5;
        expect_invalid(bad);
    }
    {
        EngineConfig bad;
        bad.mutation_probability = -0.5;
        expect_invalid(bad);
    }
    {
        EngineConfig bad;
        bad.offspring_count = -1;
        expect_invalid(bad);
    }
    {
        EngineConfig bad;
        bad.eval_budget_per_task = -1;
        expect_invalid(bad);
    }
    {
        EngineConfig bad;
        bad.embedding.sample_archs = -1;
        expect_invalid(bad);
    }

    EngineConfig ablation;
    ablation.transfer_count = 0;
    CHECK_THROWS_AS(ablation.validate(), ContractError);
    CHECK_NOTHROW(ablation.validate(true));

    EngineConfig sized;
    CHECK(sized.effective_offspring() == sized.population_size);
    sized.offspring_count = 3;
    CHECK(sized.effective_offspring() == 3);
}

TEST_CASE("engine construction and stepping discipline") {
    EngineConfig config;
    config.n_tasks = 3;
    CHECK_THROWS_AS(MultiTaskEngine(config, value_oracle()), DataError);  // oracle has 2 tasks

    EngineConfig no_transfer;
    no_transfer.transfer_count = 0;
    CHECK_THROWS_AS(MultiTaskEngine(no_transfer, value_oracle(), TransferMode::rank), ContractError);
    CHECK_NOTHROW(MultiTaskEngine(no_transfer, value_oracle(), TransferMode::uniform));

    EngineConfig tiny;
    tiny.population_size = 2;
    tiny.transfer_count = 1;
    tiny.max_generations = 2;
    MultiTaskEngine engine(tiny, value_oracle(), TransferMode::uniform);
    CHECK_FALSE(engine.done());
    CHECK_THROWS_AS(engine.step(), ContractError);
    engine.initialize();
    CHECK_THROWS_AS(engine.initialize(), ContractError);
}

TEST_CASE("a written-out two-generation trace is reproduced exactly") {
    EngineConfig config;
    config.n_tasks = 2;
    config.population_size = 2;
    config.transfer_count = 1;
    config.saved_generations = 2;
    config.ranking_ratio = 50.0;
    config.max_generations = 3;
    config.tournament_size = 2;
    config.stop_on_optimum = false;
    config.seed = 7;

    MultiTaskEngine engine(config, value_oracle(), TransferMode::uniform);
    engine.initialize();
    engine.step();
    engine.step();

    // Expected values worked out by hand from the fitness table
    // (task0 = binary gene value, task1 = 7 - value) and checked against
    // the selection rules: every population below is the top-2 of its
    // evaluated pool, every label follows from the pending offspring.
    const auto& states = engine.states();
    REQUIRE(states.size() == 2);

    CHECK(states[0].generation == 3);
    REQUIRE(states[0].population.size() == 2);
    CHECK(states[0].population[0].encoding == "1:0:1");
    CHECK(states[0].population[1].encoding == "1:0:1");
    CHECK(states[0].best_fitness == 5.0);
    CHECK(states[0].best_encoding == "1:0:1");
    REQUIRE(states[0].transfer.size() == 1);
    CHECK(states[0].transfer[0].encoding == "1:0:0");
    CHECK(states[0].transfer[0].is_transferred);
    CHECK(states[0].transfer[0].fitness_on(0) == 4.0);
    REQUIRE(states[0].pending_offspring.size() == 2);
    CHECK(states[0].pending_offspring[0].encoding == "1:0:1");
    CHECK(states[0].pending_offspring[0].parents == std::vector<std::string>{"1:0:0", "1:0:0"});

    CHECK(states[1].generation == 3);
    REQUIRE(states[1].population.size() == 2);
    CHECK(states[1].population[0].encoding == "0:0:1");
    CHECK(states[1].population[1].encoding == "0:1:1");
    CHECK(states[1].best_fitness == 6.0);
    CHECK(states[1].best_encoding == "0:0:1");
    REQUIRE(states[1].transfer.size() == 1);
    CHECK(states[1].transfer[0].encoding == "1:0:0");
    REQUIRE(states[1].pending_offspring.size() == 2);
    CHECK(states[1].pending_offspring[1].encoding == "0:1:1");
    CHECK(states[1].pending_offspring[1].parents == std::vector<std::string>{"0:0:1", "0:0:1"});

    struct ExpectedRow {
        int task;
        int generation;
        double best;
        long evals;
        double tp_rank;
        int pos;
        int neg;
        std::vector<std::pair<std::string, int>> labeled;
    };
    const std::vector<ExpectedRow> expected = {
        {0, 1, 4.0, 3, 3.0, 0, 0, {}},
        {1, 1, 6.0, 3, 2.0, 0, 0, {}},
        {0, 2, 4.0, 3, 5.0, 0, 1, {{"0:0:1", -1}}},
        {1, 2, 6.0, 3, 3.0, 0, 1, {{"1:0:0", -1}}},
        {0, 3, 5.0, 4, 5.0, 1, 0, {{"0:0:1", 1}}},
        {1, 3, 6.0, 4, 5.0, 0, 1, {{"1:0:0", -1}}},
    };
    const auto records = engine.take_records();
    REQUIRE(records.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
        CAPTURE(i);
        CHECK(records[i].task == expected[i].task);
        CHECK(records[i].generation == expected[i].generation);
        CHECK(records[i].best_fitness == expected[i].best);
        CHECK(records[i].unique_evals == expected[i].evals);
        CHECK(records[i].mean_tp_rank == expected[i].tp_rank);
        CHECK(records[i].tp_pos_count == expected[i].pos);
        CHECK(records[i].tp_neg_count == expected[i].neg);
        CHECK(records[i].labeled_tp == expected[i].labeled);
    }

    const auto finals = engine.finals();
    REQUIRE(finals.size() == 2);
    CHECK(finals[0].best_fitness == 5.0);
    CHECK(finals[0].best_encoding == "1:0:1");
    CHECK_FALSE(finals[0].found_optimum);
    CHECK(finals[0].evals_to_optimum == std::nullopt);
    CHECK(finals[0].unique_evals == 4);
    CHECK(finals[1].best_fitness == 6.0);
    CHECK(finals[1].best_encoding == "0:0:1");
    CHECK_FALSE(finals[1].found_optimum);
    CHECK(finals[1].unique_evals == 4);
}

TEST_CASE("every algorithm replays byte-for-byte from its seed") {
    EngineConfig config = cheap_embedding({});
    config.n_tasks = 2;
    config.population_size = 4;
    config.transfer_count = 2;
    config.max_generations = 5;
    config.eval_budget_per_task = 40;
    config.seed = 99;

    const auto oracle = mixed_landscape(2, 17);
    for (const char* algorithm :
         {kAlgorithmKtnas, kAlgorithmRandomTransfer, kAlgorithmRs, kAlgorithmRea}) {
        CAPTURE(algorithm);
        const auto first = run_algorithm(algorithm, config, oracle.fresh_clone());
        const auto second = run_algorithm(algorithm, config, oracle.fresh_clone());
        CHECK(first.algorithm == algorithm);
        check_traces_equal(first, second);
    }
    CHECK_THROWS_AS(run_algorithm("hillclimb", config, oracle.fresh_clone()), DataError);
}

TEST_CASE("loop invariants hold across a guided run") {
    EngineConfig config = cheap_embedding({});
    config.n_tasks = 3;
    config.population_size = 4;
    config.transfer_count = 3;
    config.saved_generations = 2;
    config.max_generations = 6;
    config.stop_on_optimum = false;
    config.seed = 5;

    auto oracle = mixed_landscape(3, 23);
    MultiTaskEngine engine(config, oracle.fresh_clone(), TransferMode::rank);
    engine.initialize();

    std::vector<std::set<std::string>> transferred_encodings(3);
    for (const auto& state : engine.states())
        for (const auto& ind : state.transfer) transferred_encodings[static_cast<std::size_t>(state.task)].insert(ind.encoding);

    while (!engine.done()) {
        engine.step();
        for (const auto& state : engine.states()) {
            REQUIRE(state.population.size() == 4);
            REQUIRE(state.transfer.size() == 3);
            CHECK(state.pending_offspring.size() == 4);
            for (std::size_t i = 1; i < state.population.size(); ++i)
                CHECK_FALSE(ranks_before(state.population[i].fitness_on(state.task),
                                         state.population[i].encoding,
                                         state.population[i - 1].fitness_on(state.task),
                                         state.population[i - 1].encoding));
            for (const auto& ind : state.transfer) {
                CHECK(ind.is_transferred);
                transferred_encodings[static_cast<std::size_t>(state.task)].insert(ind.encoding);
            }
            // Negative archive entries only survive the recent window.
            for (int gen : state.hts.retained_negative_generations())
                CHECK(gen > state.generation - 1 - config.saved_generations);
            for (const auto* entry : state.hts.entries())
                CHECK(transferred_encodings[static_cast<std::size_t>(state.task)].count(entry->encoding) == 1);
        }
    }

    const auto records = engine.take_records();
    REQUIRE(records.size() == 3 * 6);
    std::vector<double> last_best(3, -1e300);
    std::vector<long> last_evals(3, 0);
    for (const auto& record : records) {
        const auto task = static_cast<std::size_t>(record.task);
        CHECK(record.best_fitness >= last_best[task]);
        CHECK(record.unique_evals >= last_evals[task]);
        last_best[task] = record.best_fitness;
        last_evals[task] = record.unique_evals;
        if (record.generation == 1) {
            CHECK(record.tp_pos_count == 0);
            CHECK(record.tp_neg_count == 0);
            CHECK(record.labeled_tp.empty());
        } else {
            CHECK(record.tp_pos_count + record.tp_neg_count == 3);
            CHECK(record.labeled_tp.size() == 3);
        }
        if (record.generation == 2) {
            // The seeding transfer population predates any offspring, so its
            // members cannot have parented anything yet.
            CHECK(record.tp_pos_count == 0);
        }
        CHECK_FALSE(std::isnan(record.mean_tp_rank));
        CHECK(record.mean_tp_rank >= 1.0);
    }

    for (const auto& final : engine.finals()) {
        long served = 0;
        for (const auto& key : engine.oracle().keys())
            if (engine.oracle().serve_index(final.task, key)) ++served;
        CHECK(final.unique_evals == served);
        CHECK(final.best_fitness == engine.oracle().peek(final.task, final.best_encoding));
        if (final.found_optimum) {
            CHECK(final.best_fitness == engine.oracle().optimum_fitness(final.task));
            CHECK(*final.evals_to_optimum <= final.unique_evals);
        }
    }
}

TEST_CASE("the positive archive cap is honored during a run") {
    EngineConfig config = cheap_embedding({});
    config.n_tasks = 2;
    config.population_size = 4;
    config.transfer_count = 2;
    config.max_generations = 8;
    config.stop_on_optimum = false;
    config.positive_cap = 2;
    config.seed = 3;

    MultiTaskEngine engine(config, mixed_landscape(2, 29), TransferMode::rank);
    engine.initialize();
    while (!engine.done()) {
        engine.step();
        for (const auto& state : engine.states()) CHECK(state.hts.positive_count() <= 2);
    }
}

TEST_CASE("the no-transfer ablation runs without a transfer population") {
    EngineConfig config;
    config.n_tasks = 2;
    config.population_size = 4;
    config.transfer_count = 0;
    config.max_generations = 4;
    config.stop_on_optimum = false;
    config.seed = 11;

    MultiTaskEngine engine(config, mixed_landscape(2, 31), TransferMode::uniform);
    engine.initialize();
    while (!engine.done()) engine.step();
    for (const auto& state : engine.states()) CHECK(state.transfer.empty());
    for (const auto& record : engine.take_records()) {
        CHECK(std::isnan(record.mean_tp_rank));
        CHECK(record.tp_pos_count == 0);
        CHECK(record.tp_neg_count == 0);
    }
}

TEST_CASE("a full donor boundary is allowed") {
    EngineConfig config;
    config.n_tasks = 2;
    config.population_size = 2;
    config.transfer_count = 2;  // exactly K * (N - 1)
    config.max_generations = 3;
    config.stop_on_optimum = false;
    config.seed = 13;
    MultiTaskEngine engine(config, value_oracle(), TransferMode::uniform);
    engine.initialize();
    while (!engine.done()) engine.step();
    for (const auto& state : engine.states()) CHECK(state.transfer.size() == 2);
}

TEST_CASE("generation cap and budget both stop the loop") {
    EngineConfig config;
    config.n_tasks = 2;
    config.population_size = 2;
    config.transfer_count = 1;
    config.stop_on_optimum = false;
    config.seed = 21;

    SUBCASE("generation cap") {
        config.max_generations = 4;
        auto trace = MultiTaskEngine(config, value_oracle(), TransferMode::uniform).run();
        REQUIRE(trace.records.size() == 2 * 4);
        CHECK(trace.records.back().generation == 4);
    }
    SUBCASE("evaluation budget") {
        config.max_generations = 1000;
        config.eval_budget_per_task = 6;
        auto trace = MultiTaskEngine(config, value_oracle(), TransferMode::uniform).run();
        for (const auto& final : trace.finals) {
            CHECK(final.unique_evals >= 6);
            CHECK(final.unique_evals <= 8);
        }
        CHECK(trace.records.back().generation < 1000);
    }
    SUBCASE("optimum stopping") {
        config.max_generations = 1000;
        config.stop_on_optimum = true;
        auto trace = MultiTaskEngine(config, value_oracle(), TransferMode::uniform).run();
        for (const auto& final : trace.finals) {
            CHECK(final.found_optimum);
            CHECK(final.best_fitness == 7.0);
        }
    }
}

TEST_CASE("random search serves the optimum at the uniform-order rate") {
    EngineConfig config;
    config.n_tasks = 1;
    config.transfer_count = 0;
    config.population_size = 4;

    const auto both = value_oracle();
    std::vector<double> t0;
    for (const auto& key : both.keys()) t0.push_back(both.peek(0, key));
    const TabularOracle single(both.space(), both.keys(), {t0}, {});

    // A uniform draw order puts the optimum at serve index 1..8 with equal
    // probability, so the mean index over many seeds approaches 4.5.
    std::vector<double> serve_indices;
    for (std::uint64_t seed = 1; seed <= 4000; ++seed) {
        config.seed = seed;
        const auto trace = baseline_random_search(config, single.fresh_clone());
        REQUIRE(trace.finals.size() == 1);
        REQUIRE(trace.finals[0].found_optimum);
        serve_indices.push_back(static_cast<double>(*trace.finals[0].evals_to_optimum));
    }
    const double observed = mean(serve_indices);
    // sd of a uniform{1..8} draw is sqrt(63/12); 4 sigma over 4000 seeds.
    CHECK(std::abs(observed - 4.5) < 4.0 * std::sqrt(63.0 / 12.0) / std::sqrt(4000.0));
}

TEST_CASE("baseline trace rows land on population boundaries") {
    EngineConfig config;
    config.n_tasks = 1;
    config.transfer_count = 0;
    config.population_size = 10;
    config.stop_on_optimum = false;
    config.seed = 77;
    const auto oracle = additive_landscape(41);

    for (auto* runner : {&baseline_random_search, &baseline_regularized_evolution}) {
        config.eval_budget_per_task = 37;  // three full rows and a partial tail
        const auto tailed = (*runner)(config, oracle.fresh_clone());
        REQUIRE(tailed.records.size() == 4);
        std::vector<long> evals;
        for (const auto& record : tailed.records) {
            evals.push_back(record.unique_evals);
            CHECK(std::isnan(record.mean_tp_rank));
            CHECK(record.tp_pos_count == 0);
            CHECK(record.labeled_tp.empty());
        }
        CHECK(evals == std::vector<long>{10, 20, 30, 37});
        CHECK(tailed.records[0].generation == 1);
        CHECK(tailed.records[3].generation == 4);

        config.eval_budget_per_task = 30;  // exact boundary leaves no tail row
        const auto exact = (*runner)(config, oracle.fresh_clone());
        REQUIRE(exact.records.size() == 3);
        CHECK(exact.records.back().unique_evals == 30);
    }
}

TEST_CASE("baselines refuse configurations that cannot terminate") {
    EngineConfig config;
    config.n_tasks = 1;
    config.transfer_count = 0;
    config.stop_on_optimum = false;
    config.eval_budget_per_task = 0;
    CHECK_THROWS_AS(baseline_random_search(config, value_oracle()), ContractError);
    CHECK_THROWS_AS(baseline_regularized_evolution(config, value_oracle()), ContractError);
}

TEST_CASE("baselines stop after exhausting a small space") {
    EngineConfig config;
    config.n_tasks = 2;
    config.transfer_count = 0;
    config.population_size = 3;
    config.stop_on_optimum = false;
    config.eval_budget_per_task = 100000;  // far beyond the 8 genotypes
    config.seed = 15;
    for (auto* runner : {&baseline_random_search, &baseline_regularized_evolution}) {
        const auto trace = (*runner)(config, value_oracle());
        for (const auto& final : trace.finals) {
            CHECK(final.unique_evals == 8);
            CHECK(final.best_fitness == 7.0);  // both task columns top out at 7
        }
    }
}

TEST_CASE("mutation-driven evolution beats blind sampling on an additive landscape") {
    EngineConfig config;
    config.n_tasks = 1;
    config.transfer_count = 0;
    config.population_size = 10;
    config.tournament_size = 5;
    config.stop_on_optimum = true;

    const auto oracle = additive_landscape(43);
    std::vector<double> rea_evals, rs_evals;
    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
        config.seed = seed;
        const auto rea = baseline_regularized_evolution(config, oracle.fresh_clone());
        const auto rs = baseline_random_search(config, oracle.fresh_clone());
        REQUIRE(rea.finals[0].found_optimum);
        REQUIRE(rs.finals[0].found_optimum);
        rea_evals.push_back(static_cast<double>(*rea.finals[0].evals_to_optimum));
        rs_evals.push_back(static_cast<double>(*rs.finals[0].evals_to_optimum));
    }
    CHECK(median(rea_evals) < median(rs_evals));
}

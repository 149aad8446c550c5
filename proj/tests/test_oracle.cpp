#include "ktnas/oracle.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "ktnas/errors.hpp"

using namespace ktnas;

namespace {

TabularOracle tiny_oracle() {
    // generic(3, 2): keys over 3 genes of 2 ops.
    return TabularOracle(SearchSpaceSpec::generic(3, 2),
                         {"0:0:0", "0:0:1", "0:1:0", "1:0:0"},
                         {{0.1, 0.4, 0.3, 0.2}, {0.9, 0.6, 0.9, 0.7}}, {});
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    std::ostringstream out;
    out << file.rdbuf();
    return out.str();
}

double brute_force_tau_b(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double concordant = 0, discordant = 0, tied_x = 0, tied_y = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dx = x[i] - x[j], dy = y[i] - y[j];
            if (dx == 0.0) ++tied_x;
            if (dy == 0.0) ++tied_y;
            if (dx == 0.0 || dy == 0.0) continue;
            if ((dx > 0) == (dy > 0))
                ++concordant;
            else
                ++discordant;
        }
    }
    const double n0 = static_cast<double>(n) * (n - 1) / 2.0;
    return (concordant - discordant) / std::sqrt((n0 - tied_x) * (n0 - tied_y));
}

}  // namespace

TEST_CASE("evaluation bookkeeping tracks first services only") {
    auto oracle = tiny_oracle();
    CHECK(oracle.num_tasks() == 2);
    CHECK(oracle.num_keys() == 4);
    CHECK(oracle.unique_evaluations(0) == 0);
    CHECK(oracle.serve_index(0, "0:0:1") == std::nullopt);

    CHECK(oracle.evaluate(0, "0:0:1") == 0.4);
    CHECK(oracle.evaluate(0, "0:1:0") == 0.3);
    CHECK(oracle.evaluate(0, "0:0:1") == 0.4);  // repeat, no new index
    CHECK(oracle.unique_evaluations(0) == 2);
    CHECK(oracle.serve_index(0, "0:0:1") == 1);
    CHECK(oracle.serve_index(0, "0:1:0") == 2);

    CHECK(oracle.peek(1, "0:0:0") == 0.9);
    CHECK(oracle.unique_evaluations(1) == 0);  // peek is counter-free

    oracle.evaluate(1, "0:0:0");
    CHECK(oracle.unique_evaluations(1) == 1);
    CHECK(oracle.unique_evaluations(0) == 2);  // per-task counters

    auto clone = oracle.fresh_clone();
    CHECK(clone.unique_evaluations(0) == 0);
    CHECK(clone.serve_index(0, "0:0:1") == std::nullopt);
    CHECK(clone.peek(0, "0:0:1") == 0.4);
    CHECK(oracle.unique_evaluations(0) == 2);  // the original is untouched

    CHECK_THROWS_AS(oracle.evaluate(0, "1:1:1"), DataError);
    CHECK_THROWS_AS(oracle.evaluate(2, "0:0:0"), ContractError);
    CHECK_THROWS_AS(oracle.peek(-1, "0:0:0"), ContractError);
}

TEST_CASE("optima prefer the smaller encoding on ties") {
    const auto oracle = tiny_oracle();
    CHECK(oracle.optimum_encoding(0) == "0:0:1");
    CHECK(oracle.optimum_fitness(0) == 0.4);
    CHECK(oracle.optimum_encoding(1) == "0:0:0");  // 0.9 tie against "0:1:0"
    CHECK(oracle.optimum_fitness(1) == 0.9);
}

TEST_CASE("fitness table construction rejects malformed inputs") {
    const auto space = SearchSpaceSpec::generic(3, 2);
    CHECK_THROWS_AS(TabularOracle(space, {}, {{1.0}}, {}), DataError);
    CHECK_THROWS_AS(TabularOracle(space, {"0:0:0"}, {}, {}), DataError);
    CHECK_THROWS_WITH_AS(TabularOracle(space, {"0:0:0", "0:0:0"}, {{1.0, 2.0}}, {}),
                         doctest::Contains("duplicate"), DataError);
    CHECK_THROWS_AS(TabularOracle(space, {"0:0:0", "0:0:1"}, {{1.0}}, {}), DataError);
    CHECK_THROWS_AS(TabularOracle(space, {"0:0:0"}, {{std::nan("")}}, {}), DataError);
    CHECK_THROWS_AS(TabularOracle(space, {"9:0:0"}, {{1.0}}, {}), DataError);  // op out of range
}

TEST_CASE("fitness tables round trip through their file form byte for byte") {
    const auto oracle = tiny_oracle();
    const auto path_a = temp_file("ktnas_oracle_a.csv");
    const auto path_b = temp_file("ktnas_oracle_b.csv");
    write_tabular(oracle, path_a.string());
    auto loaded = load_tabular(path_a.string());
    REQUIRE(loaded.num_keys() == oracle.num_keys());
    for (const auto& key : oracle.keys())
        for (int task = 0; task < oracle.num_tasks(); ++task)
            CHECK(loaded.peek(task, key) == oracle.peek(task, key));
    write_tabular(loaded, path_b.string());
    CHECK(slurp(path_a) == slurp(path_b));
    CHECK(loaded.metadata().source == path_a.string());
    std::filesystem::remove(path_a);
    std::filesystem::remove(path_b);
}

TEST_CASE("the loader reports malformed files with line numbers") {
    const auto path = temp_file("ktnas_oracle_bad.csv");
    auto expect_load_error = [&](const std::string& content, const std::string& needle) {
        std::ofstream(path) << content;
        CHECK_THROWS_WITH_AS(load_tabular(path.string()), doctest::Contains(needle.c_str()), DataError);
    };
    CHECK_THROWS_AS(load_tabular((path / "missing").string()), DataError);
    expect_load_error("", "empty");
    expect_load_error("genotype,task_0\n0:0:0,1\n", "encoding");
    expect_load_error("encoding,task_1\n0:0:0,1\n", "task_0");
    expect_load_error("encoding,task_0\n0:0:0,1,9\n", ":2:");
    expect_load_error("encoding,task_0\n0:0:0,what\n", ":2:");
    expect_load_error("encoding,task_0\n0:0:0,inf\n", "non-finite");
    expect_load_error("encoding,task_0\n0:0:0,1\n0:0:0,2\n", "duplicate");
    expect_load_error("encoding,task_0\n", "no data rows");
    expect_load_error("encoding,task_0\n0:0,1\n", "complete cell DAG");

    std::ofstream(path) << "encoding,task_0\n0:0:0,1\n";
    CHECK_THROWS_WITH_AS(load_tabular(path.string(), {1}), doctest::Contains("negate"), DataError);
    std::filesystem::remove(path);
}

TEST_CASE("negated tasks flip sign on load") {
    const auto path = temp_file("ktnas_oracle_neg.csv");
    write_tabular(tiny_oracle(), path.string());
    const auto flipped = load_tabular(path.string(), {1});
    CHECK(flipped.peek(0, "0:0:0") == 0.1);
    CHECK(flipped.peek(1, "0:0:0") == -0.9);
    CHECK(flipped.optimum_encoding(1) == "0:0:1");  // -0.6 is now the best
    CHECK(flipped.metadata().negated_tasks == std::vector<int>{1});
    std::filesystem::remove(path);
}

TEST_CASE("rank correlation matches a quadratic recount") {
    Rng rng(211);
    for (int instance = 0; instance < 100; ++instance) {
        const std::size_t n = 2 + rng.uniform_index(40);
        std::vector<double> x(n), y(n);
        bool usable = false;
        for (std::size_t i = 0; i < n; ++i) {
            // Small integer support forces plenty of ties.
            x[i] = static_cast<double>(rng.uniform_index(6));
            y[i] = static_cast<double>(rng.uniform_index(6));
        }
        for (std::size_t i = 1; i < n && !usable; ++i) usable = x[i] != x[0] && y[i] != y[0];
        if (!usable) continue;  // constant input is covered below
        CHECK(kendall_tau_b(x, y) == doctest::Approx(brute_force_tau_b(x, y)).epsilon(1e-12));
    }
}

TEST_CASE("rank correlation endpoints and contract") {
    const std::vector<double> up = {1, 2, 3, 4, 5};
    const std::vector<double> down = {5, 4, 3, 2, 1};
    CHECK(kendall_tau_b(up, up) == doctest::Approx(1.0));
    CHECK(kendall_tau_b(up, down) == doctest::Approx(-1.0));
    CHECK_THROWS_AS(kendall_tau_b(up, {1, 2}), ContractError);
    CHECK_THROWS_AS(kendall_tau_b({1}, {1}), ContractError);
    CHECK_THROWS_AS(kendall_tau_b({2, 2, 2}, up), ContractError);

    const auto oracle = tiny_oracle();
    CHECK(kendall_tau(oracle, 0, 0) == doctest::Approx(1.0));
    CHECK(kendall_tau(oracle, 0, 1) == doctest::Approx(kendall_tau(oracle, 1, 0)));
}

TEST_CASE("synthesized landscapes are deterministic and hit their target") {
    LandscapeSpec spec;
    spec.space = SearchSpaceSpec::generic(4, 3);  // 729 genotypes
    spec.n_tasks = 2;
    spec.target_tau = 0.7;
    spec.tau_tolerance = 0.05;

    const auto first = synthesize_landscape(spec, 31);
    const auto second = synthesize_landscape(spec, 31);
    CHECK(first.lambda == second.lambda);
    CHECK(first.oracle.keys() == second.oracle.keys());
    for (const auto& key : first.oracle.keys())
        for (int task = 0; task < 2; ++task)
            CHECK(first.oracle.peek(task, key) == second.oracle.peek(task, key));

    CHECK(std::abs(first.realized_tau[0][1] - 0.7) <= 0.05);
    CHECK(first.realized_tau[0][1] == first.realized_tau[1][0]);
    CHECK(first.oracle.metadata().lambda == first.lambda);
    CHECK(first.oracle.metadata().seed == 31);
    CHECK(first.oracle.metadata().source == "synthesized");
    CHECK(first.oracle.num_keys() == 729);

    const auto different = synthesize_landscape(spec, 32);
    bool any_difference = false;
    for (const auto& key : first.oracle.keys())
        any_difference = any_difference || different.oracle.peek(0, key) != first.oracle.peek(0, key);
    CHECK(any_difference);
}

TEST_CASE("negative targets anti-correlate the extra tasks") {
    LandscapeSpec spec;
    spec.space = SearchSpaceSpec::generic(4, 3);
    spec.n_tasks = 2;
    spec.target_tau = -0.6;
    spec.tau_tolerance = 0.1;
    const auto landscape = synthesize_landscape(spec, 5);
    CHECK(landscape.realized_tau[0][1] < -0.45);
    CHECK(std::abs(landscape.realized_tau[0][1] + 0.6) <= 0.1);
}

TEST_CASE("a fixed mixing weight skips the correlation search") {
    LandscapeSpec spec;
    spec.space = SearchSpaceSpec::generic(3, 2);
    spec.n_tasks = 2;
    spec.lambda_override = 1.0;
    const auto aligned = synthesize_landscape(spec, 9);
    CHECK(aligned.lambda == 1.0);
    CHECK(aligned.realized_tau[0][1] == doctest::Approx(1.0));

    spec.target_tau = -0.5;  // with the override only the sign flip matters
    const auto mirrored = synthesize_landscape(spec, 9);
    CHECK(mirrored.realized_tau[0][1] == doctest::Approx(-1.0));

    spec.lambda_override = 1.5;
    CHECK_THROWS_AS(synthesize_landscape(spec, 9), ContractError);
}

TEST_CASE("landscape generation contract and reachability") {
    LandscapeSpec spec;
    spec.space = SearchSpaceSpec::generic(3, 2);
    spec.n_tasks = 0;
    CHECK_THROWS_AS(synthesize_landscape(spec, 1), ContractError);
    spec.n_tasks = 2;
    spec.target_tau = 1.5;
    CHECK_THROWS_AS(synthesize_landscape(spec, 1), ContractError);

    // Eight genotypes quantize tau too coarsely to land within 1e-6 of 0.5.
    spec.target_tau = 0.5;
    spec.tau_tolerance = 1e-6;
    CHECK_THROWS_AS(synthesize_landscape(spec, 1), DataError);

    spec.target_tau = 0.6;
    spec.tau_tolerance = 0.2;
    spec.enumeration_cap = 4;
    CHECK_THROWS_AS(synthesize_landscape(spec, 1), DataError);

    LandscapeSpec solo;
    solo.space = SearchSpaceSpec::generic(3, 2);
    solo.n_tasks = 1;
    const auto single = synthesize_landscape(solo, 2);
    CHECK(single.lambda == 1.0);
    CHECK(single.realized_tau == std::vector<std::vector<double>>{{1.0}});
}

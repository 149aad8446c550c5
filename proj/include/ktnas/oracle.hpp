#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ktnas/rng.hpp"
#include "ktnas/search_space.hpp"

namespace ktnas {

struct OracleMetadata {
    std::string source;                // file path, or "synthesized"
    std::vector<int> negated_tasks;    // sign-flipped on load
    std::uint64_t seed = 0;            // generator seed when synthesized
    double lambda = 0.0;               // shared-score weight when synthesized
    std::vector<std::vector<double>> realized_tau;  // pairwise, when synthesized
};

// Ground-truth fitness tables with exact bookkeeping of which (task, key)
// pairs have been served. Fitness is higher-is-better. The tables are
// immutable and shared between clones; counters are per instance, so every
// run owns a private clone and unique-evaluation counts stay exact.
class TabularOracle {
   public:
    TabularOracle(SearchSpaceSpec space, std::vector<std::string> keys,
                  std::vector<std::vector<double>> scores, OracleMetadata meta);

    // Returns the stored fitness; the first service of a (task, key) pair
    // is assigned the next serve index. Unknown keys raise DataError.
    double evaluate(int task, const std::string& encoding);

    // Read-only lookup, never touches the counters.
    double peek(int task, const std::string& encoding) const;

    long unique_evaluations(int task) const;
    // 1-based index at which the pair was first served, if it ever was.
    std::optional<long> serve_index(int task, const std::string& encoding) const;

    // Best key of a task, ties to the smaller encoding. No counter effect.
    const std::string& optimum_encoding(int task) const;
    double optimum_fitness(int task) const;

    int num_tasks() const;
    std::size_t num_keys() const;
    const SearchSpaceSpec& space() const;
    const std::vector<std::string>& keys() const;
    const OracleMetadata& metadata() const;

    // Same tables, zeroed counters.
    TabularOracle fresh_clone() const;

   private:
    struct Table;
    std::shared_ptr<const Table> table_;
    std::vector<std::vector<std::int64_t>> serve_order_;  // [task][key], 0 = unserved
    std::vector<long> served_count_;
};

// CSV with header "encoding,task_0,...,task_{N-1}". Malformed rows and
// duplicate or inconsistent keys are reported with line numbers. Listed
// tasks in negate_tasks are sign-flipped so that higher is better.
TabularOracle load_tabular(const std::string& path, const std::vector<int>& negate_tasks = {});

// Inverse of load_tabular: shortest round-trip float formatting, keys in
// table order, '\n' line endings. Identical tables produce identical bytes.
void write_tabular(const TabularOracle& oracle, const std::string& path);

struct LandscapeSpec {
    SearchSpaceSpec space;
    int n_tasks = 2;
    double target_tau = 0.8;              // pairwise Kendall tau-b target
    std::optional<double> lambda_override;  // skip the search, use this weight
    double tau_tolerance = 0.05;
    std::uint64_t enumeration_cap = 2'000'000;
};

struct SynthesizedLandscape {
    TabularOracle oracle;
    double lambda = 0.0;
    std::vector<std::vector<double>> realized_tau;
};

// Enumerates the space and builds per-task tables fitness_k = lambda*u +
// (1-lambda)*eps_k. The shared score u is an additive function of the
// genes (independent normal contribution per (edge, op)), which gives the
// landscape genotype locality; eps_k is i.i.d. normal noise per task. For
// negative targets every task after the first uses -u. lambda is binary-
// searched on the drawn tables until the mean pairwise tau against task 0
// hits the target; an unreachable target raises DataError with the
// achievable range. Deterministic given the seed.
SynthesizedLandscape synthesize_landscape(const LandscapeSpec& spec, std::uint64_t seed);

// Kendall tau-b with tie corrections, O(n log n).
double kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y);

// tau-b between two task columns over the oracle's full key set.
double kendall_tau(const TabularOracle& oracle, int task_a, int task_b);

}  // namespace ktnas

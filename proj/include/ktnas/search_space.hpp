#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ktnas/rng.hpp"

namespace ktnas {

// Cell search space: a complete DAG on num_nodes nodes where every edge
// carries one operation out of op_set. A genotype assigns an op index to
// each of the n(n-1)/2 edges, taken in lexicographic (src, dst) order.
struct SearchSpaceSpec {
    int num_nodes = 4;
    std::vector<std::string> op_set;

    int edge_count() const { return num_nodes * (num_nodes - 1) / 2; }
    int num_ops() const { return static_cast<int>(op_set.size()); }

    // Standard 4-node / 5-op cell space (15625 genotypes).
    static SearchSpaceSpec nas201();
    // n nodes with auto-named ops op0..op{k-1}.
    static SearchSpaceSpec generic(int num_nodes, int num_ops);

    // Throws ContractError unless num_nodes >= 2 and op_set is non-empty.
    void validate() const;
};

// Edges of the complete DAG in canonical order: (0,1),(0,2),...,(n-2,n-1).
std::vector<std::pair<int, int>> edge_list(const SearchSpaceSpec& space);

// Total number of genotypes, capped at 2^63-1 to keep arithmetic safe.
std::uint64_t space_size(const SearchSpaceSpec& space);

struct Architecture {
    std::vector<int> genes;  // one op index per edge

    bool operator==(const Architecture& other) const = default;
};

// Canonical text form "g0:g1:...:gE-1", decimal op indices.
std::string encode(const Architecture& arch);

// Inverse of encode(); validates gene count and op range against the space.
Architecture decode(const std::string& text, const SearchSpaceSpec& space);

// A genotype together with its evaluation and lineage state. `fitness` maps
// task index -> score (higher is better); an individual may be evaluated on
// several tasks over its lifetime.
struct Individual {
    Architecture arch;
    std::string encoding;               // cached encode(arch)
    std::map<int, double> fitness;
    std::vector<std::string> parents;   // encodings; empty for sampled, <=2 otherwise
    int origin_task = 0;                // task whose population first created it
    bool is_transferred = false;

    bool evaluated_on(int task) const { return fitness.count(task) != 0; }
    double fitness_on(int task) const;
};

Individual make_individual(Architecture arch, int origin_task, bool is_transferred = false);

// Uniform over the whole space: every gene drawn independently.
Architecture random_architecture(const SearchSpaceSpec& space, Rng& rng);

// Uniform crossover: per position the children swap the parents' genes with
// probability 1/2, so each child gene always equals one parent's gene.
std::pair<Architecture, Architecture> crossover(const Architecture& a, const Architecture& b, Rng& rng);

// p_mut == 1: exactly one uniformly chosen gene is set to a different op.
// p_mut <  1: each gene independently resampled to a different op with
// probability p_mut (so the expected number of changed genes is E * p_mut).
Architecture mutate(const SearchSpaceSpec& space, const Architecture& arch, double p_mut, Rng& rng);

// Draws `size` entrants uniformly with replacement and returns the index of
// the winner: highest fitness on `task`, ties to the smaller encoding.
// Requires every pool member to be evaluated on `task`.
std::size_t tournament_select(const std::vector<Individual>& pool, int task, int size, Rng& rng);

// All genotypes in lexicographic gene order. Refuses spaces larger than
// `cap` with a DataError that reports the actual size.
std::vector<Architecture> enumerate_space(const SearchSpaceSpec& space, std::uint64_t cap = 2'000'000);

// Strict ordering used everywhere ranking matters: fitness descending,
// then canonical encoding ascending. Returns true when a ranks before b.
bool ranks_before(double fitness_a, const std::string& enc_a, double fitness_b, const std::string& enc_b);

}  // namespace ktnas

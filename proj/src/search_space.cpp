#include "ktnas/search_space.hpp"

#include <algorithm>
#include <charconv>
#include <limits>

#include "ktnas/errors.hpp"

namespace ktnas {

SearchSpaceSpec SearchSpaceSpec::nas201() {
    SearchSpaceSpec space;
    space.num_nodes = 4;
    space.op_set = {"none", "skip_connect", "nor_conv_1x1", "nor_conv_3x3", "avg_pool_3x3"};
    return space;
}

SearchSpaceSpec SearchSpaceSpec::generic(int num_nodes, int num_ops) {
    SearchSpaceSpec space;
    space.num_nodes = num_nodes;
    space.op_set.reserve(static_cast<std::size_t>(num_ops));
    for (int i = 0; i < num_ops; ++i) space.op_set.push_back("op" + std::to_string(i));
    return space;
}

void SearchSpaceSpec::validate() const {
    if (num_nodes < 2) throw ContractError("search space needs at least 2 cell nodes");
    if (op_set.empty()) throw ContractError("search space needs a non-empty op set");
}

std::vector<std::pair<int, int>> edge_list(const SearchSpaceSpec& space) {
    std::vector<std::pair<int, int>> edges;
    edges.reserve(static_cast<std::size_t>(space.edge_count()));
    for (int src = 0; src < space.num_nodes; ++src)
        for (int dst = src + 1; dst < space.num_nodes; ++dst) edges.emplace_back(src, dst);
    return edges;
}

std::uint64_t space_size(const SearchSpaceSpec& space) {
    space.validate();
    constexpr std::uint64_t kMax = std::numeric_limits<std::int64_t>::max();
    std::uint64_t size = 1;
    const auto ops = static_cast<std::uint64_t>(space.num_ops());
    for (int i = 0; i < space.edge_count(); ++i) {
        if (size > kMax / ops) return kMax;
        size *= ops;
    }
    return size;
}

std::string encode(const Architecture& arch) {
    std::string text;
    text.reserve(arch.genes.size() * 2);
    for (std::size_t i = 0; i < arch.genes.size(); ++i) {
        if (i > 0) text.push_back(':');
        text += std::to_string(arch.genes[i]);
    }
    return text;
}

Architecture decode(const std::string& text, const SearchSpaceSpec& space) {
    space.validate();
    Architecture arch;
    arch.genes.reserve(static_cast<std::size_t>(space.edge_count()));
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t next = text.find(':', pos);
        if (next == std::string::npos) next = text.size();
        int gene = 0;
        auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + next, gene);
        if (ec != std::errc() || ptr != text.data() + next)
            throw DataError("bad gene token in encoding '" + text + "'");
        if (gene < 0 || gene >= space.num_ops())
            throw DataError("op index " + std::to_string(gene) + " out of range in '" + text + "'");
        arch.genes.push_back(gene);
        if (next == text.size()) break;
        pos = next + 1;
    }
    if (static_cast<int>(arch.genes.size()) != space.edge_count())
        throw DataError("encoding '" + text + "' has " + std::to_string(arch.genes.size()) +
                        " genes, expected " + std::to_string(space.edge_count()));
    return arch;
}

double Individual::fitness_on(int task) const {
    auto it = fitness.find(task);
    if (it == fitness.end())
        throw ContractError("individual " + encoding + " not evaluated on task " + std::to_string(task));
    return it->second;
}

Individual make_individual(Architecture arch, int origin_task, bool is_transferred) {
    Individual ind;
    ind.encoding = encode(arch);
    ind.arch = std::move(arch);
    ind.origin_task = origin_task;
    ind.is_transferred = is_transferred;
    return ind;
}

Architecture random_architecture(const SearchSpaceSpec& space, Rng& rng) {
    space.validate();
    Architecture arch;
    arch.genes.reserve(static_cast<std::size_t>(space.edge_count()));
    for (int i = 0; i < space.edge_count(); ++i)
        arch.genes.push_back(static_cast<int>(rng.uniform_index(static_cast<std::size_t>(space.num_ops()))));
    return arch;
}

std::pair<Architecture, Architecture> crossover(const Architecture& a, const Architecture& b, Rng& rng) {
    if (a.genes.size() != b.genes.size())
        throw ContractError("crossover parents of different lengths");
    Architecture child_a = a;
    Architecture child_b = b;
    for (std::size_t i = 0; i < a.genes.size(); ++i)
        if (rng.bernoulli(0.5)) std::swap(child_a.genes[i], child_b.genes[i]);
    return {std::move(child_a), std::move(child_b)};
}

namespace {

// Uniform among the ops other than `current`; needs num_ops >= 2.
int resample_gene(int current, int num_ops, Rng& rng) {
    int pick = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(num_ops - 1)));
    return pick < current ? pick : pick + 1;
}

}  // namespace

Architecture mutate(const SearchSpaceSpec& space, const Architecture& arch, double p_mut, Rng& rng) {
    space.validate();
    if (static_cast<int>(arch.genes.size()) != space.edge_count())
        throw ContractError("mutate: genotype does not fit the space");
    if (p_mut < 0.0 || p_mut > 1.0) throw ContractError("mutation probability outside [0, 1]");
    Architecture out = arch;
    if (space.num_ops() < 2) return out;  // nothing to change to
    if (p_mut == 1.0) {
        std::size_t gene = rng.uniform_index(out.genes.size());
        out.genes[gene] = resample_gene(out.genes[gene], space.num_ops(), rng);
        return out;
    }
    for (auto& gene : out.genes)
        if (rng.bernoulli(p_mut)) gene = resample_gene(gene, space.num_ops(), rng);
    return out;
}

bool ranks_before(double fitness_a, const std::string& enc_a, double fitness_b, const std::string& enc_b) {
    if (fitness_a != fitness_b) return fitness_a > fitness_b;
    return enc_a < enc_b;
}

std::size_t tournament_select(const std::vector<Individual>& pool, int task, int size, Rng& rng) {
    if (pool.empty()) throw ContractError("tournament over an empty pool");
    if (size < 1) throw ContractError("tournament size must be >= 1");
    for (const auto& ind : pool)
        if (!ind.evaluated_on(task))
            throw ContractError("tournament pool member " + ind.encoding + " not evaluated on task " +
                                std::to_string(task));
    std::size_t best = rng.uniform_index(pool.size());
    for (int draw = 1; draw < size; ++draw) {
        std::size_t entrant = rng.uniform_index(pool.size());
        if (ranks_before(pool[entrant].fitness_on(task), pool[entrant].encoding,
                         pool[best].fitness_on(task), pool[best].encoding))
            best = entrant;
    }
    return best;
}

std::vector<Architecture> enumerate_space(const SearchSpaceSpec& space, std::uint64_t cap) {
    space.validate();
    const std::uint64_t size = space_size(space);
    if (size > cap)
        throw DataError("space has " + std::to_string(size) + " genotypes, enumeration cap is " +
                        std::to_string(cap));
    std::vector<Architecture> all;
    all.reserve(static_cast<std::size_t>(size));
    Architecture current;
    current.genes.assign(static_cast<std::size_t>(space.edge_count()), 0);
    while (true) {
        all.push_back(current);
        // odometer increment, least significant gene last
        int pos = space.edge_count() - 1;
        while (pos >= 0) {
            if (++current.genes[static_cast<std::size_t>(pos)] < space.num_ops()) break;
            current.genes[static_cast<std::size_t>(pos)] = 0;
            --pos;
        }
        if (pos < 0) break;
    }
    return all;
}

}  // namespace ktnas

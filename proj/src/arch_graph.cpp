#include "ktnas/arch_graph.hpp"

#include <algorithm>

#include "ktnas/errors.hpp"

namespace ktnas {

TokenCatalog TokenCatalog::for_space(const SearchSpaceSpec& space) {
    space.validate();
    TokenCatalog catalog;
    catalog.num_ops_ = space.num_ops();
    catalog.names_.reserve(2 + static_cast<std::size_t>(space.edge_count() * space.num_ops()));
    catalog.names_.push_back("INPUT");
    catalog.names_.push_back("OUTPUT");
    for (int edge = 0; edge < space.edge_count(); ++edge)
        for (int op = 0; op < space.num_ops(); ++op)
            catalog.names_.push_back("e" + std::to_string(edge) + ":" + space.op_set[static_cast<std::size_t>(op)]);
    for (int id = 0; id < static_cast<int>(catalog.names_.size()); ++id)
        catalog.ids_.emplace(catalog.names_[static_cast<std::size_t>(id)], id);
    return catalog;
}

const std::string& TokenCatalog::name(int id) const {
    if (id < 0 || id >= size()) throw ContractError("token id " + std::to_string(id) + " out of range");
    return names_[static_cast<std::size_t>(id)];
}

int TokenCatalog::id(const std::string& name) const {
    auto it = ids_.find(name);
    if (it == ids_.end()) throw DataError("unknown token '" + name + "'");
    return it->second;
}

ArchGraph to_graph(const SearchSpaceSpec& space, const Architecture& arch, const TokenCatalog& catalog) {
    space.validate();
    if (static_cast<int>(arch.genes.size()) != space.edge_count())
        throw ContractError("to_graph: genotype does not fit the space");

    const auto edges = edge_list(space);
    ArchGraph graph;
    graph.tokens.reserve(edges.size() + 2);
    graph.tokens.push_back(TokenCatalog::input_id);
    graph.tokens.push_back(TokenCatalog::output_id);
    for (std::size_t i = 0; i < edges.size(); ++i)
        graph.tokens.push_back(catalog.gene_token(static_cast<int>(i), arch.genes[i]));

    // Gene node for edge (u,v) is fed by INPUT when u is the cell input,
    // by every gene ending at u otherwise; it feeds OUTPUT when v is the
    // cell output. Arc order follows the receiving gene index.
    const int gene_base = 2;
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const auto [u, v] = edges[i];
        if (u == 0) graph.arcs.emplace_back(0, gene_base + static_cast<int>(i));
        for (std::size_t j = 0; j < edges.size(); ++j)
            if (edges[j].second == u) graph.arcs.emplace_back(gene_base + static_cast<int>(j), gene_base + static_cast<int>(i));
        if (v == space.num_nodes - 1) graph.arcs.emplace_back(gene_base + static_cast<int>(i), 1);
    }
    return graph;
}

std::vector<std::vector<int>> undirected_adjacency(const ArchGraph& graph) {
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(graph.num_nodes()));
    for (const auto& [from, to] : graph.arcs) {
        adj[static_cast<std::size_t>(from)].push_back(to);
        adj[static_cast<std::size_t>(to)].push_back(from);
    }
    for (auto& neighbors : adj) {
        std::sort(neighbors.begin(), neighbors.end());
        neighbors.erase(std::unique(neighbors.begin(), neighbors.end()), neighbors.end());
    }
    return adj;
}

}  // namespace ktnas

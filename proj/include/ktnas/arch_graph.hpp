#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ktnas/search_space.hpp"

namespace ktnas {

// Token vocabulary shared by every graph of one search space: INPUT, OUTPUT,
// and one token per (edge position, op) combination. Ids are dense so walk
// corpora and embedding tables can be plain arrays.
class TokenCatalog {
   public:
    static constexpr int input_id = 0;
    static constexpr int output_id = 1;

    static TokenCatalog for_space(const SearchSpaceSpec& space);

    int size() const { return static_cast<int>(names_.size()); }
    int gene_token(int edge_pos, int op) const { return 2 + edge_pos * num_ops_ + op; }
    const std::string& name(int id) const;
    int id(const std::string& name) const;  // DataError on unknown token

   private:
    int num_ops_ = 0;
    std::vector<std::string> names_;
    std::unordered_map<std::string, int> ids_;
};

// Operation-on-edge graph of one cell: node ids 0 = INPUT, 1 = OUTPUT and
// 2+i for gene i. Gene node (u,v) receives an arc from every gene node
// (_,u); genes leaving cell node 0 hang off INPUT, genes entering the last
// cell node feed OUTPUT.
struct ArchGraph {
    std::vector<int> tokens;                 // catalog token id per node
    std::vector<std::pair<int, int>> arcs;   // directed, deterministic order

    int num_nodes() const { return static_cast<int>(tokens.size()); }
};

ArchGraph to_graph(const SearchSpaceSpec& space, const Architecture& arch, const TokenCatalog& catalog);

// Sorted undirected neighbor lists; arcs are traversed both ways by walks.
std::vector<std::vector<int>> undirected_adjacency(const ArchGraph& graph);

}  // namespace ktnas

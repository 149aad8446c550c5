#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "ktnas/arch_graph.hpp"
#include "ktnas/rng.hpp"

namespace ktnas {

struct Node2vecParams {
    int num_walks = 10;  // walks started per node
    int walk_len = 20;   // tokens per walk, including the start
    double p = 1.0;      // return parameter (weight 1/p to revisit the previous node)
    double q = 1.0;      // in-out parameter (weight 1/q for distance-2 hops)
};

struct SkipgramParams {
    int dim = 256;
    int window = 5;
    int negatives = 5;
    int epochs = 5;
    double lr_start = 0.025;
    double lr_end = 1e-4;
};

// Second-order biased walks over the undirected view of the graph. Every
// node starts num_walks walks; each walk emits the token of every visited
// node. Isolated nodes emit single-token walks.
std::vector<std::vector<int>> generate_walks(const ArchGraph& graph, const Node2vecParams& params, Rng& rng);

struct EmbeddingModel {
    int dim = 0;
    bool degenerate = false;                   // vocabulary too small to separate anything
    std::vector<std::vector<double>> vectors;  // token id -> input vector
    Node2vecParams walk_params;
    SkipgramParams train_params;
    std::uint64_t seed = 0;

    int vocab_size() const { return static_cast<int>(vectors.size()); }
};

// Skip-gram with negative sampling over integer token sequences. The
// vocabulary covers ids [0, vocab_size); tokens that never occur in the
// corpus keep their init vectors (uniform in [-0.5/dim, 0.5/dim]), so a
// vocabulary may deliberately exceed what the corpus exercises. Negative
// draws follow the unigram^0.75 law, the learning rate decays linearly,
// and the whole routine is a pure function of (corpus, params, rng seed).
EmbeddingModel train_skipgram(const std::vector<std::vector<int>>& corpus, int vocab_size,
                              const SkipgramParams& params, Rng& rng);

// Mean of the gene-node token vectors; INPUT and OUTPUT are skipped. A
// degenerate model yields the zero vector. Tokens outside the model's
// vocabulary raise a DataError naming them.
std::vector<double> embed_architecture(const EmbeddingModel& model, const ArchGraph& graph);

// 1 - cosine similarity, clamped to [0, 2]. Zero-length or zero-norm input
// is a ContractError; mismatched dimensions too.
double cosine_distance(const std::vector<double>& a, const std::vector<double>& b);

// Text table "token<TAB>v1<TAB>...<TAB>vdim", one row per token, shortest
// round-trip float formatting. load validates tokens against the catalog.
void dump_embedding(const EmbeddingModel& model, const TokenCatalog& catalog, const std::string& path);
EmbeddingModel load_embedding(const std::string& path, const TokenCatalog& catalog);

// Frozen per-run model plus a per-encoding memo: an architecture is embedded
// once and every later lookup returns the identical vector.
class EmbeddingCache {
   public:
    EmbeddingCache(SearchSpaceSpec space, TokenCatalog catalog, EmbeddingModel model)
        : space_(std::move(space)), catalog_(std::move(catalog)), model_(std::move(model)) {}

    const std::vector<double>& embed(const Architecture& arch, const std::string& encoding);

    const EmbeddingModel& model() const { return model_; }
    const TokenCatalog& catalog() const { return catalog_; }
    std::size_t size() const { return memo_.size(); }

   private:
    SearchSpaceSpec space_;
    TokenCatalog catalog_;
    EmbeddingModel model_;
    std::unordered_map<std::string, std::vector<double>> memo_;
};

}  // namespace ktnas

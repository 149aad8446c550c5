#include "ktnas/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "ktnas/csv.hpp"
#include "ktnas/errors.hpp"

namespace ktnas {

namespace {

bool contains(const std::vector<int>& sorted, int value) {
    return std::binary_search(sorted.begin(), sorted.end(), value);
}

// Weighted pick by linear cumulative scan; total must be positive.
std::size_t weighted_index(const std::vector<double>& weights, double total, Rng& rng) {
    double r = rng.uniform01() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (r < acc) return i;
    }
    return weights.size() - 1;  // rounding fell off the end
}

}  // namespace

std::vector<std::vector<int>> generate_walks(const ArchGraph& graph, const Node2vecParams& params, Rng& rng) {
    if (params.num_walks < 1 || params.walk_len < 1)
        throw ContractError("walk counts must be >= 1");
    if (params.p <= 0.0 || params.q <= 0.0)
        throw ContractError("walk bias parameters must be positive");

    const auto adj = undirected_adjacency(graph);
    std::vector<std::vector<int>> walks;
    walks.reserve(static_cast<std::size_t>(graph.num_nodes()) * static_cast<std::size_t>(params.num_walks));

    std::vector<int> path;
    std::vector<double> weights;
    for (int start = 0; start < graph.num_nodes(); ++start) {
        for (int w = 0; w < params.num_walks; ++w) {
            path.clear();
            path.push_back(start);
            while (static_cast<int>(path.size()) < params.walk_len) {
                const int cur = path.back();
                const auto& neighbors = adj[static_cast<std::size_t>(cur)];
                if (neighbors.empty()) break;
                int next;
                if (path.size() == 1) {
                    next = neighbors[rng.uniform_index(neighbors.size())];
                } else {
                    const int prev = path[path.size() - 2];
                    const auto& prev_adj = adj[static_cast<std::size_t>(prev)];
                    weights.clear();
                    double total = 0.0;
                    for (int x : neighbors) {
                        double weight;
                        if (x == prev)
                            weight = 1.0 / params.p;
                        else if (contains(prev_adj, x))
                            weight = 1.0;
                        else
                            weight = 1.0 / params.q;
                        weights.push_back(weight);
                        total += weight;
                    }
                    next = neighbors[weighted_index(weights, total, rng)];
                }
                path.push_back(next);
            }
            std::vector<int> tokens;
            tokens.reserve(path.size());
            for (int node : path) tokens.push_back(graph.tokens[static_cast<std::size_t>(node)]);
            walks.push_back(std::move(tokens));
        }
    }
    return walks;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

EmbeddingModel train_skipgram(const std::vector<std::vector<int>>& corpus, int vocab_size,
                              const SkipgramParams& params, Rng& rng) {
    if (vocab_size < 1) throw ContractError("vocabulary must have at least one token");
    if (params.dim < 1 || params.window < 1 || params.epochs < 1 || params.negatives < 0)
        throw ContractError("bad skip-gram parameters");

    std::vector<std::int64_t> counts(static_cast<std::size_t>(vocab_size), 0);
    std::int64_t total_tokens = 0;
    for (const auto& walk : corpus)
        for (int token : walk) {
            if (token < 0 || token >= vocab_size)
                throw ContractError("corpus token " + std::to_string(token) + " outside the vocabulary");
            ++counts[static_cast<std::size_t>(token)];
            ++total_tokens;
        }

    EmbeddingModel model;
    model.dim = params.dim;
    model.train_params = params;
    model.degenerate = vocab_size < 2;
    model.vectors.assign(static_cast<std::size_t>(vocab_size), std::vector<double>(static_cast<std::size_t>(params.dim)));
    const double init_span = 0.5 / params.dim;
    for (auto& vec : model.vectors)
        for (auto& value : vec) value = (rng.uniform01() * 2.0 - 1.0) * init_span;
    if (total_tokens == 0 || model.degenerate) return model;

    // Output (context) vectors start at zero, word2vec style.
    std::vector<std::vector<double>> out(static_cast<std::size_t>(vocab_size),
                                         std::vector<double>(static_cast<std::size_t>(params.dim), 0.0));

    // Negative draws follow unigram^0.75 over the corpus counts.
    std::vector<double> neg_cum(static_cast<std::size_t>(vocab_size), 0.0);
    double neg_total = 0.0;
    for (std::size_t t = 0; t < counts.size(); ++t) {
        neg_total += counts[t] > 0 ? std::pow(static_cast<double>(counts[t]), 0.75) : 0.0;
        neg_cum[t] = neg_total;
    }

    auto draw_negative = [&]() -> int {
        double r = rng.uniform01() * neg_total;
        auto it = std::upper_bound(neg_cum.begin(), neg_cum.end(), r);
        if (it == neg_cum.end()) --it;
        return static_cast<int>(it - neg_cum.begin());
    };

    const double total_positions = static_cast<double>(total_tokens) * params.epochs;
    double processed = 0.0;
    std::vector<double> grad(static_cast<std::size_t>(params.dim));

    for (int epoch = 0; epoch < params.epochs; ++epoch) {
        for (const auto& walk : corpus) {
            const int len = static_cast<int>(walk.size());
            for (int i = 0; i < len; ++i) {
                const double lr =
                    params.lr_start - (params.lr_start - params.lr_end) * (processed / total_positions);
                auto& center = model.vectors[static_cast<std::size_t>(walk[static_cast<std::size_t>(i)])];
                const int lo = std::max(0, i - params.window);
                const int hi = std::min(len - 1, i + params.window);
                for (int j = lo; j <= hi; ++j) {
                    if (j == i) continue;
                    const int context = walk[static_cast<std::size_t>(j)];
                    std::fill(grad.begin(), grad.end(), 0.0);
                    for (int n = 0; n <= params.negatives; ++n) {
                        int target;
                        double label;
                        if (n == 0) {
                            target = context;
                            label = 1.0;
                        } else {
                            target = draw_negative();
                            if (target == context) continue;  // draw consumed, update skipped
                            label = 0.0;
                        }
                        auto& out_vec = out[static_cast<std::size_t>(target)];
                        double dot = 0.0;
                        for (int d = 0; d < params.dim; ++d)
                            dot += center[static_cast<std::size_t>(d)] * out_vec[static_cast<std::size_t>(d)];
                        const double g = (label - sigmoid(dot)) * lr;
                        for (int d = 0; d < params.dim; ++d) {
                            grad[static_cast<std::size_t>(d)] += g * out_vec[static_cast<std::size_t>(d)];
                            out_vec[static_cast<std::size_t>(d)] += g * center[static_cast<std::size_t>(d)];
                        }
                    }
                    for (int d = 0; d < params.dim; ++d)
                        center[static_cast<std::size_t>(d)] += grad[static_cast<std::size_t>(d)];
                }
                processed += 1.0;
            }
        }
    }
    return model;
}

std::vector<double> embed_architecture(const EmbeddingModel& model, const ArchGraph& graph) {
    std::vector<double> mean(static_cast<std::size_t>(model.dim), 0.0);
    if (model.degenerate) return mean;

    std::string missing;
    int gene_nodes = 0;
    for (int token : graph.tokens) {
        if (token == TokenCatalog::input_id || token == TokenCatalog::output_id) continue;
        if (token < 0 || token >= model.vocab_size()) {
            if (!missing.empty()) missing += ", ";
            missing += std::to_string(token);
            continue;
        }
        const auto& vec = model.vectors[static_cast<std::size_t>(token)];
        for (int d = 0; d < model.dim; ++d) mean[static_cast<std::size_t>(d)] += vec[static_cast<std::size_t>(d)];
        ++gene_nodes;
    }
    if (!missing.empty()) throw DataError("tokens outside the embedding vocabulary: " + missing);
    if (gene_nodes == 0) throw ContractError("graph has no gene nodes to embed");
    for (auto& value : mean) value /= gene_nodes;
    return mean;
}

double cosine_distance(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || a.size() != b.size())
        throw ContractError("cosine distance needs equal-length non-empty vectors");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw ContractError("cosine distance undefined for zero vectors");
    const double dist = 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
    return std::clamp(dist, 0.0, 2.0);
}

void dump_embedding(const EmbeddingModel& model, const TokenCatalog& catalog, const std::string& path) {
    if (model.vocab_size() != catalog.size())
        throw ContractError("model vocabulary does not match the catalog");
    std::ofstream file(path, std::ios::binary);
    if (!file) throw DataError("cannot write '" + path + "'");
    for (int token = 0; token < model.vocab_size(); ++token) {
        file << catalog.name(token);
        for (double value : model.vectors[static_cast<std::size_t>(token)]) file << '\t' << format_double(value);
        file << '\n';
    }
}

EmbeddingModel load_embedding(const std::string& path, const TokenCatalog& catalog) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw DataError("cannot read '" + path + "'");

    EmbeddingModel model;
    model.vectors.assign(static_cast<std::size_t>(catalog.size()), {});
    std::vector<bool> seen(static_cast<std::size_t>(catalog.size()), false);
    std::string line;
    int line_no = 0;
    while (std::getline(file, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            std::size_t next = line.find('\t', pos);
            if (next == std::string::npos) next = line.size();
            fields.push_back(line.substr(pos, next - pos));
            if (next == line.size()) break;
            pos = next + 1;
        }
        if (fields.size() < 2)
            throw DataError(path + ":" + std::to_string(line_no) + ": expected token and values");
        const int token = catalog.id(fields[0]);
        std::vector<double> vec;
        vec.reserve(fields.size() - 1);
        for (std::size_t i = 1; i < fields.size(); ++i)
            vec.push_back(parse_double(fields[i], path + ":" + std::to_string(line_no)));
        if (model.dim == 0) model.dim = static_cast<int>(vec.size());
        if (static_cast<int>(vec.size()) != model.dim)
            throw DataError(path + ":" + std::to_string(line_no) + ": inconsistent vector width");
        if (seen[static_cast<std::size_t>(token)])
            throw DataError(path + ":" + std::to_string(line_no) + ": duplicate token '" + fields[0] + "'");
        seen[static_cast<std::size_t>(token)] = true;
        model.vectors[static_cast<std::size_t>(token)] = std::move(vec);
    }
    for (int token = 0; token < catalog.size(); ++token)
        if (!seen[static_cast<std::size_t>(token)])
            throw DataError(path + ": missing vector for token '" + catalog.name(token) + "'");
    model.degenerate = catalog.size() < 2;
    return model;
}

const std::vector<double>& EmbeddingCache::embed(const Architecture& arch, const std::string& encoding) {
    auto it = memo_.find(encoding);
    if (it != memo_.end()) return it->second;
    const auto graph = to_graph(space_, arch, catalog_);
    auto [inserted, _] = memo_.emplace(encoding, embed_architecture(model_, graph));
    return inserted->second;
}

}  // namespace ktnas

#pragma once

#include <cstddef>
#include <deque>
#include <string>
#include <unordered_set>
#include <vector>

#include "ktnas/rng.hpp"
#include "ktnas/search_space.hpp"

namespace ktnas {

enum class TransferLabel : int { negative = -1, positive = 1 };

inline int label_value(TransferLabel label) { return static_cast<int>(label); }

// One archived transferred individual: where it was when judged, and how it
// was judged. The embedding is the cached per-run vector of its genotype.
struct HTSEntry {
    std::string encoding;
    std::vector<double> embedding;
    TransferLabel label = TransferLabel::negative;
    int generation = 0;  // generation at which the label was assigned
};

// Archive of past transfer outcomes: positives accumulate (optionally
// capped), negatives only survive for the most recent `window` generations.
class HistoricalTransferredSet {
   public:
    explicit HistoricalTransferredSet(int window, std::size_t positive_cap = 0)
        : window_(window), positive_cap_(positive_cap) {
        if (window < 1) throw ContractError("HTS window must be >= 1");
    }

    // Files generation-t labels and drops negative sets older than t-window+1.
    // Generations must be presented in nondecreasing order.
    void update(int generation, const std::vector<HTSEntry>& labeled);

    // Flattened view: positives first (insertion order), then negative sets
    // oldest generation first. This order is part of the determinism contract.
    std::vector<const HTSEntry*> entries() const;

    std::size_t size() const;
    std::size_t positive_count() const { return positives_.size(); }
    std::size_t negative_count() const;
    std::vector<int> retained_negative_generations() const;
    int window() const { return window_; }

   private:
    int window_;
    std::size_t positive_cap_;  // 0 = unbounded
    int last_generation_ = -1;
    std::vector<HTSEntry> positives_;
    std::deque<std::pair<int, std::vector<HTSEntry>>> negatives_;  // (generation, entries)
};

// Labels each transfer-population member of the previous generation.
// A member is positive iff at least one offspring naming it as a parent
// ranks within the top ceil(r_pct/100 * |z|) of z, where an offspring's
// rank is 1 + the number of z members strictly better under (fitness
// descending, encoding ascending). Members who parented nothing are
// negative. Offspring parents must come from `parent_pool` encodings.
std::vector<TransferLabel> classify_transferred(const std::vector<Individual>& tp,
                                                const std::vector<Individual>& z,
                                                const std::vector<Individual>& offspring,
                                                const std::unordered_set<std::string>& parent_pool,
                                                double r_pct, int task);

struct TransferRankResult {
    std::vector<int> phi;                              // one rank per candidate
    std::vector<std::vector<std::size_t>> associated;  // entry indices per candidate
};

// Instance-based scoring: every archive entry associates with its nearest
// candidate by cosine distance (ties to the smallest candidate index) and
// contributes its +-1 label to that candidate's rank. An empty archive
// yields all-zero ranks. Zero-norm embeddings only pair with zero-norm
// embeddings (distance 0); mixing them with regular vectors is an error.
TransferRankResult transfer_rank(const std::vector<const HTSEntry*>& archive,
                                 const std::vector<std::vector<double>>& candidate_embeddings);

// Keeps whole descending-rank groups while they fit, then fills the last
// slots uniformly at random (without replacement) from the group on the
// boundary. Returns exactly `count` distinct candidate indices.
std::vector<std::size_t> select_transfer_population(const std::vector<int>& phi, std::size_t count, Rng& rng);

}  // namespace ktnas

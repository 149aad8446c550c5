#include "ktnas/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "ktnas/embedding.hpp"

namespace ktnas {

void HistoricalTransferredSet::update(int generation, const std::vector<HTSEntry>& labeled) {
    if (generation < last_generation_)
        throw ContractError("HTS updates must arrive in generation order");
    last_generation_ = generation;

    std::vector<HTSEntry> negatives;
    for (const auto& entry : labeled) {
        if (entry.label == TransferLabel::positive) {
            positives_.push_back(entry);
            positives_.back().generation = generation;
        } else {
            negatives.push_back(entry);
            negatives.back().generation = generation;
        }
    }
    if (positive_cap_ > 0 && positives_.size() > positive_cap_)
        positives_.erase(positives_.begin(),
                         positives_.begin() + static_cast<std::ptrdiff_t>(positives_.size() - positive_cap_));
    if (!negatives.empty()) negatives_.emplace_back(generation, std::move(negatives));
    // Only the sets of the `window_` most recent generations survive.
    while (!negatives_.empty() && negatives_.front().first <= generation - window_) negatives_.pop_front();
}

std::vector<const HTSEntry*> HistoricalTransferredSet::entries() const {
    std::vector<const HTSEntry*> flat;
    flat.reserve(size());
    for (const auto& entry : positives_) flat.push_back(&entry);
    for (const auto& [gen, set] : negatives_)
        for (const auto& entry : set) flat.push_back(&entry);
    return flat;
}

std::size_t HistoricalTransferredSet::size() const { return positives_.size() + negative_count(); }

std::size_t HistoricalTransferredSet::negative_count() const {
    std::size_t count = 0;
    for (const auto& [gen, set] : negatives_) count += set.size();
    return count;
}

std::vector<int> HistoricalTransferredSet::retained_negative_generations() const {
    std::vector<int> generations;
    generations.reserve(negatives_.size());
    for (const auto& [gen, set] : negatives_) generations.push_back(gen);
    return generations;
}

std::vector<TransferLabel> classify_transferred(const std::vector<Individual>& tp,
                                                const std::vector<Individual>& z,
                                                const std::vector<Individual>& offspring,
                                                const std::unordered_set<std::string>& parent_pool,
                                                double r_pct, int task) {
    if (r_pct <= 0.0 || r_pct > 100.0) throw ContractError("ranking ratio outside (0, 100]");
    if (z.empty()) throw ContractError("cannot rank against an empty parent generation");
    for (const auto& child : offspring)
        for (const auto& parent : child.parents)
            if (parent_pool.count(parent) == 0)
                throw ContractError("offspring parent " + parent + " is not in the parent pool");

    const std::size_t threshold =
        static_cast<std::size_t>(std::ceil(r_pct / 100.0 * static_cast<double>(z.size())));

    // An offspring lands in the top slice iff fewer than `threshold` members
    // of z are strictly better under (fitness desc, encoding asc).
    auto in_top_slice = [&](const Individual& child) {
        const double f = child.fitness_on(task);
        std::size_t better = 0;
        for (const auto& member : z)
            if (ranks_before(member.fitness_on(task), member.encoding, f, child.encoding)) ++better;
        return better < threshold;
    };

    std::vector<TransferLabel> labels(tp.size(), TransferLabel::negative);
    for (const auto& child : offspring) {
        if (child.parents.empty()) continue;
        if (!in_top_slice(child)) continue;
        for (std::size_t i = 0; i < tp.size(); ++i)
            if (std::find(child.parents.begin(), child.parents.end(), tp[i].encoding) != child.parents.end())
                labels[i] = TransferLabel::positive;  // one good landing is enough
    }
    return labels;
}

TransferRankResult transfer_rank(const std::vector<const HTSEntry*>& archive,
                                 const std::vector<std::vector<double>>& candidate_embeddings) {
    TransferRankResult result;
    result.phi.assign(candidate_embeddings.size(), 0);
    result.associated.assign(candidate_embeddings.size(), {});
    if (candidate_embeddings.empty()) throw ContractError("transfer rank needs at least one candidate");
    if (archive.empty()) return result;

    auto is_zero = [](const std::vector<double>& v) {
        for (double value : v)
            if (value != 0.0) return false;
        return true;
    };

    for (std::size_t e = 0; e < archive.size(); ++e) {
        const auto& anchor = archive[e]->embedding;
        const bool anchor_zero = is_zero(anchor);
        std::size_t nearest = 0;
        double nearest_dist = 0.0;
        for (std::size_t c = 0; c < candidate_embeddings.size(); ++c) {
            const auto& cand = candidate_embeddings[c];
            double dist;
            if (anchor_zero || is_zero(cand)) {
                // Zero vectors only come from a degenerate embedding model,
                // in which case every vector is zero and all distances are 0.
                if (anchor_zero != is_zero(cand))
                    throw ContractError("zero and non-zero embeddings cannot be compared");
                dist = 0.0;
            } else {
                dist = cosine_distance(anchor, cand);
            }
            if (c == 0 || dist < nearest_dist) {  // ties keep the smaller index
                nearest = c;
                nearest_dist = dist;
            }
        }
        result.phi[nearest] += label_value(archive[e]->label);
        result.associated[nearest].push_back(e);
    }
    return result;
}

std::vector<std::size_t> select_transfer_population(const std::vector<int>& phi, std::size_t count, Rng& rng) {
    if (count > phi.size())
        throw ContractError("cannot select " + std::to_string(count) + " from " +
                            std::to_string(phi.size()) + " candidates");

    // Candidates bucketed by rank value, highest rank first; candidate order
    // inside a bucket follows the original index.
    std::map<int, std::vector<std::size_t>, std::greater<int>> groups;
    for (std::size_t i = 0; i < phi.size(); ++i) groups[phi[i]].push_back(i);

    std::vector<std::size_t> selected;
    selected.reserve(count);
    for (auto& [rank, members] : groups) {
        if (selected.size() == count) break;
        const std::size_t room = count - selected.size();
        if (members.size() <= room) {
            selected.insert(selected.end(), members.begin(), members.end());
            continue;
        }
        // Boundary group: uniform subset without replacement (partial shuffle).
        for (std::size_t pick = 0; pick < room; ++pick) {
            const std::size_t j = pick + rng.uniform_index(members.size() - pick);
            std::swap(members[pick], members[j]);
            selected.push_back(members[pick]);
        }
        break;
    }
    return selected;
}

}  // namespace ktnas

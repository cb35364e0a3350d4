#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "litfield/date.hpp"
#include "litfield/embed.hpp"
#include "litfield/error.hpp"

namespace litfield {

// Which pool members count as candidates for a target.
enum class AsofRule {
    StrictlyEarlier,  // publication date strictly before the target's
    AnyDate,          // every other member
};

// Normalized embeddings plus a publication date for each row.
struct DatedPool {
    const EmbeddingSet& set;
    std::span<const Date> dates;  // dates[i] belongs to set.row(i)

    DatedPool(const EmbeddingSet& s, std::span<const Date> d) : set(s), dates(d) {
        if (dates.size() != set.size()) throw DimensionError("pool dates are not aligned with embedding rows");
        if (!set.normalized()) throw NotNormalized("pool embedding '" + set.embedder_id() + "' is not normalized");
    }
};

struct Neighbor {
    std::size_t row;
    double angle;  // radians
};

// Ordering used for every neighbor list: nondecreasing angle, then id.
struct NeighborOrder {
    const EmbeddingSet& set;
    bool operator()(const Neighbor& a, const Neighbor& b) const {
        if (a.angle != b.angle) return a.angle < b.angle;
        return set.ids()[a.row] < set.ids()[b.row];
    }
};

struct KnnResult {
    std::vector<Neighbor> neighbors;  // k entries when sufficient
    std::size_t found = 0;            // eligible candidates seen
    bool sufficient() const { return !neighbors.empty(); }
};

// Non-throwing core of knn_previous. `candidates` restricts the pool to a set
// of rows (the members of a collection state); empty means the whole pool.
inline KnnResult find_previous_neighbors(const DatedPool& pool, std::size_t target_row, std::size_t k,
                                         std::span<const std::size_t> candidates = {},
                                         AsofRule rule = AsofRule::StrictlyEarlier) {
    if (k < 1) throw ConfigError("k must be >= 1");
    const auto target = pool.set.row(target_row);
    const Date target_date = pool.dates[target_row];

    std::vector<Neighbor> eligible;
    auto consider = [&](std::size_t r) {
        if (r == target_row) return;
        if (rule == AsofRule::StrictlyEarlier && !(pool.dates[r] < target_date)) return;
        eligible.push_back({r, std::acos(cosine_similarity(target, pool.set.row(r)))});
    };
    if (candidates.empty()) {
        eligible.reserve(pool.set.size());
        for (std::size_t r = 0; r < pool.set.size(); ++r) consider(r);
    } else {
        eligible.reserve(candidates.size());
        for (std::size_t r : candidates) consider(r);
    }

    KnnResult out;
    out.found = eligible.size();
    if (eligible.size() < k) return out;
    NeighborOrder order{pool.set};
    std::partial_sort(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(k), eligible.end(), order);
    eligible.resize(k);
    out.neighbors = std::move(eligible);
    return out;
}

// The k nearest pool members published strictly before the target, by angle,
// ties broken by id. Throws InsufficientNeighbors when fewer than k qualify.
inline std::vector<Neighbor> knn_previous(const DatedPool& pool, std::size_t target_row, std::size_t k,
                                          std::span<const std::size_t> candidates = {}) {
    auto r = find_previous_neighbors(pool, target_row, k, candidates, AsofRule::StrictlyEarlier);
    if (!r.sufficient()) throw InsufficientNeighbors(r.found, k);
    return std::move(r.neighbors);
}

inline std::vector<Neighbor> knn_previous(const DatedPool& pool, const std::string& target_id, std::size_t k,
                                          std::span<const std::size_t> candidates = {}) {
    return knn_previous(pool, pool.set.index_of(target_id), k, candidates);
}

inline std::vector<std::string> neighbor_ids(const EmbeddingSet& set, std::span<const Neighbor> ns) {
    std::vector<std::string> out;
    out.reserve(ns.size());
    for (const auto& n : ns) out.push_back(set.ids()[n.row]);
    return out;
}

}  // namespace litfield

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "litfield/corpus.hpp"
#include "litfield/embed.hpp"
#include "litfield/neighbors.hpp"
#include "litfield/provider.hpp"

namespace litfield {

struct ExpansionBatch {
    std::size_t batch = 0;
    std::vector<std::string> ids;
};

// A collection grown outward from a fixed center publication. Batch 0 holds the
// center itself; later batches hold admissions in decreasing similarity.
class AtlasState {
public:
    AtlasState() = default;

    static AtlasState seed(PublicationRecord center) {
        AtlasState a;
        a.center_id_ = center.id;
        a.log_.push_back({0, {center.id}});
        a.order_.push_back(center.id);
        a.store_.add(std::move(center));
        return a;
    }

    // Appends a batch of already-validated records.
    void admit(std::vector<PublicationRecord> batch) {
        if (log_.empty()) throw ConfigError("atlas has no center; use AtlasState::seed");
        ExpansionBatch b{log_.size(), {}};
        for (auto& rec : batch) {
            b.ids.push_back(rec.id);
            order_.push_back(rec.id);
            pending_.erase(rec.id);
            store_.add(std::move(rec));
        }
        log_.push_back(std::move(b));
    }

    const CorpusStore& store() const { return store_; }
    const std::string& center_id() const { return center_id_; }
    const std::vector<ExpansionBatch>& expansion_log() const { return log_; }

    // Ids in admission order, center first.
    const std::vector<std::string>& admission_order() const { return order_; }
    std::size_t size() const { return order_.size(); }

    // Validated candidates not yet admitted, and ids that failed admission.
    std::map<std::string, PublicationRecord>& pending() { return pending_; }
    std::set<std::string>& rejected() { return rejected_; }
    RejectionTally& tally() { return tally_; }
    const RejectionTally& tally() const { return tally_; }

private:
    CorpusStore store_;
    std::string center_id_;
    std::vector<ExpansionBatch> log_;
    std::vector<std::string> order_;
    std::map<std::string, PublicationRecord> pending_;
    std::set<std::string> rejected_;
    RejectionTally tally_;
};

struct ExpandOptions {
    std::vector<std::string> target_fields;
    Date retrieved_at;
    FetchOptions fetch;
};

struct ExpandResult {
    std::vector<std::string> admitted;
    bool exhausted = false;  // fewer valid candidates than batch_size
};

// Admits the `batch_size` valid candidates most similar to the center.
// `embeddings` (normalized) supplies the vector for each candidate; candidates
// without one are rejected as MissingEmbedding.
inline ExpandResult expand(AtlasState& atlas, Provider& provider, const EmbeddingSet& embeddings,
                           std::size_t batch_size, const ExpandOptions& opt) {
    ExpandResult result;
    if (batch_size == 0) return result;
    if (!embeddings.normalized()) throw NotNormalized("expansion embedding must be normalized");
    const auto center = embeddings.row(atlas.center_id());

    std::vector<std::string> fresh;
    for (auto& id : provider.neighbor_ids(atlas.admission_order())) {
        if (atlas.store().contains(id) || atlas.pending().count(id) || atlas.rejected().count(id)) continue;
        fresh.push_back(std::move(id));
    }
    for (const auto& page : fetch_batch(provider, fresh, opt.fetch)) {
        for (const auto& text : page) {
            json raw;
            ValidationResult v;
            try {
                raw = parse_payload(text);
                v = validate_record(raw, opt.target_fields, opt.retrieved_at);
            } catch (const ParseError&) {
                ++atlas.tally().malformed;
                if (raw.is_object() && raw.contains("paperId") && raw["paperId"].is_string())
                    atlas.rejected().insert(raw["paperId"].get<std::string>());
                continue;
            }
            const std::string pid = raw["paperId"].get<std::string>();
            if (auto* rej = std::get_if<Rejection>(&v)) {
                ++atlas.tally().rejected[to_string(*rej)];
                atlas.rejected().insert(pid);
                continue;
            }
            if (!embeddings.find(pid)) {
                ++atlas.tally().rejected["MissingEmbedding"];
                atlas.rejected().insert(pid);
                continue;
            }
            ++atlas.tally().accepted;
            atlas.pending().emplace(pid, std::get<PublicationRecord>(std::move(v)));
        }
    }

    struct Scored {
        double similarity;
        const std::string* id;
    };
    std::vector<Scored> scored;
    scored.reserve(atlas.pending().size());
    for (const auto& [id, _] : atlas.pending())
        scored.push_back({cosine_similarity(center, embeddings.row(id)), &id});
    const std::size_t take = std::min(batch_size, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(),
                      [](const Scored& a, const Scored& b) {
                          if (a.similarity != b.similarity) return a.similarity > b.similarity;
                          return *a.id < *b.id;
                      });
    std::vector<PublicationRecord> batch;
    for (std::size_t i = 0; i < take; ++i) {
        result.admitted.push_back(*scored[i].id);
        batch.push_back(atlas.pending().at(*scored[i].id));
    }
    result.exhausted = take < batch_size;
    if (!batch.empty()) atlas.admit(std::move(batch));
    return result;
}

struct NeighborhoodSnapshot {
    std::size_t collection_size = 0;
    std::size_t k = 0;
    std::map<std::string, std::vector<std::string>> neighbors;
    std::map<std::string, std::string> omitted;  // id -> reason

    friend bool operator==(const NeighborhoodSnapshot& a, const NeighborhoodSnapshot& b) {
        return a.collection_size == b.collection_size && a.k == b.k && a.neighbors == b.neighbors;
    }
};

// Neighbor lists for the first `collection_size` admitted publications
// (all of them when 0), restricted to that same collection.
inline NeighborhoodSnapshot snapshot(const AtlasState& atlas, const EmbeddingSet& embeddings, std::size_t k,
                                     AsofRule rule = AsofRule::StrictlyEarlier, std::size_t collection_size = 0) {
    if (k < 1) throw ConfigError("k must be >= 1");
    const auto& order = atlas.admission_order();
    const std::size_t size = collection_size == 0 ? order.size() : std::min(collection_size, order.size());

    NeighborhoodSnapshot snap;
    snap.collection_size = size;
    snap.k = k;

    std::vector<Date> dates(embeddings.size());
    std::vector<std::size_t> members;
    members.reserve(size);
    for (std::size_t i = 0; i < size; ++i) {
        auto row = embeddings.find(order[i]);
        if (!row) {
            snap.omitted[order[i]] = "MissingEmbedding";
            continue;
        }
        dates[*row] = atlas.store().at(order[i]).publication_date;
        members.push_back(*row);
    }
    DatedPool pool(embeddings, dates);
    for (std::size_t row : members) {
        auto r = find_previous_neighbors(pool, row, k, members, rule);
        const auto& id = embeddings.ids()[row];
        if (!r.sufficient())
            snap.omitted[id] = "InsufficientNeighbors";
        else
            snap.neighbors[id] = neighbor_ids(embeddings, r.neighbors);
    }
    return snap;
}

// Ids whose neighbor sets are identical in both snapshots.
inline std::set<std::string> converged_ids(const NeighborhoodSnapshot& before, const NeighborhoodSnapshot& after,
                                           std::size_t min_additions = 1000) {
    if (before.k != after.k)
        throw ConfigError("snapshot k mismatch: " + std::to_string(before.k) + " vs " + std::to_string(after.k));
    if (after.collection_size < before.collection_size + min_additions)
        throw ConfigError("snapshots are only " +
                          std::to_string(after.collection_size - std::min(after.collection_size,
                                                                          before.collection_size)) +
                          " additions apart; need " + std::to_string(min_additions));
    std::set<std::string> out;
    for (const auto& [id, list] : before.neighbors) {
        auto it = after.neighbors.find(id);
        if (it == after.neighbors.end()) continue;
        std::vector<std::string> a = list, b = it->second;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        if (a == b) out.insert(id);
    }
    return out;
}

// ---- persistence ---------------------------------------------------------------

inline nlohmann::ordered_json to_json(const NeighborhoodSnapshot& s) {
    nlohmann::ordered_json j;
    j["collection_size"] = s.collection_size;
    j["k"] = s.k;
    j["neighbors"] = nlohmann::ordered_json::object();
    for (const auto& [id, list] : s.neighbors) j["neighbors"][id] = list;
    return j;
}

inline NeighborhoodSnapshot snapshot_from_json(const json& j) {
    try {
        NeighborhoodSnapshot s;
        s.collection_size = j.at("collection_size").get<std::size_t>();
        s.k = j.at("k").get<std::size_t>();
        for (const auto& [id, list] : j.at("neighbors").items()) {
            auto v = list.get<std::vector<std::string>>();
            if (v.size() != s.k) throw FormatError("neighbor list of '" + id + "' does not have k entries");
            s.neighbors[id] = std::move(v);
        }
        return s;
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad snapshot: ") + e.what());
    }
}

inline void write_expansion_log(const AtlasState& atlas, std::ostream& out) {
    for (const auto& b : atlas.expansion_log()) {
        nlohmann::ordered_json j;
        j["batch"] = b.batch;
        j["ids"] = b.ids;
        out << j.dump() << '\n';
    }
}

inline std::vector<ExpansionBatch> read_expansion_log(std::istream& in) {
    std::vector<ExpansionBatch> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = json::parse(line);
        out.push_back({j.at("batch").get<std::size_t>(), j.at("ids").get<std::vector<std::string>>()});
    }
    return out;
}

// Rebuilds an atlas from a corpus and a recorded expansion log.
inline AtlasState replay_atlas(const CorpusStore& corpus, const std::vector<ExpansionBatch>& log) {
    if (log.empty() || log.front().ids.size() != 1) throw FormatError("expansion log must start with the center");
    AtlasState atlas = AtlasState::seed(corpus.at(log.front().ids.front()));
    for (std::size_t i = 1; i < log.size(); ++i) {
        std::vector<PublicationRecord> batch;
        for (const auto& id : log[i].ids) batch.push_back(corpus.at(id));
        atlas.admit(std::move(batch));
    }
    return atlas;
}

}  // namespace litfield

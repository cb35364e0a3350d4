#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "litfield/atlas.hpp"
#include "litfield/csv.hpp"
#include "litfield/embed.hpp"
#include "litfield/neighbors.hpp"

namespace litfield {

struct MetricConfig {
    std::size_t k = 16;
    double angle_floor = 1e-9;          // radians
    double cpy_offset = 0.1;            // citations per year, added before the log
    double age_floor = 1.0 / 365.25;    // years
    Date asof_date;

    void validate() const {
        if (k < 1) throw ConfigError("k must be >= 1");
        if (!(angle_floor > 0)) throw ConfigError("angle_floor must be positive");
        if (!(cpy_offset > 0)) throw ConfigError("cpy_offset must be positive");
        if (!(age_floor > 0)) throw ConfigError("age_floor must be positive");
    }
};

namespace detail {
inline void require_unit(std::span<const double> v, const char* what) {
    const double n = norm(v);
    if (!(std::abs(n - 1.0) <= 1e-6)) throw NotNormalized(std::string(what) + " has norm " + std::to_string(n));
}
}  // namespace detail

// Previous publications per radian: k over the angle to the k-th nearest
// previous neighbor, with the angle floored at `angle_floor`.
inline double density(std::span<const double> target, std::span<const double> kth_neighbor, std::size_t k,
                      double angle_floor = 1e-9) {
    detail::require_unit(target, "target");
    detail::require_unit(kth_neighbor, "k-th neighbor");
    const double angle = std::acos(cosine_similarity(target, kth_neighbor));
    return static_cast<double>(k) / std::max(angle, angle_floor);
}

// Norm of the mean unit direction from each neighbor to the target. Neighbors
// coincident with the target contribute a zero vector but still count in k.
inline double asymmetry(std::span<const double> target, std::span<const std::span<const double>> neighbors) {
    if (neighbors.empty()) throw ConfigError("asymmetry needs at least one neighbor");
    detail::require_unit(target, "target");
    const std::size_t d = target.size();
    std::vector<double> sum(d, 0.0), diff(d);
    for (const auto& p : neighbors) {
        if (p.size() != d) throw DimensionError("neighbor dimension mismatch");
        detail::require_unit(p, "neighbor");
        for (std::size_t i = 0; i < d; ++i) diff[i] = target[i] - p[i];
        const double n = norm(diff);
        if (n < 1e-12) continue;
        for (std::size_t i = 0; i < d; ++i) sum[i] += diff[i] / n;
    }
    return std::min(1.0, norm(sum) / static_cast<double>(neighbors.size()));
}

struct CitationRate {
    double age_years = 0;
    double cpy = 0;
    double log_cpy = 0;
};

inline CitationRate citation_rate(const PublicationRecord& rec, Date asof, const MetricConfig& cfg) {
    if (asof < rec.publication_date)
        throw InvalidDate("'" + rec.id + "' is dated " + rec.publication_date.iso() + ", after as-of " + asof.iso());
    CitationRate r;
    r.age_years = std::max(static_cast<double>(asof - rec.publication_date) / 365.25, cfg.age_floor);
    r.cpy = static_cast<double>(rec.citation_count) / r.age_years;
    r.log_cpy = std::log(r.cpy + cfg.cpy_offset);
    return r;
}

// One regression row.
struct MetricRecord {
    std::string id;
    std::string field_label;
    std::map<std::string, double> rho;    // embedder -> neighbors per radian
    std::map<std::string, double> alpha;  // embedder -> [0, 1]
    double log_cpy = 0;
    long n_ref = 0;
    double age_years = 0;
    long citation_count = 0;
};

struct Exclusion {
    std::string id;
    std::string reason;
};

struct MetricTable {
    std::vector<std::string> embedders;
    std::vector<MetricRecord> records;  // sorted by id
    std::vector<Exclusion> exclusions;

    std::map<std::string, std::size_t> exclusion_counts() const {
        std::map<std::string, std::size_t> out;
        for (const auto& e : exclusions) ++out[e.reason];
        return out;
    }
};

// ρ and α of one publication under one embedding, computed from its own
// neighbor list.
struct NeighborhoodMetrics {
    double rho = 0;
    double alpha = 0;
};

inline NeighborhoodMetrics neighborhood_metrics(const EmbeddingSet& set, std::size_t target_row,
                                                std::span<const Neighbor> neighbors, double angle_floor) {
    const auto target = set.row(target_row);
    std::vector<std::span<const double>> vs;
    vs.reserve(neighbors.size());
    for (const auto& n : neighbors) vs.push_back(set.row(n.row));
    return {density(target, vs.back(), neighbors.size(), angle_floor), asymmetry(target, vs)};
}

// Rows for every atlas member that is converged, inside the window, and has at
// least k previous neighbors under every embedder. Everything else lands in
// `exclusions` with a reason.
inline MetricTable compute_metric_records(const AtlasState& atlas, std::span<const EmbeddingSet* const> embeddings,
                                          const std::set<std::string>& converged,
                                          const std::set<std::string>& window, const MetricConfig& cfg) {
    cfg.validate();
    MetricTable table;
    for (const auto* e : embeddings) {
        if (!e->normalized()) throw NotNormalized("embedding '" + e->embedder_id() + "' is not normalized");
        table.embedders.push_back(e->embedder_id());
    }

    struct PoolData {
        std::vector<Date> dates;
        std::vector<std::size_t> members;
    };
    std::vector<PoolData> pools(embeddings.size());
    for (std::size_t e = 0; e < embeddings.size(); ++e) {
        pools[e].dates.resize(embeddings[e]->size());
        for (const auto& id : atlas.admission_order()) {
            if (auto row = embeddings[e]->find(id)) {
                pools[e].dates[*row] = atlas.store().at(id).publication_date;
                pools[e].members.push_back(*row);
            }
        }
    }

    std::vector<std::string> ids = atlas.admission_order();
    std::sort(ids.begin(), ids.end());
    for (const auto& id : ids) {
        if (!converged.count(id)) {
            table.exclusions.push_back({id, "NotConverged"});
            continue;
        }
        if (!window.count(id)) {
            table.exclusions.push_back({id, "OutsideWindow"});
            continue;
        }
        const auto& rec = atlas.store().at(id);
        MetricRecord row;
        row.id = id;
        row.field_label = rec.field_label;
        row.n_ref = rec.reference_count;
        row.citation_count = rec.citation_count;
        std::string reason;
        for (std::size_t e = 0; e < embeddings.size() && reason.empty(); ++e) {
            const auto& set = *embeddings[e];
            auto target = set.find(id);
            if (!target) {
                reason = "MissingEmbedding:" + set.embedder_id();
                break;
            }
            DatedPool pool(set, pools[e].dates);
            auto knn = find_previous_neighbors(pool, *target, cfg.k, pools[e].members);
            if (!knn.sufficient()) {
                reason = "InsufficientNeighbors:" + set.embedder_id();
                break;
            }
            auto m = neighborhood_metrics(set, *target, knn.neighbors, cfg.angle_floor);
            row.rho[set.embedder_id()] = m.rho;
            row.alpha[set.embedder_id()] = m.alpha;
        }
        if (!reason.empty()) {
            table.exclusions.push_back({id, reason});
            continue;
        }
        try {
            auto cr = citation_rate(rec, cfg.asof_date, cfg);
            row.log_cpy = cr.log_cpy;
            row.age_years = cr.age_years;
        } catch (const InvalidDate&) {
            table.exclusions.push_back({id, "InvalidDate"});
            continue;
        }
        table.records.push_back(std::move(row));
    }
    return table;
}

// ---- CSV -----------------------------------------------------------------------

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_metric_csv(const MetricTable& t, std::ostream& out) {
    out << "id,field,log_cpy,n_ref,age_years";
    for (const auto& e : t.embedders) out << ",rho_" << e;
    for (const auto& e : t.embedders) out << ",alpha_" << e;
    out << '\n';
    for (const auto& r : t.records) {
        out << csv_escape(r.id) << ',' << csv_escape(r.field_label) << ',' << format_double(r.log_cpy) << ','
            << r.n_ref << ',' << format_double(r.age_years);
        for (const auto& e : t.embedders) out << ',' << format_double(r.rho.at(e));
        for (const auto& e : t.embedders) out << ',' << format_double(r.alpha.at(e));
        out << '\n';
    }
}

inline void write_exclusion_csv(const MetricTable& t, std::ostream& out) {
    out << "id,reason\n";
    for (const auto& e : t.exclusions) out << csv_escape(e.id) << ',' << csv_escape(e.reason) << '\n';
}

inline MetricTable read_metric_csv(std::istream& in) {
    auto rows = read_csv(in);
    if (rows.empty()) throw FormatError("metric table is empty");
    const auto& header = rows.front();
    if (header.size() < 5 || header[0] != "id" || header[1] != "field" || header[2] != "log_cpy" ||
        header[3] != "n_ref" || header[4] != "age_years")
        throw FormatError("unexpected metric table header");
    const std::size_t m = header.size() - 5;
    if (m % 2) throw FormatError("metric table must have matching rho_/alpha_ columns");
    MetricTable t;
    for (std::size_t i = 0; i < m / 2; ++i) {
        const auto& rh = header[5 + i];
        const auto& ah = header[5 + m / 2 + i];
        if (rh.rfind("rho_", 0) != 0 || ah.rfind("alpha_", 0) != 0 || rh.substr(4) != ah.substr(6))
            throw FormatError("bad embedder columns " + rh + " / " + ah);
        t.embedders.push_back(rh.substr(4));
    }
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& c = rows[r];
        if (c.size() != header.size()) throw FormatError("metric row " + std::to_string(r) + " has wrong width");
        MetricRecord rec;
        rec.id = c[0];
        rec.field_label = c[1];
        rec.log_cpy = parse_double(c[2]);
        rec.n_ref = std::stol(c[3]);
        rec.age_years = parse_double(c[4]);
        for (std::size_t i = 0; i < t.embedders.size(); ++i) {
            rec.rho[t.embedders[i]] = parse_double(c[5 + i]);
            rec.alpha[t.embedders[i]] = parse_double(c[5 + t.embedders.size() + i]);
        }
        t.records.push_back(std::move(rec));
    }
    return t;
}

}  // namespace litfield

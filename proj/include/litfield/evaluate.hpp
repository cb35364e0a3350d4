#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "litfield/csv.hpp"
#include "litfield/error.hpp"
#include "litfield/random.hpp"
#include "litfield/regress.hpp"

namespace litfield {

struct SplitResult {
    std::set<std::string> train;
    std::set<std::string> test;
};

struct LabeledId {
    std::string id;
    std::string field;
};

// Held-out split. Stratified: each field contributes floor or ceil of
// fraction * n_f test rows, with the leftover rows going to the fields with the
// largest fractional parts so the total is round(fraction * n).
inline SplitResult split(std::vector<LabeledId> rows, double test_fraction, std::uint64_t seed,
                         bool stratify = true) {
    if (!(test_fraction > 0 && test_fraction < 1)) throw ConfigError("test_fraction must be in (0, 1)");
    std::sort(rows.begin(), rows.end(), [](const LabeledId& a, const LabeledId& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].id == rows[i - 1].id) throw DuplicateId(rows[i].id);
    Rng rng(derive_seed(seed, SeedStage::Split));
    SplitResult out;

    if (!stratify) {
        std::vector<std::string> ids;
        for (auto& r : rows) ids.push_back(r.id);
        rng.shuffle(std::span<std::string>(ids));
        const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(ids.size())));
        for (std::size_t i = 0; i < ids.size(); ++i) (i < n_test ? out.test : out.train).insert(ids[i]);
        return out;
    }

    std::map<std::string, std::vector<std::string>> by_field;
    for (auto& r : rows) by_field[r.field].push_back(r.id);
    struct Quota {
        std::string field;
        std::size_t base;
        double frac;
    };
    std::vector<Quota> quotas;
    std::size_t assigned = 0;
    for (const auto& [field, ids] : by_field) {
        if (ids.size() < 2)
            throw StratificationError("field '" + field + "' has " + std::to_string(ids.size()) + " row(s)");
        const double target = test_fraction * static_cast<double>(ids.size());
        const auto base = static_cast<std::size_t>(std::floor(target));
        quotas.push_back({field, base, target - static_cast<double>(base)});
        assigned += base;
    }
    const auto total = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(rows.size())));
    std::vector<std::size_t> order(quotas.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return quotas[a].frac > quotas[b].frac; });
    for (std::size_t i = 0; assigned < total && i < order.size(); ++i, ++assigned)
        if (quotas[order[i]].frac > 0) ++quotas[order[i]].base;

    for (const auto& q : quotas) {
        auto ids = by_field[q.field];
        rng.shuffle(std::span<std::string>(ids));
        for (std::size_t i = 0; i < ids.size(); ++i) (i < q.base ? out.test : out.train).insert(ids[i]);
    }
    return out;
}

inline SplitResult split(const MetricTable& table, double test_fraction, std::uint64_t seed, bool stratify = true) {
    std::vector<LabeledId> rows;
    for (const auto& r : table.records) rows.push_back({r.id, r.field_label});
    return split(std::move(rows), test_fraction, seed, stratify);
}

// Constant predictors the skill scores are measured against, taken from the
// training partition.
struct TrainReference {
    double mean = 0;
    double median = 0;

    static TrainReference from(std::span<const double> y_train) {
        if (y_train.empty()) throw DimensionError("empty training response");
        std::vector<double> v(y_train.begin(), y_train.end());
        std::sort(v.begin(), v.end());
        double s = 0;
        for (double x : v) s += x;
        return {s / static_cast<double>(v.size()), quantile_sorted(v, 0.5)};
    }
};

struct Scores {
    double rmse = 0, mae = 0, mape = 0, r2 = 0, d2_pinball = 0, d2_abs = 0;
    std::size_t mape_excluded = 0;  // rows with y == 0, left out of mape only
};

enum class Metric { Rmse, Mae, Mape, R2, D2Pinball, D2Abs };
inline constexpr std::array<Metric, 6> kAllMetrics{Metric::Rmse, Metric::Mae,       Metric::Mape,
                                                   Metric::R2,   Metric::D2Pinball, Metric::D2Abs};

inline const char* to_string(Metric m) {
    switch (m) {
        case Metric::Rmse: return "rmse";
        case Metric::Mae: return "mae";
        case Metric::Mape: return "mape";
        case Metric::R2: return "r2";
        case Metric::D2Pinball: return "d2_pinball";
        case Metric::D2Abs: return "d2_abs";
    }
    return "?";
}

inline bool higher_is_better(Metric m) { return m == Metric::R2 || m == Metric::D2Pinball || m == Metric::D2Abs; }

inline double get(const Scores& s, Metric m) {
    switch (m) {
        case Metric::Rmse: return s.rmse;
        case Metric::Mae: return s.mae;
        case Metric::Mape: return s.mape;
        case Metric::R2: return s.r2;
        case Metric::D2Pinball: return s.d2_pinball;
        case Metric::D2Abs: return s.d2_abs;
    }
    return 0;
}

inline double pinball_loss(std::span<const double> y, std::span<const double> yhat, double q) {
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y[i] - yhat[i];
        s += d >= 0 ? q * d : (q - 1.0) * d;
    }
    return s / static_cast<double>(y.size());
}

inline Scores score(std::span<const double> y, std::span<const double> yhat, const TrainReference& ref) {
    if (y.size() != yhat.size())
        throw DimensionError("y has " + std::to_string(y.size()) + " values, predictions " +
                             std::to_string(yhat.size()));
    if (y.size() < 2) throw DimensionError("scoring needs at least 2 rows");
    const double n = static_cast<double>(y.size());
    Scores s;
    double se = 0, ae = 0, ape = 0, tot = 0, ae_null = 0;
    std::size_t ape_n = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double e = y[i] - yhat[i];
        se += e * e;
        ae += std::abs(e);
        tot += (y[i] - ref.mean) * (y[i] - ref.mean);
        ae_null += std::abs(y[i] - ref.median);
        if (y[i] != 0) {
            ape += std::abs(e) / std::abs(y[i]);
            ++ape_n;
        }
    }
    s.rmse = std::sqrt(se / n);
    s.mae = ae / n;
    s.mape_excluded = y.size() - ape_n;
    s.mape = ape_n ? ape / static_cast<double>(ape_n) : std::numeric_limits<double>::quiet_NaN();
    s.r2 = 1.0 - se / tot;
    std::vector<double> median_pred(y.size(), ref.median);
    s.d2_pinball = 1.0 - pinball_loss(y, yhat, 0.5) / pinball_loss(y, median_pred, 0.5);
    s.d2_abs = 1.0 - ae / ae_null;
    return s;
}

inline nlohmann::ordered_json to_json(const Scores& s) {
    return {{"rmse", s.rmse},          {"one_minus_rmse", 1.0 - s.rmse}, {"mae", s.mae},
            {"mape", s.mape},          {"mape_excluded", s.mape_excluded}, {"r2", s.r2},
            {"d2_pinball", s.d2_pinball}, {"d2_abs", s.d2_abs}};
}

struct ModelScores {
    std::string name;
    Scores scores;
};

struct EvaluationReport {
    std::vector<ModelScores> models;
    std::map<std::string, std::vector<std::string>> ranking;  // metric -> model names, best first
    std::map<std::string, bool> ties;                         // metric -> any tie
    bool consensus = false;                                   // all metrics rank identically
    std::uint64_t split_seed = 0;
    double test_fraction = 0.25;

    std::vector<std::string> consensus_ranking() const { return ranking.at("rmse"); }
};

inline EvaluationReport rank_models(std::vector<ModelScores> models) {
    EvaluationReport r;
    r.models = std::move(models);
    for (auto m : kAllMetrics) {
        std::vector<std::size_t> order(r.models.size());
        std::iota(order.begin(), order.end(), 0);
        auto value = [&](std::size_t i) {
            const double v = get(r.models[i].scores, m);
            return std::isnan(v) ? -std::numeric_limits<double>::infinity() : (higher_is_better(m) ? v : -v);
        };
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return value(a) > value(b); });
        bool tie = false;
        for (std::size_t i = 1; i < order.size(); ++i)
            if (value(order[i]) == value(order[i - 1])) tie = true;
        std::vector<std::string> names;
        for (auto i : order) names.push_back(r.models[i].name);
        r.ranking[to_string(m)] = std::move(names);
        r.ties[to_string(m)] = tie;
    }
    r.consensus = std::all_of(kAllMetrics.begin(), kAllMetrics.end(),
                              [&](Metric m) { return r.ranking[to_string(m)] == r.ranking["rmse"]; });
    return r;
}

inline nlohmann::ordered_json to_json(const EvaluationReport& r) {
    nlohmann::ordered_json j;
    j["split_seed"] = r.split_seed;
    j["test_fraction"] = r.test_fraction;
    j["models"] = nlohmann::ordered_json::object();
    for (const auto& m : r.models) j["models"][m.name] = to_json(m.scores);
    j["ranking"] = r.ranking;
    j["ties"] = r.ties;
    j["consensus"] = r.consensus;
    return j;
}

// Long-form CSV: model,metric,value.
inline void write_report_csv(const EvaluationReport& r, std::ostream& out) {
    out << "model,metric,value\n";
    for (const auto& m : r.models) {
        out << csv_escape(m.name) << ",one_minus_rmse," << format_double(1.0 - m.scores.rmse) << '\n';
        for (auto metric : kAllMetrics)
            out << csv_escape(m.name) << ',' << to_string(metric) << ',' << format_double(get(m.scores, metric))
                << '\n';
    }
}

// Model-comparison table: rows are metrics (1 - RMSE first), columns models.
inline void write_comparison_table(const std::vector<std::pair<std::string, Scores>>& columns, std::ostream& out) {
    out << "metric";
    for (const auto& [label, _] : columns) out << ',' << csv_escape(label);
    out << '\n';
    out << "1 - RMSE";
    for (const auto& [_, s] : columns) out << ',' << format_double(1.0 - s.rmse);
    out << '\n';
    for (auto m : kAllMetrics) {
        out << to_string(m);
        for (const auto& [_, s] : columns) out << ',' << format_double(get(s, m));
        out << '\n';
    }
}

enum class PointEstimate { Mean, Median };

// Point prediction of mu for every dataset row. The posterior mean uses the
// linearity of mu in the parameters: mean over draws of mu = mu at the mean draw.
inline std::vector<double> predict(const BoundModel& model, const PosteriorSamples& post, const RegressionDataset& ds,
                                   PointEstimate how = PointEstimate::Mean) {
    std::vector<double> out(ds.rows());
    if (how == PointEstimate::Mean) {
        const Eigen::VectorXd m = post.mean();
        for (std::size_t i = 0; i < ds.rows(); ++i) out[i] = model.predict_mu(m, ds, i);
        return out;
    }
    std::vector<double> mus(post.chains() * post.iterations());
    for (std::size_t i = 0; i < ds.rows(); ++i) {
        std::size_t k = 0;
        for (std::size_t c = 0; c < post.chains(); ++c)
            for (std::size_t it = 0; it < post.iterations(); ++it) mus[k++] = model.predict_mu(post.draw(c, it), ds, i);
        std::sort(mus.begin(), mus.end());
        out[i] = quantile_sorted(mus, 0.5);
    }
    return out;
}

}  // namespace litfield

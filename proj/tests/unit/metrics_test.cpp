#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/QR>
#include <gtest/gtest.h>

#include "litfield/metrics.hpp"

using namespace litfield;

namespace {

std::vector<double> unit(std::vector<double> v) {
    double n = 0;
    for (double x : v) n += x * x;
    for (auto& x : v) x /= std::sqrt(n);
    return v;
}

std::vector<double> random_unit(std::size_t d, std::mt19937_64& gen) {
    std::normal_distribution<double> nd;
    std::vector<double> v(d);
    for (auto& x : v) x = nd(gen);
    return unit(v);
}

double asym(const std::vector<double>& t, const std::vector<std::vector<double>>& ns) {
    std::vector<std::span<const double>> spans(ns.begin(), ns.end());
    return asymmetry(t, spans);
}

PublicationRecord dated(long citations, Date d) {
    PublicationRecord r;
    r.id = "r";
    r.publication_date = d;
    r.citation_count = citations;
    return r;
}

}  // namespace

TEST(Density, OrthogonalKthNeighbor) {
    const std::vector<double> a{1, 0}, b{0, 1};
    EXPECT_NEAR(density(a, b, 16), 32.0 / std::numbers::pi, 1e-12);
    EXPECT_NEAR(density(a, b, 16), 10.18592, 1e-5);
}

TEST(Density, OneRadian) {
    const std::vector<double> a{1, 0}, b{std::cos(1.0), std::sin(1.0)};
    EXPECT_NEAR(density(a, b, 16), 16.0, 1e-12);
}

TEST(Density, DuplicateHitsFloor) {
    const std::vector<double> a{0.6, 0.8};
    const double rho = density(a, a, 16);
    EXPECT_TRUE(std::isfinite(rho));
    EXPECT_NEAR(rho, 1.6e10, 1.0);
}

TEST(Density, RejectsUnnormalized) {
    const std::vector<double> a{1, 1}, b{1, 0};
    EXPECT_THROW(density(a, b, 16), NotNormalized);
    EXPECT_THROW(density(b, a, 16), NotNormalized);
}

TEST(Density, StrictlyDecreasingInAngle) {
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(1e-6, std::numbers::pi - 1e-6);
    const std::vector<double> a{1, 0};
    for (int t = 0; t < 1000; ++t) {
        double x = u(gen), y = u(gen);
        if (std::abs(x - y) < 1e-7) continue;
        if (x > y) std::swap(x, y);
        const std::vector<double> px{std::cos(x), std::sin(x)}, py{std::cos(y), std::sin(y)};
        EXPECT_GT(density(a, px, 16), density(a, py, 16));
    }
}

TEST(Asymmetry, AlignedDirections) {
    // Neighbors strung along one great circle on the same side of the target.
    const auto t = unit({1, 0, 0});
    const auto n1 = unit({1, -0.1, 0}), n2 = unit({1, -0.1, 0});
    EXPECT_NEAR(asym(t, {n1, n2, n1}), 1.0, 1e-12);
}

// On the unit sphere every difference t - p leans toward t, so a mirrored pair
// only cancels sideways: at angle theta each side, alpha = sin(theta / 2),
// which vanishes as the pair closes in.
TEST(Asymmetry, SymmetricPairCancelsSideways) {
    const std::vector<double> t{1, 0, 0};
    for (double theta : {1.0, 0.1, 1e-3, 1e-6}) {
        const std::vector<double> n1{std::cos(theta), std::sin(theta), 0}, n2{std::cos(theta), -std::sin(theta), 0};
        EXPECT_NEAR(asym(t, {n1, n2}), std::sin(theta / 2), 1e-9);
    }
    EXPECT_LT(asym(t, {{std::cos(1e-6), std::sin(1e-6), 0}, {std::cos(1e-6), -std::sin(1e-6), 0}}), 1e-6);
}

TEST(Asymmetry, OrthogonalDifferences) {
    // t - m1 points along x and t - m2 along y.
    const double s = std::sqrt(0.5);
    const std::vector<double> t{s, s, 0}, m1{-s, s, 0}, m2{s, -s, 0};
    EXPECT_NEAR(asym(t, {m1, m2}), std::sqrt(2.0) / 2.0, 1e-12);
    EXPECT_NEAR(asym(t, {m1, m2}), 0.70711, 1e-5);
}

TEST(Asymmetry, CoincidentNeighborCountsButAddsNothing) {
    const auto t = unit({1, 0, 0});
    EXPECT_NEAR(asym(t, {t, unit({1, 0.2, 0})}), 0.5, 1e-12);
    EXPECT_THROW(asym(t, {}), ConfigError);
    EXPECT_THROW(asym(t, {{1, 1, 0}}), NotNormalized);
}

TEST(Asymmetry, BoundedPermutationAndRotationInvariant) {
    std::mt19937_64 gen(2);
    const std::size_t d = 6;
    for (int trial = 0; trial < 200; ++trial) {
        const auto t = random_unit(d, gen);
        std::vector<std::vector<double>> ns;
        for (int j = 0; j < 8; ++j) ns.push_back(random_unit(d, gen));
        const double a = asym(t, ns);
        EXPECT_GE(a, 0.0);
        EXPECT_LE(a, 1.0);

        auto shuffled = ns;
        std::shuffle(shuffled.begin(), shuffled.end(), gen);
        EXPECT_NEAR(asym(t, shuffled), a, 1e-12);

        Eigen::MatrixXd m(d, d);
        std::normal_distribution<double> nd;
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(gen);
        const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(m).householderQ();
        auto rot = [&](const std::vector<double>& v) {
            Eigen::VectorXd r = q * Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(d));
            return std::vector<double>(r.data(), r.data() + r.size());
        };
        std::vector<std::vector<double>> rn;
        for (const auto& n : ns) rn.push_back(rot(n));
        const auto rt = rot(t);
        EXPECT_NEAR(asym(rt, rn), a, 1e-9);
        EXPECT_NEAR(density(rt, rn.back(), 8), density(t, ns.back(), 8), 1e-9 * density(t, ns.back(), 8));
    }
}

TEST(CitationRate, Arithmetic) {
    MetricConfig cfg;
    auto r = citation_rate(dated(10, Date(2015, 1, 1)), Date(2020, 1, 1), cfg);
    EXPECT_NEAR(r.age_years, 1826.0 / 365.25, 1e-12);
    EXPECT_NEAR(r.age_years, 4.9993, 1e-4);
    EXPECT_NEAR(r.cpy, 2.0003, 1e-4);
    EXPECT_DOUBLE_EQ(r.log_cpy, std::log(r.cpy + 0.1));
}

TEST(CitationRate, ZeroCitationsUseOffset) {
    MetricConfig cfg;
    auto r = citation_rate(dated(0, Date(2001, 5, 5)), Date(2020, 1, 1), cfg);
    EXPECT_EQ(r.cpy, 0.0);
    EXPECT_DOUBLE_EQ(r.log_cpy, std::log(0.1));
    EXPECT_NEAR(r.log_cpy, -2.302585, 1e-6);
}

TEST(CitationRate, SameDayUsesAgeFloor) {
    MetricConfig cfg;
    auto r = citation_rate(dated(3, Date(2020, 1, 1)), Date(2020, 1, 1), cfg);
    EXPECT_DOUBLE_EQ(r.age_years, 1.0 / 365.25);
    EXPECT_DOUBLE_EQ(r.cpy, 3 * 365.25);
    EXPECT_THROW(citation_rate(dated(3, Date(2020, 1, 2)), Date(2020, 1, 1), cfg), InvalidDate);
}

TEST(CitationRate, HomogeneousInCitations) {
    MetricConfig cfg;
    std::mt19937_64 gen(3);
    for (int t = 0; t < 200; ++t) {
        const long c = static_cast<long>(gen() % 5000);
        const Date d = Date::from_days(Date(1990, 1, 1).days_since_epoch() + static_cast<long>(gen() % 10000));
        const auto a = citation_rate(dated(c, d), Date(2024, 1, 1), cfg);
        const auto b = citation_rate(dated(2 * c, d), Date(2024, 1, 1), cfg);
        EXPECT_EQ(b.cpy, 2 * a.cpy);
    }
}

namespace {

struct Synthetic {
    AtlasState atlas;
    EmbeddingSet a, b;
    std::vector<std::string> ids;
};

Synthetic synthetic_atlas(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd;
    Synthetic s;
    std::vector<double> da, db;
    CorpusStore store;
    for (std::size_t i = 0; i < n; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "m%04zu", i);
        s.ids.emplace_back(buf);
        PublicationRecord r;
        r.id = buf;
        // The first 20 share the oldest date so everyone later has enough predecessors.
        r.publication_date = Date::from_days(Date(2000, 1, 1).days_since_epoch() +
                                             (i < 20 ? 0 : 1 + static_cast<long>(gen() % 6000)));
        r.field_label = i % 3 ? "Physics" : "Computer Science";
        r.abstract_text = "x";
        r.citation_count = static_cast<long>(gen() % 300);
        r.reference_count = static_cast<long>(gen() % 60);
        store.add(r);
        for (int j = 0; j < 8; ++j) da.push_back(nd(gen));
        for (int j = 0; j < 5; ++j) db.push_back(nd(gen));
    }
    s.a = normalize(EmbeddingSet("ea", s.ids, 8, da));
    s.b = normalize(EmbeddingSet("eb", s.ids, 5, db));
    s.atlas = AtlasState::seed(store.at(s.ids[0]));
    std::vector<PublicationRecord> rest;
    for (std::size_t i = 1; i < n; ++i) rest.push_back(store.at(s.ids[i]));
    s.atlas.admit(rest);
    return s;
}

// Single-id recomputation with its own neighbor search and formulas.
std::pair<double, double> oracle_metrics(const EmbeddingSet& e, const CorpusStore& store, const std::string& id,
                                         std::size_t k) {
    const auto t = e.row(id);
    const Date td = store.at(id).publication_date;
    std::vector<std::pair<double, std::string>> c;
    for (const auto& other : e.ids()) {
        if (other == id || !(store.at(other).publication_date < td)) continue;
        double dt = 0;
        for (std::size_t j = 0; j < e.dim(); ++j) dt += t[j] * e.row(other)[j];
        c.emplace_back(std::acos(std::clamp(dt, -1.0, 1.0)), other);
    }
    std::sort(c.begin(), c.end());
    const double rho = static_cast<double>(k) / std::max(c[k - 1].first, 1e-9);
    std::vector<double> sum(e.dim(), 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        auto p = e.row(c[j].second);
        double nrm = 0;
        for (std::size_t q = 0; q < e.dim(); ++q) nrm += (t[q] - p[q]) * (t[q] - p[q]);
        nrm = std::sqrt(nrm);
        for (std::size_t q = 0; q < e.dim(); ++q) sum[q] += (t[q] - p[q]) / nrm;
    }
    double s2 = 0;
    for (double v : sum) s2 += v * v;
    return {rho, std::sqrt(s2) / static_cast<double>(k)};
}

}  // namespace

TEST(ComputeMetricRecords, CompleteRowsForEveryEmbedder) {
    auto s = synthetic_atlas(220, 4);
    const std::vector<const EmbeddingSet*> embs{&s.a, &s.b};
    std::set<std::string> all(s.ids.begin(), s.ids.end());
    MetricConfig cfg;
    cfg.k = 16;
    cfg.asof_date = Date(2024, 6, 1);
    auto t = compute_metric_records(s.atlas, embs, all, all, cfg);
    EXPECT_EQ(t.records.size() + t.exclusions.size(), 220u);
    // The 20 oldest share a date and have no predecessors.
    EXPECT_EQ(t.exclusion_counts().at("InsufficientNeighbors:ea"), 20u);
    ASSERT_EQ(t.records.size(), 200u);
    for (const auto& r : t.records) {
        ASSERT_EQ(r.rho.size(), 2u);
        ASSERT_EQ(r.alpha.size(), 2u);
        for (const auto& [e, v] : r.rho) EXPECT_TRUE(v > 0 && std::isfinite(v));
        for (const auto& [e, v] : r.alpha) EXPECT_TRUE(v >= 0 && v <= 1);
        EXPECT_GE(r.age_years, cfg.age_floor);
    }
    EXPECT_TRUE(std::is_sorted(t.records.begin(), t.records.end(),
                               [](const MetricRecord& x, const MetricRecord& y) { return x.id < y.id; }));
}

TEST(ComputeMetricRecords, MatchesSingleIdOracle) {
    auto s = synthetic_atlas(150, 5);
    const std::vector<const EmbeddingSet*> embs{&s.a, &s.b};
    std::set<std::string> all(s.ids.begin(), s.ids.end());
    MetricConfig cfg;
    cfg.k = 6;
    cfg.asof_date = Date(2024, 6, 1);
    auto t = compute_metric_records(s.atlas, embs, all, all, cfg);
    ASSERT_GT(t.records.size(), 100u);
    for (const auto& r : t.records) {
        for (const auto* e : embs) {
            auto [rho, alpha] = oracle_metrics(*e, s.atlas.store(), r.id, cfg.k);
            EXPECT_NEAR(r.rho.at(e->embedder_id()), rho, 1e-9 * rho) << r.id;
            EXPECT_NEAR(r.alpha.at(e->embedder_id()), alpha, 1e-12) << r.id;
        }
        const auto& rec = s.atlas.store().at(r.id);
        const double age = static_cast<double>(cfg.asof_date - rec.publication_date) / 365.25;
        EXPECT_DOUBLE_EQ(r.log_cpy, std::log(static_cast<double>(rec.citation_count) / age + 0.1));
        EXPECT_EQ(r.n_ref, rec.reference_count);
    }
}

TEST(ComputeMetricRecords, ExclusionReasons) {
    auto s = synthetic_atlas(60, 6);
    std::set<std::string> converged(s.ids.begin(), s.ids.end()), window = converged;
    converged.erase(s.ids[40]);
    window.erase(s.ids[41]);
    auto partial = s.b.subset(std::vector<std::string>(s.ids.begin(), s.ids.begin() + 42));
    partial = partial.renamed("eb");
    const std::vector<const EmbeddingSet*> embs{&s.a, &partial};
    MetricConfig cfg;
    cfg.k = 4;
    cfg.asof_date = Date(2024, 6, 1);
    auto t = compute_metric_records(s.atlas, embs, converged, window, cfg);
    std::map<std::string, std::string> why;
    for (const auto& e : t.exclusions) why[e.id] = e.reason;
    EXPECT_EQ(why.at(s.ids[40]), "NotConverged");
    EXPECT_EQ(why.at(s.ids[41]), "OutsideWindow");
    EXPECT_EQ(why.at(s.ids[50]), "MissingEmbedding:eb");

    cfg.asof_date = Date(2005, 1, 1);
    auto early = compute_metric_records(s.atlas, embs, converged, window, cfg);
    EXPECT_GT(early.exclusion_counts().count("InvalidDate"), 0u);
}

TEST(MetricCsv, RoundTripsAtFullPrecision) {
    auto s = synthetic_atlas(80, 7);
    const std::vector<const EmbeddingSet*> embs{&s.a, &s.b};
    std::set<std::string> all(s.ids.begin(), s.ids.end());
    MetricConfig cfg;
    cfg.k = 5;
    cfg.asof_date = Date(2024, 6, 1);
    auto t = compute_metric_records(s.atlas, embs, all, all, cfg);
    std::stringstream buf;
    write_metric_csv(t, buf);
    EXPECT_EQ(buf.str().substr(0, buf.str().find('\n')),
              "id,field,log_cpy,n_ref,age_years,rho_ea,rho_eb,alpha_ea,alpha_eb");
    auto back = read_metric_csv(buf);
    ASSERT_EQ(back.records.size(), t.records.size());
    for (std::size_t i = 0; i < t.records.size(); ++i) {
        EXPECT_EQ(back.records[i].id, t.records[i].id);
        EXPECT_EQ(back.records[i].field_label, t.records[i].field_label);
        EXPECT_EQ(back.records[i].log_cpy, t.records[i].log_cpy);
        EXPECT_EQ(back.records[i].rho, t.records[i].rho);
        EXPECT_EQ(back.records[i].alpha, t.records[i].alpha);
    }
    std::stringstream bad("id,field,log_cpy\n");
    EXPECT_THROW(read_metric_csv(bad), FormatError);
}

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <exception>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "litfield/random.hpp"
#include "litfield/regress/dataset.hpp"
#include "litfield/regress/diagnostics.hpp"
#include "litfield/regress/model.hpp"

namespace litfield {

struct McmcSettings {
    std::size_t chains = 4;
    std::size_t warmup = 1000;
    std::size_t iterations = 2000;  // kept draws per chain
    std::uint64_t seed = 0;
    bool parallel = true;

    void validate() const {
        if (chains < 2) throw ConfigError("need at least 2 chains");
        if (iterations < 1) throw ConfigError("need at least 1 sampling iteration");
    }
};

// Post-warmup draws, stored [chain][iteration][parameter].
class PosteriorSamples {
public:
    PosteriorSamples() = default;
    PosteriorSamples(std::vector<std::string> names, McmcSettings settings)
        : names_(std::move(names)),
          settings_(settings),
          data_(settings.chains * settings.iterations * names_.size(), 0.0) {}

    const std::vector<std::string>& param_names() const { return names_; }
    const McmcSettings& settings() const { return settings_; }
    std::size_t chains() const { return settings_.chains; }
    std::size_t iterations() const { return settings_.iterations; }
    std::size_t params() const { return names_.size(); }

    double& at(std::size_t c, std::size_t it, std::size_t p) { return data_[(c * iterations() + it) * params() + p]; }
    double at(std::size_t c, std::size_t it, std::size_t p) const {
        return data_[(c * iterations() + it) * params() + p];
    }

    Eigen::VectorXd draw(std::size_t c, std::size_t it) const {
        return Eigen::Map<const Eigen::VectorXd>(&data_[(c * iterations() + it) * params()],
                                                 static_cast<Eigen::Index>(params()));
    }

    std::vector<std::vector<double>> trace(std::size_t p) const {
        std::vector<std::vector<double>> out(chains(), std::vector<double>(iterations()));
        for (std::size_t c = 0; c < chains(); ++c)
            for (std::size_t it = 0; it < iterations(); ++it) out[c][it] = at(c, it, p);
        return out;
    }

    std::size_t index_of(const std::string& name) const {
        for (std::size_t i = 0; i < names_.size(); ++i)
            if (names_[i] == name) return i;
        throw ConfigError("no parameter '" + name + "'");
    }

    Eigen::VectorXd mean() const {
        Eigen::VectorXd m = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params()));
        for (std::size_t c = 0; c < chains(); ++c)
            for (std::size_t it = 0; it < iterations(); ++it) m += draw(c, it);
        return m / static_cast<double>(chains() * iterations());
    }

    // chain,iteration,parameter,value
    void write_csv(std::ostream& out) const {
        out << "chain,iteration,parameter,value\n";
        char buf[32];
        for (std::size_t c = 0; c < chains(); ++c)
            for (std::size_t it = 0; it < iterations(); ++it)
                for (std::size_t p = 0; p < params(); ++p) {
                    std::snprintf(buf, sizeof buf, "%.17g", at(c, it, p));
                    out << c << ',' << it << ',' << names_[p] << ',' << buf << '\n';
                }
    }

private:
    std::vector<std::string> names_;
    McmcSettings settings_;
    std::vector<double> data_;
};

namespace detail {

// Univariate slice sampler (stepping out, then shrinkage).
template <class LogDensity>
double slice_sample(double x0, LogDensity&& logp, Rng& rng, double width = 1.0, int max_steps = 64) {
    const double fx0 = logp(x0);
    const double level = fx0 - rng.exponential();
    double lo = x0 - width * rng.uniform();
    double hi = lo + width;
    int j = static_cast<int>(std::floor(max_steps * rng.uniform()));
    int k = max_steps - 1 - j;
    while (j-- > 0 && logp(lo) > level) lo -= width;
    while (k-- > 0 && logp(hi) > level) hi += width;
    for (int guard = 0; guard < 200; ++guard) {
        const double x1 = lo + (hi - lo) * rng.uniform();
        if (logp(x1) > level) return x1;
        if (x1 < x0)
            lo = x1;
        else
            hi = x1;
    }
    return x0;
}

// Log-density of u = log(scale) for a scale with a half-normal(prior_scale)
// prior and `count` normal observations with sum of squares `ss`.
inline auto log_scale_density(double count, double ss, double prior_scale) {
    return [=](double u) {
        const double s2 = std::exp(2.0 * u);
        return -count * u - ss / (2.0 * s2) - s2 / (2.0 * prior_scale * prior_scale) + u;
    };
}

class GibbsChain {
public:
    GibbsChain(const BoundModel& model, const RegressionDataset& ds, std::uint64_t seed)
        : model_(model), rng_(seed), n_(static_cast<double>(ds.rows())) {
        const auto p = static_cast<Eigen::Index>(model.linear_count());
        const std::size_t F = model.fields().size();
        // Design for the linear block: intercept, pooled columns, field-masked
        // hierarchical columns.
        Eigen::MatrixXd z = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ds.rows()), p);
        for (std::size_t i = 0; i < ds.rows(); ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            z(r, 0) = 1.0;
            for (const auto& t : model.terms())
                z(r, static_cast<Eigen::Index>(model.coef_index(t, ds.field_index[i]))) =
                    ds.x(r, static_cast<Eigen::Index>(t.column));
        }
        ztz_ = z.transpose() * z;
        zty_ = z.transpose() * ds.y;
        yty_ = ds.y.squaredNorm();
        (void)F;
        state_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.param_count()));
        initialize();
    }

    const Eigen::VectorXd& state() const { return state_; }

    void step() {
        update_linear();
        update_group_means();
        update_group_scales();
        if (model_.has_hyper()) update_hyper();
        update_sigma();
        if (!state_.allFinite()) throw NumericalError(model_.dump("non-finite draw", state_));
    }

private:
    void initialize() {
        for (const auto& t : model_.terms()) {
            if (t.pooling != Pooling::Hierarchical) continue;
            state_(static_cast<Eigen::Index>(t.mu)) = rng_.normal(0.0, 0.5);
            state_(static_cast<Eigen::Index>(t.scale)) = std::exp(rng_.normal(std::log(0.5), 0.5));
        }
        if (model_.has_hyper()) {
            state_(static_cast<Eigen::Index>(model_.hyper_m_index())) = rng_.normal(0.0, 0.5);
            state_(static_cast<Eigen::Index>(model_.hyper_s_index())) = std::exp(rng_.normal(std::log(0.5), 0.5));
        }
        if (auto s = model_.sigma_index()) state_(static_cast<Eigen::Index>(*s)) = std::exp(rng_.normal(0.0, 0.5));
    }

    // All regression coefficients jointly from their Gaussian conditional.
    void update_linear() {
        const auto p = static_cast<Eigen::Index>(model_.linear_count());
        const double s = model_.sigma(state_);
        const double inv_s2 = 1.0 / (s * s);
        const auto& pr = model_.spec().priors;
        Eigen::VectorXd prior_prec(p), prior_mean = Eigen::VectorXd::Zero(p);
        prior_prec(0) = 1.0 / (pr.intercept_scale * pr.intercept_scale);
        for (const auto& t : model_.terms()) {
            if (t.pooling == Pooling::Pooled) {
                prior_prec(static_cast<Eigen::Index>(t.coef)) = 1.0 / (pr.mu_l_scale * pr.mu_l_scale);
            } else {
                const double sl = state_(static_cast<Eigen::Index>(t.scale));
                const double mu = state_(static_cast<Eigen::Index>(t.mu));
                for (std::size_t f = 0; f < model_.fields().size(); ++f) {
                    const auto i = static_cast<Eigen::Index>(t.coef + f);
                    prior_prec(i) = 1.0 / (sl * sl);
                    prior_mean(i) = mu;
                }
            }
        }
        Eigen::MatrixXd prec = ztz_ * inv_s2;
        prec.diagonal() += prior_prec;
        const Eigen::VectorXd rhs = zty_ * inv_s2 + prior_prec.cwiseProduct(prior_mean);
        Eigen::LLT<Eigen::MatrixXd> llt(prec);
        if (llt.info() != Eigen::Success) throw NumericalError(model_.dump("coefficient precision not SPD", state_));
        const Eigen::VectorXd mean = llt.solve(rhs);
        Eigen::VectorXd z(p);
        for (Eigen::Index i = 0; i < p; ++i) z(i) = rng_.normal();
        // prec = L L^T, so L^{-T} z has covariance prec^{-1}.
        state_.head(p) = mean + llt.matrixU().solve(z);
    }

    void update_group_means() {
        const auto& pr = model_.spec().priors;
        const double F = static_cast<double>(model_.fields().size());
        for (const auto& t : model_.terms()) {
            if (t.pooling != Pooling::Hierarchical) continue;
            double prior_mean = 0.0, prior_sd = pr.mu_l_scale;
            if (t.hyper) {
                prior_mean = state_(static_cast<Eigen::Index>(model_.hyper_m_index()));
                prior_sd = state_(static_cast<Eigen::Index>(model_.hyper_s_index()));
            }
            const double sl = state_(static_cast<Eigen::Index>(t.scale));
            double sum = 0;
            for (std::size_t f = 0; f < model_.fields().size(); ++f) sum += state_(static_cast<Eigen::Index>(t.coef + f));
            const double prec = F / (sl * sl) + 1.0 / (prior_sd * prior_sd);
            const double mean = (sum / (sl * sl) + prior_mean / (prior_sd * prior_sd)) / prec;
            state_(static_cast<Eigen::Index>(t.mu)) = rng_.normal(mean, 1.0 / std::sqrt(prec));
        }
    }

    void update_group_scales() {
        const auto& pr = model_.spec().priors;
        const double F = static_cast<double>(model_.fields().size());
        for (const auto& t : model_.terms()) {
            if (t.pooling != Pooling::Hierarchical) continue;
            const double mu = state_(static_cast<Eigen::Index>(t.mu));
            double ss = 0;
            for (std::size_t f = 0; f < model_.fields().size(); ++f) {
                const double d = state_(static_cast<Eigen::Index>(t.coef + f)) - mu;
                ss += d * d;
            }
            const auto i = static_cast<Eigen::Index>(t.scale);
            state_(i) = std::exp(slice_sample(std::log(state_(i)), log_scale_density(F, ss, pr.sigma_l_scale), rng_));
        }
    }

    void update_hyper() {
        const auto mi = static_cast<Eigen::Index>(model_.hyper_m_index());
        const auto si = static_cast<Eigen::Index>(model_.hyper_s_index());
        double count = 0, sum = 0;
        for (const auto& t : model_.terms())
            if (t.hyper) {
                sum += state_(static_cast<Eigen::Index>(t.mu));
                count += 1;
            }
        const double s = state_(si);
        const double prec = count / (s * s) + 1.0;
        state_(mi) = rng_.normal(sum / (s * s) / prec, 1.0 / std::sqrt(prec));
        double ss = 0;
        for (const auto& t : model_.terms())
            if (t.hyper) {
                const double d = state_(static_cast<Eigen::Index>(t.mu)) - state_(mi);
                ss += d * d;
            }
        state_(si) = std::exp(slice_sample(std::log(s), log_scale_density(count, ss, 1.0), rng_));
    }

    void update_sigma() {
        auto idx = model_.sigma_index();
        if (!idx) return;
        const auto p = static_cast<Eigen::Index>(model_.linear_count());
        const Eigen::VectorXd theta = state_.head(p);
        const double ssr = std::max(0.0, yty_ - 2.0 * theta.dot(zty_) + theta.dot(ztz_ * theta));
        const auto i = static_cast<Eigen::Index>(*idx);
        state_(i) = std::exp(
            slice_sample(std::log(state_(i)), log_scale_density(n_, ssr, model_.spec().priors.sigma_scale), rng_));
    }

    const BoundModel& model_;
    Rng rng_;
    double n_;
    Eigen::MatrixXd ztz_;
    Eigen::VectorXd zty_;
    double yty_ = 0;
    Eigen::VectorXd state_;
};

}  // namespace detail

// Blocked Gibbs sampler: all regression coefficients jointly from their Gaussian
// conditional, group means from Normal conditionals, and every scale parameter
// by slice sampling on the log scale. Chain c is seeded with
// derive_seed(settings.seed, SeedStage::Chain, c), so output depends only on
// the master seed.
inline PosteriorSamples fit(const BoundModel& model, const RegressionDataset& ds, const McmcSettings& settings) {
    settings.validate();
    if (ds.rows() == 0) throw ConfigError("cannot fit an empty dataset");
    for (std::size_t f : ds.field_index)
        if (f >= model.fields().size()) throw FieldError("dataset field outside model");
    PosteriorSamples out(model.param_names(), settings);
    std::vector<std::exception_ptr> errors(settings.chains);

    auto run_chain = [&](std::size_t c) {
        try {
            detail::GibbsChain chain(model, ds, derive_seed(settings.seed, SeedStage::Chain, c));
            std::deque<Eigen::VectorXd> recent;
            for (std::size_t it = 0; it < settings.warmup + settings.iterations; ++it) {
                try {
                    chain.step();
                } catch (const NumericalError& e) {
                    std::ostringstream os;
                    os << "chain " << c << " aborted at iteration " << it << ": " << e.what();
                    for (const auto& r : recent) os << "\n  previous: " << model.dump("draw", r);
                    throw NumericalError(os.str());
                }
                recent.push_back(chain.state());
                if (recent.size() > 3) recent.pop_front();
                if (it < settings.warmup) continue;
                const std::size_t k = it - settings.warmup;
                for (std::size_t p = 0; p < model.param_count(); ++p)
                    out.at(c, k, p) = chain.state()(static_cast<Eigen::Index>(p));
            }
        } catch (...) {
            errors[c] = std::current_exception();
        }
    };

    if (settings.parallel && settings.chains > 1 && std::thread::hardware_concurrency() > 1) {
        std::vector<std::thread> threads;
        for (std::size_t c = 0; c < settings.chains; ++c) threads.emplace_back(run_chain, c);
        for (auto& t : threads) t.join();
    } else {
        for (std::size_t c = 0; c < settings.chains; ++c) run_chain(c);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

inline PosteriorSamples fit(const ModelSpec& spec, const RegressionDataset& ds, const McmcSettings& settings) {
    return fit(bind(spec, ds), ds, settings);
}

struct ParameterSummary {
    double mean = 0, sd = 0;
    double q025 = 0, q16 = 0, q84 = 0, q975 = 0;  // central 95% and 68% intervals
    double rhat = 1, ess = 0;
    double mcse() const { return ess > 0 ? sd / std::sqrt(ess) : std::numeric_limits<double>::infinity(); }
};

struct PosteriorSummary {
    std::vector<std::string> names;
    std::map<std::string, ParameterSummary> params;
    std::vector<std::string> warnings;

    const ParameterSummary& operator[](const std::string& name) const { return params.at(name); }
};

inline constexpr double kRhatWarnThreshold = 1.05;

inline PosteriorSummary summarize(const PosteriorSamples& post) {
    if (post.chains() < 2) throw ConfigError("summaries need at least 2 chains");
    if (post.iterations() == 0) throw ConfigError("no post-warmup draws");
    PosteriorSummary out;
    out.names = post.param_names();
    for (std::size_t p = 0; p < post.params(); ++p) {
        const auto chains = post.trace(p);
        std::vector<double> all;
        all.reserve(post.chains() * post.iterations());
        for (const auto& c : chains) all.insert(all.end(), c.begin(), c.end());
        ParameterSummary s;
        s.mean = detail::mean_of(all);
        s.sd = all.size() > 1 ? std::sqrt(detail::var_of(all, s.mean)) : 0.0;
        std::sort(all.begin(), all.end());
        s.q025 = quantile_sorted(all, 0.025);
        s.q16 = quantile_sorted(all, 0.16);
        s.q84 = quantile_sorted(all, 0.84);
        s.q975 = quantile_sorted(all, 0.975);
        s.rhat = split_rhat(chains);
        s.ess = effective_sample_size(chains);
        if (!(s.rhat <= kRhatWarnThreshold) && !std::isnan(s.rhat)) {
            std::ostringstream os;
            os << "R-hat " << s.rhat << " > " << kRhatWarnThreshold << " for " << post.param_names()[p];
            out.warnings.push_back(os.str());
        }
        out.params[post.param_names()[p]] = s;
    }
    return out;
}

inline nlohmann::ordered_json to_json(const PosteriorSummary& s) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& name : s.names) {
        const auto& p = s.params.at(name);
        j[name] = {{"mean", p.mean},     {"sd", p.sd},       {"q2.5", p.q025}, {"q16", p.q16},
                   {"q84", p.q84},       {"q97.5", p.q975},  {"rhat", p.rhat}, {"ess", p.ess}};
    }
    return j;
}

}  // namespace litfield

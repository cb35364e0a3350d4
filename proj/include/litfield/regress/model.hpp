#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "litfield/error.hpp"
#include "litfield/hash.hpp"
#include "litfield/regress/dataset.hpp"

namespace litfield {

enum class Pooling {
    Hierarchical,  // beta[l][f] ~ N(mu[l], sigma[l])
    Pooled,        // one beta[l] shared by all fields
    Dropped,       // beta[l] = 0
};

inline const char* to_string(Pooling p) {
    switch (p) {
        case Pooling::Hierarchical: return "hierarchical";
        case Pooling::Pooled: return "pooled";
        case Pooling::Dropped: return "dropped";
    }
    return "?";
}

inline Pooling pooling_from_string(const std::string& s) {
    if (s == "hierarchical") return Pooling::Hierarchical;
    if (s == "pooled") return Pooling::Pooled;
    if (s == "dropped") return Pooling::Dropped;
    throw ConfigError("unknown pooling '" + s + "'");
}

struct PriorConfig {
    double intercept_scale = 1.0;
    double mu_l_scale = 1.0;
    double sigma_l_scale = 1.0;
    double sigma_scale = 1.0;

    void validate() const {
        if (!(intercept_scale > 0 && mu_l_scale > 0 && sigma_l_scale > 0 && sigma_scale > 0))
            throw ConfigError("prior scales must be positive");
    }
    friend bool operator==(const PriorConfig&, const PriorConfig&) = default;
};

struct PredictorSpec {
    std::string name;
    Pooling pooling = Pooling::Hierarchical;
    bool hyperprior_on_mu = false;  // mu[l] ~ N(m, s) shared with other flagged predictors

    friend bool operator==(const PredictorSpec&, const PredictorSpec&) = default;
};

struct ModelSpec {
    std::string name;
    std::vector<PredictorSpec> predictors;
    PriorConfig priors;
    std::optional<double> fixed_sigma;  // known residual sd (analytic special case)

    void validate() const {
        priors.validate();
        for (const auto& p : predictors)
            if (p.hyperprior_on_mu && p.pooling != Pooling::Hierarchical)
                throw ConfigError("hyperprior flag on non-hierarchical predictor '" + p.name + "'");
        if (fixed_sigma && !(*fixed_sigma > 0)) throw ConfigError("fixed_sigma must be positive");
    }

    // Structural equality: same pooling per predictor, ignoring name.
    bool same_structure(const ModelSpec& other) const {
        auto active = [](const ModelSpec& s) {
            std::map<std::string, std::pair<Pooling, bool>> m;
            for (const auto& p : s.predictors)
                if (p.pooling != Pooling::Dropped) m[p.name] = {p.pooling, p.hyperprior_on_mu};
            return m;
        };
        return active(*this) == active(other) && priors == other.priors && fixed_sigma == other.fixed_sigma;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["name"] = name;
        j["predictors"] = nlohmann::ordered_json::array();
        for (const auto& p : predictors)
            j["predictors"].push_back({{"name", p.name}, {"pooling", to_string(p.pooling)},
                                       {"hyperprior_on_mu", p.hyperprior_on_mu}});
        j["priors"] = {{"intercept_scale", priors.intercept_scale},
                       {"mu_l_scale", priors.mu_l_scale},
                       {"sigma_l_scale", priors.sigma_l_scale},
                       {"sigma_scale", priors.sigma_scale}};
        if (fixed_sigma) j["fixed_sigma"] = *fixed_sigma;
        return j;
    }

    static ModelSpec from_json(const nlohmann::json& j) {
        try {
            ModelSpec s;
            s.name = j.at("name").get<std::string>();
            for (const auto& p : j.at("predictors"))
                s.predictors.push_back({p.at("name").get<std::string>(),
                                        pooling_from_string(p.value("pooling", std::string("hierarchical"))),
                                        p.value("hyperprior_on_mu", false)});
            if (j.contains("priors")) {
                const auto& pr = j["priors"];
                s.priors.intercept_scale = pr.value("intercept_scale", 1.0);
                s.priors.mu_l_scale = pr.value("mu_l_scale", 1.0);
                s.priors.sigma_l_scale = pr.value("sigma_l_scale", 1.0);
                s.priors.sigma_scale = pr.value("sigma_scale", 1.0);
            }
            if (j.contains("fixed_sigma")) s.fixed_sigma = j["fixed_sigma"].get<double>();
            s.validate();
            return s;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("bad model manifest: ") + e.what());
        }
    }

    // Stamp identifying this manifest in every output.
    std::string hash() const { return sha256_hex(to_json().dump()).substr(0, 16); }
};

namespace detail {
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // ln sqrt(2 pi)

inline double normal_logpdf(double x, double mean, double sd) {
    const double z = (x - mean) / sd;
    return -kLogSqrt2Pi - std::log(sd) - 0.5 * z * z;
}

inline double half_normal_logpdf(double x, double scale) {
    if (!(x > 0)) return -std::numeric_limits<double>::infinity();
    return std::numbers::ln2 + normal_logpdf(x, 0.0, scale);
}
}  // namespace detail

// A ModelSpec bound to dataset columns and a field count. Parameters live in one
// flat vector; this class owns the layout.
//
// Layout: gamma | coefficients (pooled: 1, hierarchical: one per field) |
//         mu[l], sigma[l] per hierarchical predictor | m, s when any predictor
//         carries the hyperprior | sigma (absent when fixed).
class BoundModel {
public:
    struct Term {
        std::string name;
        std::size_t column = 0;
        Pooling pooling = Pooling::Hierarchical;
        bool hyper = false;
        std::size_t coef = 0;   // first coefficient index
        std::size_t mu = 0;     // hierarchical only
        std::size_t scale = 0;  // hierarchical only
    };

    BoundModel(ModelSpec spec, const std::vector<std::string>& columns, std::vector<std::string> fields)
        : spec_(std::move(spec)), fields_(std::move(fields)) {
        spec_.validate();
        const std::size_t F = fields_.size();
        if (F == 0) throw FieldError("model needs at least one field");
        names_.push_back("gamma");
        for (const auto& p : spec_.predictors) {
            if (p.pooling == Pooling::Dropped) continue;
            Term t;
            t.name = p.name;
            t.pooling = p.pooling;
            t.hyper = p.hyperprior_on_mu;
            t.column = columns.size();
            for (std::size_t c = 0; c < columns.size(); ++c)
                if (columns[c] == p.name) t.column = c;
            if (t.column == columns.size()) throw ConfigError("model predictor '" + p.name + "' not in dataset");
            t.coef = names_.size();
            if (p.pooling == Pooling::Pooled) {
                names_.push_back("beta[" + p.name + "]");
            } else {
                for (const auto& f : fields_) names_.push_back("beta[" + p.name + "][" + f + "]");
            }
            terms_.push_back(std::move(t));
        }
        n_linear_ = names_.size();
        for (auto& t : terms_) {
            if (t.pooling != Pooling::Hierarchical) continue;
            t.mu = names_.size();
            names_.push_back("mu[" + t.name + "]");
            t.scale = names_.size();
            names_.push_back("sigma[" + t.name + "]");
            if (t.hyper) has_hyper_ = true;
        }
        if (has_hyper_) {
            hyper_m_ = names_.size();
            names_.push_back("hyper_mu_mean");
            hyper_s_ = names_.size();
            names_.push_back("hyper_mu_sd");
        }
        if (!spec_.fixed_sigma) {
            sigma_ = names_.size();
            names_.push_back("sigma");
        }
    }

    const ModelSpec& spec() const { return spec_; }
    const std::vector<std::string>& fields() const { return fields_; }
    const std::vector<Term>& terms() const { return terms_; }
    const std::vector<std::string>& param_names() const { return names_; }
    std::size_t param_count() const { return names_.size(); }
    std::size_t linear_count() const { return n_linear_; }
    bool has_hyper() const { return has_hyper_; }
    std::size_t hyper_m_index() const { return hyper_m_; }
    std::size_t hyper_s_index() const { return hyper_s_; }
    std::optional<std::size_t> sigma_index() const {
        if (spec_.fixed_sigma) return std::nullopt;
        return sigma_;
    }
    double sigma(const Eigen::VectorXd& p) const { return spec_.fixed_sigma ? *spec_.fixed_sigma : p(sigma_); }

    std::size_t coef_index(const Term& t, std::size_t field) const {
        return t.pooling == Pooling::Pooled ? t.coef : t.coef + field;
    }

    // gamma + sum_l beta[l][field] * x[l].
    double predict_mu(const Eigen::VectorXd& p, std::span<const double> x, std::size_t field) const {
        if (field >= fields_.size()) throw FieldError("field index " + std::to_string(field) + " out of range");
        if (static_cast<std::size_t>(p.size()) != names_.size()) throw DimensionError("parameter vector size");
        double mu = p(0);
        for (const auto& t : terms_) mu += p(static_cast<Eigen::Index>(coef_index(t, field))) * x[t.column];
        return mu;
    }

    double predict_mu(const Eigen::VectorXd& p, const RegressionDataset& ds, std::size_t row) const {
        const auto r = static_cast<Eigen::Index>(row);
        double mu = p(0);
        const std::size_t f = ds.field_index[row];
        if (f >= fields_.size()) throw FieldError("field index out of range");
        for (const auto& t : terms_)
            mu += p(static_cast<Eigen::Index>(coef_index(t, f))) * ds.x(r, static_cast<Eigen::Index>(t.column));
        return mu;
    }

    double log_likelihood(const Eigen::VectorXd& p, const RegressionDataset& ds) const {
        const double s = sigma(p);
        double ll = 0;
        for (std::size_t i = 0; i < ds.rows(); ++i)
            ll += detail::normal_logpdf(ds.y(static_cast<Eigen::Index>(i)), predict_mu(p, ds, i), s);
        return ll;
    }

    double log_prior(const Eigen::VectorXd& p) const {
        const auto& pr = spec_.priors;
        double lp = detail::normal_logpdf(p(0), 0.0, pr.intercept_scale);
        for (const auto& t : terms_) {
            if (t.pooling == Pooling::Pooled) {
                lp += detail::normal_logpdf(p(t.coef), 0.0, pr.mu_l_scale);
                continue;
            }
            const double mu = p(t.mu), sl = p(t.scale);
            for (std::size_t f = 0; f < fields_.size(); ++f)
                lp += detail::normal_logpdf(p(t.coef + f), mu, sl);
            lp += t.hyper ? detail::normal_logpdf(mu, p(hyper_m_), p(hyper_s_))
                          : detail::normal_logpdf(mu, 0.0, pr.mu_l_scale);
            lp += detail::half_normal_logpdf(sl, pr.sigma_l_scale);
        }
        if (has_hyper_) {
            lp += detail::normal_logpdf(p(hyper_m_), 0.0, 1.0);
            lp += detail::half_normal_logpdf(p(hyper_s_), 1.0);
        }
        if (!spec_.fixed_sigma) lp += detail::half_normal_logpdf(p(sigma_), pr.sigma_scale);
        return lp;
    }

    double log_posterior(const Eigen::VectorXd& p, const RegressionDataset& ds) const {
        for (const auto& t : terms_)
            if (t.pooling == Pooling::Hierarchical && !(p(t.scale) > 0)) throw NumericalError(dump("sigma[" + t.name + "] <= 0", p));
        if (!(sigma(p) > 0)) throw NumericalError(dump("sigma <= 0", p));
        const double v = log_likelihood(p, ds) + log_prior(p);
        if (!std::isfinite(v)) throw NumericalError(dump("non-finite log posterior", p));
        return v;
    }

    std::string dump(const std::string& what, const Eigen::VectorXd& p) const {
        std::ostringstream os;
        os << what << ":";
        for (std::size_t i = 0; i < names_.size() && i < static_cast<std::size_t>(p.size()); ++i)
            os << ' ' << names_[i] << '=' << p(static_cast<Eigen::Index>(i));
        return os.str();
    }

private:
    ModelSpec spec_;
    std::vector<std::string> fields_;
    std::vector<Term> terms_;
    std::vector<std::string> names_;
    std::size_t n_linear_ = 0;
    bool has_hyper_ = false;
    std::size_t hyper_m_ = 0, hyper_s_ = 0, sigma_ = 0;
};

inline BoundModel bind(const ModelSpec& spec, const RegressionDataset& ds) {
    return BoundModel(spec, ds.predictor_names, ds.fields);
}

}  // namespace litfield

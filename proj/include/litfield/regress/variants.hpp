#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "litfield/regress/model.hpp"

namespace litfield {

enum class AxisOption { Hierarchical, HierarchicalHyper, Pooled, Dropped };

inline const char* to_string(AxisOption o) {
    switch (o) {
        case AxisOption::Hierarchical: return "hierarchical";
        case AxisOption::HierarchicalHyper: return "hierarchical+hyper";
        case AxisOption::Pooled: return "pooled";
        case AxisOption::Dropped: return "dropped";
    }
    return "?";
}

inline AxisOption axis_option_from_string(const std::string& s) {
    if (s == "hierarchical") return AxisOption::Hierarchical;
    if (s == "hierarchical+hyper") return AxisOption::HierarchicalHyper;
    if (s == "pooled") return AxisOption::Pooled;
    if (s == "dropped") return AxisOption::Dropped;
    throw ConfigError("unknown axis option '" + s + "'");
}

// One dimension of the variant grammar: a predictor group and the treatments
// it may receive. Every option applies to all predictors of the group.
struct VariantAxis {
    std::string name;
    std::vector<std::string> predictors;
    std::vector<AxisOption> options;
};

inline void apply_option(ModelSpec& spec, const VariantAxis& axis, AxisOption opt) {
    for (auto& p : spec.predictors) {
        if (std::find(axis.predictors.begin(), axis.predictors.end(), p.name) == axis.predictors.end()) continue;
        p.hyperprior_on_mu = opt == AxisOption::HierarchicalHyper;
        p.pooling = opt == AxisOption::Pooled    ? Pooling::Pooled
                    : opt == AxisOption::Dropped ? Pooling::Dropped
                                                 : Pooling::Hierarchical;
    }
}

// Cartesian product of the axes' options applied to `base`, last axis varying
// fastest. With no axes the result is {base}.
inline std::vector<ModelSpec> enumerate_variants(const ModelSpec& base, const std::vector<VariantAxis>& axes) {
    std::vector<ModelSpec> out{base};
    for (const auto& axis : axes) {
        if (axis.options.empty()) throw ConfigError("axis '" + axis.name + "' has no options");
        std::vector<ModelSpec> next;
        next.reserve(out.size() * axis.options.size());
        for (const auto& spec : out) {
            for (auto opt : axis.options) {
                ModelSpec v = spec;
                apply_option(v, axis, opt);
                v.name = (spec.name == base.name ? std::string() : spec.name + ",") + axis.name + "=" + to_string(opt);
                next.push_back(std::move(v));
            }
        }
        out = std::move(next);
    }
    return out;
}

// Every predictor a metric table can feed, hierarchical by default.
inline ModelSpec full_model(const std::vector<std::string>& embedders, PriorConfig priors = {}) {
    ModelSpec s;
    s.name = "full";
    s.priors = priors;
    s.predictors.push_back({"n_ref"});
    s.predictors.push_back({"age"});
    for (const auto& e : embedders) s.predictors.push_back({"rho_" + e});
    for (const auto& e : embedders) s.predictors.push_back({"alpha_" + e});
    return s;
}

// Three groups (covariates n_ref/age, densities, asymmetries), each
// hierarchical, pooled or dropped: 27 variants. `density_hyperprior` adds the
// shared-mean layer as a fourth density option (36 variants).
inline std::vector<VariantAxis> standard_axes(const std::vector<std::string>& embedders,
                                              bool density_hyperprior = false) {
    VariantAxis cov{"covariates", {"n_ref", "age"},
                    {AxisOption::Hierarchical, AxisOption::Pooled, AxisOption::Dropped}};
    VariantAxis rho{"rho", {}, {AxisOption::Hierarchical, AxisOption::Pooled, AxisOption::Dropped}};
    VariantAxis alpha{"alpha", {}, {AxisOption::Hierarchical, AxisOption::Pooled, AxisOption::Dropped}};
    for (const auto& e : embedders) {
        rho.predictors.push_back("rho_" + e);
        alpha.predictors.push_back("alpha_" + e);
    }
    if (density_hyperprior) rho.options.insert(rho.options.begin() + 1, AxisOption::HierarchicalHyper);
    return {cov, rho, alpha};
}

struct BenchmarkModel {
    std::string key;    // file-safe name
    std::string label;  // column head in the comparison table
    ModelSpec spec;
};

// The five benchmark models of the model-comparison table, in column order.
inline std::vector<BenchmarkModel> benchmark_models(const std::vector<std::string>& embedders, PriorConfig priors = {}) {
    const ModelSpec base = full_model(embedders, priors);
    const auto axes = standard_axes(embedders);
    auto make = [&](std::string key, std::string label, AxisOption cov, AxisOption rho, AxisOption alpha) {
        ModelSpec s = base;
        apply_option(s, axes[0], cov);
        apply_option(s, axes[1], rho);
        apply_option(s, axes[2], alpha);
        s.name = key;
        return BenchmarkModel{std::move(key), std::move(label), std::move(s)};
    };
    using O = AxisOption;
    return {
        make("base_mean", "Base / Mean", O::Dropped, O::Dropped, O::Dropped),
        make("per_field_nref_t", "Per-field (n_ref, t)", O::Hierarchical, O::Dropped, O::Dropped),
        make("per_field_rho_nref_t", "Per-field, per-model (rho, n_ref, t)", O::Hierarchical, O::Hierarchical,
             O::Dropped),
        make("per_field_alpha_nref_t", "Per-field, per-model (alpha, n_ref, t)", O::Hierarchical, O::Dropped,
             O::Hierarchical),
        make("per_field_rho_alpha_nref_t", "Per-field, per-model (rho, alpha, n_ref, t)", O::Hierarchical,
             O::Hierarchical, O::Hierarchical),
    };
}

}  // namespace litfield

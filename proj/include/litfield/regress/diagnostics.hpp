#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace litfield {

namespace detail {

inline double mean_of(std::span<const double> v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double var_of(std::span<const double> v, double mean) {
    double s = 0;
    for (double x : v) s += (x - mean) * (x - mean);
    return s / static_cast<double>(v.size() - 1);
}

// Splits every chain into two halves (dropping a middle draw when odd).
inline std::vector<std::vector<double>> split_halves(const std::vector<std::vector<double>>& chains) {
    std::vector<std::vector<double>> out;
    for (const auto& c : chains) {
        const std::size_t half = c.size() / 2;
        out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
        out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
    }
    return out;
}

}  // namespace detail

// Potential scale reduction on split chains (Gelman-Rubin with each chain cut
// in half). Constant draws give 1.
inline double split_rhat(const std::vector<std::vector<double>>& chains) {
    auto split = detail::split_halves(chains);
    const std::size_t m = split.size();
    const std::size_t n = split.empty() ? 0 : split.front().size();
    if (m < 2 || n < 2) return std::numeric_limits<double>::quiet_NaN();
    std::vector<double> means(m), vars(m);
    for (std::size_t j = 0; j < m; ++j) {
        means[j] = detail::mean_of(split[j]);
        vars[j] = detail::var_of(split[j], means[j]);
    }
    const double grand = detail::mean_of(means);
    double b = 0;
    for (double mj : means) b += (mj - grand) * (mj - grand);
    b *= static_cast<double>(n) / static_cast<double>(m - 1);
    const double w = detail::mean_of(vars);
    if (w <= 0) return b <= 0 ? 1.0 : std::numeric_limits<double>::infinity();
    const double var_plus = (static_cast<double>(n) - 1) / static_cast<double>(n) * w + b / static_cast<double>(n);
    return std::sqrt(var_plus / w);
}

// Multi-chain effective sample size: autocorrelations combined across chains,
// truncated by Geyer's initial monotone positive-pair sequence.
inline double effective_sample_size(const std::vector<std::vector<double>>& chains) {
    const std::size_t m = chains.size();
    if (m == 0 || chains.front().size() < 4) return std::numeric_limits<double>::quiet_NaN();
    const std::size_t n = chains.front().size();
    std::vector<double> means(m), vars(m);
    for (std::size_t j = 0; j < m; ++j) {
        means[j] = detail::mean_of(chains[j]);
        vars[j] = detail::var_of(chains[j], means[j]);
    }
    const double w = detail::mean_of(vars);
    const double total = static_cast<double>(m * n);
    if (w <= 0) return total;
    double b = 0;
    const double grand = detail::mean_of(means);
    for (double mj : means) b += (mj - grand) * (mj - grand);
    b = m > 1 ? b * static_cast<double>(n) / static_cast<double>(m - 1) : 0.0;
    const double var_plus = (static_cast<double>(n) - 1) / static_cast<double>(n) * w + b / static_cast<double>(n);

    // Biased autocovariance of each chain at lag t, averaged over chains.
    auto mean_acov = [&](std::size_t t) {
        double s = 0;
        for (std::size_t j = 0; j < m; ++j) {
            double a = 0;
            const auto& c = chains[j];
            for (std::size_t i = 0; i + t < n; ++i) a += (c[i] - means[j]) * (c[i + t] - means[j]);
            s += a / static_cast<double>(n);
        }
        return s / static_cast<double>(m);
    };
    auto rho = [&](std::size_t t) { return 1.0 - (w - mean_acov(t)) / var_plus; };

    double tau = -1.0;
    double prev_pair = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t + 1 < n; t += 2) {
        double pair = rho(t) + rho(t + 1);
        if (pair <= 0) break;
        pair = std::min(pair, prev_pair);
        prev_pair = pair;
        tau += 2.0 * pair;
    }
    tau = std::max(tau, 1.0 / std::log10(total));
    return total / tau;
}

// Linear-interpolation quantile of sorted data (R type 7).
inline double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double h = (static_cast<double>(sorted.size()) - 1) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace litfield

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "litfield/embed.hpp"
#include "litfield/error.hpp"
#include "litfield/random.hpp"

namespace litfield {

struct LogisticOptions {
    double lambda = 1.0;  // L2 penalty on weights (not biases)
    std::size_t max_iterations = 500;
    double tolerance = 1e-6;  // on the gradient norm
};

// Multinomial logistic regression trained by full-batch gradient descent with
// Armijo backtracking. Features are z-scored with training statistics.
class LogisticClassifier {
public:
    void train(const Eigen::MatrixXd& x, const std::vector<int>& labels, int classes, const LogisticOptions& opt = {}) {
        if (x.rows() != static_cast<Eigen::Index>(labels.size())) throw DimensionError("label count");
        if (std::set<int>(labels.begin(), labels.end()).size() < 2)
            throw DegenerateLabels("training labels contain a single class");
        classes_ = classes;
        mean_ = x.colwise().mean();
        scale_ = ((x.rowwise() - mean_).array().square().colwise().sum() / static_cast<double>(x.rows())).sqrt();
        for (Eigen::Index j = 0; j < scale_.size(); ++j)
            if (!(scale_(j) > 1e-12)) scale_(j) = 1.0;
        const Eigen::MatrixXd z = features(x);
        const auto n = static_cast<double>(x.rows());
        Eigen::MatrixXd y = Eigen::MatrixXd::Zero(x.rows(), classes);
        for (std::size_t i = 0; i < labels.size(); ++i) y(static_cast<Eigen::Index>(i), labels[i]) = 1.0;

        w_ = Eigen::MatrixXd::Zero(z.cols(), classes);
        auto objective = [&](const Eigen::MatrixXd& w, Eigen::MatrixXd* grad) {
            Eigen::MatrixXd s = z * w;
            double loss = 0;
            for (Eigen::Index i = 0; i < s.rows(); ++i) {
                const double mx = s.row(i).maxCoeff();
                s.row(i).array() -= mx;
                const double lse = std::log(s.row(i).array().exp().sum());
                loss -= (s.row(i).array() * y.row(i).array()).sum() - lse;
                if (grad) s.row(i) = (s.row(i).array() - lse).exp().matrix();
            }
            Eigen::MatrixXd wr = w;
            wr.row(wr.rows() - 1).setZero();  // bias row is unpenalized
            loss = loss / n + 0.5 * opt.lambda / n * wr.squaredNorm();
            if (grad) *grad = z.transpose() * (s - y) / n + opt.lambda / n * wr;
            return loss;
        };

        Eigen::MatrixXd g;
        double f = objective(w_, &g);
        double step = 1.0;
        for (std::size_t it = 0; it < opt.max_iterations; ++it) {
            const double gn2 = g.squaredNorm();
            if (std::sqrt(gn2) < opt.tolerance) break;
            step = std::min(step * 2.0, 1e4);
            Eigen::MatrixXd cand;
            double fc;
            for (;;) {
                cand = w_ - step * g;
                fc = objective(cand, nullptr);
                if (fc <= f - 0.5 * step * gn2 || step < 1e-12) break;
                step *= 0.5;
            }
            w_ = std::move(cand);
            f = objective(w_, &g);
        }
    }

    std::vector<int> predict(const Eigen::MatrixXd& x) const {
        const Eigen::MatrixXd s = features(x) * w_;
        std::vector<int> out(static_cast<std::size_t>(x.rows()));
        for (Eigen::Index i = 0; i < s.rows(); ++i) {
            Eigen::Index arg;
            s.row(i).maxCoeff(&arg);
            out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
        }
        return out;
    }

private:
    Eigen::MatrixXd features(const Eigen::MatrixXd& x) const {
        Eigen::MatrixXd z(x.rows(), x.cols() + 1);
        z.leftCols(x.cols()) = (x.rowwise() - mean_).array().rowwise() / scale_.array();
        z.col(x.cols()).setOnes();
        return z;
    }

    int classes_ = 0;
    Eigen::RowVectorXd mean_, scale_;
    Eigen::MatrixXd w_;
};

struct ClassificationResult {
    double accuracy = 0;
    std::size_t train_rows = 0, test_rows = 0;
    std::size_t classes = 0;
};

// Trains on a random (1 - test_fraction) share of rows and reports accuracy on
// the rest. `labels` is aligned with set rows.
inline ClassificationResult classify_accuracy(const EmbeddingSet& set, const std::vector<std::string>& labels,
                                              std::uint64_t seed, double test_fraction = 0.2,
                                              const LogisticOptions& opt = {}) {
    if (labels.size() != set.size()) throw DimensionError("labels are not aligned with embedding rows");
    std::map<std::string, int> classes;
    for (const auto& l : labels) classes.emplace(l, 0);
    if (classes.size() < 2) throw DegenerateLabels("need at least two distinct labels");
    int next = 0;
    for (auto& [_, id] : classes) id = next++;

    std::vector<std::size_t> rows(set.size());
    std::iota(rows.begin(), rows.end(), 0);
    Rng rng(derive_seed(seed, SeedStage::Classify));
    rng.shuffle(std::span<std::size_t>(rows));
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(rows.size())));
    if (n_test == 0 || n_test >= rows.size()) throw ConfigError("split leaves an empty partition");

    auto gather = [&](std::size_t lo, std::size_t hi, Eigen::MatrixXd& x, std::vector<int>& y) {
        x.resize(static_cast<Eigen::Index>(hi - lo), static_cast<Eigen::Index>(set.dim()));
        y.clear();
        for (std::size_t i = lo; i < hi; ++i) {
            auto r = set.row(rows[i]);
            for (std::size_t j = 0; j < r.size(); ++j)
                x(static_cast<Eigen::Index>(i - lo), static_cast<Eigen::Index>(j)) = r[j];
            y.push_back(classes.at(labels[rows[i]]));
        }
    };
    Eigen::MatrixXd xtr, xte;
    std::vector<int> ytr, yte;
    gather(0, n_test, xte, yte);
    gather(n_test, rows.size(), xtr, ytr);

    LogisticClassifier clf;
    clf.train(xtr, ytr, static_cast<int>(classes.size()), opt);
    const auto pred = clf.predict(xte);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == yte[i];
    return {static_cast<double>(hit) / static_cast<double>(pred.size()), ytr.size(), yte.size(), classes.size()};
}

}  // namespace litfield

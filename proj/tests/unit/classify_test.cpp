#include <random>

#include <gtest/gtest.h>

#include "litfield/classify.hpp"

using namespace litfield;

namespace {

struct Labeled {
    EmbeddingSet set;
    std::vector<std::string> labels;
};

// Gaussian blobs, one per class, centred `spread` apart along separate axes.
Labeled blobs(std::size_t classes, std::size_t per_class, std::size_t dim, double spread, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd;
    std::vector<std::string> ids, labels;
    std::vector<double> data;
    for (std::size_t c = 0; c < classes; ++c)
        for (std::size_t i = 0; i < per_class; ++i) {
            ids.push_back("c" + std::to_string(c) + "_" + std::to_string(i));
            labels.push_back("L" + std::to_string(c));
            for (std::size_t j = 0; j < dim; ++j) data.push_back(nd(gen) + (j == c % dim ? spread : 0.0));
        }
    return {EmbeddingSet("e", ids, dim, data), labels};
}

}  // namespace

TEST(Classify, SeparableClustersScorePerfectly) {
    auto b = blobs(3, 60, 4, 25.0, 1);
    auto r = classify_accuracy(b.set, b.labels, 7);
    EXPECT_EQ(r.accuracy, 1.0);
    EXPECT_EQ(r.classes, 3u);
    EXPECT_EQ(r.test_rows, 36u);
    EXPECT_EQ(r.train_rows, 144u);
}

TEST(Classify, ShuffledLabelsScoreAtChance) {
    auto b = blobs(9, 500, 9, 3.0, 2);
    std::mt19937_64 gen(3);
    std::shuffle(b.labels.begin(), b.labels.end(), gen);
    auto r = classify_accuracy(b.set, b.labels, 4);
    EXPECT_NEAR(r.accuracy, 1.0 / 9, 0.05);
}

TEST(Classify, OverlappingClustersBetweenChanceAndCeiling) {
    auto b = blobs(4, 150, 4, 1.5, 5);
    auto r = classify_accuracy(b.set, b.labels, 6);
    EXPECT_GT(r.accuracy, 0.4);
    EXPECT_LT(r.accuracy, 1.0);
}

TEST(Classify, SameSeedSameAccuracy) {
    auto b = blobs(4, 80, 6, 1.0, 8);
    EXPECT_EQ(classify_accuracy(b.set, b.labels, 9).accuracy, classify_accuracy(b.set, b.labels, 9).accuracy);
}

TEST(Classify, Errors) {
    auto b = blobs(2, 10, 3, 5.0, 1);
    std::vector<std::string> one(b.labels.size(), "only");
    EXPECT_THROW(classify_accuracy(b.set, one, 1), DegenerateLabels);
    auto short_labels = b.labels;
    short_labels.pop_back();
    EXPECT_THROW(classify_accuracy(b.set, short_labels, 1), DimensionError);
    EXPECT_THROW(classify_accuracy(b.set, b.labels, 1, 0.01), ConfigError);

    LogisticClassifier clf;
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 2);
    EXPECT_THROW(clf.train(x, {0, 0, 0, 0, 0}, 2), DegenerateLabels);
    EXPECT_THROW(clf.train(x, {0, 1}, 2), DimensionError);
}

TEST(LogisticClassifier, FeatureScaleDoesNotChangePredictions) {
    auto b = blobs(3, 50, 3, 2.0, 11);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(b.set.size()), 3);
    std::vector<int> y;
    for (std::size_t i = 0; i < b.set.size(); ++i) {
        for (std::size_t j = 0; j < 3; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = b.set.row(i)[j];
        y.push_back(b.labels[i].back() - '0');
    }
    LogisticClassifier a, c;
    a.train(x, y, 3);
    Eigen::MatrixXd scaled = x;
    scaled.col(1) *= 1000.0;
    scaled.col(2).array() += 50.0;
    c.train(scaled, y, 3);
    EXPECT_EQ(a.predict(x), c.predict(scaled));
}

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <sstream>
#include <unordered_map>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "litfield/embed.hpp"
#include "litfield/embed_io.hpp"
#include "test_util.hpp"

using namespace litfield;

namespace {

EmbeddingSet random_set(std::size_t n, std::size_t d, std::uint64_t seed, const std::string& tag = "rand") {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd;
    std::vector<std::string> ids;
    std::vector<double> data;
    for (std::size_t i = 0; i < n; ++i) {
        ids.push_back("id" + std::to_string(i));
        for (std::size_t j = 0; j < d; ++j) data.push_back(nd(gen));
    }
    return {tag, ids, d, data};
}

std::vector<std::string> random_abstracts(std::size_t n, std::uint64_t seed) {
    static const std::vector<std::string> words{"Graph", "neural", "quantum", "spin", "the", "of", "2019",
                                                "lattice", "model", "x86", "data", "Field", "field"};
    std::mt19937_64 gen(seed);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::string a;
        const auto len = 1 + gen() % 30;
        for (std::size_t w = 0; w < len; ++w) {
            if (!a.empty()) a += (gen() % 4 == 0) ? ", " : " ";
            a += words[gen() % words.size()];
        }
        out.push_back(a);
    }
    return out;
}

// Independent tokenizer for the count oracle.
std::vector<std::string> oracle_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text + " ") {
        if (std::isalnum(static_cast<unsigned char>(ch))) {
            cur += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        } else {
            if (!cur.empty() && cur.find_first_not_of("0123456789") != std::string::npos) out.push_back(cur);
            cur.clear();
        }
    }
    return out;
}

}  // namespace

TEST(Tokenize, LowercasesSplitsAndDropsDigits) {
    EXPECT_EQ(tokenize("The CAT-sat, on 42 mats in 2x2!"),
              (std::vector<std::string>{"the", "cat", "sat", "on", "mats", "in", "2x2"}));
    EXPECT_EQ(tokenize("café naïve"), (std::vector<std::string>{"café", "naïve"}));
    EXPECT_TRUE(tokenize("  ,, 123 ").empty());
}

TEST(Vocabulary, MinCountOne) {
    const std::vector<std::string> a{"the cat", "the dog"};
    EXPECT_EQ(build_vocabulary(a, 1).tokens, (std::vector<std::string>{"cat", "dog", "the"}));
}

TEST(Vocabulary, MinCountTwo) {
    const std::vector<std::string> a{"the cat", "the dog"};
    EXPECT_EQ(build_vocabulary(a, 2).tokens, (std::vector<std::string>{"the"}));
}

TEST(Vocabulary, EmptyCorpus) {
    const std::vector<std::string> a{"", "  ", "123"};
    EXPECT_THROW(build_vocabulary(a, 1), EmptyCorpus);
}

TEST(Vocabulary, CountsMatchHashMapOracle) {
    auto abstracts = random_abstracts(100, 3);
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& a : abstracts)
        for (const auto& t : oracle_tokens(a)) ++counts[t];
    for (std::size_t min_count : {1u, 5u, 40u, 200u}) {
        std::vector<std::string> expect;
        for (const auto& [t, n] : counts)
            if (n >= min_count) expect.push_back(t);
        std::sort(expect.begin(), expect.end());
        auto v = build_vocabulary(abstracts, min_count);
        EXPECT_EQ(v.tokens, expect) << "min_count " << min_count;
        EXPECT_TRUE(std::is_sorted(v.tokens.begin(), v.tokens.end()));
    }
}

TEST(EmbedBow, CountsAndOutOfVocabulary) {
    Vocabulary v{{"cat", "dog", "the"}, ""};
    const std::vector<std::string> a{"cat cat dog", "zebra"};
    auto e = embed_bow({"r1", "r2"}, a, v);
    ASSERT_EQ(e.dim(), 3u);
    EXPECT_EQ(std::vector<double>(e.row(0).begin(), e.row(0).end()), (std::vector<double>{2, 1, 0}));
    EXPECT_EQ(std::vector<double>(e.row(1).begin(), e.row(1).end()), (std::vector<double>{0, 0, 0}));
    EXPECT_FALSE(e.normalized());
    EXPECT_THROW(embed_bow({"r1"}, a, v), DimensionError);
}

TEST(EmbedBow, MatchesBruteForceCounts) {
    auto abstracts = random_abstracts(60, 9);
    auto v = build_vocabulary(abstracts, 2);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < abstracts.size(); ++i) ids.push_back("a" + std::to_string(i));
    auto e = embed_bow(ids, abstracts, v);
    for (std::size_t r = 0; r < abstracts.size(); ++r) {
        auto toks = oracle_tokens(abstracts[r]);
        for (std::size_t c = 0; c < v.size(); ++c) {
            const auto expect = std::count(toks.begin(), toks.end(), v.tokens[c]);
            EXPECT_EQ(e.row(r)[c], static_cast<double>(expect));
        }
    }
}

TEST(EmbedBow, WordOrderDoesNotMatter) {
    auto abstracts = random_abstracts(30, 21);
    auto v = build_vocabulary(abstracts, 1);
    std::mt19937_64 gen(5);
    for (const auto& a : abstracts) {
        auto toks = tokenize(a);
        std::shuffle(toks.begin(), toks.end(), gen);
        std::string shuffled;
        for (const auto& t : toks) shuffled += t + " ";
        const std::vector<std::string> pair{a, shuffled};
        auto e = embed_bow({"x", "y"}, pair, v);
        EXPECT_TRUE(std::equal(e.row(0).begin(), e.row(0).end(), e.row(1).begin()));
    }
}

TEST(Normalize, ThreeFourFive) {
    EmbeddingSet s("t", {"a"}, 2, {3, 4});
    auto n = normalize(s);
    EXPECT_DOUBLE_EQ(n.row(0)[0], 0.6);
    EXPECT_DOUBLE_EQ(n.row(0)[1], 0.8);
    EXPECT_TRUE(n.normalized());
}

TEST(Normalize, ZeroRowNamesId) {
    EmbeddingSet s("t", {"ok", "bad"}, 2, {1, 0, 0, 0});
    try {
        normalize(s);
        FAIL();
    } catch (const ZeroVector& e) {
        EXPECT_EQ(e.id(), "bad");
    }
    std::vector<std::string> dropped;
    auto kept = normalize_dropping_zero(s, &dropped);
    EXPECT_EQ(dropped, std::vector<std::string>{"bad"});
    EXPECT_EQ(kept.ids(), std::vector<std::string>{"ok"});
}

TEST(Normalize, UnitRowsAndIdempotent) {
    auto s = random_set(200, 17, 1);
    auto n = normalize(s);
    for (std::size_t i = 0; i < n.size(); ++i) EXPECT_NEAR(norm(n.row(i)), 1.0, 1e-6);
    auto nn = normalize(n);
    EXPECT_EQ(std::memcmp(n.data().data(), nn.data().data(), n.data().size() * sizeof(double)), 0);
}

TEST(Cosine, Examples) {
    const std::vector<double> x{1, 0}, y{0, 1}, z{1, 0, 0};
    EXPECT_EQ(cosine_similarity(x, y), 0.0);
    EXPECT_EQ(cosine_similarity(x, x), 1.0);
    EXPECT_THROW(cosine_similarity(x, z), DimensionError);
    const std::vector<double> big{2, 0};
    EXPECT_THROW(cosine_similarity(big, x), NotNormalized);
}

TEST(Cosine, MatchesSummationOracleAndIsSymmetric) {
    auto n = normalize(random_set(100, 32, 2));
    for (std::size_t i = 0; i + 1 < n.size(); ++i) {
        auto a = n.row(i), b = n.row(i + 1);
        long double s = 0;
        for (std::size_t j = 0; j < a.size(); ++j) s += static_cast<long double>(a[j]) * b[j];
        EXPECT_NEAR(cosine_similarity(a, b), static_cast<double>(s), 1e-12);
        EXPECT_EQ(cosine_similarity(a, b), cosine_similarity(b, a));
        EXPECT_EQ(cosine_similarity(a, a), std::min(1.0, dot(a, a)));
    }
}

TEST(Cosine, NearParallelNeverLeavesArccosDomain) {
    std::mt19937_64 gen(4);
    std::normal_distribution<double> nd;
    for (int t = 0; t < 2000; ++t) {
        std::vector<double> a(8), b(8);
        for (auto& v : a) v = nd(gen);
        const double eps = std::pow(10.0, -static_cast<double>(gen() % 16));
        for (std::size_t j = 0; j < 8; ++j) b[j] = a[j] + eps * nd(gen);
        EmbeddingSet s("t", {"a", "b"}, 8, [&] {
            std::vector<double> d(a);
            d.insert(d.end(), b.begin(), b.end());
            return d;
        }());
        auto n = normalize(s);
        const double theta = angle_between(n.row(0), n.row(1));
        EXPECT_FALSE(std::isnan(theta));
        EXPECT_GE(theta, 0.0);
        EXPECT_FALSE(std::isnan(angle_between(n.row(0), n.row(0))));
    }
}

TEST(ReduceSvd, ExactRankTwoReconstruction) {
    std::mt19937_64 gen(8);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd u(30, 2), w(2, 12);
    for (Eigen::Index i = 0; i < u.size(); ++i) u.data()[i] = nd(gen);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = nd(gen);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> x = u * w;
    std::vector<std::string> ids;
    for (int i = 0; i < 30; ++i) ids.push_back("r" + std::to_string(i));
    EmbeddingSet s("t", ids, 12, std::vector<double>(x.data(), x.data() + x.size()));
    auto red = truncated_svd(s, 2);
    Eigen::MatrixXd proj(30, 2);
    for (std::size_t i = 0; i < 30; ++i)
        for (std::size_t j = 0; j < 2; ++j) proj(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = red.reduced.row(i)[j];
    const Eigen::MatrixXd back = proj * red.components.transpose();
    EXPECT_LT((back - Eigen::MatrixXd(x)).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_NEAR(red.captured_variance, 1.0, 1e-12);
}

TEST(ReduceSvd, FullDimensionPreservesInnerProducts) {
    auto s = random_set(25, 10, 12);
    auto r = reduce_svd(s, 10);
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j) EXPECT_NEAR(dot(s.row(i), s.row(j)), dot(r.row(i), r.row(j)), 1e-8);
}

TEST(ReduceSvd, CapturedVarianceMatchesEigenOracle) {
    auto s = random_set(100, 50, 13);
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(s.data().data(), 100, 50);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(x.transpose() * x);
    Eigen::VectorXd ev = eig.eigenvalues().reverse();  // descending
    const double expect = ev.head(10).sum() / ev.sum();
    auto red = truncated_svd(s, 10);
    EXPECT_NEAR(red.captured_variance, expect, 1e-10);
    double rows_sq = 0;
    for (double v : red.reduced.data()) rows_sq += v * v;
    EXPECT_NEAR(rows_sq, ev.head(10).sum(), 1e-8 * ev.sum());
}

TEST(ReduceSvd, BadTargetDim) {
    auto s = random_set(5, 4, 1);
    EXPECT_THROW(reduce_svd(s, 0), ConfigError);
    EXPECT_THROW(reduce_svd(s, 5), ConfigError);
}

TEST(MatrixFile, ReadsDeclaredRows) {
    std::stringstream in(R"({"embedder_id":"ext","n":2,"d":3,"ids":["a","b"]})"
                         "\n1 2 3\n4.5 -1e-3 0\n");
    auto s = read_matrix(in);
    EXPECT_EQ(s.embedder_id(), "ext");
    EXPECT_EQ(s.ids(), (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(s.row(1)[0], 4.5);
    EXPECT_EQ(s.row(1)[1], -1e-3);
    EXPECT_FALSE(s.normalized());
}

TEST(MatrixFile, ShortRowIsFormatError) {
    std::stringstream in(R"({"embedder_id":"ext","n":2,"d":3,"ids":["a","b"]})"
                         "\n1 2 3\n4 5\n");
    EXPECT_THROW(read_matrix(in), FormatError);
    std::stringstream missing_row(R"({"embedder_id":"ext","n":2,"d":1,"ids":["a","b"]})"
                                  "\n1\n");
    EXPECT_THROW(read_matrix(missing_row), FormatError);
    std::stringstream dup(R"({"embedder_id":"ext","n":2,"d":1,"ids":["a","a"]})"
                          "\n1\n2\n");
    EXPECT_THROW(read_matrix(dup), DuplicateId);
}

TEST(MatrixFile, TextRoundTripIsBitIdentical) {
    auto s = random_set(40, 9, 77);
    std::stringstream buf;
    write_matrix(s, buf, MatrixEncoding::Text);
    auto back = read_matrix(buf);
    ASSERT_EQ(back.data().size(), s.data().size());
    EXPECT_EQ(std::memcmp(back.data().data(), s.data().data(), s.data().size() * sizeof(double)), 0);
    EXPECT_EQ(back.ids(), s.ids());
}

TEST(MatrixFile, BinaryRoundTripIsBitIdentical) {
    auto s = random_set(40, 9, 78);
    std::vector<double> as_float;
    for (double v : s.data()) as_float.push_back(static_cast<float>(v));
    EmbeddingSet f("bin", s.ids(), s.dim(), as_float);
    testutil::TempDir dir;
    write_matrix(f, dir / "m.emb", MatrixEncoding::Binary);
    auto back = import_external(dir / "m.emb", "renamed");
    EXPECT_EQ(back.embedder_id(), "renamed");
    EXPECT_EQ(std::memcmp(back.data().data(), f.data().data(), f.data().size() * sizeof(double)), 0);
    EXPECT_THROW(import_external(dir / "absent.emb", "x"), NotFound);
}

TEST(VocabularyFile, RoundTrip) {
    testutil::TempDir dir;
    Vocabulary v{{"alpha", "beta", "café"}, "f"};
    write_vocabulary(v, dir / "v.txt");
    EXPECT_EQ(read_vocabulary(dir / "v.txt").tokens, v.tokens);
    testutil::write_text(dir / "bad.txt", "b\na\n");
    EXPECT_THROW(read_vocabulary(dir / "bad.txt"), FormatError);
}

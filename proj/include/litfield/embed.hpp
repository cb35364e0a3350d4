#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "litfield/error.hpp"

namespace litfield {

// Id-aligned n x d matrix of document vectors, row-major.
class EmbeddingSet {
public:
    EmbeddingSet() = default;

    EmbeddingSet(std::string embedder_id, std::vector<std::string> ids, std::size_t dim, std::vector<double> data,
                 bool normalized = false)
        : embedder_id_(std::move(embedder_id)),
          ids_(std::move(ids)),
          dim_(dim),
          data_(std::move(data)),
          normalized_(normalized) {
        if (data_.size() != ids_.size() * dim_)
            throw FormatError("embedding data has " + std::to_string(data_.size()) + " values, expected " +
                              std::to_string(ids_.size()) + " x " + std::to_string(dim_));
        index_.reserve(ids_.size());
        for (std::size_t i = 0; i < ids_.size(); ++i)
            if (!index_.emplace(ids_[i], i).second) throw DuplicateId(ids_[i]);
    }

    const std::string& embedder_id() const { return embedder_id_; }
    const std::vector<std::string>& ids() const { return ids_; }
    std::size_t size() const { return ids_.size(); }
    std::size_t dim() const { return dim_; }
    bool normalized() const { return normalized_; }
    const std::vector<double>& data() const { return data_; }

    std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }

    std::optional<std::size_t> find(const std::string& id) const {
        auto it = index_.find(id);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }
    std::size_t index_of(const std::string& id) const {
        auto it = index_.find(id);
        if (it == index_.end()) throw NotFound("no embedding for '" + id + "' in " + embedder_id_);
        return it->second;
    }
    std::span<const double> row(const std::string& id) const { return row(index_of(id)); }

    // Rows restricted to `keep` (in the given order).
    EmbeddingSet subset(std::span<const std::string> keep) const {
        std::vector<double> out;
        out.reserve(keep.size() * dim_);
        for (const auto& id : keep) {
            auto r = row(id);
            out.insert(out.end(), r.begin(), r.end());
        }
        return {embedder_id_, std::vector<std::string>(keep.begin(), keep.end()), dim_, std::move(out), normalized_};
    }

    EmbeddingSet renamed(std::string embedder_id) const {
        EmbeddingSet out = *this;
        out.embedder_id_ = std::move(embedder_id);
        return out;
    }

private:
    std::string embedder_id_;
    std::vector<std::string> ids_;
    std::size_t dim_ = 0;
    std::vector<double> data_;
    bool normalized_ = false;
    std::unordered_map<std::string, std::size_t> index_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw DimensionError("dimension mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// Inner product of unit vectors, clamped to [-1, 1]. Overshoot past 1e-9 means
// the inputs were not normalized.
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    constexpr double slack = 1e-9;
    const double c = dot(a, b);
    if (!(c <= 1.0 + slack && c >= -1.0 - slack)) throw NotNormalized("inner product " + std::to_string(c));
    return std::clamp(c, -1.0, 1.0);
}

inline double angle_between(std::span<const double> a, std::span<const double> b) {
    return std::acos(cosine_similarity(a, b));
}

// ---- tokenization and bag of words --------------------------------------------

// Lowercase, split on runs of ASCII non-alphanumerics, drop all-digit tokens.
// Bytes >= 0x80 are kept as token characters so UTF-8 words stay whole.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    bool all_digits = true;
    auto flush = [&] {
        if (!cur.empty() && !all_digits) out.push_back(cur);
        cur.clear();
        all_digits = true;
    };
    for (unsigned char c : text) {
        if (c >= 0x80 || std::isalnum(c)) {
            if (!(c >= '0' && c <= '9')) all_digits = false;
            cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
        } else {
            flush();
        }
    }
    flush();
    return out;
}

struct Vocabulary {
    std::vector<std::string> tokens;  // sorted, unique
    std::string field_label;

    std::size_t size() const { return tokens.size(); }

    std::optional<std::uint32_t> column(std::string_view token) const {
        auto it = std::lower_bound(tokens.begin(), tokens.end(), token);
        if (it == tokens.end() || *it != token) return std::nullopt;
        return static_cast<std::uint32_t>(it - tokens.begin());
    }
};

inline Vocabulary build_vocabulary(std::span<const std::string> abstracts, std::size_t min_count = 5,
                                   std::string field_label = {}) {
    std::map<std::string, std::size_t> counts;
    for (const auto& a : abstracts)
        for (auto& t : tokenize(a)) ++counts[std::move(t)];
    if (counts.empty()) throw EmptyCorpus("no tokens in any abstract");
    Vocabulary v{{}, std::move(field_label)};
    for (auto& [tok, n] : counts)
        if (n >= min_count) v.tokens.push_back(tok);
    return v;
}

// Token counts per document, columns ascending.
struct SparseBow {
    std::size_t dim = 0;
    std::vector<std::vector<std::pair<std::uint32_t, double>>> rows;
};

inline SparseBow count_bow(std::span<const std::string> abstracts, const Vocabulary& vocab) {
    if (vocab.tokens.empty()) throw ConfigError("empty vocabulary");
    SparseBow out{vocab.size(), {}};
    out.rows.reserve(abstracts.size());
    for (const auto& a : abstracts) {
        std::map<std::uint32_t, double> row;
        for (const auto& t : tokenize(a))
            if (auto c = vocab.column(t)) row[*c] += 1.0;
        out.rows.emplace_back(row.begin(), row.end());
    }
    return out;
}

inline EmbeddingSet densify(const SparseBow& bow, std::string embedder_id, std::vector<std::string> ids) {
    if (ids.size() != bow.rows.size()) throw DimensionError("id count does not match BOW rows");
    std::vector<double> data(bow.rows.size() * bow.dim, 0.0);
    for (std::size_t r = 0; r < bow.rows.size(); ++r)
        for (auto [c, v] : bow.rows[r]) data[r * bow.dim + c] = v;
    return {std::move(embedder_id), std::move(ids), bow.dim, std::move(data), false};
}

// Unnormalized word-count embedding, one row per abstract.
inline EmbeddingSet embed_bow(std::vector<std::string> ids, std::span<const std::string> abstracts,
                              const Vocabulary& vocab, std::string embedder_id = "bow") {
    return densify(count_bow(abstracts, vocab), std::move(embedder_id), std::move(ids));
}

// ---- normalization -------------------------------------------------------------

// Rows scaled to unit length. Rows already within a few ulps of unit length are
// left untouched so that normalizing twice is a no-op.
inline EmbeddingSet normalize(const EmbeddingSet& set) {
    constexpr double zero_norm = 1e-12;
    constexpr double unit_slack = 4 * std::numeric_limits<double>::epsilon();
    std::vector<double> data = set.data();
    for (std::size_t i = 0; i < set.size(); ++i) {
        const double n = norm(set.row(i));
        if (!(n >= zero_norm)) throw ZeroVector(set.ids()[i]);
        if (std::abs(n - 1.0) <= unit_slack) continue;
        for (std::size_t j = 0; j < set.dim(); ++j) data[i * set.dim() + j] /= n;
    }
    return {set.embedder_id(), set.ids(), set.dim(), std::move(data), true};
}

// Like normalize(), but drops zero rows and reports their ids.
inline EmbeddingSet normalize_dropping_zero(const EmbeddingSet& set, std::vector<std::string>* dropped = nullptr) {
    std::vector<std::string> keep;
    for (std::size_t i = 0; i < set.size(); ++i) {
        if (norm(set.row(i)) >= 1e-12)
            keep.push_back(set.ids()[i]);
        else if (dropped)
            dropped->push_back(set.ids()[i]);
    }
    if (keep.size() == set.size()) return normalize(set);
    return normalize(set.subset(keep));
}

// ---- truncated SVD -------------------------------------------------------------

struct SvdReduction {
    EmbeddingSet reduced;                 // X V_k, unnormalized
    std::vector<double> singular_values;  // all of them, descending
    Eigen::MatrixXd components;           // d x k right singular vectors
    double captured_variance = 0.0;       // sum of top-k s^2 over sum of all s^2
};

// Projection onto the top `target_dim` right singular vectors of the raw
// (uncentered) matrix. Each component's sign is fixed so its largest-magnitude
// entry is positive.
inline SvdReduction truncated_svd(const EmbeddingSet& set, std::size_t target_dim) {
    if (target_dim < 1) throw ConfigError("target_dim must be >= 1");
    if (target_dim > std::min(set.size(), set.dim()))
        throw ConfigError("target_dim " + std::to_string(target_dim) + " exceeds min(n, d)");
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(
        set.data().data(), static_cast<Eigen::Index>(set.size()), static_cast<Eigen::Index>(set.dim()));
    Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
    const auto k = static_cast<Eigen::Index>(target_dim);
    Eigen::MatrixXd v = svd.matrixV().leftCols(k);
    for (Eigen::Index c = 0; c < k; ++c) {
        Eigen::Index arg;
        v.col(c).cwiseAbs().maxCoeff(&arg);
        if (v(arg, c) < 0) v.col(c) *= -1.0;
    }
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> proj = x * v;

    SvdReduction out;
    const auto& s = svd.singularValues();
    out.singular_values.assign(s.data(), s.data() + s.size());
    const double total = s.squaredNorm();
    out.captured_variance = total > 0 ? s.head(k).squaredNorm() / total : 0.0;
    out.components = std::move(v);
    out.reduced = EmbeddingSet(set.embedder_id() + "-svd" + std::to_string(target_dim), set.ids(), target_dim,
                               std::vector<double>(proj.data(), proj.data() + proj.size()), false);
    return out;
}

inline EmbeddingSet reduce_svd(const EmbeddingSet& set, std::size_t target_dim) {
    return truncated_svd(set, target_dim).reduced;
}

}  // namespace litfield

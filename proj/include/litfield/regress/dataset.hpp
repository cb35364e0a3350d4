#pragma once

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "litfield/error.hpp"
#include "litfield/metrics.hpp"

namespace litfield {

struct ColumnScale {
    double mean = 0;
    double sd = 1;
};

inline constexpr const char* kResponseColumn = "log_cpy";

// Standardized design rows. Column scales are per field and come from the
// training rows only; `x` and `y` hold every row (train and test).
struct RegressionDataset {
    std::vector<std::string> ids;
    std::vector<std::string> predictor_names;
    std::vector<std::string> fields;        // field id -> label
    std::vector<std::size_t> field_index;   // per row
    Eigen::MatrixXd x;                      // rows x predictors
    Eigen::VectorXd y;
    std::map<std::string, std::map<std::string, ColumnScale>> scales;  // field -> column -> scale

    std::size_t rows() const { return ids.size(); }
    std::size_t field_count() const { return fields.size(); }

    std::size_t field_id(const std::string& label) const {
        for (std::size_t i = 0; i < fields.size(); ++i)
            if (fields[i] == label) return i;
        throw FieldError("unknown field '" + label + "'");
    }

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < predictor_names.size(); ++i)
            if (predictor_names[i] == name) return i;
        throw ConfigError("unknown predictor '" + name + "'");
    }

    // Rows in `keep` order.
    RegressionDataset select(const std::vector<std::size_t>& keep) const {
        RegressionDataset out;
        out.predictor_names = predictor_names;
        out.fields = fields;
        out.scales = scales;
        out.x.resize(static_cast<Eigen::Index>(keep.size()), x.cols());
        out.y.resize(static_cast<Eigen::Index>(keep.size()));
        for (std::size_t i = 0; i < keep.size(); ++i) {
            const auto r = static_cast<Eigen::Index>(keep[i]);
            out.ids.push_back(ids[keep[i]]);
            out.field_index.push_back(field_index[keep[i]]);
            out.x.row(static_cast<Eigen::Index>(i)) = x.row(r);
            out.y(static_cast<Eigen::Index>(i)) = y(r);
        }
        return out;
    }

    RegressionDataset select_ids(const std::set<std::string>& keep) const {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < ids.size(); ++i)
            if (keep.count(ids[i])) rows.push_back(i);
        return select(rows);
    }

    // Maps a standardized value back to raw units.
    double unstandardize(double z, const std::string& field, const std::string& column) const {
        const auto& s = scales.at(field).at(column);
        return s.mean + s.sd * z;
    }
};

// Predictor columns available from a metric table, in canonical order:
// n_ref, age, rho_<embedder>..., alpha_<embedder>...
inline std::vector<std::string> metric_predictors(const MetricTable& t) {
    std::vector<std::string> out{"n_ref", "age"};
    for (const auto& e : t.embedders) out.push_back("rho_" + e);
    for (const auto& e : t.embedders) out.push_back("alpha_" + e);
    return out;
}

inline double raw_value(const MetricRecord& r, const std::string& column) {
    if (column == kResponseColumn) return r.log_cpy;
    if (column == "n_ref") return static_cast<double>(r.n_ref);
    if (column == "age") return r.age_years;
    if (column.rfind("rho_", 0) == 0) return r.rho.at(column.substr(4));
    if (column.rfind("alpha_", 0) == 0) return r.alpha.at(column.substr(6));
    throw ConfigError("unknown column '" + column + "'");
}

// Standardizes every predictor and the response within each field using the
// mean and sample sd of that field's training rows.
inline RegressionDataset standardize_by_field(const MetricTable& table, const std::set<std::string>& train_ids,
                                              std::vector<std::string> predictors = {}) {
    if (predictors.empty()) predictors = metric_predictors(table);
    RegressionDataset ds;
    ds.predictor_names = predictors;

    std::set<std::string> field_set;
    for (const auto& r : table.records) field_set.insert(r.field_label);
    ds.fields.assign(field_set.begin(), field_set.end());

    std::vector<std::string> columns = predictors;
    columns.push_back(kResponseColumn);
    for (const auto& field : ds.fields) {
        std::vector<const MetricRecord*> train;
        for (const auto& r : table.records)
            if (r.field_label == field && train_ids.count(r.id)) train.push_back(&r);
        if (train.size() < 2)
            throw DegenerateColumn(field, "<all>: field needs at least 2 training rows, has " +
                                              std::to_string(train.size()));
        for (const auto& col : columns) {
            double sum = 0;
            for (const auto* r : train) sum += raw_value(*r, col);
            const double mean = sum / static_cast<double>(train.size());
            double ss = 0;
            for (const auto* r : train) {
                const double d = raw_value(*r, col) - mean;
                ss += d * d;
            }
            const double sd = std::sqrt(ss / static_cast<double>(train.size() - 1));
            if (!(sd > 0) || !std::isfinite(sd)) throw DegenerateColumn(field, col);
            ds.scales[field][col] = {mean, sd};
        }
    }

    const auto n = static_cast<Eigen::Index>(table.records.size());
    ds.x.resize(n, static_cast<Eigen::Index>(predictors.size()));
    ds.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = table.records[static_cast<std::size_t>(i)];
        ds.ids.push_back(r.id);
        ds.field_index.push_back(ds.field_id(r.field_label));
        const auto& sc = ds.scales.at(r.field_label);
        for (std::size_t c = 0; c < predictors.size(); ++c) {
            const auto& s = sc.at(predictors[c]);
            ds.x(i, static_cast<Eigen::Index>(c)) = (raw_value(r, predictors[c]) - s.mean) / s.sd;
        }
        const auto& s = sc.at(kResponseColumn);
        ds.y(i) = (r.log_cpy - s.mean) / s.sd;
    }
    return ds;
}

}  // namespace litfield

#pragma once

#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "litfield/embed.hpp"
#include "litfield/error.hpp"

namespace litfield {

// Matrix file: a one-line JSON header {"embedder_id","n","d","ids"} followed by
// either n text lines of d space-separated values (17 significant digits) or
// n*d little-endian float32 values.
enum class MatrixEncoding { Auto, Text, Binary };

namespace detail {

inline std::string matrix_header(const EmbeddingSet& set) {
    nlohmann::ordered_json h;
    h["embedder_id"] = set.embedder_id();
    h["n"] = set.size();
    h["d"] = set.dim();
    h["ids"] = set.ids();
    return h.dump();
}

inline void put_le_float(std::ostream& out, float f) {
    auto bits = std::bit_cast<std::uint32_t>(f);
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
    out.write(b, 4);
}

inline float get_le_float(const unsigned char* p) {
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return std::bit_cast<float>(bits);
}

}  // namespace detail

inline void write_matrix(const EmbeddingSet& set, std::ostream& out, MatrixEncoding enc = MatrixEncoding::Text) {
    out << detail::matrix_header(set) << '\n';
    if (enc == MatrixEncoding::Binary) {
        for (double v : set.data()) detail::put_le_float(out, static_cast<float>(v));
        return;
    }
    char buf[32];
    for (std::size_t i = 0; i < set.size(); ++i) {
        auto r = set.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) {
            int len = std::snprintf(buf, sizeof buf, "%.17g", r[j]);
            if (j) out.put(' ');
            out.write(buf, len);
        }
        out.put('\n');
    }
}

inline void write_matrix(const EmbeddingSet& set, const std::filesystem::path& path,
                         MatrixEncoding enc = MatrixEncoding::Text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    write_matrix(set, out, enc);
}

// Reads a matrix file. The result is not marked normalized; `embedder_id`
// overrides the header's tag when non-empty.
inline EmbeddingSet read_matrix(std::istream& in, const std::string& embedder_id = {},
                                MatrixEncoding enc = MatrixEncoding::Auto) {
    std::string header_line;
    if (!std::getline(in, header_line)) throw FormatError("empty matrix file");
    nlohmann::json h;
    std::size_t n = 0, d = 0;
    std::vector<std::string> ids;
    std::string tag;
    try {
        h = nlohmann::json::parse(header_line);
        tag = h.at("embedder_id").get<std::string>();
        n = h.at("n").get<std::size_t>();
        d = h.at("d").get<std::size_t>();
        ids = h.at("ids").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad matrix header: ") + e.what());
    }
    if (ids.size() != n) throw FormatError("header declares n=" + std::to_string(n) + " but lists " +
                                           std::to_string(ids.size()) + " ids");
    {
        std::vector<std::string> sorted = ids;
        std::sort(sorted.begin(), sorted.end());
        if (auto it = std::adjacent_find(sorted.begin(), sorted.end()); it != sorted.end()) throw DuplicateId(*it);
    }

    std::string rest((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (enc == MatrixEncoding::Auto) {
        const bool printable = std::all_of(rest.begin(), rest.end(), [](unsigned char c) {
            return c == '\n' || c == '\r' || c == ' ' || c == '\t' || (c >= 0x21 && c < 0x7F);
        });
        enc = printable ? MatrixEncoding::Text : MatrixEncoding::Binary;
    }

    std::vector<double> data;
    data.reserve(n * d);
    if (enc == MatrixEncoding::Binary) {
        if (rest.size() != n * d * 4)
            throw FormatError("binary payload has " + std::to_string(rest.size()) + " bytes, expected " +
                              std::to_string(n * d * 4));
        const auto* p = reinterpret_cast<const unsigned char*>(rest.data());
        for (std::size_t i = 0; i < n * d; ++i) data.push_back(detail::get_le_float(p + 4 * i));
    } else {
        std::size_t row = 0;
        std::size_t pos = 0;
        while (pos < rest.size()) {
            std::size_t eol = rest.find('\n', pos);
            if (eol == std::string::npos) eol = rest.size();
            std::string_view line(rest.data() + pos, eol - pos);
            pos = eol + 1;
            if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
            if (line.empty()) continue;
            if (row == n) throw FormatError("more than n=" + std::to_string(n) + " rows");
            std::size_t cols = 0;
            const char* p = line.data();
            const char* end = line.data() + line.size();
            while (p < end) {
                while (p < end && (*p == ' ' || *p == '\t')) ++p;
                if (p == end) break;
                double v;
                auto [next, ec] = std::from_chars(p, end, v);
                if (ec != std::errc()) throw FormatError("bad number in row " + std::to_string(row));
                data.push_back(v);
                ++cols;
                p = next;
            }
            if (cols != d)
                throw FormatError("row " + std::to_string(row) + " has " + std::to_string(cols) +
                                  " values, header declares d=" + std::to_string(d));
            ++row;
        }
        if (row != n) throw FormatError("header declares n=" + std::to_string(n) + " rows, found " +
                                        std::to_string(row));
    }
    return {embedder_id.empty() ? tag : embedder_id, std::move(ids), d, std::move(data), false};
}

// Loads an externally computed embedding (SciBERT, SBERT, ...) for the pipeline.
inline EmbeddingSet import_external(const std::filesystem::path& path, const std::string& embedder_id,
                                    MatrixEncoding enc = MatrixEncoding::Auto) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFound("embedding file " + path.string());
    return read_matrix(in, embedder_id, enc);
}

inline void write_vocabulary(const Vocabulary& v, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    for (const auto& t : v.tokens) out << t << '\n';
}

inline Vocabulary read_vocabulary(const std::filesystem::path& path, std::string field_label = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFound("vocabulary file " + path.string());
    Vocabulary v{{}, std::move(field_label)};
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) v.tokens.push_back(line);
    if (!std::is_sorted(v.tokens.begin(), v.tokens.end()) ||
        std::adjacent_find(v.tokens.begin(), v.tokens.end()) != v.tokens.end())
        throw FormatError("vocabulary is not sorted and unique");
    return v;
}

}  // namespace litfield

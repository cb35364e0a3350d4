// Writes the synthetic fixture corpus: payload JSON files in the bibliographic
// API's shape plus one imported "topic" embedding. Output is a pure function of
// the seed.
//
//   make_fixture <out_dir> [--seed N] [--per-field N]

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "litfield/date.hpp"
#include "litfield/embed_io.hpp"
#include "litfield/random.hpp"

namespace fs = std::filesystem;
using litfield::Rng;

namespace {

constexpr int kTopicsPerField = 6;
constexpr int kWordsPerTopic = 25;
constexpr int kCommonWords = 40;
constexpr int kNoiseDims = 4;

std::string make_word(Rng& rng) {
    static const char* cons[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "th", "ch"};
    static const char* vows[] = {"a", "e", "i", "o", "u", "ai", "ou"};
    std::string w;
    const int syll = 2 + static_cast<int>(rng.below(2));
    for (int i = 0; i < syll; ++i) {
        w += cons[rng.below(std::size(cons))];
        w += vows[rng.below(std::size(vows))];
    }
    return w;
}

struct Doc {
    std::string id;
    int field = 0;
    std::vector<double> mixture;  // over all topics
    std::string abstract;
};

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: make_fixture <out_dir> [--seed N] [--per-field N]\n";
        return 2;
    }
    fs::path out = argv[1];
    std::uint64_t seed = 20240601;
    int per_field = 1000;
    for (int i = 2; i + 1 < argc; i += 2) {
        std::string flag = argv[i];
        if (flag == "--seed") seed = std::stoull(argv[i + 1]);
        else if (flag == "--per-field") per_field = std::stoi(argv[i + 1]);
    }
    const std::vector<std::string> fields{"Computer Science", "Physics"};
    const int topics = kTopicsPerField * static_cast<int>(fields.size());
    Rng rng(litfield::derive_seed(seed, litfield::SeedStage::Synthetic));

    // Disjoint word pools per topic plus shared filler.
    std::set<std::string> used;
    auto fresh_word = [&] {
        for (;;) {
            auto w = make_word(rng);
            if (used.insert(w).second) return w;
        }
    };
    std::vector<std::vector<std::string>> topic_words(static_cast<std::size_t>(topics));
    for (auto& t : topic_words)
        for (int w = 0; w < kWordsPerTopic; ++w) t.push_back(fresh_word());
    std::vector<std::string> common;
    for (int w = 0; w < kCommonWords; ++w) common.push_back(fresh_word());

    fs::create_directories(out / "payloads");
    fs::create_directories(out / "embeddings");
    const litfield::Date first(2000, 1, 1), last(2022, 12, 31);
    const litfield::Date asof(2024, 6, 1);
    const auto span_days = static_cast<std::size_t>(last - first + 1);

    std::vector<Doc> docs;
    auto write_payload = [&](const std::string& id, const nlohmann::ordered_json& j) {
        std::ofstream f(out / "payloads" / (id + ".json"), std::ios::binary);
        f << j.dump() << "\n";
    };

    int serial = 0;
    auto next_id = [&](const char* prefix) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%s%05d", prefix, ++serial);
        return std::string(buf);
    };

    for (std::size_t f = 0; f < fields.size(); ++f) {
        for (int n = 0; n < per_field; ++n) {
            Doc d;
            d.id = next_id("w");
            d.field = static_cast<int>(f);
            d.mixture.assign(static_cast<std::size_t>(topics), 0.0);
            const int base = static_cast<int>(f) * kTopicsPerField;
            const int main_topic = base + static_cast<int>(rng.below(kTopicsPerField));
            const int side_topic = base + static_cast<int>(rng.below(kTopicsPerField));
            const double w_main = 0.55 + 0.3 * rng.uniform();
            d.mixture[static_cast<std::size_t>(main_topic)] += w_main;
            d.mixture[static_cast<std::size_t>(side_topic)] += 1.0 - w_main;

            const int len = 40 + static_cast<int>(rng.below(41));
            std::string text;
            for (int i = 0; i < len; ++i) {
                const double u = rng.uniform();
                const std::string* word;
                if (u < 0.2) {
                    word = &common[rng.below(common.size())];
                } else {
                    const auto& pool = topic_words[static_cast<std::size_t>(
                        rng.uniform() < w_main ? main_topic : side_topic)];
                    word = &pool[rng.below(pool.size())];
                }
                if (!text.empty()) text += (rng.below(12) == 0 ? ", " : " ");
                text += *word;
            }
            d.abstract = text + ".";

            const auto date = litfield::Date::from_days(first.days_since_epoch() + static_cast<long>(rng.below(span_days)));
            const double age = static_cast<double>(asof - date) / 365.25;
            const int refs = 5 + static_cast<int>(rng.below(56));
            const double log_cpy = 0.3 + 0.02 * (refs - 30) + 0.6 * rng.normal() - 0.02 * age;
            const double cpy = std::max(0.0, std::exp(log_cpy) - 0.3);
            const long cites = std::lround(cpy * age);

            nlohmann::ordered_json j;
            j["paperId"] = d.id;
            j["title"] = "Synthetic record " + d.id;
            j["abstract"] = d.abstract;
            // A few records carry only the year, as the API sometimes does.
            if (rng.below(25) == 0) {
                j["publicationDate"] = nullptr;
                j["year"] = date.year();
            } else {
                j["publicationDate"] = date.iso();
                j["year"] = date.year();
            }
            std::vector<std::string> fos{fields[f]};
            if (rng.below(10) == 0) fos.push_back(fields[1 - f]);
            if (rng.below(2) == 0) std::swap(fos.front(), fos.back());
            j["fieldsOfStudy"] = fos;
            j["citationCount"] = cites;
            j["referenceCount"] = refs;
            write_payload(d.id, j);
            docs.push_back(std::move(d));
        }
    }

    // Records the validator must turn away.
    for (int i = 0; i < 70; ++i) {
        auto id = next_id("x");
        nlohmann::ordered_json j{{"paperId", id}, {"abstract", nullptr}, {"publicationDate", "2010-05-05"},
                                 {"fieldsOfStudy", nlohmann::json::array({fields[0]})}, {"citationCount", 3}, {"referenceCount", 10}};
        if (i % 2) j["abstract"] = "   ";
        write_payload(id, j);
    }
    for (int i = 0; i < 50; ++i) {
        auto id = next_id("x");
        write_payload(id, {{"paperId", id}, {"abstract", "lorem ipsum"}, {"publicationDate", nullptr},
                           {"year", nullptr}, {"fieldsOfStudy", nlohmann::json::array({fields[1]})}, {"citationCount", 1},
                           {"referenceCount", 2}});
    }
    for (int i = 0; i < 60; ++i) {
        auto id = next_id("x");
        write_payload(id, {{"paperId", id}, {"abstract", "cells and proteins"}, {"publicationDate", "2015-02-02"},
                           {"fieldsOfStudy", nlohmann::json::array({"Biology"})}, {"citationCount", 7}, {"referenceCount", 20}});
    }
    for (int i = 0; i < 20; ++i) {
        auto id = next_id("x");
        std::ofstream f(out / "payloads" / (id + ".json"), std::ios::binary);
        f << "{\"paperId\": \"" << id << "\", \"abstract\": \"truncated";
    }

    // Imported embedding: topic mixture plus noise, for every valid record and
    // a handful of ids the corpus does not contain.
    const std::size_t dim = static_cast<std::size_t>(topics + kNoiseDims);
    std::vector<std::string> ids;
    std::vector<double> data;
    for (const auto& d : docs) {
        ids.push_back(d.id);
        for (std::size_t k = 0; k < dim; ++k)
            data.push_back((k < d.mixture.size() ? d.mixture[k] : 0.0) + 0.08 * rng.normal());
    }
    for (int i = 0; i < 5; ++i) {
        ids.push_back("orphan" + std::to_string(i));
        for (std::size_t k = 0; k < dim; ++k) data.push_back(rng.normal());
    }
    litfield::EmbeddingSet topic("topic", ids, dim, std::move(data), false);
    litfield::write_matrix(topic, out / "embeddings" / "topic.emb", litfield::MatrixEncoding::Text);

    std::cout << "wrote " << docs.size() << " valid and 200 invalid payloads to " << out << "\n";
    return 0;
}

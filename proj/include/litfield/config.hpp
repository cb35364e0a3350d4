#pragma once

#include <cctype>
#include <cmath>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "litfield/classify.hpp"
#include "litfield/date.hpp"
#include "litfield/embed_io.hpp"
#include "litfield/error.hpp"
#include "litfield/evaluate.hpp"
#include "litfield/hash.hpp"
#include "litfield/metrics.hpp"
#include "litfield/provider.hpp"
#include "litfield/regress.hpp"

namespace litfield {

// ---- TOML subset ----------------------------------------------------------------
//
// Supported: `[table]` and `[a.b]` headers, `key = value` with bare keys,
// basic strings with \" \\ \n \t \uXXXX escapes, integers, floats, booleans and
// arrays of those (may span lines). Comments start with '#'. No inline tables,
// dotted keys, literal strings or dates.

namespace toml_detail {

struct Cursor {
    std::string_view s;
    std::size_t pos = 0;
    std::size_t line = 1;

    bool done() const { return pos >= s.size(); }
    char peek() const { return done() ? '\0' : s[pos]; }
    char get() {
        char c = s[pos++];
        if (c == '\n') ++line;
        return c;
    }
    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError("config line " + std::to_string(line) + ": " + what);
    }
    void skip_inline_space() {
        while (!done() && (peek() == ' ' || peek() == '\t')) ++pos;
    }
    // Whitespace, newlines and comments (used inside arrays).
    void skip_all() {
        for (;;) {
            skip_inline_space();
            if (peek() == '#')
                while (!done() && peek() != '\n') ++pos;
            else if (peek() == '\n' || peek() == '\r')
                get();
            else
                return;
        }
    }
    void end_of_line() {
        skip_inline_space();
        if (peek() == '#')
            while (!done() && peek() != '\n') ++pos;
        if (peek() == '\r') ++pos;
        if (!done() && peek() != '\n') fail("unexpected text after value");
        if (!done()) get();
    }
};

inline bool bare_key_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

inline std::string parse_key(Cursor& c) {
    std::string key;
    while (!c.done() && bare_key_char(c.peek())) key.push_back(c.s[c.pos++]);
    if (key.empty()) c.fail("expected a key");
    return key;
}

inline void append_utf8(std::string& out, unsigned cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

inline nlohmann::json parse_value(Cursor& c);

inline nlohmann::json parse_string(Cursor& c) {
    c.get();  // opening quote
    std::string out;
    for (;;) {
        if (c.done() || c.peek() == '\n') c.fail("unterminated string");
        char ch = c.get();
        if (ch == '"') return out;
        if (ch != '\\') {
            out.push_back(ch);
            continue;
        }
        if (c.done()) c.fail("unterminated escape");
        switch (char e = c.get()) {
            case '"': out.push_back('"'); break;
            case '\\': out.push_back('\\'); break;
            case 'n': out.push_back('\n'); break;
            case 't': out.push_back('\t'); break;
            case 'u': {
                if (c.pos + 4 > c.s.size()) c.fail("short \\u escape");
                unsigned cp = 0;
                auto r = std::from_chars(c.s.data() + c.pos, c.s.data() + c.pos + 4, cp, 16);
                if (r.ptr != c.s.data() + c.pos + 4) c.fail("bad \\u escape");
                c.pos += 4;
                append_utf8(out, cp);
                break;
            }
            default: c.fail(std::string("unknown escape \\") + e);
        }
    }
}

inline nlohmann::json parse_scalar(Cursor& c) {
    std::size_t start = c.pos;
    while (!c.done() && (bare_key_char(c.peek()) || c.peek() == '.' || c.peek() == '+')) ++c.pos;
    std::string tok(c.s.substr(start, c.pos - start));
    if (tok == "true") return true;
    if (tok == "false") return false;
    std::string digits;
    for (char ch : tok)
        if (ch != '_') digits.push_back(ch);
    if (digits.empty()) c.fail("expected a value");
    const char* b = digits.data();
    const char* e = b + digits.size();
    if (*b == '+') ++b;
    if (digits.find_first_of(".eE") == std::string::npos) {
        long long v = 0;
        auto r = std::from_chars(b, e, v);
        if (r.ec == std::errc() && r.ptr == e) return v;
    } else {
        double v = 0;
        auto r = std::from_chars(b, e, v);
        if (r.ec == std::errc() && r.ptr == e) return v;
    }
    c.fail("cannot parse value '" + tok + "'");
}

inline nlohmann::json parse_array(Cursor& c) {
    c.get();  // '['
    nlohmann::json arr = nlohmann::json::array();
    for (;;) {
        c.skip_all();
        if (c.peek() == ']') {
            c.get();
            return arr;
        }
        arr.push_back(parse_value(c));
        c.skip_all();
        if (c.peek() == ',') {
            c.get();
        } else if (c.peek() != ']') {
            c.fail("expected ',' or ']' in array");
        }
    }
}

inline nlohmann::json parse_value(Cursor& c) {
    if (c.done()) c.fail("missing value");
    if (c.peek() == '"') return parse_string(c);
    if (c.peek() == '[') return parse_array(c);
    if (c.peek() == '{') c.fail("inline tables are not supported");
    return parse_scalar(c);
}

}  // namespace toml_detail

// Parses a TOML-subset document into a JSON object of tables.
inline nlohmann::json parse_toml(std::string_view text) {
    using namespace toml_detail;
    Cursor c{text};
    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* table = &root;
    while (!c.done()) {
        c.skip_inline_space();
        if (c.peek() == '#' || c.peek() == '\n' || c.peek() == '\r') {
            c.end_of_line();
            continue;
        }
        if (c.peek() == '[') {
            c.get();
            table = &root;
            for (;;) {
                c.skip_inline_space();
                auto key = parse_key(c);
                auto& sub = (*table)[key];
                if (sub.is_null()) sub = nlohmann::json::object();
                if (!sub.is_object()) c.fail("'" + key + "' is not a table");
                table = &sub;
                c.skip_inline_space();
                if (c.peek() == '.') {
                    c.get();
                    continue;
                }
                if (c.peek() != ']') c.fail("expected ']'");
                c.get();
                break;
            }
            c.end_of_line();
            continue;
        }
        auto key = parse_key(c);
        c.skip_inline_space();
        if (c.peek() != '=') c.fail("expected '=' after '" + key + "'");
        c.get();
        c.skip_inline_space();
        if (table->contains(key)) c.fail("duplicate key '" + key + "'");
        (*table)[key] = parse_value(c);
        c.end_of_line();
    }
    return root;
}

// ---- Pipeline configuration ----------------------------------------------------

struct ImportSpec {
    std::string embedder_id;
    std::filesystem::path path;
};

struct PipelineConfig {
    std::filesystem::path base_dir;  // directory relative paths resolve against
    std::filesystem::path out_dir;
    std::uint64_t seed = 0;
    std::vector<std::string> fields;

    // ingest
    std::string provider = "fixture";  // fixture | live
    std::filesystem::path fixture_dir;
    std::string query;
    Date retrieved_at;
    FetchOptions fetch;
    double requests_per_second = 1.0;
    int max_retries = 5;
    std::string api_base_url = "https://api.semanticscholar.org";

    // embed
    bool bow = true;
    std::size_t min_count = 5;
    std::vector<ImportSpec> imports;
    MatrixEncoding encoding = MatrixEncoding::Text;

    // atlas
    std::size_t batch_size = 100;
    std::size_t convergence_additions = 1000;
    std::string expansion_embedder = "bow";
    std::map<std::string, std::string> centers;  // field -> id; others drawn from the seed

    // metrics
    MetricConfig metric;
    Date window_start, window_end;
    std::vector<double> sensitivity_offsets{0.01, 0.1, 1.0};

    // models
    std::string model_set = "benchmark";  // benchmark | grid | manifest
    std::filesystem::path manifest;       // JSON list of model specs when model_set == "manifest"
    bool density_hyperprior = false;
    PriorConfig priors;
    McmcSettings mcmc;
    bool write_draws = false;
    PointEstimate point_estimate = PointEstimate::Mean;

    // split
    double test_fraction = 0.25;
    bool stratify = true;

    // classify
    LogisticOptions logistic;
    double classify_test_fraction = 0.2;
    std::size_t classify_reduced_dim = 2;

    nlohmann::json document;  // parsed source, for hashing
    std::string hash;         // sha256 prefix of the canonical document plus seed

    std::filesystem::path resolve(const std::filesystem::path& p) const {
        return p.is_absolute() ? p : base_dir / p;
    }
};

namespace config_detail {

class Reader {
public:
    Reader(const nlohmann::json& root, std::string table) : table_(std::move(table)) {
        if (table_.empty()) {
            node_ = &root;
        } else if (root.contains(table_)) {
            node_ = &root.at(table_);
            if (!node_->is_object()) throw ConfigError("[" + table_ + "] must be a table");
        }
    }

    template <class T>
    T get(const std::string& key, T fallback) const {
        if (!node_ || !node_->contains(key)) return fallback;
        const auto& v = node_->at(key);
        try {
            if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) throw ConfigError("");
                return v.get<double>();
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw ConfigError("");
                return v.get<bool>();
            } else if constexpr (std::is_integral_v<T>) {
                if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.get<long long>() < 0)) throw ConfigError("");
                return v.get<T>();
            } else {
                return v.get<T>();
            }
        } catch (const std::exception&) {
            throw ConfigError("config key " + where(key) + " has the wrong type");
        }
    }

    bool has(const std::string& key) const { return node_ && node_->contains(key); }
    const nlohmann::json* node() const { return node_; }
    std::string where(const std::string& key) const { return table_.empty() ? key : table_ + "." + key; }

private:
    std::string table_;
    const nlohmann::json* node_ = nullptr;
};

inline Date date_key(const Reader& r, const std::string& key, std::optional<Date> fallback = {}) {
    if (!r.has(key)) {
        if (fallback) return *fallback;
        throw ConfigError("config key " + r.where(key) + " is required");
    }
    auto s = r.get<std::string>(key, "");
    auto d = Date::try_parse(s);
    if (!d) throw ConfigError("config key " + r.where(key) + " is not a YYYY-MM-DD date: '" + s + "'");
    return *d;
}

}  // namespace config_detail

// Builds and validates a configuration. `seed_override` replaces the file's seed
// (the CLI's --seed); `out_override` replaces paths.out (--out, cwd-relative).
inline PipelineConfig make_config(const nlohmann::json& doc, const std::filesystem::path& base_dir,
                                  std::optional<std::uint64_t> seed_override = {},
                                  std::optional<std::filesystem::path> out_override = {}) {
    using config_detail::Reader;
    using config_detail::date_key;
    static const std::set<std::string> known{"seed",    "fields",  "paths", "ingest", "embed",   "atlas",
                                             "metrics", "model",   "priors", "mcmc", "split",  "classify"};
    for (auto it = doc.begin(); it != doc.end(); ++it)
        if (!known.count(it.key())) throw ConfigError("unknown config key '" + it.key() + "'");
    static const std::map<std::string, std::set<std::string>> table_keys{
        {"paths", {"out"}},
        {"ingest",
         {"provider", "fixture_dir", "query", "retrieved_at", "page_size", "max_inflight", "requests_per_second",
          "max_retries", "base_url"}},
        {"embed", {"bow", "min_count", "encoding", "imports"}},
        {"atlas", {"batch_size", "knn_k", "convergence_additions", "embedder", "centers"}},
        {"metrics", {"cpy_offset", "angle_floor", "age_floor", "asof_date", "window_start", "window_end",
                     "sensitivity_offsets"}},
        {"model", {"set", "manifest", "density_hyperprior", "write_draws", "point_estimate"}},
        {"priors", {"intercept_scale", "mu_l_scale", "sigma_l_scale", "sigma_scale"}},
        {"mcmc", {"chains", "warmup", "iterations", "parallel"}},
        {"split", {"test_fraction", "stratify"}},
        {"classify", {"lambda", "max_iterations", "tolerance", "test_fraction", "reduced_dim"}},
    };
    for (const auto& [table, keys] : table_keys) {
        if (!doc.contains(table) || !doc.at(table).is_object()) continue;  // type errors are reported by Reader
        for (auto it = doc.at(table).begin(); it != doc.at(table).end(); ++it)
            if (!keys.count(it.key())) throw ConfigError("unknown config key '" + table + "." + it.key() + "'");
    }

    PipelineConfig c;
    c.base_dir = base_dir;
    c.document = doc;
    Reader top(doc, "");
    if (seed_override) {
        c.seed = *seed_override;
    } else {
        if (!top.has("seed")) throw ConfigError("config key seed is required");
        const auto& s = doc.at("seed");
        if (!s.is_number_integer() || s.get<long long>() < 0) throw ConfigError("seed must be a non-negative integer");
        c.seed = s.get<std::uint64_t>();
    }
    c.fields = top.get<std::vector<std::string>>("fields", {});
    if (c.fields.empty()) throw ConfigError("config key fields must list at least one field of study");
    if (std::set<std::string>(c.fields.begin(), c.fields.end()).size() != c.fields.size())
        throw ConfigError("fields contains duplicates");

    Reader paths(doc, "paths");
    c.out_dir = out_override ? *out_override : c.resolve(paths.get<std::string>("out", "out"));

    Reader ing(doc, "ingest");
    c.provider = ing.get<std::string>("provider", "fixture");
    if (c.provider != "fixture" && c.provider != "live")
        throw ConfigError("ingest.provider must be \"fixture\" or \"live\"");
    if (c.provider == "fixture") {
        if (!ing.has("fixture_dir")) throw ConfigError("ingest.fixture_dir is required for the fixture provider");
        c.fixture_dir = c.resolve(ing.get<std::string>("fixture_dir", ""));
        if (!std::filesystem::is_directory(c.fixture_dir))
            throw ConfigError("ingest.fixture_dir does not exist: " + c.fixture_dir.string());
    }
    c.query = ing.get<std::string>("query", "");
    c.retrieved_at = date_key(ing, "retrieved_at");
    c.fetch.page_size = ing.get<std::size_t>("page_size", 100);
    c.fetch.max_inflight = ing.get<std::size_t>("max_inflight", 4);
    if (c.fetch.page_size < 1) throw ConfigError("ingest.page_size must be >= 1");
    if (c.fetch.max_inflight < 1) throw ConfigError("ingest.max_inflight must be >= 1");
    c.requests_per_second = ing.get<double>("requests_per_second", 1.0);
    if (!(c.requests_per_second > 0)) throw ConfigError("ingest.requests_per_second must be > 0");
    c.max_retries = ing.get<int>("max_retries", 5);
    c.api_base_url = ing.get<std::string>("base_url", c.api_base_url);

    Reader emb(doc, "embed");
    c.bow = emb.get<bool>("bow", true);
    c.min_count = emb.get<std::size_t>("min_count", 5);
    if (c.min_count < 1) throw ConfigError("embed.min_count must be >= 1");
    const auto enc = emb.get<std::string>("encoding", "text");
    if (enc == "text")
        c.encoding = MatrixEncoding::Text;
    else if (enc == "binary")
        c.encoding = MatrixEncoding::Binary;
    else
        throw ConfigError("embed.encoding must be \"text\" or \"binary\"");
    // imports = ["name=path", ...]
    for (const auto& spec : emb.get<std::vector<std::string>>("imports", {})) {
        auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size())
            throw ConfigError("embed.imports entries look like \"name=path\", got '" + spec + "'");
        ImportSpec is{spec.substr(0, eq), c.resolve(spec.substr(eq + 1))};
        if (!std::filesystem::is_regular_file(is.path))
            throw ConfigError("embedding import not found: " + is.path.string());
        c.imports.push_back(std::move(is));
    }
    std::set<std::string> embedder_ids;
    if (c.bow) embedder_ids.insert("bow");
    for (const auto& is : c.imports)
        if (!embedder_ids.insert(is.embedder_id).second)
            throw ConfigError("embedder id '" + is.embedder_id + "' used twice");
    if (embedder_ids.empty()) throw ConfigError("no embedders configured (embed.bow = false and no imports)");

    Reader atl(doc, "atlas");
    c.batch_size = atl.get<std::size_t>("batch_size", 100);
    if (c.batch_size < 1) throw ConfigError("atlas.batch_size must be >= 1");
    c.metric.k = atl.get<std::size_t>("knn_k", 16);
    c.convergence_additions = atl.get<std::size_t>("convergence_additions", 1000);
    c.expansion_embedder = atl.get<std::string>("embedder", c.bow ? "bow" : c.imports.front().embedder_id);
    if (!embedder_ids.count(c.expansion_embedder))
        throw ConfigError("atlas.embedder '" + c.expansion_embedder + "' is not a configured embedder");
    if (auto* centers = Reader(doc, "atlas").node(); centers && centers->contains("centers")) {
        const auto& cj = centers->at("centers");
        if (!cj.is_object()) throw ConfigError("atlas.centers must be a table of field = id");
        for (auto it = cj.begin(); it != cj.end(); ++it) c.centers[it.key()] = it.value().get<std::string>();
    }

    Reader met(doc, "metrics");
    c.metric.cpy_offset = met.get<double>("cpy_offset", 0.1);
    c.metric.angle_floor = met.get<double>("angle_floor", 1e-9);
    c.metric.age_floor = met.get<double>("age_floor", 1.0 / 365.25);
    c.sensitivity_offsets = met.get<std::vector<double>>("sensitivity_offsets", c.sensitivity_offsets);
    for (double off : c.sensitivity_offsets)
        if (!(off > 0 && std::isfinite(off))) throw ConfigError("metrics.sensitivity_offsets must be positive");
    c.metric.asof_date = date_key(met, "asof_date");
    c.window_start = date_key(met, "window_start", Date(1900, 1, 1));
    c.window_end = date_key(met, "window_end", c.metric.asof_date);
    if (c.window_end < c.window_start) throw ConfigError("metrics.window_end precedes metrics.window_start");
    c.sensitivity_offsets = met.get<std::vector<double>>("sensitivity_offsets", c.sensitivity_offsets);
    c.metric.validate();

    Reader mod(doc, "model");
    c.model_set = mod.get<std::string>("set", "benchmark");
    if (c.model_set != "benchmark" && c.model_set != "grid" && c.model_set != "manifest")
        throw ConfigError("model.set must be \"benchmark\", \"grid\" or \"manifest\"");
    if (c.model_set == "manifest") {
        if (!mod.has("manifest")) throw ConfigError("model.manifest is required when model.set = \"manifest\"");
        c.manifest = c.resolve(mod.get<std::string>("manifest", ""));
        if (!std::filesystem::is_regular_file(c.manifest))
            throw ConfigError("model manifest not found: " + c.manifest.string());
    }
    c.density_hyperprior = mod.get<bool>("density_hyperprior", false);
    c.write_draws = mod.get<bool>("write_draws", false);
    const auto pe = mod.get<std::string>("point_estimate", "mean");
    if (pe == "mean")
        c.point_estimate = PointEstimate::Mean;
    else if (pe == "median")
        c.point_estimate = PointEstimate::Median;
    else
        throw ConfigError("model.point_estimate must be \"mean\" or \"median\"");
    if (c.point_estimate == PointEstimate::Median) c.write_draws = true;

    Reader pri(doc, "priors");
    c.priors.intercept_scale = pri.get<double>("intercept_scale", 1.0);
    c.priors.mu_l_scale = pri.get<double>("mu_l_scale", 1.0);
    c.priors.sigma_l_scale = pri.get<double>("sigma_l_scale", 1.0);
    c.priors.sigma_scale = pri.get<double>("sigma_scale", 1.0);
    c.priors.validate();

    Reader mc(doc, "mcmc");
    c.mcmc.chains = mc.get<std::size_t>("chains", 4);
    c.mcmc.warmup = mc.get<std::size_t>("warmup", 1000);
    c.mcmc.iterations = mc.get<std::size_t>("iterations", 2000);
    c.mcmc.parallel = mc.get<bool>("parallel", true);
    c.mcmc.validate();

    Reader spl(doc, "split");
    c.test_fraction = spl.get<double>("test_fraction", 0.25);
    c.stratify = spl.get<bool>("stratify", true);
    if (!(c.test_fraction > 0 && c.test_fraction < 1)) throw ConfigError("split.test_fraction must be in (0, 1)");

    Reader cls(doc, "classify");
    c.logistic.lambda = cls.get<double>("lambda", 1.0);
    c.logistic.max_iterations = cls.get<std::size_t>("max_iterations", 500);
    c.logistic.tolerance = cls.get<double>("tolerance", 1e-6);
    c.classify_test_fraction = cls.get<double>("test_fraction", 0.2);
    c.classify_reduced_dim = cls.get<std::size_t>("reduced_dim", 2);
    if (c.logistic.lambda < 0) throw ConfigError("classify.lambda must be >= 0");
    if (!(c.classify_test_fraction > 0 && c.classify_test_fraction < 1))
        throw ConfigError("classify.test_fraction must be in (0, 1)");
    if (c.classify_reduced_dim < 1) throw ConfigError("classify.reduced_dim must be >= 1");

    nlohmann::json canon = doc;
    canon["seed"] = c.seed;
    c.hash = sha256_hex(canon.dump()).substr(0, 16);
    return c;
}

// `patch` is merged over the parsed file (RFC 7386 merge patch) before
// validation, so command-line overrides are part of the config hash.
inline PipelineConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override = {},
                                  std::optional<std::filesystem::path> out_override = {},
                                  const nlohmann::json& patch = nlohmann::json::object()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    auto base = std::filesystem::absolute(path).parent_path();
    auto doc = parse_toml(buf.str());
    doc.merge_patch(patch);
    return make_config(doc, base, seed_override, out_override);
}

}  // namespace litfield

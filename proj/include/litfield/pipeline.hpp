#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "litfield/atlas.hpp"
#include "litfield/classify.hpp"
#include "litfield/config.hpp"
#include "litfield/corpus.hpp"
#include "litfield/embed.hpp"
#include "litfield/embed_io.hpp"
#include "litfield/evaluate.hpp"
#include "litfield/metrics.hpp"
#include "litfield/provider.hpp"
#include "litfield/regress.hpp"

#ifndef LITFIELD_VERSION
#define LITFIELD_VERSION "0.1.0"
#endif

namespace litfield {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = LITFIELD_VERSION;

// Output layout under PipelineConfig::out_dir.
namespace artifact {
inline fs::path corpus(const PipelineConfig& c) { return c.out_dir / "corpus" / "corpus.jsonl"; }
inline fs::path ingest_report(const PipelineConfig& c) { return c.out_dir / "corpus" / "ingest_report.json"; }
inline fs::path embeddings_dir(const PipelineConfig& c) { return c.out_dir / "embeddings"; }
inline fs::path embedding(const PipelineConfig& c, const std::string& e) { return embeddings_dir(c) / (e + ".emb"); }
inline fs::path vocabulary(const PipelineConfig& c) { return embeddings_dir(c) / "vocabulary.txt"; }
inline fs::path embed_report(const PipelineConfig& c) { return embeddings_dir(c) / "embed_report.json"; }
inline fs::path atlas_dir(const PipelineConfig& c) { return c.out_dir / "atlas"; }
inline fs::path atlas_summary(const PipelineConfig& c) { return atlas_dir(c) / "atlas.json"; }
inline fs::path converged(const PipelineConfig& c) { return atlas_dir(c) / "converged.txt"; }
inline fs::path metrics(const PipelineConfig& c) { return c.out_dir / "metrics" / "metrics.csv"; }
inline fs::path exclusions(const PipelineConfig& c) { return c.out_dir / "metrics" / "exclusions.csv"; }
inline fs::path sensitivity(const PipelineConfig& c) { return c.out_dir / "metrics" / "cpy_offset_sensitivity.json"; }
inline fs::path fit_dir(const PipelineConfig& c) { return c.out_dir / "fit"; }
inline fs::path split(const PipelineConfig& c) { return fit_dir(c) / "split.json"; }
inline fs::path models(const PipelineConfig& c) { return fit_dir(c) / "models.json"; }
inline fs::path evaluation(const PipelineConfig& c) { return c.out_dir / "evaluate" / "evaluation.json"; }
inline fs::path evaluation_csv(const PipelineConfig& c) { return c.out_dir / "evaluate" / "evaluation.csv"; }
inline fs::path comparison_table(const PipelineConfig& c) { return c.out_dir / "evaluate" / "model_comparison_table.csv"; }
inline fs::path classification(const PipelineConfig& c) { return c.out_dir / "classify" / "classification.csv"; }
inline fs::path report_dir(const PipelineConfig& c) { return c.out_dir / "report"; }
}  // namespace artifact

// File-safe rendering of a label: [A-Za-z0-9_-] kept, everything else '_'.
inline std::string slug(const std::string& s) {
    std::string out;
    for (unsigned char ch : s) out.push_back(std::isalnum(ch) || ch == '-' || ch == '_' ? static_cast<char>(ch) : '_');
    return out;
}

// ---- provenance ------------------------------------------------------------------

inline fs::path meta_path(const fs::path& artifact) { return artifact.string() + ".meta.json"; }

inline ojson provenance(const PipelineConfig& c, const std::string& command) {
    return {{"config_hash", c.hash}, {"seed", c.seed}, {"tool_version", kToolVersion}, {"command", command}};
}

// Every artifact gets a `<file>.meta.json` sidecar so tabular formats stay plain.
class ArtifactWriter {
public:
    ArtifactWriter(const PipelineConfig& c, std::string command) : cfg_(c), command_(std::move(command)) {}

    void text(const fs::path& path, const std::string& body) const {
        fs::create_directories(path.parent_path());
        {
            std::ofstream out(path, std::ios::binary);
            if (!out) throw ConfigError("cannot write " + path.string());
            out << body;
        }
        stamp(path);
    }

    void json(const fs::path& path, ojson body) const {
        ojson j;
        j["provenance"] = provenance(cfg_, command_);
        for (auto it = body.begin(); it != body.end(); ++it) j[it.key()] = std::move(it.value());
        text(path, j.dump(2) + "\n");
    }

    void matrix(const fs::path& path, const EmbeddingSet& set) const {
        fs::create_directories(path.parent_path());
        write_matrix(set, path, cfg_.encoding);
        stamp(path);
    }

    void stamp(const fs::path& path) const {
        std::ofstream out(meta_path(path), std::ios::binary);
        out << provenance(cfg_, command_).dump(2) << "\n";
    }

private:
    const PipelineConfig& cfg_;
    std::string command_;
};

// Diagnostics sink for warnings (R-hat, stale artifacts, dropped rows).
struct Log {
    std::ostream* err = &std::cerr;
    std::vector<std::string> warnings;

    void warn(const std::string& msg) {
        warnings.push_back(msg);
        if (err) *err << "warning: " << msg << "\n";
    }
};

// Confirms `path` exists and was produced under the current config hash.
inline void require_upstream(const PipelineConfig& c, const fs::path& path, const std::string& producer, Log& log) {
    if (!fs::exists(path)) throw UpstreamMissing(path.string(), producer);
    std::ifstream in(meta_path(path));
    if (!in) {
        log.warn("StaleArtifact: " + path.string() + " has no provenance sidecar; rerun `litfield " + producer + "`");
        return;
    }
    try {
        auto meta = nlohmann::json::parse(in);
        const auto hash = meta.at("config_hash").get<std::string>();
        if (hash != c.hash)
            log.warn("StaleArtifact: " + path.string() + " was produced under config hash " + hash +
                     ", current is " + c.hash + "; rerun `litfield " + producer + "`");
    } catch (const std::exception&) {
        log.warn("StaleArtifact: unreadable provenance for " + path.string());
    }
}

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw NotFound(p.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline nlohmann::json read_json_file(const fs::path& p) {
    try {
        return nlohmann::json::parse(read_file(p));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(p.string() + ": " + e.what(), e.byte);
    }
}

inline std::vector<std::string> embedder_ids(const PipelineConfig& c) {
    std::vector<std::string> out;
    if (c.bow) out.push_back("bow");
    for (const auto& is : c.imports) out.push_back(is.embedder_id);
    return out;
}

// ---- loaders for upstream artifacts ----------------------------------------------

inline CorpusStore load_corpus(const PipelineConfig& c, Log& log) {
    require_upstream(c, artifact::corpus(c), "ingest", log);
    return read_jsonl(artifact::corpus(c));
}

inline std::vector<EmbeddingSet> load_embeddings(const PipelineConfig& c, Log& log) {
    std::vector<EmbeddingSet> out;
    for (const auto& e : embedder_ids(c)) {
        const auto path = artifact::embedding(c, e);
        require_upstream(c, path, "embed", log);
        std::ifstream in(path, std::ios::binary);
        auto set = read_matrix(in, e, MatrixEncoding::Auto);
        out.push_back(normalize(set));
    }
    return out;
}

inline MetricTable load_metrics(const PipelineConfig& c, Log& log) {
    require_upstream(c, artifact::metrics(c), "metrics", log);
    std::ifstream in(artifact::metrics(c), std::ios::binary);
    return read_metric_csv(in);
}

// ---- ingest ----------------------------------------------------------------------

inline ojson cmd_ingest(const PipelineConfig& c, Log& log, Transport* transport = nullptr) {
    ArtifactWriter w(c, "ingest");
    std::unique_ptr<Provider> owned;
    std::unique_ptr<Transport> owned_transport;
    if (c.provider == "fixture") {
        owned = std::make_unique<FixtureProvider>(c.fixture_dir);
    } else {
        if (c.query.empty()) throw ConfigError("ingest.query is required for the live provider");
        LiveOptions opt;
        if (const char* key = std::getenv("LITFIELD_API_KEY")) opt.api_key = key;
        else log.warn("LITFIELD_API_KEY is not set; the API applies its anonymous rate limit");
        opt.requests_per_second = c.requests_per_second;
        opt.max_retries = c.max_retries;
        if (!transport) throw ConfigError("live provider needs an HTTP transport");
        owned = std::make_unique<LiveProvider>(*transport, opt);
    }
    const auto ids = owned->list_ids(c.query);
    json params{{"query", c.query}, {"fields", c.fields}};
    auto result = ingest(*owned, ids, c.fields, c.retrieved_at, c.fetch, params);
    if (result.store.size() == 0) throw EmptyCorpus("no payload passed validation");

    std::ostringstream body;
    write_jsonl(result.store, body);
    w.text(artifact::corpus(c), body.str());
    ojson rep;
    rep["provider"] = owned->id();
    rep["candidates"] = ids.size();
    rep["tally"] = result.tally.to_json();
    std::map<std::string, std::size_t> per_field;
    for (const auto& id : result.store.ids()) ++per_field[result.store.at(id).field_label];
    rep["records_per_field"] = per_field;
    w.json(artifact::ingest_report(c), rep);
    return rep;
}

// ---- embed -----------------------------------------------------------------------

inline ojson cmd_embed(const PipelineConfig& c, Log& log) {
    ArtifactWriter w(c, "embed");
    const auto store = load_corpus(c, log);
    const auto ids = store.ids();
    std::vector<std::string> abstracts;
    abstracts.reserve(ids.size());
    for (const auto& id : ids) abstracts.push_back(store.at(id).abstract_text);

    ojson rep;
    rep["embedders"] = ojson::object();
    auto emit = [&](const EmbeddingSet& raw, std::size_t missing) {
        std::vector<std::string> dropped;
        auto set = normalize_dropping_zero(raw, &dropped);
        for (const auto& id : dropped) log.warn("embedder " + raw.embedder_id() + ": zero vector for " + id + ", dropped");
        w.matrix(artifact::embedding(c, raw.embedder_id()), set);
        rep["embedders"][raw.embedder_id()] = {
            {"rows", set.size()}, {"dim", set.dim()}, {"dropped_zero", dropped}, {"missing", missing}};
    };

    if (c.bow) {
        // One vocabulary pooled over every configured field.
        auto vocab = build_vocabulary(abstracts, c.min_count, "pooled");
        fs::create_directories(artifact::embeddings_dir(c));
        write_vocabulary(vocab, artifact::vocabulary(c));
        w.stamp(artifact::vocabulary(c));
        emit(embed_bow(ids, abstracts, vocab, "bow"), 0);
    }
    for (const auto& is : c.imports) {
        auto ext = import_external(is.path, is.embedder_id, MatrixEncoding::Auto);
        std::vector<std::string> keep;
        for (const auto& id : ext.ids())
            if (store.contains(id)) keep.push_back(id);
        std::sort(keep.begin(), keep.end());
        const std::size_t missing = ids.size() - keep.size();
        if (missing) log.warn("embedder " + is.embedder_id + ": " + std::to_string(missing) + " corpus records have no vector");
        emit(ext.subset(keep), missing);
    }
    w.json(artifact::embed_report(c), rep);
    return rep;
}

// ---- expand ----------------------------------------------------------------------

inline const EmbeddingSet& find_embedding(const std::vector<EmbeddingSet>& sets, const std::string& id) {
    for (const auto& s : sets)
        if (s.embedder_id() == id) return s;
    throw ConfigError("no embedding '" + id + "'");
}

// The collection size of the earlier snapshot: N admissions before the end.
inline std::size_t before_size(std::size_t final_size, std::size_t additions) {
    return final_size > additions ? final_size - additions : 0;
}

inline ojson cmd_expand(const PipelineConfig& c, Log& log) {
    ArtifactWriter w(c, "expand");
    const auto store = load_corpus(c, log);
    const auto sets = load_embeddings(c, log);
    const auto& driver = find_embedding(sets, c.expansion_embedder);
    StoreProvider provider(store);

    ojson summary;
    summary["knn_k"] = c.metric.k;
    summary["convergence_additions"] = c.convergence_additions;
    summary["batch_size"] = c.batch_size;
    summary["fields"] = ojson::object();
    std::set<std::string> all_converged;

    for (std::size_t fi = 0; fi < c.fields.size(); ++fi) {
        const auto& field = c.fields[fi];
        std::vector<std::string> pool;
        for (const auto& id : store.ids())
            if (store.at(id).field_label == field && driver.find(id)) pool.push_back(id);
        if (pool.empty()) {
            log.warn("field '" + field + "' has no embedded records; skipped");
            continue;
        }
        std::string center;
        if (auto it = c.centers.find(field); it != c.centers.end()) {
            center = it->second;
            if (std::find(pool.begin(), pool.end(), center) == pool.end())
                throw ConfigError("atlas center '" + center + "' is not an embedded record of field '" + field + "'");
        } else {
            Rng rng(derive_seed(c.seed, SeedStage::Center, fi));
            center = pool[rng.below(pool.size())];
        }

        auto atlas = AtlasState::seed(store.at(center));
        ExpandOptions opt{{field}, c.retrieved_at, c.fetch};
        for (;;) {
            auto r = expand(atlas, provider, driver, c.batch_size, opt);
            if (r.exhausted) break;
        }

        const auto s = slug(field);
        std::ostringstream logbuf;
        write_expansion_log(atlas, logbuf);
        w.text(artifact::atlas_dir(c) / (s + ".expansion.jsonl"), logbuf.str());

        const std::size_t final_size = atlas.size();
        const std::size_t early = before_size(final_size, c.convergence_additions);
        ojson fj;
        fj["center"] = center;
        fj["size"] = final_size;
        fj["before_size"] = early;
        fj["tally"] = atlas.tally().to_json();
        fj["converged_per_embedder"] = ojson::object();
        std::set<std::string> converged;
        bool first = true;
        for (const auto& set : sets) {
            auto after = snapshot(atlas, set, c.metric.k, AsofRule::StrictlyEarlier, final_size);
            std::set<std::string> conv;
            if (early > 0) {
                auto before = snapshot(atlas, set, c.metric.k, AsofRule::StrictlyEarlier, early);
                conv = converged_ids(before, after, c.convergence_additions);
                w.json(artifact::atlas_dir(c) / (s + "." + set.embedder_id() + ".before.json"), to_json(before));
            }
            w.json(artifact::atlas_dir(c) / (s + "." + set.embedder_id() + ".after.json"), to_json(after));
            fj["converged_per_embedder"][set.embedder_id()] = conv.size();
            if (first) {
                converged = std::move(conv);
                first = false;
            } else {
                std::set<std::string> both;
                std::set_intersection(converged.begin(), converged.end(), conv.begin(), conv.end(),
                                      std::inserter(both, both.end()));
                converged = std::move(both);
            }
        }
        if (early == 0)
            log.warn("field '" + field + "': atlas of " + std::to_string(final_size) +
                     " is not larger than convergence_additions; nothing can converge");
        fj["converged"] = converged.size();
        summary["fields"][field] = fj;
        all_converged.insert(converged.begin(), converged.end());
    }

    std::string conv_text;
    for (const auto& id : all_converged) conv_text += id + "\n";
    w.text(artifact::converged(c), conv_text);
    summary["converged"] = all_converged.size();
    w.json(artifact::atlas_summary(c), summary);
    return summary;
}

// ---- metrics ---------------------------------------------------------------------

inline double pearson(std::span<const double> a, std::span<const double> b) {
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

// How the log-cpy response and its association with density move with the
// zero-citation offset.
inline ojson cpy_offset_sensitivity(const MetricTable& t, const std::vector<double>& offsets) {
    ojson out = ojson::array();
    for (double off : offsets) {
        std::vector<double> y;
        for (const auto& r : t.records) {
            const double cpy = static_cast<double>(r.citation_count) / r.age_years;
            y.push_back(std::log(cpy + off));
        }
        ojson row;
        row["cpy_offset"] = off;
        double m = 0;
        for (double v : y) m += v;
        m /= static_cast<double>(std::max<std::size_t>(1, y.size()));
        double ss = 0;
        for (double v : y) ss += (v - m) * (v - m);
        row["log_cpy_mean"] = m;
        row["log_cpy_sd"] = y.size() > 1 ? std::sqrt(ss / static_cast<double>(y.size() - 1)) : 0.0;
        row["corr_with_rho"] = ojson::object();
        if (y.size() > 2) {
            for (const auto& e : t.embedders) {
                std::vector<double> rho;
                for (const auto& r : t.records) rho.push_back(r.rho.at(e));
                row["corr_with_rho"][e] = pearson(y, rho);
            }
        }
        out.push_back(row);
    }
    return out;
}

inline ojson cmd_metrics(const PipelineConfig& c, Log& log) {
    ArtifactWriter w(c, "metrics");
    const auto store = load_corpus(c, log);
    const auto sets = load_embeddings(c, log);
    require_upstream(c, artifact::converged(c), "expand", log);
    std::set<std::string> converged;
    {
        std::istringstream in(read_file(artifact::converged(c)));
        for (std::string line; std::getline(in, line);)
            if (!line.empty()) converged.insert(line);
    }
    const auto window = filter_window(store, c.window_start, c.window_end);
    std::vector<const EmbeddingSet*> ptrs;
    for (const auto& s : sets) ptrs.push_back(&s);

    MetricTable table;
    for (const auto& e : sets) table.embedders.push_back(e.embedder_id());
    for (const auto& field : c.fields) {
        const auto logp = artifact::atlas_dir(c) / (slug(field) + ".expansion.jsonl");
        if (!fs::exists(logp)) continue;  // field skipped at expansion
        std::istringstream in(read_file(logp));
        auto atlas = replay_atlas(store, read_expansion_log(in));
        auto part = compute_metric_records(atlas, ptrs, converged, window, c.metric);
        for (auto& r : part.records) table.records.push_back(std::move(r));
        for (auto& x : part.exclusions) table.exclusions.push_back(std::move(x));
    }
    std::sort(table.records.begin(), table.records.end(),
              [](const MetricRecord& a, const MetricRecord& b) { return a.id < b.id; });
    std::sort(table.exclusions.begin(), table.exclusions.end(),
              [](const Exclusion& a, const Exclusion& b) { return a.id < b.id; });

    std::ostringstream mbuf, xbuf;
    write_metric_csv(table, mbuf);
    write_exclusion_csv(table, xbuf);
    w.text(artifact::metrics(c), mbuf.str());
    w.text(artifact::exclusions(c), xbuf.str());

    ojson sens;
    sens["configured_offset"] = c.metric.cpy_offset;
    sens["rows"] = table.records.size();
    sens["offsets"] = cpy_offset_sensitivity(table, c.sensitivity_offsets);
    w.json(artifact::sensitivity(c), sens);

    ojson rep;
    rep["rows"] = table.records.size();
    rep["exclusions"] = table.exclusion_counts();
    return rep;
}

// ---- fit -------------------------------------------------------------------------

struct NamedModel {
    std::string name;
    std::string label;
    ModelSpec spec;
};

inline std::vector<NamedModel> configured_models(const PipelineConfig& c, const std::vector<std::string>& embedders) {
    std::vector<NamedModel> out;
    if (c.model_set == "benchmark") {
        for (auto& b : benchmark_models(embedders, c.priors)) out.push_back({b.key, b.label, b.spec});
    } else if (c.model_set == "grid") {
        for (auto& s : enumerate_variants(full_model(embedders, c.priors), standard_axes(embedders, c.density_hyperprior)))
            out.push_back({s.name, s.name, s});
    } else {
        auto j = read_json_file(c.manifest);
        if (j.is_object() && j.contains("models")) j = j.at("models");
        if (!j.is_array() || j.empty()) throw ConfigError("model manifest must be a non-empty JSON array of model specs");
        std::set<std::string> seen;
        for (const auto& m : j) {
            auto spec = ModelSpec::from_json(m);
            if (!seen.insert(slug(spec.name)).second) throw ConfigError("duplicate model name '" + spec.name + "' in manifest");
            out.push_back({spec.name, m.value("label", spec.name), spec});
        }
    }
    return out;
}

inline fs::path summary_path(const PipelineConfig& c, const std::string& model) {
    return artifact::fit_dir(c) / (slug(model) + ".summary.json");
}
inline fs::path draws_path(const PipelineConfig& c, const std::string& model) {
    return artifact::fit_dir(c) / (slug(model) + ".draws.csv");
}

inline SplitResult read_split(const PipelineConfig& c, Log& log) {
    require_upstream(c, artifact::split(c), "fit", log);
    auto j = read_json_file(artifact::split(c));
    SplitResult s;
    for (const auto& id : j.at("train")) s.train.insert(id.get<std::string>());
    for (const auto& id : j.at("test")) s.test.insert(id.get<std::string>());
    return s;
}

inline ojson cmd_fit(const PipelineConfig& c, Log& log) {
    ArtifactWriter w(c, "fit");
    const auto table = load_metrics(c, log);
    if (table.records.empty()) throw EmptyCorpus("metric table has no rows");
    auto sp = split(table, c.test_fraction, c.seed, c.stratify);
    w.json(artifact::split(c), {{"test_fraction", c.test_fraction},
                                {"stratify", c.stratify},
                                {"train", sp.train},
                                {"test", sp.test}});
    const auto ds = standardize_by_field(table, sp.train);
    const auto train = ds.select_ids(sp.train);

    McmcSettings mc = c.mcmc;
    mc.seed = c.seed;
    ojson index = ojson::array();
    for (const auto& m : configured_models(c, table.embedders)) {
        const auto bound = bind(m.spec, train);
        const auto post = fit(bound, train, mc);
        const auto summary = summarize(post);
        for (const auto& warning : summary.warnings) log.warn(m.name + ": " + warning);
        ojson j;
        j["model"] = m.name;
        j["label"] = m.label;
        j["spec"] = m.spec.to_json();
        j["mcmc"] = {{"chains", mc.chains}, {"warmup", mc.warmup}, {"iterations", mc.iterations}};
        j["train_rows"] = train.rows();
        j["warnings"] = summary.warnings;
        j["parameters"] = to_json(summary);
        w.json(summary_path(c, m.name), j);
        if (c.write_draws) {
            std::ostringstream buf;
            post.write_csv(buf);
            w.text(draws_path(c, m.name), buf.str());
        }
        index.push_back({{"model", m.name}, {"label", m.label}, {"file", summary_path(c, m.name).filename().string()}});
    }
    w.json(artifact::models(c), {{"models", index}});
    return {{"models", index.size()}, {"train_rows", sp.train.size()}, {"test_rows", sp.test.size()}};
}

// ---- evaluate --------------------------------------------------------------------

inline PosteriorSamples read_draws_csv(std::istream& in, const std::vector<std::string>& names, McmcSettings settings) {
    auto rows = read_csv(in);
    if (rows.empty() || rows[0] != std::vector<std::string>{"chain", "iteration", "parameter", "value"})
        throw FormatError("draws file has an unexpected header");
    std::size_t chains = 0, iters = 0;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        chains = std::max<std::size_t>(chains, std::stoul(rows[r][0]) + 1);
        iters = std::max<std::size_t>(iters, std::stoul(rows[r][1]) + 1);
    }
    settings.chains = chains;
    settings.iterations = iters;
    PosteriorSamples post(names, settings);
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < names.size(); ++i) col[names[i]] = i;
    for (std::size_t r = 1; r < rows.size(); ++r)
        post.at(std::stoul(rows[r][0]), std::stoul(rows[r][1]), col.at(rows[r][2])) = parse_double(rows[r][3]);
    return post;
}

inline ojson cmd_evaluate(const PipelineConfig& c, Log& log) {
    ArtifactWriter w(c, "evaluate");
    const auto table = load_metrics(c, log);
    const auto sp = read_split(c, log);
    require_upstream(c, artifact::models(c), "fit", log);
    const auto ds = standardize_by_field(table, sp.train);
    const auto train = ds.select_ids(sp.train);
    const auto test = ds.select_ids(sp.test);
    std::vector<double> ytrain(train.y.data(), train.y.data() + train.y.size());
    std::vector<double> ytest(test.y.data(), test.y.data() + test.y.size());
    const auto ref = TrainReference::from(ytrain);

    std::vector<ModelScores> scored;
    std::vector<std::pair<std::string, Scores>> labelled;
    const auto index = read_json_file(artifact::models(c));
    for (const auto& entry : index.at("models")) {
        const auto name = entry.at("model").get<std::string>();
        const auto path = artifact::fit_dir(c) / entry.at("file").get<std::string>();
        require_upstream(c, path, "fit", log);
        const auto sj = read_json_file(path);
        const auto spec = ModelSpec::from_json(sj.at("spec"));
        const auto bound = bind(spec, ds);
        std::vector<double> yhat;
        if (c.point_estimate == PointEstimate::Mean) {
            Eigen::VectorXd mean(static_cast<Eigen::Index>(bound.param_count()));
            for (std::size_t p = 0; p < bound.param_count(); ++p)
                mean(static_cast<Eigen::Index>(p)) = sj.at("parameters").at(bound.param_names()[p]).at("mean").get<double>();
            for (std::size_t i = 0; i < test.rows(); ++i) yhat.push_back(bound.predict_mu(mean, test, i));
        } else {
            require_upstream(c, draws_path(c, name), "fit", log);
            std::ifstream in(draws_path(c, name), std::ios::binary);
            const auto post = read_draws_csv(in, bound.param_names(), c.mcmc);
            yhat = predict(bound, post, test, PointEstimate::Median);
        }
        auto s = score(ytest, yhat, ref);
        if (s.mape_excluded) log.warn(name + ": " + std::to_string(s.mape_excluded) + " rows with y = 0 left out of mape");
        scored.push_back({name, s});
        labelled.emplace_back(entry.at("label").get<std::string>(), s);
    }
    auto report = rank_models(scored);
    report.split_seed = c.seed;
    report.test_fraction = c.test_fraction;
    if (!report.consensus) log.warn("metrics disagree on the model ranking");

    auto j = to_json(report);
    j["test_rows"] = test.rows();
    j["point_estimate"] = c.point_estimate == PointEstimate::Mean ? "mean" : "median";
    j["reference"] = {{"train_mean", ref.mean}, {"train_median", ref.median}};
    w.json(artifact::evaluation(c), j);
    std::ostringstream csv, t1;
    write_report_csv(report, csv);
    w.text(artifact::evaluation_csv(c), csv.str());

    // The comparison table always shows the benchmark models; under the grid
    // set each is matched to the variant with the same structure.
    std::vector<std::pair<std::string, Scores>> columns;
    if (c.model_set == "benchmark") {
        columns = labelled;
    } else {
        for (const auto& b : benchmark_models(table.embedders, c.priors)) {
            for (const auto& entry : index.at("models")) {
                const auto sj = read_json_file(artifact::fit_dir(c) / entry.at("file").get<std::string>());
                if (!ModelSpec::from_json(sj.at("spec")).same_structure(b.spec)) continue;
                for (const auto& m : scored)
                    if (m.name == entry.at("model").get<std::string>()) columns.emplace_back(b.label, m.scores);
                break;
            }
        }
    }
    write_comparison_table(columns, t1);
    w.text(artifact::comparison_table(c), t1.str());
    return j;
}

// ---- classify --------------------------------------------------------------------

inline ojson cmd_classify(const PipelineConfig& c, Log& log) {
    ArtifactWriter w(c, "classify");
    const auto store = load_corpus(c, log);
    const auto sets = load_embeddings(c, log);
    std::ostringstream csv;
    const std::string reduced_col = "reduced_" + std::to_string(c.classify_reduced_dim) + "d";
    csv << "embedder,full," << reduced_col << ",train_rows,test_rows,classes\n";
    ojson out = ojson::object();
    for (const auto& set : sets) {
        std::vector<std::string> labels;
        for (const auto& id : set.ids()) labels.push_back(store.at(id).field_label);
        const auto full = classify_accuracy(set, labels, c.seed, c.classify_test_fraction, c.logistic);
        const auto red = reduce_svd(set, c.classify_reduced_dim);
        const auto low = classify_accuracy(red, labels, c.seed, c.classify_test_fraction, c.logistic);
        csv << csv_escape(set.embedder_id()) << ',' << format_double(full.accuracy) << ','
            << format_double(low.accuracy) << ',' << full.train_rows << ',' << full.test_rows << ',' << full.classes
            << '\n';
        out[set.embedder_id()] = {{"full", full.accuracy}, {reduced_col, low.accuracy}};
    }
    w.text(artifact::classification(c), csv.str());
    return out;
}

// ---- report ----------------------------------------------------------------------

// Splits "beta[p][field]" / "beta[p]" into (predictor, field).
inline std::optional<std::pair<std::string, std::string>> parse_beta_name(const std::string& name) {
    if (name.rfind("beta[", 0) != 0) return std::nullopt;
    auto close = name.find(']');
    if (close == std::string::npos) return std::nullopt;
    std::string predictor = name.substr(5, close - 5);
    std::string field;
    if (close + 1 < name.size()) {
        if (name[close + 1] != '[' || name.back() != ']') return std::nullopt;
        field = name.substr(close + 2, name.size() - close - 3);
    }
    return std::make_pair(predictor, field);
}

inline ojson cmd_report(const PipelineConfig& c, Log& log) {
    ArtifactWriter w(c, "report");
    const auto store = load_corpus(c, log);
    const auto sets = load_embeddings(c, log);
    require_upstream(c, artifact::models(c), "fit", log);
    require_upstream(c, artifact::evaluation(c), "evaluate", log);

    // Per-field coefficient posteriors for every fitted model.
    std::ostringstream eff;
    eff << "model,predictor,field,mean,sd,q2.5,q16,q84,q97.5,rhat,ess\n";
    const auto index = read_json_file(artifact::models(c));
    for (const auto& entry : index.at("models")) {
        const auto path = artifact::fit_dir(c) / entry.at("file").get<std::string>();
        require_upstream(c, path, "fit", log);
        const auto sj = read_json_file(path);
        const auto& params = sj.at("parameters");
        for (auto it = params.begin(); it != params.end(); ++it) {
            auto beta = parse_beta_name(it.key());
            if (!beta) continue;
            const auto& p = it.value();
            eff << csv_escape(entry.at("model").get<std::string>()) << ',' << csv_escape(beta->first) << ','
                << csv_escape(beta->second.empty() ? "*" : beta->second);
            for (const char* k : {"mean", "sd", "q2.5", "q16", "q84", "q97.5", "rhat", "ess"})
                eff << ',' << format_double(p.at(k).get<double>());
            eff << '\n';
        }
    }
    w.text(artifact::report_dir(c) / "effect_sizes.csv", eff.str());

    const auto eval = read_json_file(artifact::evaluation(c));
    std::ostringstream cmp;
    cmp << "model,metric,value\n";
    for (auto it = eval.at("models").begin(); it != eval.at("models").end(); ++it)
        for (auto m = it.value().begin(); m != it.value().end(); ++m)
            if (m.value().is_number_float())
                cmp << csv_escape(it.key()) << ',' << m.key() << ',' << format_double(m.value().get<double>()) << '\n';
    w.text(artifact::report_dir(c) / "model_comparison.csv", cmp.str());

    ojson outputs = ojson::array({"effect_sizes.csv", "model_comparison.csv"});
    for (const auto& set : sets) {
        if (set.size() < 2 || set.dim() < 2) continue;
        const auto proj = reduce_svd(set, 2);
        std::ostringstream buf;
        buf << "id,field,x,y\n";
        for (std::size_t i = 0; i < proj.size(); ++i) {
            const auto r = proj.row(i);
            buf << csv_escape(proj.ids()[i]) << ',' << csv_escape(store.at(proj.ids()[i]).field_label) << ','
                << format_double(r[0]) << ',' << format_double(r[1]) << '\n';
        }
        const auto name = "projection_" + slug(set.embedder_id()) + ".csv";
        w.text(artifact::report_dir(c) / name, buf.str());
        outputs.push_back(name);
    }
    ojson rep;
    rep["outputs"] = outputs;
    rep["consensus"] = eval.at("consensus").get<bool>();
    rep["ranking"] = eval.at("ranking").at("rmse").get<std::vector<std::string>>();
    w.json(artifact::report_dir(c) / "report.json", rep);
    return rep;
}

}  // namespace litfield

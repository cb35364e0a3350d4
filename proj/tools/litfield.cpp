// litfield command-line driver. One subcommand per pipeline stage; every stage
// reads the same config file and writes under its output directory.
//
// Exit codes: 0 success, 2 validation error, 3 missing upstream artifact or
// provider failure, 1 anything unexpected.

#include <iostream>
#include <optional>

// Eigen must be parsed before httplib pulls in <resolv.h>, whose `_res` macro
// collides with Eigen parameter names.
#include "litfield/litfield.hpp"

#include "CLI11.hpp"
#include "litfield/http_transport.hpp"

namespace {

using Command = litfield::ojson (*)(const litfield::PipelineConfig&, litfield::Log&);

litfield::ojson run_ingest(const litfield::PipelineConfig& c, litfield::Log& log) {
    if (c.provider == "live") {
        litfield::HttpTransport transport(c.api_base_url);
        return litfield::cmd_ingest(c, log, &transport);
    }
    return litfield::cmd_ingest(c, log);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"litfield: semantic density and citation-rate modelling over document embeddings"};
    app.set_version_flag("--version", std::string(litfield::kToolVersion));
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    bool quiet = false;
    bool no_stratify = false, comparison_table = false, binary = false;

    const std::vector<std::pair<const char*, Command>> commands{
        {"ingest", run_ingest},
        {"embed", litfield::cmd_embed},
        {"expand", litfield::cmd_expand},
        {"metrics", litfield::cmd_metrics},
        {"fit", litfield::cmd_fit},
        {"evaluate", litfield::cmd_evaluate},
        {"classify", litfield::cmd_classify},
        {"report", litfield::cmd_report},
    };
    const std::map<std::string, std::string> help{
        {"ingest", "fetch and validate payloads into the corpus store"},
        {"embed", "build BOW vectors and import external embeddings"},
        {"expand", "grow one atlas per field and mark converged publications"},
        {"metrics", "compute density, asymmetry and citation rates"},
        {"fit", "split, standardize and fit the configured regression models"},
        {"evaluate", "score models on the held-out split and rank them"},
        {"classify", "field classification accuracy per embedder"},
        {"report", "effect sizes, model comparison and 2-D projections"},
    };
    for (const auto& [name, _] : commands) {
        auto* sub = app.add_subcommand(name, help.at(name));
        sub->add_option("--config", config_path, "pipeline config (TOML)")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "override the config's master seed");
        sub->add_option("--out", out_dir, "override the output directory");
        sub->add_flag("-q,--quiet", quiet, "suppress warnings and the JSON summary");
        if (std::string(name) == "fit") sub->add_flag("--no-stratify", no_stratify, "split without stratifying by field");
        if (std::string(name) == "evaluate") sub->add_flag("--comparison-table", comparison_table, "also print the model comparison table");
        if (std::string(name) == "embed") sub->add_flag("--binary", binary, "write embedding matrices in binary form");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        nlohmann::json patch = nlohmann::json::object();
        if (no_stratify) patch["split"]["stratify"] = false;
        if (binary) patch["embed"]["encoding"] = "binary";
        auto cfg = litfield::load_config(config_path, seed,
                                         out_dir ? std::optional<std::filesystem::path>(*out_dir) : std::nullopt, patch);
        litfield::Log log;
        if (quiet) log.err = nullptr;
        for (const auto& [name, fn] : commands) {
            if (!app.got_subcommand(name)) continue;
            auto summary = fn(cfg, log);
            if (!quiet) std::cout << summary.dump(2) << "\n";
            if (comparison_table) std::cout << litfield::read_file(litfield::artifact::comparison_table(cfg));
        }
        return 0;
    } catch (const litfield::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}

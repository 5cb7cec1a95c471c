#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include "refsearch/catalog.hpp"
#include "refsearch/errors.hpp"
#include "refsearch/pipeline.hpp"
#include "refsearch/serve.hpp"
#include "refsearch/synthetic.hpp"

namespace {

using namespace refsearch;

PipelineConfig load_effective_config(const std::string& config_path,
                                     const std::optional<std::uint64_t>& seed_override,
                                     const std::optional<std::size_t>& m_override,
                                     const std::optional<std::size_t>& k_override,
                                     const std::optional<double>& gamma_override) {
    PipelineConfig config = load_config(config_path);
    if (seed_override) {
        config.seed = *seed_override;
        config.aae.seed = config.seed;
        config.dae.seed = config.seed + 1;
        config.ga.seed = config.seed + 2;
    }
    if (m_override) config.search.candidate_budget = *m_override;
    if (k_override) config.search.top_k = *k_override;
    if (gamma_override) config.search.min_score = *gamma_override;
    if (const char* dir = std::getenv("REFSEARCH_ARTIFACTS")) config.artifact_dir = dir;
    config.validate();
    return config;
}

int run_query(const PipelineConfig& config, const std::string& request,
              const std::string& batch_file) {
    const auto index_path = config.artifact_dir / kIndexFile;
    if (!std::filesystem::exists(index_path)) {
        std::cerr << "no index at " << index_path << "; run the build-index stage first\n";
        return 1;
    }
    const Index index = Index::load(index_path);

    if (!batch_file.empty()) {
        std::ifstream in(batch_file);
        if (!in) {
            std::cerr << "cannot open batch file " << batch_file << "\n";
            return 1;
        }
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::cout << handle_query_line(index, config.search, line) << "\n";
        }
        return 0;
    }
    std::cout << handle_query_line(index, config.search, request) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"refsearch: product-to-product vector search"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed_override;
    std::optional<std::size_t> m_override, k_override;
    std::optional<double> gamma_override;
    app.add_option("--config", config_path, "pipeline config JSON")->required();
    app.add_option("--seed", seed_override, "override the pipeline seed");
    app.add_option("--M", m_override, "override the candidate budget");
    app.add_option("--K", k_override, "override the result count");
    app.add_option("--gamma", gamma_override, "override the minimum cosine similarity");

    for (const auto& stage : all_stages()) app.add_subcommand(stage, "run the " + stage + " stage");
    auto* run = app.add_subcommand("run", "run several stages in order");
    std::vector<std::string> run_stages = all_stages();
    run->add_option("--stage", run_stages, "stages to run (default: all)");

    auto* query = app.add_subcommand("query", "query the built index");
    std::string request = R"({"id": ""})";
    std::string batch_file;
    query->add_option("--request", request, "NDJSON request line");
    query->add_option("--batch", batch_file, "file of NDJSON request lines");

    auto* serve = app.add_subcommand("serve", "serve queries over a unix socket");
    std::string socket_path = "refsearch.sock";
    serve->add_option("--socket", socket_path, "unix socket path");

    auto* gen = app.add_subcommand("gen-synthetic", "write a synthetic catalog");
    std::size_t gen_count = 1000;
    int gen_clusters = 10;
    double gen_missing = 0.2;
    std::string gen_out = "catalog.jsonl";
    gen->add_option("--count", gen_count, "number of products");
    gen->add_option("--clusters", gen_clusters, "number of category clusters");
    gen->add_option("--missing", gen_missing, "per-field missing probability");
    gen->add_option("--out", gen_out, "output JSONL path");

    CLI11_PARSE(app, argc, argv);

    try {
        const PipelineConfig config =
            load_effective_config(config_path, seed_override, m_override, k_override, gamma_override);

        for (const auto& stage : all_stages()) {
            if (app.get_subcommand(stage)->parsed()) {
                run_pipeline(config, {stage});
                return 0;
            }
        }
        if (run->parsed()) {
            run_pipeline(config, run_stages);
            return 0;
        }
        if (query->parsed()) return run_query(config, request, batch_file);
        if (serve->parsed()) {
            const auto index_path = config.artifact_dir / kIndexFile;
            auto index = std::make_shared<const Index>(Index::load(index_path));
            QueryServer server(index, config.search);
            server.start(socket_path);
            std::cout << "serving " << index->size() << " products on " << socket_path << "\n";
            std::cout << "press enter to stop\n";
            std::cin.get();
            server.stop();
            return 0;
        }
        if (gen->parsed()) {
            CatalogOptions options;
            options.count = gen_count;
            options.clusters = gen_clusters;
            options.field_order = config.field_order;
            options.missing_rates.assign(config.field_order.size(), gen_missing);
            // Keep the category field always present; it doubles as the
            // evaluation label.
            for (std::size_t f = 0; f < config.field_order.size(); ++f)
                if (config.field_order[f] == "category") options.missing_rates[f] = 0.0;
            options.seed = config.seed;
            write_catalog(gen_out, make_catalog(options));
            std::cout << "wrote " << gen_count << " products to " << gen_out << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

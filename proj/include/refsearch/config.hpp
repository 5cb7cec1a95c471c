#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "refsearch/attention_autoencoder.hpp"
#include "refsearch/binary_encoder.hpp"
#include "refsearch/search_index.hpp"
#include "refsearch/threshold_optimizer.hpp"

namespace refsearch {

struct VectorizerConfig {
    std::string backend = "hashing";  // "hashing" | "table"
    std::filesystem::path table_path;
    std::uint64_t hash_seed = 0;
    int min_gram = 3;
    int max_gram = 5;
};

struct EvalConfig {
    std::size_t query_count = 200;
    std::vector<int> k_values = {1, 5, 10, 50};
    bool recall_vs_exact = true;
};

struct PipelineConfig {
    std::vector<std::string> field_order = {"title", "description", "brand", "bullet_points",
                                            "category"};
    int embedding_dim = 100;        // d
    int code_width = 32;            // d'
    int attention_hidden = 32;      // h_a
    int reconstruction_hidden = 64; // h_r
    int encoder_hidden = 64;        // h_e

    VectorizerConfig vectorizer;
    AaeTrainOptions aae;
    DaeTrainOptions dae;
    GaConfig ga;
    SearchConfig search;
    EvalConfig eval;

    std::filesystem::path catalog_path;
    std::filesystem::path artifact_dir = "artifacts";
    std::uint64_t seed = 0;

    AaeDims aae_dims() const {
        return {embedding_dim, static_cast<int>(field_order.size()), attention_hidden,
                reconstruction_hidden};
    }
    DaeDims dae_dims() const { return {embedding_dim, encoder_hidden, code_width}; }

    void validate() const;

    // Hash over the fields that determine training and index artifacts;
    // query-time search defaults deliberately excluded.
    std::uint64_t stage_hash() const;
};

PipelineConfig config_from_json(const std::string& json_text);
std::string config_to_json(const PipelineConfig& config);
PipelineConfig load_config(const std::filesystem::path& path);

}  // namespace refsearch

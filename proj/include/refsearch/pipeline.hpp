#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "refsearch/config.hpp"

namespace refsearch {

inline constexpr const char* kStageTrainAae = "train-aae";
inline constexpr const char* kStageTrainDae = "train-dae";
inline constexpr const char* kStageOptimizeThresholds = "optimize-thresholds";
inline constexpr const char* kStageBuildIndex = "build-index";
inline constexpr const char* kStageEvaluate = "evaluate";

std::vector<std::string> all_stages();

// Artifact filenames under the artifact directory.
inline constexpr const char* kAaeCheckpointFile = "aae.ckpt.json";
inline constexpr const char* kEmbeddingsFile = "embeddings.bin";
inline constexpr const char* kEncoderCheckpointFile = "encoder.ckpt.json";
inline constexpr const char* kGaTraceFile = "ga_trace.csv";
inline constexpr const char* kIndexFile = "index.bin";
inline constexpr const char* kManifestFile = "manifest.json";

// Runs the named stages in order. Every stage writes its artifacts plus
// a manifest entry (input hashes, seed, timings) and refuses upstream
// artifacts whose recorded config hash differs from the current one.
void run_pipeline(const PipelineConfig& config, const std::vector<std::string>& stages);

// Stored alongside checkpoints so later stages can rebuild the full
// query path without re-reading the catalog.
struct EmbeddingArtifact {
    int dimension = 0;
    std::uint64_t config_hash = 0;
    std::vector<std::string> ids;
    std::vector<float> rows;  // row-major unit rows
};

void save_embeddings(const std::filesystem::path& path, const EmbeddingArtifact& artifact);
EmbeddingArtifact load_embeddings(const std::filesystem::path& path);

}  // namespace refsearch

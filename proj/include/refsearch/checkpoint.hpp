#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "refsearch/attention_autoencoder.hpp"
#include "refsearch/binary_encoder.hpp"
#include "refsearch/field_vectorizer.hpp"

namespace refsearch {

// Everything needed to embed and encode a query: the field vectorizer,
// the trained attention auto-encoder, and the binary encoder with its
// thresholding vector. Vectorizer and AAE are optional for indexes
// built from precomputed embeddings.
struct ModelBundle {
    std::vector<std::string> field_order;
    std::optional<FieldVectorizer> vectorizer;
    std::optional<AttentionParams> attention;
    std::optional<AaeDecoderParams> aae_decoder;
    std::optional<DaeParams> dae;
    Eigen::VectorXd thresholds;
    std::uint64_t config_hash = 0;

    int embedding_dim() const;
    int code_width() const { return static_cast<int>(thresholds.size()); }

    bool can_embed_records() const { return vectorizer.has_value() && attention.has_value(); }
    bool can_encode() const { return dae.has_value() && thresholds.size() > 0; }

    // Full query path: record -> field embeddings -> attention
    // aggregation -> unit embedding.
    Eigen::VectorXd embed_record(const ProductRecord& record) const;
    BinaryCode encode_embedding(const Eigen::VectorXd& unit_embedding) const;
};

// Versioned JSON tensor container.
std::string bundle_to_json(const ModelBundle& bundle);
ModelBundle bundle_from_json(const std::string& json_text);

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_bundle(const std::filesystem::path& path);

}  // namespace refsearch

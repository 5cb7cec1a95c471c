#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "refsearch/errors.hpp"

namespace refsearch {

// One catalog entry. Absent map keys are missing fields.
struct ProductRecord {
    std::string id;
    std::map<std::string, std::string> fields;
};

// Pretrained word vectors in word2vec text format.
struct VectorTable {
    int dimension = 0;
    std::unordered_map<std::string, Eigen::VectorXd> vectors;
};

// Deterministic character-n-gram feature hashing; the trainingless
// stand-in for a pretrained subword model.
struct HashingVectorizerConfig {
    int dimension = 100;
    std::uint64_t seed = 0;
    int min_gram = 3;
    int max_gram = 5;
};

// Per-field embedding columns for one product. Column j is the zero
// vector exactly when present[j] is false.
struct FieldEmbeddingSet {
    Eigen::MatrixXd columns;       // d x m
    std::vector<bool> present;     // m

    int field_count() const { return static_cast<int>(columns.cols()); }
    int dimension() const { return static_cast<int>(columns.rows()); }
};

// Reads "count dim" header followed by one "token v1 ... vd" line each.
// Duplicate tokens keep the last occurrence.
VectorTable load_vector_table(const std::filesystem::path& path);

std::vector<std::string> tokenize(std::string_view text);

class FieldVectorizer {
public:
    explicit FieldVectorizer(VectorTable table);
    explicit FieldVectorizer(HashingVectorizerConfig config);

    int dimension() const { return dimension_; }
    bool is_hashing() const { return std::holds_alternative<HashingVectorizerConfig>(backend_); }
    const HashingVectorizerConfig& hashing_config() const {
        return std::get<HashingVectorizerConfig>(backend_);
    }
    const VectorTable& table() const { return std::get<VectorTable>(backend_); }

    // L2-normalized mean of token vectors (table) or hashed n-gram
    // vectors (hashing). Empty text or zero vocabulary coverage gives
    // the zero vector.
    Eigen::VectorXd embed_field(std::string_view text) const;

    // Throws UnembeddableError when every field embeds to zero.
    FieldEmbeddingSet embed_product_fields(const ProductRecord& record,
                                           const std::vector<std::string>& field_order) const;

private:
    std::variant<VectorTable, HashingVectorizerConfig> backend_;
    int dimension_;
};

}  // namespace refsearch

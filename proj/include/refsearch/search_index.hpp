#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "refsearch/checkpoint.hpp"

namespace refsearch {

struct SearchConfig {
    std::size_t candidate_budget = 4000;  // M
    std::size_t top_k = 10;               // K
    std::optional<double> min_score;      // gamma, cosine lower bound
    bool exclude_query_id = true;

    void validate() const;
};

struct SearchResult {
    struct Hit {
        std::string id;
        double score;
    };
    std::vector<Hit> hits;  // descending score, ties by ascending id
    std::size_t candidates_scanned = 0;
    std::size_t buckets_touched = 0;
};

struct BuildReport {
    std::size_t indexed = 0;
    std::vector<std::string> skipped_ids;  // unembeddable products
};

// Immutable snapshot of the product pool: unit-norm float32 embedding
// rows, packed binary codes, and the code -> rows partition. Snapshots
// are safe for unlimited concurrent searches; add_product returns a new
// snapshot and never mutates in place.
class Index {
public:
    static Index build(const std::vector<ProductRecord>& products, ModelBundle models,
                       BuildReport* report = nullptr);

    // Pool supplied as precomputed embeddings (rows are normalized here).
    static Index build_from_embeddings(std::vector<std::string> ids,
                                       std::vector<float> row_major_embeddings,
                                       ModelBundle models);

    Index add_product(const ProductRecord& record) const;
    Index add_embedding(const std::string& id, std::span<const double> embedding) const;

    SearchResult search(const ProductRecord& query, const SearchConfig& config) const;
    SearchResult search_embedding(std::span<const double> embedding, const SearchConfig& config,
                                  const std::string* exclude_id = nullptr) const;
    // Query by an already-indexed product using its stored row and code.
    SearchResult search_id(const std::string& id, const SearchConfig& config) const;

    // Rows of the ranked buckets (Hamming distance ascending, code value
    // ascending) up to the minimal whole-bucket cover of at least
    // min(M, size()) candidates.
    std::vector<std::uint32_t> candidate_rows(BinaryCode query_code, std::size_t budget,
                                              std::size_t* buckets_touched = nullptr) const;

    void save(const std::filesystem::path& path) const;
    static Index load(const std::filesystem::path& path);

    std::size_t size() const { return ids_.size(); }
    int dimension() const { return dimension_; }
    int code_width() const { return models_ ? models_->code_width() : 0; }
    const std::vector<std::string>& ids() const { return ids_; }
    std::span<const float> row(std::uint32_t r) const {
        return {embeddings_.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(dimension_),
                static_cast<std::size_t>(dimension_)};
    }
    BinaryCode code(std::uint32_t r) const { return codes_[r]; }
    const std::vector<BinaryCode>& codes() const { return codes_; }
    std::size_t bucket_count() const { return unique_codes_.size(); }
    const std::vector<BinaryCode>& unique_codes() const { return unique_codes_; }
    std::span<const std::uint32_t> bucket(std::size_t bucket_index) const {
        return {bucket_rows_.data() + bucket_offsets_[bucket_index],
                bucket_offsets_[bucket_index + 1] - bucket_offsets_[bucket_index]};
    }
    const ModelBundle& models() const { return *models_; }
    std::optional<std::uint32_t> row_of(const std::string& id) const;

private:
    Index() = default;
    void rebuild_buckets();
    void append_row(const std::string& id, const Eigen::VectorXd& unit_embedding);
    SearchResult rank_candidates(std::span<const float> query_row, BinaryCode query_code,
                                 const SearchConfig& config, const std::string* exclude_id) const;

    int dimension_ = 0;
    std::vector<std::string> ids_;
    std::unordered_map<std::string, std::uint32_t> id_to_row_;
    std::vector<float> embeddings_;  // row-major, unit rows
    std::vector<BinaryCode> codes_;
    std::vector<BinaryCode> unique_codes_;       // ascending
    std::vector<std::uint32_t> bucket_offsets_;  // size bucket_count()+1
    std::vector<std::uint32_t> bucket_rows_;     // rows grouped by bucket
    std::shared_ptr<const ModelBundle> models_;
};

}  // namespace refsearch

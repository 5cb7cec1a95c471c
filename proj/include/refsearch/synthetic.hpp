#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "refsearch/field_vectorizer.hpp"
#include "refsearch/threshold_optimizer.hpp"

namespace refsearch {

// Seeded generators used by the evaluation harness and tests. Everything
// here is a pure function of its arguments.

struct EmbeddingPool {
    std::vector<std::string> ids;     // p000000, p000001, ...
    std::vector<float> rows;          // row-major n x dim, unit rows
    std::vector<int> cluster_labels;
    int dimension = 0;
};

// Gaussian mixture on the unit sphere: cluster centers drawn once, rows
// are center + noise, each L2-normalized.
EmbeddingPool make_embedding_pool(std::size_t count, int dimension, int clusters,
                                  double within_cluster_std, std::uint64_t seed);

struct FieldDatasetOptions {
    std::size_t count = 1000;
    int field_count = 5;
    int dimension = 100;
    int clusters = 10;
    double within_cluster_std = 0.1;
    // Per-field probability of being missing; resized/truncated to
    // field_count, default 0.
    std::vector<double> missing_rates;
    // Fields listed here get a fresh random direction per product
    // instead of the cluster signal.
    std::vector<int> noise_fields;
    std::uint64_t seed = 0;
};

struct FieldDataset {
    std::vector<FieldEmbeddingSet> items;
    std::vector<int> cluster_labels;
};

FieldDataset make_field_dataset(const FieldDatasetOptions& options);

struct CatalogOptions {
    std::size_t count = 1000;
    int clusters = 10;
    int tokens_per_cluster = 40;
    int tokens_per_field = 8;
    std::vector<std::string> field_order = {"title", "description", "brand", "bullet_points",
                                            "category"};
    // Per-field missing probability, aligned with field_order.
    std::vector<double> missing_rates;
    std::uint64_t seed = 0;
};

// Text products whose fields draw tokens from per-cluster vocabularies;
// the "category" field carries the cluster name, which doubles as the
// label for precision evaluation.
std::vector<ProductRecord> make_catalog(const CatalogOptions& options);

inline std::string category_of_cluster(int cluster) {
    return "category cluster" + std::to_string(cluster);
}

struct LogitPoolOptions {
    std::size_t count = 100000;
    int width = 32;
    int clusters = 50;
    double within_cluster_std = 0.35;  // pre-sigmoid
    // Cluster weights follow 1/rank^skew; skew 0 is uniform, larger
    // values concentrate mass in the first clusters.
    double skew = 1.5;
    std::uint64_t seed = 0;
};

// Skewed-cluster logits in (0,1)^width: pre-sigmoid Gaussian clusters of
// power-law weights pushed through the sigmoid.
LogitPool make_skewed_logit_pool(const LogitPoolOptions& options);

}  // namespace refsearch

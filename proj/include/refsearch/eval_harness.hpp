#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "refsearch/search_index.hpp"
#include "refsearch/threshold_optimizer.hpp"

namespace refsearch {

struct MetricReport {
    std::string metric;
    std::vector<int> k_values;
    std::vector<double> scores;            // aligned with k_values
    std::size_t excluded_queries = 0;      // queries with too few results
    std::map<std::string, double> metadata;

    std::string to_json() const;
    std::string to_csv() const;
};

// Fraction of queries returning at least K results. Unembeddable queries
// count as zero results.
MetricReport return_rate(const std::vector<std::size_t>& results_per_query,
                         const std::vector<int>& k_values);

struct QueryOutcome {
    std::string query_id;
    std::vector<SearchResult::Hit> hits;
};

// Category-proxy precision: per query, the fraction of the top-K results
// sharing the query's label; queries with fewer than K results are
// excluded and counted. Throws when a retrieved product has no label.
MetricReport precision_at_k(const std::vector<QueryOutcome>& outcomes,
                            const std::unordered_map<std::string, std::string>& labels, int k);

// Exact top-K rows over the whole pool by cosine, excluding the query
// row itself. Brute force; the ground truth for recall.
std::vector<std::uint32_t> exact_knn(const Index& index, std::uint32_t query_row, std::size_t k);

// Overlap of the approximate top-K with the exact top-K, averaged over
// query rows. Ground truth can be cached on disk keyed by the pool hash.
MetricReport recall_vs_exact(const Index& index, const std::vector<std::uint32_t>& query_rows,
                             const std::vector<int>& k_values, std::size_t candidate_budget,
                             const std::optional<std::filesystem::path>& cache_dir = std::nullopt);

struct BucketStatsReport {
    std::size_t bucket_count = 0;
    double mean_size = 0.0;
    std::uint32_t max_size = 0;
    std::map<std::uint32_t, std::size_t> size_histogram;  // size -> how many buckets

    std::string to_json() const;
};

BucketStatsReport bucket_stats(const Index& index);
BucketStatsReport bucket_stats(const BucketSizeHistogram& histogram);

}  // namespace refsearch

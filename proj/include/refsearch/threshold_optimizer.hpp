#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <unordered_map>
#include <vector>

#include "refsearch/binary_encoder.hpp"

namespace refsearch {

struct GaConfig {
    int population = 100;
    double mutation_rate = 0.2;
    int crossover_pairs = 100;
    int generations = 200;
    double target_bucket_size = 100.0;  // chi
    std::uint64_t seed = 0;
};

// Logit rows stored by dimension for streaming threshold comparisons.
class LogitPool {
public:
    LogitPool() = default;
    // row-major n x width input
    LogitPool(const double* rows, std::size_t n, int width);
    explicit LogitPool(const Eigen::MatrixXd& rows);

    std::size_t size() const { return n_; }
    int width() const { return width_; }
    double value(std::size_t row, int dim) const {
        return by_dim_[static_cast<std::size_t>(dim) * n_ + row];
    }
    const double* dim_values(int dim) const { return by_dim_.data() + static_cast<std::size_t>(dim) * n_; }

    // Packed codes for every row under the given thresholds.
    void binarize_all(const Eigen::VectorXd& thresholds, std::vector<BinaryCode>& out) const;

private:
    std::size_t n_ = 0;
    int width_ = 0;
    std::vector<double> by_dim_;  // width blocks of n values
};

struct BucketSizeHistogram {
    std::unordered_map<BinaryCode, std::uint32_t> counts;
    std::size_t total = 0;

    std::size_t bucket_count() const { return counts.size(); }
    double mean_size() const {
        return counts.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(counts.size());
    }
    std::uint32_t max_size() const;
};

BucketSizeHistogram bucket_sizes(const LogitPool& pool, const Eigen::VectorXd& thresholds);

// sum over non-empty buckets of chi^4 / n_i^2 + n_i^2.
double objective(const BucketSizeHistogram& hist, double chi);

struct GenerationStats {
    int generation = 0;
    double best_objective = 0.0;  // best seen so far, non-increasing
    double mean_objective = 0.0;  // current population mean
    std::size_t bucket_count = 0;
    double mean_bucket_size = 0.0;
    std::uint32_t max_bucket_size = 0;
};

struct ThresholdResult {
    Eigen::VectorXd thresholds;
    double best_objective = 0.0;
    std::vector<GenerationStats> trace;  // entry 0 is the initial population
};

// Continuous GA: arithmetic-blend crossover, per-gene Gaussian mutation,
// elitist truncation survival. The all-0.5 vanilla thresholding vector is
// seeded into the initial population, so the result never falls below it.
ThresholdResult optimize_thresholds(const LogitPool& pool, const GaConfig& config);

void write_trace_csv(const std::filesystem::path& path, const std::vector<GenerationStats>& trace,
                     std::uint64_t config_hash);

}  // namespace refsearch

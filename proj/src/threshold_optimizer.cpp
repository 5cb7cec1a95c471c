#include "refsearch/threshold_optimizer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "refsearch/errors.hpp"

namespace refsearch {

namespace {

constexpr double kThresholdFloor = 1e-6;
constexpr double kThresholdCeil = 1.0 - 1e-6;

// Two-pass radix sort on 16-bit digits; orders of magnitude faster than
// a hash map when counting buckets inside the GA fitness loop.
void radix_sort_codes(std::vector<BinaryCode>& codes, std::vector<BinaryCode>& scratch) {
    const std::size_t n = codes.size();
    scratch.resize(n);
    std::array<std::uint32_t, 65536> histogram;
    for (int pass = 0; pass < 2; ++pass) {
        const int shift = pass * 16;
        histogram.fill(0);
        for (BinaryCode c : codes) ++histogram[(c >> shift) & 0xffffu];
        std::uint32_t offset = 0;
        for (auto& h : histogram) {
            const std::uint32_t count = h;
            h = offset;
            offset += count;
        }
        for (BinaryCode c : codes) scratch[histogram[(c >> shift) & 0xffffu]++] = c;
        codes.swap(scratch);
    }
}

// Objective over the run lengths of a sorted code array.
double objective_from_sorted(const std::vector<BinaryCode>& sorted, double chi) {
    const double chi4 = chi * chi * chi * chi;
    double sum = 0.0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i + 1;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        const double n = static_cast<double>(j - i);
        sum += chi4 / (n * n) + n * n;
        i = j;
    }
    return sum;
}

struct Fitness {
    double value;
    std::size_t buckets;
    std::uint32_t max_bucket;
};

Fitness evaluate(const LogitPool& pool, const Eigen::VectorXd& thresholds, double chi,
                 std::vector<BinaryCode>& codes, std::vector<BinaryCode>& scratch) {
    pool.binarize_all(thresholds, codes);
    radix_sort_codes(codes, scratch);
    const double chi4 = chi * chi * chi * chi;
    double sum = 0.0;
    std::size_t buckets = 0;
    std::uint32_t max_bucket = 0;
    std::size_t i = 0;
    while (i < codes.size()) {
        std::size_t j = i + 1;
        while (j < codes.size() && codes[j] == codes[i]) ++j;
        const auto run = static_cast<std::uint32_t>(j - i);
        const double n = static_cast<double>(run);
        sum += chi4 / (n * n) + n * n;
        ++buckets;
        max_bucket = std::max(max_bucket, run);
        i = j;
    }
    return {sum, buckets, max_bucket};
}

}  // namespace

LogitPool::LogitPool(const double* rows, std::size_t n, int width) : n_(n), width_(width) {
    if (width < 1 || width > kMaxCodeWidth) throw ConfigError("logit pool width must be in [1, 32]");
    by_dim_.resize(n * static_cast<std::size_t>(width));
    for (std::size_t r = 0; r < n; ++r)
        for (int d = 0; d < width; ++d)
            by_dim_[static_cast<std::size_t>(d) * n + r] = rows[r * static_cast<std::size_t>(width) + d];
}

LogitPool::LogitPool(const Eigen::MatrixXd& rows)
    : n_(static_cast<std::size_t>(rows.rows())), width_(static_cast<int>(rows.cols())) {
    if (width_ < 1 || width_ > kMaxCodeWidth) throw ConfigError("logit pool width must be in [1, 32]");
    by_dim_.resize(n_ * static_cast<std::size_t>(width_));
    for (int d = 0; d < width_; ++d)
        for (std::size_t r = 0; r < n_; ++r)
            by_dim_[static_cast<std::size_t>(d) * n_ + r] = rows(static_cast<Eigen::Index>(r), d);
}

void LogitPool::binarize_all(const Eigen::VectorXd& thresholds, std::vector<BinaryCode>& out) const {
    if (thresholds.size() != width_) throw ConfigError("threshold width mismatch");
    out.assign(n_, 0);
    for (int d = 0; d < width_; ++d) {
        const double theta = thresholds[d];
        const double* z = dim_values(d);
        const BinaryCode bit = BinaryCode{1} << d;
        for (std::size_t r = 0; r < n_; ++r) {
            if (z[r] >= theta) out[r] |= bit;
        }
    }
}

std::uint32_t BucketSizeHistogram::max_size() const {
    std::uint32_t max = 0;
    for (const auto& [code, count] : counts) max = std::max(max, count);
    return max;
}

BucketSizeHistogram bucket_sizes(const LogitPool& pool, const Eigen::VectorXd& thresholds) {
    std::vector<BinaryCode> codes;
    pool.binarize_all(thresholds, codes);
    BucketSizeHistogram hist;
    hist.total = codes.size();
    hist.counts.reserve(codes.size() / 4 + 1);
    for (BinaryCode c : codes) ++hist.counts[c];
    return hist;
}

double objective(const BucketSizeHistogram& hist, double chi) {
    const double chi4 = chi * chi * chi * chi;
    double sum = 0.0;
    for (const auto& [code, count] : hist.counts) {
        const double n = static_cast<double>(count);
        sum += chi4 / (n * n) + n * n;
    }
    return sum;
}

ThresholdResult optimize_thresholds(const LogitPool& pool, const GaConfig& config) {
    if (config.population < 2) throw ConfigError("GA population must be at least 2");
    if (config.mutation_rate < 0.0 || config.mutation_rate > 1.0)
        throw ConfigError("GA mutation rate must be in [0, 1]");
    if (config.target_bucket_size <= 0.0) throw ConfigError("GA target bucket size must be positive");
    if (pool.size() == 0) throw ConfigError("GA needs a nonempty logit pool");

    const int width = pool.width();
    const auto pop_size = static_cast<std::size_t>(config.population);
    std::mt19937_64 rng(config.seed);

    // Per-dimension 5th/95th percentiles and standard deviation of the
    // logits, for genome initialization and mutation scale.
    Eigen::VectorXd lo(width), hi(width), sigma(width);
    {
        std::vector<double> values(pool.size());
        for (int d = 0; d < width; ++d) {
            const double* z = pool.dim_values(d);
            values.assign(z, z + pool.size());
            std::sort(values.begin(), values.end());
            const auto n = values.size();
            lo[d] = values[static_cast<std::size_t>(0.05 * static_cast<double>(n - 1))];
            hi[d] = values[static_cast<std::size_t>(0.95 * static_cast<double>(n - 1))];
            if (hi[d] < lo[d]) std::swap(lo[d], hi[d]);
            double mean = 0.0;
            for (double v : values) mean += v;
            mean /= static_cast<double>(n);
            double var = 0.0;
            for (double v : values) var += (v - mean) * (v - mean);
            sigma[d] = std::sqrt(var / static_cast<double>(n));
        }
    }

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto clamp_gene = [](double g) { return std::clamp(g, kThresholdFloor, kThresholdCeil); };

    std::vector<Eigen::VectorXd> population;
    population.reserve(pop_size);
    population.push_back(Eigen::VectorXd::Constant(width, 0.5));  // vanilla semantic hashing
    while (population.size() < pop_size) {
        Eigen::VectorXd genome(width);
        for (int d = 0; d < width; ++d)
            genome[d] = clamp_gene(lo[d] + (hi[d] - lo[d]) * unit(rng));
        population.push_back(std::move(genome));
    }

    std::vector<BinaryCode> codes, scratch;
    const double chi = config.target_bucket_size;
    std::vector<Fitness> fitness(pop_size);
    for (std::size_t i = 0; i < pop_size; ++i)
        fitness[i] = evaluate(pool, population[i], chi, codes, scratch);

    auto best_index = [&](const std::vector<Fitness>& fits) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < fits.size(); ++i)
            if (fits[i].value < fits[best].value) best = i;
        return best;
    };

    ThresholdResult result;
    std::size_t b0 = best_index(fitness);
    result.thresholds = population[b0];
    result.best_objective = fitness[b0].value;
    Fitness best_fitness = fitness[b0];

    auto record = [&](int generation) {
        double mean = 0.0;
        for (const auto& f : fitness) mean += f.value;
        mean /= static_cast<double>(fitness.size());
        result.trace.push_back({generation, result.best_objective, mean, best_fitness.buckets,
                                static_cast<double>(pool.size()) /
                                    static_cast<double>(best_fitness.buckets),
                                best_fitness.max_bucket});
    };
    record(0);

    std::uniform_int_distribution<std::size_t> pick(0, pop_size - 1);
    std::normal_distribution<double> gauss(0.0, 1.0);

    struct Individual {
        Eigen::VectorXd genome;
        Fitness fitness;
    };

    for (int gen = 1; gen <= config.generations; ++gen) {
        // Selection, crossover, and mutation consume the single seeded
        // stream in a fixed order.
        std::vector<Eigen::VectorXd> children;
        children.reserve(static_cast<std::size_t>(config.crossover_pairs) * 2);
        for (int pair = 0; pair < config.crossover_pairs; ++pair) {
            const auto& a = population[pick(rng)];
            const auto& b = population[pick(rng)];
            for (int child = 0; child < 2; ++child) {
                const double lambda = unit(rng);
                Eigen::VectorXd genome = lambda * a + (1.0 - lambda) * b;
                for (int d = 0; d < width; ++d) {
                    if (unit(rng) < config.mutation_rate)
                        genome[d] += gauss(rng) * 0.1 * sigma[d];
                    genome[d] = clamp_gene(genome[d]);
                }
                children.push_back(std::move(genome));
            }
        }

        std::vector<Individual> merged;
        merged.reserve(pop_size + children.size());
        for (std::size_t i = 0; i < pop_size; ++i)
            merged.push_back({std::move(population[i]), fitness[i]});
        for (auto& child : children) {
            const Fitness f = evaluate(pool, child, chi, codes, scratch);
            merged.push_back({std::move(child), f});
        }

        // Elitist truncation; stable so equal-fitness survivors keep a
        // deterministic order.
        std::stable_sort(merged.begin(), merged.end(),
                         [](const Individual& x, const Individual& y) {
                             return x.fitness.value < y.fitness.value;
                         });
        merged.resize(pop_size);
        for (std::size_t i = 0; i < pop_size; ++i) {
            population[i] = std::move(merged[i].genome);
            fitness[i] = merged[i].fitness;
        }

        if (fitness[0].value < result.best_objective) {
            result.best_objective = fitness[0].value;
            result.thresholds = population[0];
            best_fitness = fitness[0];
        }
        record(gen);
    }
    return result;
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<GenerationStats>& trace,
                     std::uint64_t config_hash) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write GA trace: " + path.string());
    char hash_hex[32];
    std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                  static_cast<unsigned long long>(config_hash));
    out << "# config_hash=" << hash_hex << "\n";
    out << "generation,best_objective,mean_objective,bucket_count,mean_bucket_size,max_bucket_size\n";
    char line[256];
    for (const auto& g : trace) {
        std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%zu,%.17g,%u\n", g.generation,
                      g.best_objective, g.mean_objective, g.bucket_count, g.mean_bucket_size,
                      g.max_bucket_size);
        out << line;
    }
}

}  // namespace refsearch

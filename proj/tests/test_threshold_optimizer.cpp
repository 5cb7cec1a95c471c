#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "refsearch/errors.hpp"
#include "refsearch/synthetic.hpp"
#include "refsearch/threshold_optimizer.hpp"
#include "test_util.hpp"

using namespace refsearch;

namespace {

LogitPool pool_from_rows(const std::vector<std::vector<double>>& rows) {
    std::vector<double> flat;
    for (const auto& row : rows) flat.insert(flat.end(), row.begin(), row.end());
    return LogitPool(flat.data(), rows.size(), static_cast<int>(rows.front().size()));
}

}  // namespace

TEST_CASE("bucket_sizes") {
    SUBCASE("identical rows land in one bucket") {
        const auto pool = pool_from_rows({{0.7, 0.2}, {0.7, 0.2}, {0.7, 0.2}});
        const auto hist = bucket_sizes(pool, Eigen::Vector2d(0.5, 0.5));
        CHECK(hist.bucket_count() == 1);
        CHECK(hist.counts.at(0b01u) == 3);
        CHECK(hist.total == 3);
    }
    SUBCASE("thresholds above every logit give the all-zeros bucket") {
        const auto pool = pool_from_rows({{0.1, 0.9}, {0.4, 0.6}, {0.2, 0.3}, {0.8, 0.5}});
        const auto hist = bucket_sizes(pool, Eigen::Vector2d(0.95, 0.95));
        CHECK(hist.bucket_count() == 1);
        CHECK(hist.counts.at(0u) == 4);
    }
    SUBCASE("hand-placed logits around 0.5 split into three buckets") {
        // codes: (0.6,0.6)->11, (0.6,0.4)->01, (0.4,0.6)->10, (0.7,0.8)->11
        const auto pool = pool_from_rows({{0.6, 0.6}, {0.6, 0.4}, {0.4, 0.6}, {0.7, 0.8}});
        const auto hist = bucket_sizes(pool, Eigen::Vector2d(0.5, 0.5));
        CHECK(hist.bucket_count() == 3);
        CHECK(hist.counts.at(0b11u) == 2);
        CHECK(hist.counts.at(0b01u) == 1);
        CHECK(hist.counts.at(0b10u) == 1);
        CHECK(hist.max_size() == 2);
        CHECK(hist.mean_size() == doctest::Approx(4.0 / 3.0));
    }
}

TEST_CASE("objective") {
    SUBCASE("single bucket at chi is 2 chi^2") {
        BucketSizeHistogram hist;
        hist.counts[0u] = 100;
        hist.total = 100;
        CHECK(objective(hist, 100.0) == doctest::Approx(20000.0));
    }
    SUBCASE("singleton bucket under chi = 100") {
        BucketSizeHistogram hist;
        hist.counts[0u] = 1;
        hist.total = 1;
        CHECK(objective(hist, 100.0) == doctest::Approx(1e8 + 1.0));
    }
    SUBCASE("two buckets of two at chi = 2") {
        BucketSizeHistogram hist;
        hist.counts[0u] = 2;
        hist.counts[1u] = 2;
        hist.total = 4;
        CHECK(objective(hist, 2.0) == doctest::Approx(16.0));
    }
    SUBCASE("permutation invariance over bucket identities") {
        BucketSizeHistogram a, b;
        a.counts = {{0u, 5}, {1u, 9}, {2u, 2}};
        b.counts = {{7u, 2}, {9u, 5}, {3u, 9}};
        a.total = b.total = 16;
        CHECK(objective(a, 4.0) == doctest::Approx(objective(b, 4.0)));
    }
    SUBCASE("single-bucket summand is minimized at chi") {
        BucketSizeHistogram at_chi;
        at_chi.counts[0u] = 10;
        at_chi.total = 10;
        const double best = objective(at_chi, 10.0);
        for (std::uint32_t n : {1u, 2u, 5u, 9u, 11u, 20u, 100u}) {
            BucketSizeHistogram other;
            other.counts[0u] = n;
            other.total = n;
            CHECK(best < objective(other, 10.0));
        }
    }
}

TEST_CASE("objective agrees between histogram and GA fast path") {
    // The GA evaluates fitness on sorted run lengths; cross-check against
    // the histogram route on a real pool.
    LogitPoolOptions options;
    options.count = 5000;
    options.width = 12;
    options.clusters = 8;
    options.seed = 5;
    const LogitPool pool = make_skewed_logit_pool(options);

    GaConfig config;
    config.population = 10;
    config.generations = 0;
    config.crossover_pairs = 5;
    config.target_bucket_size = 20.0;
    config.seed = 9;
    const ThresholdResult result = optimize_thresholds(pool, config);
    const double via_hist = objective(bucket_sizes(pool, result.thresholds), 20.0);
    CHECK(result.best_objective == doctest::Approx(via_hist).epsilon(1e-12));
}

TEST_CASE("optimize_thresholds") {
    LogitPoolOptions options;
    options.count = 4000;
    options.width = 10;
    options.clusters = 6;
    options.seed = 21;
    const LogitPool pool = make_skewed_logit_pool(options);

    GaConfig config;
    config.population = 30;
    config.crossover_pairs = 30;
    config.generations = 25;
    config.target_bucket_size = 50.0;
    config.seed = 33;

    SUBCASE("zero generations returns the best of the initial population") {
        GaConfig zero = config;
        zero.generations = 0;
        const ThresholdResult result = optimize_thresholds(pool, zero);
        CHECK(result.trace.size() == 1);
        CHECK(result.trace[0].best_objective == doctest::Approx(result.best_objective));
    }
    SUBCASE("never worse than vanilla 0.5 thresholds") {
        const ThresholdResult result = optimize_thresholds(pool, config);
        const double vanilla =
            objective(bucket_sizes(pool, Eigen::VectorXd::Constant(10, 0.5)), 50.0);
        CHECK(result.best_objective <= vanilla);
    }
    SUBCASE("best trace is non-increasing and matches the returned best") {
        const ThresholdResult result = optimize_thresholds(pool, config);
        REQUIRE(result.trace.size() == 26);
        for (std::size_t g = 1; g < result.trace.size(); ++g)
            CHECK(result.trace[g].best_objective <= result.trace[g - 1].best_objective);
        CHECK(result.trace.back().best_objective == doctest::Approx(result.best_objective));
    }
    SUBCASE("same seed twice is identical") {
        const ThresholdResult a = optimize_thresholds(pool, config);
        const ThresholdResult b = optimize_thresholds(pool, config);
        CHECK(a.thresholds == b.thresholds);
        CHECK(a.best_objective == b.best_objective);
        REQUIRE(a.trace.size() == b.trace.size());
        for (std::size_t g = 0; g < a.trace.size(); ++g) {
            CHECK(a.trace[g].best_objective == b.trace[g].best_objective);
            CHECK(a.trace[g].mean_objective == b.trace[g].mean_objective);
        }
    }
    SUBCASE("thresholds stay in the open unit interval") {
        const ThresholdResult result = optimize_thresholds(pool, config);
        for (int d = 0; d < 10; ++d) {
            CHECK(result.thresholds[d] > 0.0);
            CHECK(result.thresholds[d] < 1.0);
        }
    }
    SUBCASE("invalid configs are rejected") {
        GaConfig bad = config;
        bad.population = 1;
        CHECK_THROWS_AS(optimize_thresholds(pool, bad), ConfigError);
        bad = config;
        bad.mutation_rate = 1.5;
        CHECK_THROWS_AS(optimize_thresholds(pool, bad), ConfigError);
        bad = config;
        bad.target_bucket_size = 0.0;
        CHECK_THROWS_AS(optimize_thresholds(pool, bad), ConfigError);
    }
}

TEST_CASE("trace CSV is written with a header and one row per generation") {
    LogitPoolOptions options;
    options.count = 500;
    options.width = 6;
    options.clusters = 3;
    options.seed = 2;
    const LogitPool pool = make_skewed_logit_pool(options);

    GaConfig config;
    config.population = 8;
    config.crossover_pairs = 8;
    config.generations = 4;
    config.target_bucket_size = 10.0;
    config.seed = 3;
    const ThresholdResult result = optimize_thresholds(pool, config);

    testutil::TempDir tmp;
    const auto path = tmp.file("trace.csv");
    write_trace_csv(path, result.trace, 0xabcdef0123456789ull);
    const std::string text = testutil::read_file(path);
    CHECK(text.find("# config_hash=abcdef0123456789") != std::string::npos);
    CHECK(text.find("generation,best_objective,mean_objective,bucket_count,mean_bucket_size,"
                    "max_bucket_size") != std::string::npos);
    // header comment + column header + 5 generation rows (0..4)
    CHECK(std::count(text.begin(), text.end(), '\n') == 7);
}

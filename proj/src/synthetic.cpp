#include "refsearch/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "refsearch/errors.hpp"

namespace refsearch {

namespace {

std::string padded_id(std::size_t i) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "p%06zu", i);
    return buf;
}

Eigen::VectorXd random_unit(int dim, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v[i] = gauss(rng);
    const double norm = v.norm();
    return norm > 0 ? Eigen::VectorXd(v / norm) : Eigen::VectorXd::Unit(dim, 0);
}

}  // namespace

EmbeddingPool make_embedding_pool(std::size_t count, int dimension, int clusters,
                                  double within_cluster_std, std::uint64_t seed) {
    if (count == 0 || dimension <= 0 || clusters <= 0)
        throw ConfigError("embedding pool parameters must be positive");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_int_distribution<int> pick_cluster(0, clusters - 1);

    std::vector<Eigen::VectorXd> centers;
    centers.reserve(static_cast<std::size_t>(clusters));
    for (int c = 0; c < clusters; ++c) centers.push_back(random_unit(dimension, rng));

    EmbeddingPool pool;
    pool.dimension = dimension;
    pool.ids.reserve(count);
    pool.rows.reserve(count * static_cast<std::size_t>(dimension));
    pool.cluster_labels.reserve(count);

    Eigen::VectorXd row(dimension);
    for (std::size_t i = 0; i < count; ++i) {
        const int c = pick_cluster(rng);
        for (int d = 0; d < dimension; ++d)
            row[d] = centers[static_cast<std::size_t>(c)][d] + within_cluster_std * gauss(rng);
        const double norm = row.norm();
        for (int d = 0; d < dimension; ++d)
            pool.rows.push_back(static_cast<float>(row[d] / norm));
        pool.ids.push_back(padded_id(i));
        pool.cluster_labels.push_back(c);
    }
    return pool;
}

FieldDataset make_field_dataset(const FieldDatasetOptions& options) {
    if (options.count == 0 || options.field_count <= 0 || options.dimension <= 0 ||
        options.clusters <= 0)
        throw ConfigError("field dataset parameters must be positive");

    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> pick_cluster(0, options.clusters - 1);

    std::vector<double> missing = options.missing_rates;
    missing.resize(static_cast<std::size_t>(options.field_count), 0.0);
    std::vector<bool> is_noise(static_cast<std::size_t>(options.field_count), false);
    for (int f : options.noise_fields)
        if (f >= 0 && f < options.field_count) is_noise[static_cast<std::size_t>(f)] = true;

    // One center per (cluster, field) so informative fields of one
    // product share a cluster but differ per field.
    std::vector<Eigen::VectorXd> centers;
    centers.reserve(static_cast<std::size_t>(options.clusters * options.field_count));
    for (int c = 0; c < options.clusters; ++c)
        for (int f = 0; f < options.field_count; ++f)
            centers.push_back(random_unit(options.dimension, rng));

    FieldDataset dataset;
    dataset.items.reserve(options.count);
    dataset.cluster_labels.reserve(options.count);

    for (std::size_t i = 0; i < options.count; ++i) {
        const int c = pick_cluster(rng);
        FieldEmbeddingSet fields;
        fields.columns = Eigen::MatrixXd::Zero(options.dimension, options.field_count);
        fields.present.assign(static_cast<std::size_t>(options.field_count), false);

        for (int f = 0; f < options.field_count; ++f) {
            const auto fu = static_cast<std::size_t>(f);
            if (unit(rng) < missing[fu]) continue;
            Eigen::VectorXd col(options.dimension);
            if (is_noise[fu]) {
                col = random_unit(options.dimension, rng);
            } else {
                const auto center_index =
                    static_cast<std::size_t>(c * options.field_count + f);
                for (int d = 0; d < options.dimension; ++d)
                    col[d] = centers[center_index][d] + options.within_cluster_std * gauss(rng);
            }
            const double norm = col.norm();
            if (norm < 1e-12) continue;
            fields.columns.col(f) = col / norm;
            fields.present[fu] = true;
        }

        // Keep every product embeddable: force the first field present.
        if (std::none_of(fields.present.begin(), fields.present.end(), [](bool b) { return b; })) {
            const auto center_index = static_cast<std::size_t>(c * options.field_count);
            fields.columns.col(0) = centers[center_index];
            fields.present[0] = true;
        }

        dataset.items.push_back(std::move(fields));
        dataset.cluster_labels.push_back(c);
    }
    return dataset;
}

std::vector<ProductRecord> make_catalog(const CatalogOptions& options) {
    if (options.count == 0 || options.clusters <= 0 || options.field_order.empty())
        throw ConfigError("catalog generator parameters must be positive");

    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> pick_cluster(0, options.clusters - 1);
    std::uniform_int_distribution<int> pick_token(0, options.tokens_per_cluster - 1);

    std::vector<double> missing = options.missing_rates;
    missing.resize(options.field_order.size(), 0.0);

    std::vector<ProductRecord> records;
    records.reserve(options.count);
    for (std::size_t i = 0; i < options.count; ++i) {
        const int c = pick_cluster(rng);
        ProductRecord record;
        record.id = padded_id(i);
        for (std::size_t f = 0; f < options.field_order.size(); ++f) {
            const std::string& name = options.field_order[f];
            if (name == "category") {
                record.fields[name] = category_of_cluster(c);
                continue;
            }
            if (unit(rng) < missing[f]) continue;
            std::string text;
            for (int t = 0; t < options.tokens_per_field; ++t) {
                if (t) text += ' ';
                // Vocabularies are disjoint across clusters and fields.
                text += "w" + std::to_string(c) + "f" + std::to_string(f) + "t" +
                        std::to_string(pick_token(rng));
            }
            record.fields[name] = text;
        }
        if (record.fields.empty()) record.fields[options.field_order[0]] = "filler token";
        records.push_back(std::move(record));
    }
    return records;
}

LogitPool make_skewed_logit_pool(const LogitPoolOptions& options) {
    if (options.count == 0 || options.width <= 0 || options.clusters <= 0)
        throw ConfigError("logit pool parameters must be positive");

    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Power-law cluster weights.
    std::vector<double> cumulative(static_cast<std::size_t>(options.clusters));
    double total = 0.0;
    for (int c = 0; c < options.clusters; ++c) {
        total += 1.0 / std::pow(static_cast<double>(c + 1), options.skew);
        cumulative[static_cast<std::size_t>(c)] = total;
    }
    for (auto& w : cumulative) w /= total;

    std::vector<Eigen::VectorXd> centers;
    centers.reserve(static_cast<std::size_t>(options.clusters));
    for (int c = 0; c < options.clusters; ++c) {
        Eigen::VectorXd center(options.width);
        for (int d = 0; d < options.width; ++d) center[d] = 1.2 * gauss(rng);
        centers.push_back(std::move(center));
    }

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> rows(options.count * static_cast<std::size_t>(options.width));
    for (std::size_t i = 0; i < options.count; ++i) {
        const double u = unit(rng);
        std::size_t c = 0;
        while (c + 1 < cumulative.size() && cumulative[c] < u) ++c;
        for (int d = 0; d < options.width; ++d) {
            const double pre = centers[c][d] + options.within_cluster_std * gauss(rng);
            rows[i * static_cast<std::size_t>(options.width) + static_cast<std::size_t>(d)] =
                1.0 / (1.0 + std::exp(-pre));
        }
    }
    return LogitPool(rows.data(), options.count, options.width);
}

}  // namespace refsearch

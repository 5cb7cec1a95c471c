#include "refsearch/eval_harness.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "refsearch/errors.hpp"
#include "refsearch/hashing.hpp"

namespace refsearch {

using nlohmann::json;

std::string MetricReport::to_json() const {
    json j;
    j["metric"] = metric;
    j["k_values"] = k_values;
    j["scores"] = scores;
    j["excluded_queries"] = excluded_queries;
    json meta = json::object();
    for (const auto& [key, value] : metadata) meta[key] = value;
    j["metadata"] = std::move(meta);
    return j.dump(2);
}

std::string MetricReport::to_csv() const {
    std::ostringstream out;
    out << "metric,k,score\n";
    char line[160];
    for (std::size_t i = 0; i < k_values.size(); ++i) {
        std::snprintf(line, sizeof(line), "%s,%d,%.17g\n", metric.c_str(), k_values[i], scores[i]);
        out << line;
    }
    return out.str();
}

MetricReport return_rate(const std::vector<std::size_t>& results_per_query,
                         const std::vector<int>& k_values) {
    if (results_per_query.empty()) throw ConfigError("return_rate: empty query set");
    MetricReport report;
    report.metric = "return_rate";
    report.k_values = k_values;
    for (int k : k_values) {
        std::size_t hits = 0;
        for (std::size_t count : results_per_query)
            if (count >= static_cast<std::size_t>(k)) ++hits;
        report.scores.push_back(static_cast<double>(hits) /
                                static_cast<double>(results_per_query.size()));
    }
    return report;
}

MetricReport precision_at_k(const std::vector<QueryOutcome>& outcomes,
                            const std::unordered_map<std::string, std::string>& labels, int k) {
    if (outcomes.empty()) throw ConfigError("precision_at_k: empty query set");
    MetricReport report;
    report.metric = "precision_at_k_category_proxy";
    report.k_values = {k};

    double sum = 0.0;
    std::size_t included = 0;
    for (const auto& outcome : outcomes) {
        if (outcome.hits.size() < static_cast<std::size_t>(k)) {
            ++report.excluded_queries;
            continue;
        }
        auto query_label = labels.find(outcome.query_id);
        if (query_label == labels.end())
            throw ConfigError("precision_at_k: no label for query " + outcome.query_id);
        std::size_t matches = 0;
        for (int i = 0; i < k; ++i) {
            const auto& hit = outcome.hits[static_cast<std::size_t>(i)];
            auto hit_label = labels.find(hit.id);
            if (hit_label == labels.end())
                throw ConfigError("precision_at_k: no label for product " + hit.id);
            if (hit_label->second == query_label->second) ++matches;
        }
        sum += static_cast<double>(matches) / static_cast<double>(k);
        ++included;
    }
    report.scores.push_back(included ? sum / static_cast<double>(included) : 0.0);
    report.metadata["included_queries"] = static_cast<double>(included);
    return report;
}

std::vector<std::uint32_t> exact_knn(const Index& index, std::uint32_t query_row, std::size_t k) {
    const auto n = index.size();
    if (k > n - 1) throw ConfigError("exact_knn: K exceeds pool size minus one");

    const auto query = index.row(query_row);
    std::vector<std::pair<double, std::uint32_t>> scored;
    scored.reserve(n - 1);
    for (std::uint32_t r = 0; r < n; ++r) {
        if (r == query_row) continue;
        const auto row = index.row(r);
        double acc = 0.0;
        for (std::size_t i = 0; i < row.size(); ++i)
            acc += static_cast<double>(row[i]) * static_cast<double>(query[i]);
        scored.emplace_back(acc, r);
    }
    const auto& ids = index.ids();
    auto better = [&](const std::pair<double, std::uint32_t>& a,
                      const std::pair<double, std::uint32_t>& b) {
        if (a.first != b.first) return a.first > b.first;
        return ids[a.second] < ids[b.second];
    };
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(),
                      better);
    std::vector<std::uint32_t> result(k);
    for (std::size_t i = 0; i < k; ++i) result[i] = scored[i].second;
    return result;
}

namespace {

std::uint64_t ground_truth_key(const Index& index, const std::vector<std::uint32_t>& query_rows,
                               std::size_t k) {
    Fnv64 h;
    h.update_value(index.size());
    h.update_value(index.dimension());
    for (std::uint32_t r = 0; r < index.size(); ++r) {
        const auto row = index.row(r);
        h.update(row.data(), row.size() * sizeof(float));
    }
    for (std::uint32_t q : query_rows) h.update_value(q);
    h.update_value(k);
    return h.digest();
}

// Cache layout: u64 query count, u64 k, then per query k u32 rows.
std::optional<std::vector<std::vector<std::uint32_t>>> load_ground_truth(
    const std::filesystem::path& path, std::size_t queries, std::size_t k) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::uint64_t stored_queries = 0, stored_k = 0;
    in.read(reinterpret_cast<char*>(&stored_queries), sizeof(stored_queries));
    in.read(reinterpret_cast<char*>(&stored_k), sizeof(stored_k));
    if (!in || stored_queries != queries || stored_k != k) return std::nullopt;
    std::vector<std::vector<std::uint32_t>> lists(queries, std::vector<std::uint32_t>(k));
    for (auto& list : lists) {
        in.read(reinterpret_cast<char*>(list.data()),
                static_cast<std::streamsize>(k * sizeof(std::uint32_t)));
        if (!in) return std::nullopt;
    }
    return lists;
}

void store_ground_truth(const std::filesystem::path& path,
                        const std::vector<std::vector<std::uint32_t>>& lists, std::size_t k) {
    std::ofstream out(path, std::ios::binary);
    if (!out) return;  // cache is best-effort
    const std::uint64_t queries = lists.size(), stored_k = k;
    out.write(reinterpret_cast<const char*>(&queries), sizeof(queries));
    out.write(reinterpret_cast<const char*>(&stored_k), sizeof(stored_k));
    for (const auto& list : lists)
        out.write(reinterpret_cast<const char*>(list.data()),
                  static_cast<std::streamsize>(k * sizeof(std::uint32_t)));
}

}  // namespace

MetricReport recall_vs_exact(const Index& index, const std::vector<std::uint32_t>& query_rows,
                             const std::vector<int>& k_values, std::size_t candidate_budget,
                             const std::optional<std::filesystem::path>& cache_dir) {
    if (query_rows.empty()) throw ConfigError("recall_vs_exact: empty query set");
    if (k_values.empty()) throw ConfigError("recall_vs_exact: no K values");
    const auto max_k = static_cast<std::size_t>(*std::max_element(k_values.begin(), k_values.end()));
    if (max_k > index.size() - 1) throw ConfigError("recall_vs_exact: K exceeds pool size minus one");

    // Ground truth, possibly cached.
    std::vector<std::vector<std::uint32_t>> exact;
    std::optional<std::filesystem::path> cache_path;
    if (cache_dir) {
        std::filesystem::create_directories(*cache_dir);
        char name[48];
        std::snprintf(name, sizeof(name), "knn_%016llx.bin",
                      static_cast<unsigned long long>(ground_truth_key(index, query_rows, max_k)));
        cache_path = *cache_dir / name;
        if (auto cached = load_ground_truth(*cache_path, query_rows.size(), max_k))
            exact = std::move(*cached);
    }
    if (exact.empty()) {
        exact.reserve(query_rows.size());
        for (std::uint32_t q : query_rows) exact.push_back(exact_knn(index, q, max_k));
        if (cache_path) store_ground_truth(*cache_path, exact, max_k);
    }

    SearchConfig config;
    config.candidate_budget = std::max(candidate_budget, max_k);
    config.top_k = max_k;

    MetricReport report;
    report.metric = "recall_vs_exact";
    report.k_values = k_values;
    report.metadata["M"] = static_cast<double>(candidate_budget);
    report.metadata["N"] = static_cast<double>(index.size());
    report.metadata["queries"] = static_cast<double>(query_rows.size());

    std::vector<double> sums(k_values.size(), 0.0);
    const auto& ids = index.ids();
    for (std::size_t qi = 0; qi < query_rows.size(); ++qi) {
        const auto result = index.search_id(ids[query_rows[qi]], config);
        std::vector<std::uint32_t> approx;
        approx.reserve(result.hits.size());
        for (const auto& hit : result.hits) approx.push_back(*index.row_of(hit.id));

        for (std::size_t ki = 0; ki < k_values.size(); ++ki) {
            const auto k = static_cast<std::size_t>(k_values[ki]);
            std::unordered_set<std::uint32_t> truth(exact[qi].begin(),
                                                    exact[qi].begin() + static_cast<std::ptrdiff_t>(k));
            std::size_t overlap = 0;
            for (std::size_t i = 0; i < std::min(k, approx.size()); ++i)
                if (truth.count(approx[i])) ++overlap;
            sums[ki] += static_cast<double>(overlap) / static_cast<double>(k);
        }
    }
    for (double s : sums)
        report.scores.push_back(s / static_cast<double>(query_rows.size()));
    return report;
}

std::string BucketStatsReport::to_json() const {
    json j;
    j["bucket_count"] = bucket_count;
    j["mean_size"] = mean_size;
    j["max_size"] = max_size;
    json hist = json::object();
    for (const auto& [size, buckets] : size_histogram) hist[std::to_string(size)] = buckets;
    j["size_histogram"] = std::move(hist);
    return j.dump(2);
}

BucketStatsReport bucket_stats(const Index& index) {
    BucketStatsReport report;
    report.bucket_count = index.bucket_count();
    std::size_t total = 0;
    for (std::size_t b = 0; b < index.bucket_count(); ++b) {
        const auto size = static_cast<std::uint32_t>(index.bucket(b).size());
        total += size;
        report.max_size = std::max(report.max_size, size);
        ++report.size_histogram[size];
    }
    report.mean_size = report.bucket_count
                           ? static_cast<double>(total) / static_cast<double>(report.bucket_count)
                           : 0.0;
    return report;
}

BucketStatsReport bucket_stats(const BucketSizeHistogram& histogram) {
    BucketStatsReport report;
    report.bucket_count = histogram.bucket_count();
    report.mean_size = histogram.mean_size();
    report.max_size = histogram.max_size();
    for (const auto& [code, count] : histogram.counts) ++report.size_histogram[count];
    return report;
}

}  // namespace refsearch

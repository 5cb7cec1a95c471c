#include "refsearch/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "refsearch/catalog.hpp"
#include "refsearch/checkpoint.hpp"
#include "refsearch/errors.hpp"
#include "refsearch/eval_harness.hpp"
#include "refsearch/hashing.hpp"

namespace refsearch {

using nlohmann::json;

namespace {

constexpr char kEmbeddingsMagic[8] = {'R', 'P', 'S', 'E', 'M', 'B', '0', '1'};

std::uint64_t hash_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot hash missing file: " + path.string());
    Fnv64 h;
    char buffer[1 << 16];
    while (in.read(buffer, sizeof(buffer)) || in.gcount() > 0)
        h.update(buffer, static_cast<std::size_t>(in.gcount()));
    return h.digest();
}

std::string hex64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void require_artifact(const std::filesystem::path& path, const std::string& stage,
                      const std::string& producer) {
    if (!std::filesystem::exists(path)) {
        throw Error("stage " + stage + " requires artifact " + path.filename().string() +
                    " produced by stage " + producer + "; run that stage first");
    }
}

void check_config_hash(std::uint64_t artifact_hash, std::uint64_t current,
                       const std::string& artifact, const std::string& producer) {
    if (artifact_hash != current) {
        throw ConfigError("artifact " + artifact + " was produced under config hash " +
                          hex64(artifact_hash) + " but the current config hashes to " +
                          hex64(current) + "; re-run stage " + producer);
    }
}

class Manifest {
public:
    Manifest(const std::filesystem::path& path, std::uint64_t config_hash) : path_(path) {
        if (std::filesystem::exists(path_)) {
            std::ifstream in(path_);
            doc_ = json::parse(in, nullptr, false);
            if (doc_.is_discarded() || !doc_.is_object()) doc_ = json::object();
        } else {
            doc_ = json::object();
        }
        doc_["config_hash"] = hex64(config_hash);
        if (!doc_.contains("stages")) doc_["stages"] = json::object();
    }

    void record(const std::string& stage, const json& inputs, const json& outputs,
                std::uint64_t seed, double duration_ms) {
        json entry;
        entry["inputs"] = inputs;
        entry["outputs"] = outputs;
        entry["seed"] = seed;
        entry["duration_ms"] = duration_ms;
        doc_["stages"][stage] = std::move(entry);
        std::ofstream out(path_);
        out << doc_.dump(2) << "\n";
    }

private:
    std::filesystem::path path_;
    json doc_;
};

FieldVectorizer make_vectorizer(const PipelineConfig& config) {
    if (config.vectorizer.backend == "table") {
        VectorTable table = load_vector_table(config.vectorizer.table_path);
        if (table.dimension != config.embedding_dim)
            throw ConfigError("vector table dimension " + std::to_string(table.dimension) +
                              " does not match configured embedding_dim " +
                              std::to_string(config.embedding_dim));
        return FieldVectorizer(std::move(table));
    }
    HashingVectorizerConfig cfg;
    cfg.dimension = config.embedding_dim;
    cfg.seed = config.vectorizer.hash_seed;
    cfg.min_gram = config.vectorizer.min_gram;
    cfg.max_gram = config.vectorizer.max_gram;
    return FieldVectorizer(cfg);
}

struct StageTimer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double elapsed_ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    }
};

void stage_train_aae(const PipelineConfig& config, Manifest& manifest) {
    StageTimer timer;
    require_artifact(config.catalog_path, kStageTrainAae, "(catalog input)");
    const Catalog catalog = ingest_catalog(config.catalog_path);
    if (!catalog.issues.empty())
        std::cerr << "[train-aae] skipped " << catalog.issues.size() << " malformed catalog lines\n";

    const FieldVectorizer vectorizer = make_vectorizer(config);

    std::vector<FieldEmbeddingSet> dataset;
    std::vector<std::string> ids;
    std::vector<std::string> skipped;
    dataset.reserve(catalog.records.size());
    for (const auto& record : catalog.records) {
        try {
            dataset.push_back(vectorizer.embed_product_fields(record, config.field_order));
            ids.push_back(record.id);
        } catch (const UnembeddableError&) {
            skipped.push_back(record.id);
        }
    }
    if (dataset.empty()) throw Error("train-aae: no embeddable products in catalog");
    if (!skipped.empty())
        std::cerr << "[train-aae] skipped " << skipped.size() << " unembeddable products\n";

    const AaeModel model = train_aae(dataset, config.aae_dims(), config.aae);
    std::cout << "[train-aae] loss " << model.loss_curve.front() << " -> "
              << model.loss_curve.back() << " over " << config.aae.epochs << " epochs\n";

    ModelBundle bundle;
    bundle.field_order = config.field_order;
    bundle.vectorizer = vectorizer;
    bundle.attention = model.attention;
    bundle.aae_decoder = model.decoder;
    bundle.config_hash = config.stage_hash();
    const auto ckpt_path = config.artifact_dir / kAaeCheckpointFile;
    save_bundle(bundle, ckpt_path);

    EmbeddingArtifact embeddings;
    embeddings.dimension = config.embedding_dim;
    embeddings.config_hash = config.stage_hash();
    embeddings.ids = std::move(ids);
    embeddings.rows.reserve(dataset.size() * static_cast<std::size_t>(config.embedding_dim));
    for (const auto& fields : dataset) {
        const Eigen::VectorXd v = aggregate(fields, model.attention);
        for (Eigen::Index i = 0; i < v.size(); ++i)
            embeddings.rows.push_back(static_cast<float>(v[i]));
    }
    const auto emb_path = config.artifact_dir / kEmbeddingsFile;
    save_embeddings(emb_path, embeddings);

    manifest.record(kStageTrainAae,
                    {{config.catalog_path.string(), hex64(hash_file(config.catalog_path))}},
                    {ckpt_path.filename().string(), emb_path.filename().string()}, config.seed,
                    timer.elapsed_ms());
}

void stage_train_dae(const PipelineConfig& config, Manifest& manifest) {
    StageTimer timer;
    const auto emb_path = config.artifact_dir / kEmbeddingsFile;
    require_artifact(emb_path, kStageTrainDae, kStageTrainAae);
    const EmbeddingArtifact embeddings = load_embeddings(emb_path);
    check_config_hash(embeddings.config_hash, config.stage_hash(), kEmbeddingsFile, kStageTrainAae);

    const auto n = embeddings.ids.size();
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(n), config.embedding_dim);
    for (std::size_t r = 0; r < n; ++r)
        for (int d = 0; d < config.embedding_dim; ++d)
            rows(static_cast<Eigen::Index>(r), d) =
                embeddings.rows[r * static_cast<std::size_t>(config.embedding_dim) +
                                static_cast<std::size_t>(d)];

    const DaeModel model = train_dae(rows, config.dae_dims(), config.dae);
    std::cout << "[train-dae] loss " << model.loss_curve.front() << " -> "
              << model.loss_curve.back() << " over " << config.dae.epochs << " epochs\n";

    ModelBundle bundle;
    bundle.dae = model.params;
    bundle.thresholds = Eigen::VectorXd::Constant(config.code_width, 0.5);
    bundle.config_hash = config.stage_hash();
    const auto ckpt_path = config.artifact_dir / kEncoderCheckpointFile;
    save_bundle(bundle, ckpt_path);

    manifest.record(kStageTrainDae, {{emb_path.filename().string(), hex64(hash_file(emb_path))}},
                    {ckpt_path.filename().string()}, config.seed, timer.elapsed_ms());
}

void stage_optimize_thresholds(const PipelineConfig& config, Manifest& manifest) {
    StageTimer timer;
    const auto emb_path = config.artifact_dir / kEmbeddingsFile;
    const auto ckpt_path = config.artifact_dir / kEncoderCheckpointFile;
    require_artifact(emb_path, kStageOptimizeThresholds, kStageTrainAae);
    require_artifact(ckpt_path, kStageOptimizeThresholds, kStageTrainDae);

    const EmbeddingArtifact embeddings = load_embeddings(emb_path);
    check_config_hash(embeddings.config_hash, config.stage_hash(), kEmbeddingsFile, kStageTrainAae);
    ModelBundle bundle = load_bundle(ckpt_path);
    check_config_hash(bundle.config_hash, config.stage_hash(), kEncoderCheckpointFile,
                      kStageTrainDae);
    if (!bundle.dae) throw FormatError("encoder checkpoint has no DAE parameters");

    const auto n = embeddings.ids.size();
    std::vector<double> logits(n * static_cast<std::size_t>(config.code_width));
    Eigen::VectorXd v(config.embedding_dim);
    for (std::size_t r = 0; r < n; ++r) {
        for (int d = 0; d < config.embedding_dim; ++d)
            v[d] = embeddings.rows[r * static_cast<std::size_t>(config.embedding_dim) +
                                   static_cast<std::size_t>(d)];
        const Eigen::VectorXd z = encode_logits(v, *bundle.dae);
        for (int i = 0; i < config.code_width; ++i)
            logits[r * static_cast<std::size_t>(config.code_width) + static_cast<std::size_t>(i)] =
                z[i];
    }
    const LogitPool pool(logits.data(), n, config.code_width);

    const ThresholdResult result = optimize_thresholds(pool, config.ga);
    std::cout << "[optimize-thresholds] objective " << result.trace.front().best_objective
              << " -> " << result.best_objective << " over " << config.ga.generations
              << " generations\n";

    bundle.thresholds = result.thresholds;
    bundle.config_hash = config.stage_hash();
    save_bundle(bundle, ckpt_path);
    const auto trace_path = config.artifact_dir / kGaTraceFile;
    write_trace_csv(trace_path, result.trace, config.stage_hash());

    manifest.record(kStageOptimizeThresholds,
                    {{emb_path.filename().string(), hex64(hash_file(emb_path))}},
                    {ckpt_path.filename().string(), trace_path.filename().string()},
                    config.ga.seed, timer.elapsed_ms());
}

void stage_build_index(const PipelineConfig& config, Manifest& manifest) {
    StageTimer timer;
    const auto emb_path = config.artifact_dir / kEmbeddingsFile;
    const auto aae_path = config.artifact_dir / kAaeCheckpointFile;
    const auto enc_path = config.artifact_dir / kEncoderCheckpointFile;
    require_artifact(emb_path, kStageBuildIndex, kStageTrainAae);
    require_artifact(aae_path, kStageBuildIndex, kStageTrainAae);
    require_artifact(enc_path, kStageBuildIndex, kStageTrainDae);

    EmbeddingArtifact embeddings = load_embeddings(emb_path);
    check_config_hash(embeddings.config_hash, config.stage_hash(), kEmbeddingsFile, kStageTrainAae);
    ModelBundle aae_bundle = load_bundle(aae_path);
    check_config_hash(aae_bundle.config_hash, config.stage_hash(), kAaeCheckpointFile,
                      kStageTrainAae);
    ModelBundle encoder_bundle = load_bundle(enc_path);
    check_config_hash(encoder_bundle.config_hash, config.stage_hash(), kEncoderCheckpointFile,
                      kStageTrainDae);

    ModelBundle merged = std::move(aae_bundle);
    merged.dae = std::move(encoder_bundle.dae);
    merged.thresholds = std::move(encoder_bundle.thresholds);
    merged.config_hash = config.stage_hash();

    const Index index = Index::build_from_embeddings(std::move(embeddings.ids),
                                                     std::move(embeddings.rows), std::move(merged));
    const auto index_path = config.artifact_dir / kIndexFile;
    index.save(index_path);
    std::cout << "[build-index] " << index.size() << " products in " << index.bucket_count()
              << " buckets\n";

    manifest.record(kStageBuildIndex,
                    {{emb_path.filename().string(), hex64(hash_file(emb_path))},
                     {enc_path.filename().string(), hex64(hash_file(enc_path))}},
                    {index_path.filename().string()}, config.seed, timer.elapsed_ms());
}

void stage_evaluate(const PipelineConfig& config, Manifest& manifest) {
    StageTimer timer;
    const auto index_path = config.artifact_dir / kIndexFile;
    require_artifact(index_path, kStageEvaluate, kStageBuildIndex);
    const Index index = Index::load(index_path);
    check_config_hash(index.models().config_hash, config.stage_hash(), kIndexFile,
                      kStageBuildIndex);

    std::vector<int> k_values;
    for (int k : config.eval.k_values)
        if (static_cast<std::size_t>(k) < index.size()) k_values.push_back(k);
    if (k_values.empty()) throw ConfigError("evaluate: every K exceeds the pool size");
    const auto max_k = static_cast<std::size_t>(*std::max_element(k_values.begin(), k_values.end()));

    // Deterministic query sample from the indexed pool.
    std::vector<std::uint32_t> all_rows(index.size());
    std::iota(all_rows.begin(), all_rows.end(), 0);
    std::mt19937_64 rng(config.seed + 3);
    std::shuffle(all_rows.begin(), all_rows.end(), rng);
    const std::size_t query_count = std::min(config.eval.query_count, index.size());
    std::vector<std::uint32_t> query_rows(all_rows.begin(),
                                          all_rows.begin() + static_cast<std::ptrdiff_t>(query_count));

    SearchConfig search_config = config.search;
    search_config.top_k = std::max<std::size_t>(max_k, search_config.top_k);
    search_config.candidate_budget =
        std::max(search_config.candidate_budget, search_config.top_k);

    std::vector<QueryOutcome> outcomes;
    std::vector<std::size_t> result_counts;
    outcomes.reserve(query_rows.size());
    for (std::uint32_t q : query_rows) {
        const auto& id = index.ids()[q];
        SearchResult result = index.search_id(id, search_config);
        result_counts.push_back(result.hits.size());
        outcomes.push_back({id, std::move(result.hits)});
    }

    std::filesystem::create_directories(config.artifact_dir);
    auto write_text = [&](const char* name, const std::string& text) {
        std::ofstream out(config.artifact_dir / name);
        out << text;
    };

    MetricReport rr = return_rate(result_counts, k_values);
    rr.metadata["M"] = static_cast<double>(search_config.candidate_budget);
    rr.metadata["N"] = static_cast<double>(index.size());
    rr.metadata["seed"] = static_cast<double>(config.seed);
    if (search_config.min_score) rr.metadata["gamma"] = *search_config.min_score;
    write_text("metrics_return_rate.json", rr.to_json());
    write_text("metrics_return_rate.csv", rr.to_csv());
    json output_names = json::array({"metrics_return_rate.json", "metrics_return_rate.csv"});

    // Category-proxy precision when every indexed product carries a
    // category label in the catalog.
    if (std::find(config.field_order.begin(), config.field_order.end(), "category") !=
            config.field_order.end() &&
        std::filesystem::exists(config.catalog_path)) {
        const Catalog catalog = ingest_catalog(config.catalog_path);
        std::unordered_map<std::string, std::string> labels;
        for (const auto& record : catalog.records) {
            auto it = record.fields.find("category");
            if (it != record.fields.end()) labels[record.id] = it->second;
        }
        bool complete = true;
        for (const auto& id : index.ids())
            if (!labels.count(id)) {
                complete = false;
                break;
            }
        if (complete) {
            for (int k : k_values) {
                MetricReport pr = precision_at_k(outcomes, labels, k);
                pr.metadata["M"] = static_cast<double>(search_config.candidate_budget);
                const std::string name = "metrics_precision_at_" + std::to_string(k) + ".json";
                write_text(name.c_str(), pr.to_json());
                output_names.push_back(name);
            }
        } else {
            std::cerr << "[evaluate] catalog lacks category labels for some indexed products; "
                         "precision skipped\n";
        }
    }

    if (config.eval.recall_vs_exact) {
        MetricReport recall =
            recall_vs_exact(index, query_rows, k_values, search_config.candidate_budget,
                            config.artifact_dir / "cache");
        recall.metadata["seed"] = static_cast<double>(config.seed);
        write_text("metrics_recall.json", recall.to_json());
        write_text("metrics_recall.csv", recall.to_csv());
        output_names.push_back("metrics_recall.json");
        output_names.push_back("metrics_recall.csv");
    }

    write_text("bucket_stats.json", bucket_stats(index).to_json());
    output_names.push_back("bucket_stats.json");

    manifest.record(kStageEvaluate,
                    {{index_path.filename().string(), hex64(hash_file(index_path))}}, output_names,
                    config.seed, timer.elapsed_ms());
}

}  // namespace

std::vector<std::string> all_stages() {
    return {kStageTrainAae, kStageTrainDae, kStageOptimizeThresholds, kStageBuildIndex,
            kStageEvaluate};
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingArtifact& artifact) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write embeddings: " + path.string());
    Fnv64 hash;
    auto write = [&](const void* data, std::size_t len) {
        out.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
        hash.update(data, len);
    };
    write(kEmbeddingsMagic, sizeof(kEmbeddingsMagic));
    const std::uint32_t version = 1;
    write(&version, sizeof(version));
    const auto dim = static_cast<std::uint32_t>(artifact.dimension);
    write(&dim, sizeof(dim));
    const auto n = static_cast<std::uint64_t>(artifact.ids.size());
    write(&n, sizeof(n));
    write(&artifact.config_hash, sizeof(artifact.config_hash));
    for (const auto& id : artifact.ids) {
        const auto len = static_cast<std::uint32_t>(id.size());
        write(&len, sizeof(len));
        write(id.data(), id.size());
    }
    write(artifact.rows.data(), artifact.rows.size() * sizeof(float));
    const std::uint64_t digest = hash.digest();
    out.write(reinterpret_cast<const char*>(&digest), sizeof(digest));
}

EmbeddingArtifact load_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read embeddings: " + path.string());
    std::string buffer((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buffer.size() < sizeof(kEmbeddingsMagic) + sizeof(std::uint64_t))
        throw FormatError("embeddings file truncated");
    const std::size_t body_len = buffer.size() - sizeof(std::uint64_t);
    std::uint64_t stored;
    std::memcpy(&stored, buffer.data() + body_len, sizeof(stored));
    if (fnv1a64(buffer.data(), body_len) != stored)
        throw ChecksumError("embeddings file checksum mismatch");

    std::size_t pos = 0;
    auto read = [&](void* data, std::size_t len) {
        if (pos + len > body_len) throw FormatError("embeddings file truncated");
        std::memcpy(data, buffer.data() + pos, len);
        pos += len;
    };
    char magic[sizeof(kEmbeddingsMagic)];
    read(magic, sizeof(magic));
    if (std::memcmp(magic, kEmbeddingsMagic, sizeof(magic)) != 0)
        throw FormatError("not a refsearch embeddings file");
    std::uint32_t version;
    read(&version, sizeof(version));
    if (version != 1) throw FormatError("unsupported embeddings file version");

    EmbeddingArtifact artifact;
    std::uint32_t dim;
    read(&dim, sizeof(dim));
    artifact.dimension = static_cast<int>(dim);
    std::uint64_t n;
    read(&n, sizeof(n));
    read(&artifact.config_hash, sizeof(artifact.config_hash));
    artifact.ids.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        std::uint32_t len;
        read(&len, sizeof(len));
        std::string id(len, '\0');
        read(id.data(), len);
        artifact.ids.push_back(std::move(id));
    }
    artifact.rows.resize(n * dim);
    read(artifact.rows.data(), artifact.rows.size() * sizeof(float));
    return artifact;
}

void run_pipeline(const PipelineConfig& config, const std::vector<std::string>& stages) {
    config.validate();
    std::filesystem::create_directories(config.artifact_dir);
    Manifest manifest(config.artifact_dir / kManifestFile, config.stage_hash());

    for (const auto& stage : stages) {
        std::cout << "== stage " << stage << "\n";
        if (stage == kStageTrainAae) {
            stage_train_aae(config, manifest);
        } else if (stage == kStageTrainDae) {
            stage_train_dae(config, manifest);
        } else if (stage == kStageOptimizeThresholds) {
            stage_optimize_thresholds(config, manifest);
        } else if (stage == kStageBuildIndex) {
            stage_build_index(config, manifest);
        } else if (stage == kStageEvaluate) {
            stage_evaluate(config, manifest);
        } else {
            throw ConfigError("unknown stage: " + stage);
        }
    }
}

}  // namespace refsearch

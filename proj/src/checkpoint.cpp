#include "refsearch/checkpoint.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "refsearch/errors.hpp"

namespace refsearch {

namespace {

using nlohmann::json;

constexpr const char* kFormatTag = "refsearch-checkpoint";
constexpr int kFormatVersion = 1;

json matrix_to_json(const Eigen::MatrixXd& m) {
    json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    std::vector<double> data(m.data(), m.data() + m.size());  // column-major
    j["data"] = std::move(data);
    return j;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols)
        throw FormatError("checkpoint tensor size mismatch");
    Eigen::MatrixXd m(rows, cols);
    std::copy(data.begin(), data.end(), m.data());
    return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from_json(const json& j) {
    const auto data = j.get<std::vector<double>>();
    Eigen::VectorXd v(static_cast<Eigen::Index>(data.size()));
    std::copy(data.begin(), data.end(), v.data());
    return v;
}

}  // namespace

int ModelBundle::embedding_dim() const {
    if (dae) return dae->input_dim();
    if (attention) return static_cast<int>(attention->hidden_w.cols());
    if (vectorizer) return vectorizer->dimension();
    return 0;
}

Eigen::VectorXd ModelBundle::embed_record(const ProductRecord& record) const {
    if (!can_embed_records())
        throw IndexError("model bundle has no vectorizer/attention for record queries");
    const FieldEmbeddingSet fields = vectorizer->embed_product_fields(record, field_order);
    return aggregate(fields, *attention);
}

BinaryCode ModelBundle::encode_embedding(const Eigen::VectorXd& unit_embedding) const {
    if (!can_encode()) throw IndexError("model bundle has no encoder");
    return binarize(encode_logits(unit_embedding, *dae), thresholds);
}

std::string bundle_to_json(const ModelBundle& bundle) {
    json j;
    j["format"] = kFormatTag;
    j["version"] = kFormatVersion;
    char hash_hex[32];
    std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                  static_cast<unsigned long long>(bundle.config_hash));
    j["config_hash"] = hash_hex;
    j["field_order"] = bundle.field_order;

    json dims;
    dims["d"] = bundle.embedding_dim();
    dims["m"] = bundle.field_order.size();
    dims["h_a"] = bundle.attention ? bundle.attention->hidden_w.rows() : 0;
    dims["h_r"] = bundle.aae_decoder ? bundle.aae_decoder->hidden_w.rows() : 0;
    dims["h_e"] = bundle.dae ? bundle.dae->enc1_w.rows() : 0;
    dims["code_width"] = bundle.code_width();
    j["dims"] = std::move(dims);

    if (bundle.vectorizer) {
        json v;
        if (bundle.vectorizer->is_hashing()) {
            const auto& cfg = bundle.vectorizer->hashing_config();
            v["backend"] = "hashing";
            v["dimension"] = cfg.dimension;
            v["seed"] = cfg.seed;
            v["min_gram"] = cfg.min_gram;
            v["max_gram"] = cfg.max_gram;
        } else {
            const auto& table = bundle.vectorizer->table();
            v["backend"] = "table";
            v["dimension"] = table.dimension;
            json entries = json::object();
            for (const auto& [token, vec] : table.vectors) entries[token] = vector_to_json(vec);
            v["vectors"] = std::move(entries);
        }
        j["vectorizer"] = std::move(v);
    }

    if (bundle.attention) {
        json a;
        a["hidden_w"] = matrix_to_json(bundle.attention->hidden_w);
        a["hidden_b"] = vector_to_json(bundle.attention->hidden_b);
        a["output_w"] = vector_to_json(bundle.attention->output_w);
        j["attention"] = std::move(a);
    }

    if (bundle.aae_decoder) {
        json d;
        d["hidden_w"] = matrix_to_json(bundle.aae_decoder->hidden_w);
        d["hidden_b"] = vector_to_json(bundle.aae_decoder->hidden_b);
        json heads = json::array();
        for (const auto& w : bundle.aae_decoder->field_w) heads.push_back(matrix_to_json(w));
        d["field_w"] = std::move(heads);
        d["output_b"] = vector_to_json(bundle.aae_decoder->output_b);
        j["aae_decoder"] = std::move(d);
    }

    if (bundle.dae) {
        json d;
        d["enc1_w"] = matrix_to_json(bundle.dae->enc1_w);
        d["enc1_b"] = vector_to_json(bundle.dae->enc1_b);
        d["enc2_w"] = matrix_to_json(bundle.dae->enc2_w);
        d["enc2_b"] = vector_to_json(bundle.dae->enc2_b);
        d["dec1_w"] = matrix_to_json(bundle.dae->dec1_w);
        d["dec1_b"] = vector_to_json(bundle.dae->dec1_b);
        d["dec2_w"] = matrix_to_json(bundle.dae->dec2_w);
        d["dec2_b"] = vector_to_json(bundle.dae->dec2_b);
        j["dae"] = std::move(d);
    }

    if (bundle.thresholds.size() > 0) j["thresholds"] = vector_to_json(bundle.thresholds);

    return j.dump();
}

ModelBundle bundle_from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("checkpoint is not valid JSON: ") + e.what());
    }
    if (!j.is_object() || j.value("format", "") != kFormatTag)
        throw FormatError("not a refsearch checkpoint");
    if (j.value("version", -1) != kFormatVersion)
        throw FormatError("unsupported checkpoint version");

    ModelBundle bundle;
    bundle.field_order = j.value("field_order", std::vector<std::string>{});
    if (j.contains("config_hash"))
        bundle.config_hash = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);

    if (j.contains("vectorizer")) {
        const auto& v = j.at("vectorizer");
        const std::string backend = v.at("backend").get<std::string>();
        if (backend == "hashing") {
            HashingVectorizerConfig cfg;
            cfg.dimension = v.at("dimension").get<int>();
            cfg.seed = v.at("seed").get<std::uint64_t>();
            cfg.min_gram = v.at("min_gram").get<int>();
            cfg.max_gram = v.at("max_gram").get<int>();
            bundle.vectorizer.emplace(cfg);
        } else if (backend == "table") {
            VectorTable table;
            table.dimension = v.at("dimension").get<int>();
            for (const auto& [token, vec] : v.at("vectors").items())
                table.vectors[token] = vector_from_json(vec);
            bundle.vectorizer.emplace(std::move(table));
        } else {
            throw FormatError("unknown vectorizer backend: " + backend);
        }
    }

    if (j.contains("attention")) {
        const auto& a = j.at("attention");
        AttentionParams p;
        p.hidden_w = matrix_from_json(a.at("hidden_w"));
        p.hidden_b = vector_from_json(a.at("hidden_b"));
        p.output_w = vector_from_json(a.at("output_w"));
        bundle.attention = std::move(p);
    }

    if (j.contains("aae_decoder")) {
        const auto& d = j.at("aae_decoder");
        AaeDecoderParams p;
        p.hidden_w = matrix_from_json(d.at("hidden_w"));
        p.hidden_b = vector_from_json(d.at("hidden_b"));
        for (const auto& w : d.at("field_w")) p.field_w.push_back(matrix_from_json(w));
        p.output_b = vector_from_json(d.at("output_b"));
        bundle.aae_decoder = std::move(p);
    }

    if (j.contains("dae")) {
        const auto& d = j.at("dae");
        DaeParams p;
        p.enc1_w = matrix_from_json(d.at("enc1_w"));
        p.enc1_b = vector_from_json(d.at("enc1_b"));
        p.enc2_w = matrix_from_json(d.at("enc2_w"));
        p.enc2_b = vector_from_json(d.at("enc2_b"));
        p.dec1_w = matrix_from_json(d.at("dec1_w"));
        p.dec1_b = vector_from_json(d.at("dec1_b"));
        p.dec2_w = matrix_from_json(d.at("dec2_w"));
        p.dec2_b = vector_from_json(d.at("dec2_b"));
        bundle.dae = std::move(p);
    }

    if (j.contains("thresholds")) bundle.thresholds = vector_from_json(j.at("thresholds"));

    return bundle;
}

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint: " + path.string());
    out << bundle_to_json(bundle);
}

ModelBundle load_bundle(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read checkpoint: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return bundle_from_json(buffer.str());
}

}  // namespace refsearch

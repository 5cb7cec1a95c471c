#include "refsearch/field_vectorizer.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "refsearch/hashing.hpp"

namespace refsearch {

namespace {

constexpr double kNormEps = 1e-12;

Eigen::VectorXd normalized_or_zero(Eigen::VectorXd v) {
    const double norm = v.norm();
    if (norm < kNormEps) {
        v.setZero();
        return v;
    }
    return v / norm;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char c : text) {
        const auto uc = static_cast<unsigned char>(c);
        if (std::isalnum(uc)) {
            current.push_back(static_cast<char>(std::tolower(uc)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

VectorTable load_vector_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open word-vector file: " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty word-vector file: " + path.string());

    std::size_t declared_count = 0;
    int dim = 0;
    {
        std::istringstream header(line);
        if (!(header >> declared_count >> dim) || dim <= 0) {
            throw ParseError("bad word-vector header (line 1): expected \"count dim\", got \"" +
                             line + "\"");
        }
    }

    VectorTable table;
    table.dimension = dim;
    table.vectors.reserve(declared_count);

    std::size_t line_no = 1;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream parts(line);
        std::string token;
        if (!(parts >> token)) continue;
        Eigen::VectorXd v(dim);
        for (int i = 0; i < dim; ++i) {
            if (!(parts >> v[i])) {
                throw ParseError("word-vector line " + std::to_string(line_no) + ": expected " +
                                 std::to_string(dim) + " values for token \"" + token + "\"");
            }
        }
        double extra;
        if (parts >> extra) {
            throw FormatError("word-vector line " + std::to_string(line_no) +
                              ": more than " + std::to_string(dim) + " values (inconsistent dimension)");
        }
        table.vectors[token] = std::move(v);
        ++rows;
    }

    // Duplicate tokens keep the last occurrence, so the map may be
    // smaller than the row count; the row count itself must match.
    if (rows != declared_count) {
        throw FormatError("word-vector file declares " + std::to_string(declared_count) +
                          " tokens but contains " + std::to_string(rows));
    }
    return table;
}

FieldVectorizer::FieldVectorizer(VectorTable table)
    : backend_(std::move(table)), dimension_(std::get<VectorTable>(backend_).dimension) {
    if (dimension_ <= 0) throw FormatError("vector table dimension must be positive");
}

FieldVectorizer::FieldVectorizer(HashingVectorizerConfig config)
    : backend_(config), dimension_(config.dimension) {
    if (dimension_ <= 0) throw ConfigError("hashing vectorizer dimension must be positive");
    if (config.min_gram < 1 || config.max_gram < config.min_gram)
        throw ConfigError("hashing vectorizer n-gram range invalid");
}

Eigen::VectorXd FieldVectorizer::embed_field(std::string_view text) const {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(dimension_);
    std::size_t contributions = 0;

    if (const auto* table = std::get_if<VectorTable>(&backend_)) {
        for (const auto& token : tokenize(text)) {
            auto it = table->vectors.find(token);
            if (it == table->vectors.end()) continue;
            acc += it->second;
            ++contributions;
        }
    } else {
        const auto& cfg = std::get<HashingVectorizerConfig>(backend_);
        for (const auto& token : tokenize(text)) {
            // fastText-style boundary markers so prefixes and suffixes
            // hash differently from interior grams.
            const std::string marked = "<" + token + ">";
            const int len = static_cast<int>(marked.size());
            for (int n = cfg.min_gram; n <= cfg.max_gram; ++n) {
                for (int start = 0; start + n <= len; ++start) {
                    const std::uint64_t h =
                        mix64(fnv1a64(marked.data() + start, static_cast<std::size_t>(n)) ^ cfg.seed);
                    const auto idx = static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dimension_));
                    acc[idx] += (h >> 63) ? -1.0 : 1.0;
                    ++contributions;
                }
            }
        }
    }

    if (contributions == 0) return Eigen::VectorXd::Zero(dimension_);
    return normalized_or_zero(acc / static_cast<double>(contributions));
}

FieldEmbeddingSet FieldVectorizer::embed_product_fields(
    const ProductRecord& record, const std::vector<std::string>& field_order) const {
    if (field_order.empty()) throw ConfigError("field order must name at least one field");

    const auto m = static_cast<Eigen::Index>(field_order.size());
    FieldEmbeddingSet set;
    set.columns = Eigen::MatrixXd::Zero(dimension_, m);
    set.present.assign(field_order.size(), false);

    bool any_present = false;
    for (Eigen::Index j = 0; j < m; ++j) {
        auto it = record.fields.find(field_order[static_cast<std::size_t>(j)]);
        if (it == record.fields.end()) continue;
        Eigen::VectorXd v = embed_field(it->second);
        if (v.isZero(0.0)) continue;  // empty or fully out-of-vocabulary text
        set.columns.col(j) = v;
        set.present[static_cast<std::size_t>(j)] = true;
        any_present = true;
    }
    if (!any_present) {
        throw UnembeddableError("unembeddable product: " + record.id);
    }
    return set;
}

}  // namespace refsearch

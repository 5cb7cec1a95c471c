#include "refsearch/search_index.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>

#include "refsearch/errors.hpp"
#include "refsearch/hashing.hpp"

namespace refsearch {

namespace {

constexpr char kMagic[8] = {'R', 'P', 'S', 'I', 'D', 'X', '0', '1'};
constexpr std::uint32_t kIndexVersion = 1;

// Stream writer that folds every byte into the trailing checksum.
class ChecksummedWriter {
public:
    explicit ChecksummedWriter(const std::filesystem::path& path) : out_(path, std::ios::binary) {
        if (!out_) throw Error("cannot write index file: " + path.string());
    }
    void write(const void* data, std::size_t len) {
        out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
        hash_.update(data, len);
    }
    template <typename T>
    void write_value(const T& v) {
        static_assert(std::is_trivially_copyable_v<T>);
        write(&v, sizeof(v));
    }
    void finish() {
        const std::uint64_t digest = hash_.digest();
        out_.write(reinterpret_cast<const char*>(&digest), sizeof(digest));
        out_.close();
        if (!out_) throw Error("index write failed");
    }

private:
    std::ofstream out_;
    Fnv64 hash_;
};

class Reader {
public:
    Reader(const std::string_view buffer) : buffer_(buffer) {}
    void read(void* data, std::size_t len) {
        if (pos_ + len > buffer_.size()) throw FormatError("index file truncated");
        std::memcpy(data, buffer_.data() + pos_, len);
        pos_ += len;
    }
    template <typename T>
    T read_value() {
        T v;
        read(&v, sizeof(v));
        return v;
    }
    std::string read_string(std::size_t len) {
        std::string s(len, '\0');
        read(s.data(), len);
        return s;
    }
    std::size_t position() const { return pos_; }

private:
    std::string_view buffer_;
    std::size_t pos_ = 0;
};

double dot(std::span<const float> row, const Eigen::VectorXd& query) {
    double acc = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i)
        acc += static_cast<double>(row[i]) * query[static_cast<Eigen::Index>(i)];
    return acc;
}

}  // namespace

void SearchConfig::validate() const {
    if (top_k < 1 || top_k > candidate_budget)
        throw ConfigError("search config requires 1 <= K <= M");
}

std::optional<std::uint32_t> Index::row_of(const std::string& id) const {
    auto it = id_to_row_.find(id);
    if (it == id_to_row_.end()) return std::nullopt;
    return it->second;
}

void Index::append_row(const std::string& id, const Eigen::VectorXd& unit_embedding) {
    if (id.empty()) throw IndexError("product id must be non-empty");
    if (id_to_row_.count(id)) throw IndexError("duplicate product id: " + id);
    const auto r = static_cast<std::uint32_t>(ids_.size());
    ids_.push_back(id);
    id_to_row_.emplace(id, r);
    for (Eigen::Index i = 0; i < unit_embedding.size(); ++i)
        embeddings_.push_back(static_cast<float>(unit_embedding[i]));
    codes_.push_back(models_->encode_embedding(unit_embedding));
}

void Index::rebuild_buckets() {
    const auto n = static_cast<std::uint32_t>(codes_.size());
    std::vector<std::uint32_t> rows(n);
    for (std::uint32_t r = 0; r < n; ++r) rows[r] = r;
    std::sort(rows.begin(), rows.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (codes_[a] != codes_[b]) return codes_[a] < codes_[b];
        return a < b;
    });

    unique_codes_.clear();
    bucket_offsets_.clear();
    bucket_rows_ = std::move(rows);
    for (std::uint32_t i = 0; i < n; ++i) {
        const BinaryCode c = codes_[bucket_rows_[i]];
        if (unique_codes_.empty() || unique_codes_.back() != c) {
            unique_codes_.push_back(c);
            bucket_offsets_.push_back(i);
        }
    }
    bucket_offsets_.push_back(n);
}

Index Index::build(const std::vector<ProductRecord>& products, ModelBundle models,
                   BuildReport* report) {
    if (products.empty()) throw IndexError("cannot build an index from an empty catalog");
    if (!models.can_embed_records())
        throw IndexError("index build requires a vectorizer and trained attention parameters");
    if (!models.can_encode()) throw IndexError("index build requires a trained encoder");

    Index index;
    index.models_ = std::make_shared<const ModelBundle>(std::move(models));
    index.dimension_ = index.models_->embedding_dim();
    index.embeddings_.reserve(products.size() * static_cast<std::size_t>(index.dimension_));

    BuildReport local;
    for (const auto& record : products) {
        try {
            const Eigen::VectorXd v = index.models_->embed_record(record);
            index.append_row(record.id, v);
            ++local.indexed;
        } catch (const UnembeddableError&) {
            local.skipped_ids.push_back(record.id);
        }
    }
    if (local.indexed == 0) throw IndexError("no embeddable products in catalog");
    index.rebuild_buckets();
    if (report) *report = std::move(local);
    return index;
}

Index Index::build_from_embeddings(std::vector<std::string> ids,
                                   std::vector<float> row_major_embeddings, ModelBundle models) {
    if (ids.empty()) throw IndexError("cannot build an index from an empty embedding set");
    if (!models.can_encode()) throw IndexError("index build requires a trained encoder");
    const auto dim = static_cast<std::size_t>(models.embedding_dim());
    if (row_major_embeddings.size() != ids.size() * dim)
        throw IndexError("embedding matrix shape does not match id count");

    Index index;
    index.models_ = std::make_shared<const ModelBundle>(std::move(models));
    index.dimension_ = static_cast<int>(dim);
    index.embeddings_.reserve(row_major_embeddings.size());

    Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
    for (std::size_t r = 0; r < ids.size(); ++r) {
        const float* src = row_major_embeddings.data() + r * dim;
        for (std::size_t i = 0; i < dim; ++i) v[static_cast<Eigen::Index>(i)] = src[i];
        const double norm = v.norm();
        if (norm < 1e-12) throw UnembeddableError("zero-norm embedding for id: " + ids[r]);
        v /= norm;
        index.append_row(ids[r], v);
    }
    index.rebuild_buckets();
    return index;
}

Index Index::add_product(const ProductRecord& record) const {
    const Eigen::VectorXd v = models_->embed_record(record);  // throws if unembeddable
    Index next = *this;
    next.append_row(record.id, v);
    next.rebuild_buckets();
    return next;
}

Index Index::add_embedding(const std::string& id, std::span<const double> embedding) const {
    if (embedding.size() != static_cast<std::size_t>(dimension_))
        throw IndexError("embedding dimension mismatch");
    Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(embedding.data(),
                                                          static_cast<Eigen::Index>(embedding.size()));
    const double norm = v.norm();
    if (norm < 1e-12) throw UnembeddableError("zero-norm embedding for id: " + id);
    v /= norm;
    Index next = *this;
    next.append_row(id, v);
    next.rebuild_buckets();
    return next;
}

std::vector<std::uint32_t> Index::candidate_rows(BinaryCode query_code, std::size_t budget,
                                                 std::size_t* buckets_touched) const {
    // Counting sort of buckets into Hamming-distance groups; buckets stay
    // in ascending code order inside each group because unique_codes_ is
    // sorted.
    std::array<std::vector<std::uint32_t>, kMaxCodeWidth + 1> groups;
    for (std::uint32_t b = 0; b < unique_codes_.size(); ++b) {
        groups[static_cast<std::size_t>(hamming(unique_codes_[b], query_code))].push_back(b);
    }

    const std::size_t want = std::min(budget, size());
    std::vector<std::uint32_t> rows;
    rows.reserve(want);
    std::size_t touched = 0;
    for (const auto& group : groups) {
        for (std::uint32_t b : group) {
            if (rows.size() >= want) break;
            const auto bucket_span = bucket(b);
            rows.insert(rows.end(), bucket_span.begin(), bucket_span.end());
            ++touched;
        }
        if (rows.size() >= want) break;
    }
    if (buckets_touched) *buckets_touched = touched;
    return rows;
}

SearchResult Index::rank_candidates(std::span<const float> query_row, BinaryCode query_code,
                                    const SearchConfig& config,
                                    const std::string* exclude_id) const {
    config.validate();
    if (size() == 0) throw IndexError("search on an empty index");

    Eigen::VectorXd query(dimension_);
    for (int i = 0; i < dimension_; ++i) query[i] = static_cast<double>(query_row[static_cast<std::size_t>(i)]);

    SearchResult result;
    const auto candidates = candidate_rows(query_code, config.candidate_budget, &result.buckets_touched);
    result.candidates_scanned = candidates.size();

    std::vector<std::pair<double, std::uint32_t>> scored;
    scored.reserve(candidates.size());
    for (std::uint32_t r : candidates) {
        if (exclude_id && config.exclude_query_id && ids_[r] == *exclude_id) continue;
        const double score = dot(row(r), query);
        if (config.min_score && score < *config.min_score) continue;
        scored.emplace_back(score, r);
    }

    const auto k = std::min(config.top_k, scored.size());
    auto better = [&](const std::pair<double, std::uint32_t>& a,
                      const std::pair<double, std::uint32_t>& b) {
        if (a.first != b.first) return a.first > b.first;
        return ids_[a.second] < ids_[b.second];
    };
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(),
                      better);

    result.hits.reserve(k);
    for (std::size_t i = 0; i < k; ++i)
        result.hits.push_back({ids_[scored[i].second], scored[i].first});
    return result;
}

SearchResult Index::search(const ProductRecord& query, const SearchConfig& config) const {
    const Eigen::VectorXd v = models_->embed_record(query);
    const BinaryCode code = models_->encode_embedding(v);
    std::vector<float> query_row(static_cast<std::size_t>(dimension_));
    for (int i = 0; i < dimension_; ++i) query_row[static_cast<std::size_t>(i)] = static_cast<float>(v[i]);
    return rank_candidates(query_row, code, config, &query.id);
}

SearchResult Index::search_embedding(std::span<const double> embedding, const SearchConfig& config,
                                     const std::string* exclude_id) const {
    if (embedding.size() != static_cast<std::size_t>(dimension_))
        throw IndexError("query embedding dimension mismatch");
    Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(embedding.data(),
                                                          static_cast<Eigen::Index>(embedding.size()));
    const double norm = v.norm();
    if (norm < 1e-12) throw UnembeddableError("zero-norm query embedding");
    v /= norm;
    const BinaryCode code = models_->encode_embedding(v);
    std::vector<float> query_row(static_cast<std::size_t>(dimension_));
    for (int i = 0; i < dimension_; ++i) query_row[static_cast<std::size_t>(i)] = static_cast<float>(v[i]);
    return rank_candidates(query_row, code, config, exclude_id);
}

SearchResult Index::search_id(const std::string& id, const SearchConfig& config) const {
    const auto r = row_of(id);
    if (!r) throw IndexError("unknown product id: " + id);
    return rank_candidates(row(*r), codes_[*r], config, &id);
}

void Index::save(const std::filesystem::path& path) const {
    ChecksummedWriter writer(path);
    writer.write(kMagic, sizeof(kMagic));
    writer.write_value(kIndexVersion);
    writer.write_value(static_cast<std::uint32_t>(dimension_));
    writer.write_value(static_cast<std::uint32_t>(code_width()));
    writer.write_value(static_cast<std::uint64_t>(size()));

    const std::string checkpoint = bundle_to_json(*models_);
    writer.write_value(static_cast<std::uint64_t>(checkpoint.size()));
    writer.write(checkpoint.data(), checkpoint.size());

    for (const auto& id : ids_) {
        writer.write_value(static_cast<std::uint32_t>(id.size()));
        writer.write(id.data(), id.size());
    }
    writer.write(embeddings_.data(), embeddings_.size() * sizeof(float));
    writer.write(codes_.data(), codes_.size() * sizeof(BinaryCode));
    writer.finish();
}

Index Index::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read index file: " + path.string());
    std::string buffer((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (buffer.size() < sizeof(kMagic) + sizeof(std::uint64_t))
        throw FormatError("index file truncated or empty");

    const std::size_t body_len = buffer.size() - sizeof(std::uint64_t);
    std::uint64_t stored_checksum;
    std::memcpy(&stored_checksum, buffer.data() + body_len, sizeof(stored_checksum));
    if (fnv1a64(buffer.data(), body_len) != stored_checksum)
        throw ChecksumError("index file checksum mismatch");

    Reader reader(std::string_view(buffer).substr(0, body_len));
    char magic[sizeof(kMagic)];
    reader.read(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw FormatError("not a refsearch index file");
    if (reader.read_value<std::uint32_t>() != kIndexVersion)
        throw FormatError("unsupported index file version");

    Index index;
    index.dimension_ = static_cast<int>(reader.read_value<std::uint32_t>());
    const auto code_width = reader.read_value<std::uint32_t>();
    const auto n = reader.read_value<std::uint64_t>();

    const auto checkpoint_len = reader.read_value<std::uint64_t>();
    const std::string checkpoint = reader.read_string(checkpoint_len);
    auto bundle = bundle_from_json(checkpoint);
    if (bundle.code_width() != static_cast<int>(code_width))
        throw FormatError("index code width disagrees with embedded checkpoint");
    index.models_ = std::make_shared<const ModelBundle>(std::move(bundle));

    index.ids_.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        const auto len = reader.read_value<std::uint32_t>();
        index.ids_.push_back(reader.read_string(len));
        index.id_to_row_.emplace(index.ids_.back(), static_cast<std::uint32_t>(i));
    }
    index.embeddings_.resize(n * static_cast<std::uint64_t>(index.dimension_));
    reader.read(index.embeddings_.data(), index.embeddings_.size() * sizeof(float));
    index.codes_.resize(n);
    reader.read(index.codes_.data(), index.codes_.size() * sizeof(BinaryCode));
    if (reader.position() != body_len) throw FormatError("index file has trailing bytes");

    index.rebuild_buckets();
    return index;
}

}  // namespace refsearch

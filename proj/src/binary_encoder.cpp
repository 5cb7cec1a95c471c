#include "refsearch/binary_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "refsearch/errors.hpp"
#include "refsearch/optim.hpp"

namespace refsearch {

namespace {

// Batched forward over column blocks (one sample per column).
struct DaeForward {
    Eigen::MatrixXd enc1;   // h_e x n, tanh
    Eigen::MatrixXd logits; // d' x n, sigmoid
    Eigen::MatrixXd dec1;   // h_e x n, tanh
    Eigen::MatrixXd recon;  // d x n, linear
};

void forward(const Eigen::MatrixXd& input_cols, const DaeParams& p, DaeForward& f) {
    f.enc1 = ((p.enc1_w * input_cols).colwise() + p.enc1_b).array().tanh().matrix();
    f.logits =
        (1.0 / (1.0 + (-((p.enc2_w * f.enc1).colwise() + p.enc2_b).array()).exp())).matrix();
    f.dec1 = ((p.dec1_w * f.logits).colwise() + p.dec1_b).array().tanh().matrix();
    f.recon = (p.dec2_w * f.dec1).colwise() + p.dec2_b;
}

}  // namespace

DaeParams init_dae_params(const DaeDims& dims, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    DaeParams p;
    p.enc1_w.resize(dims.encoder_hidden, dims.embedding_dim);
    p.enc1_b.resize(dims.encoder_hidden);
    p.enc2_w.resize(dims.code_width, dims.encoder_hidden);
    p.enc2_b.resize(dims.code_width);
    p.dec1_w.resize(dims.encoder_hidden, dims.code_width);
    p.dec1_b.resize(dims.encoder_hidden);
    p.dec2_w.resize(dims.embedding_dim, dims.encoder_hidden);
    p.dec2_b.resize(dims.embedding_dim);
    init_uniform(p.enc1_w, dims.embedding_dim, rng);
    init_uniform(p.enc1_b, dims.embedding_dim, rng);
    init_uniform(p.enc2_w, dims.encoder_hidden, rng);
    init_uniform(p.enc2_b, dims.encoder_hidden, rng);
    init_uniform(p.dec1_w, dims.code_width, rng);
    init_uniform(p.dec1_b, dims.code_width, rng);
    init_uniform(p.dec2_w, dims.encoder_hidden, rng);
    init_uniform(p.dec2_b, dims.encoder_hidden, rng);
    return p;
}

DaeModel train_dae(const Eigen::MatrixXd& embeddings, const DaeDims& dims,
                   const DaeTrainOptions& options) {
    if (embeddings.rows() == 0) throw ConfigError("train_dae: empty embedding set");
    if (embeddings.cols() != dims.embedding_dim)
        throw ConfigError("train_dae: embedding dimension does not match configured dims");
    if (dims.code_width < 1 || dims.code_width > kMaxCodeWidth)
        throw ConfigError("train_dae: code width must be in [1, 32]");

    std::mt19937_64 rng(options.seed);
    DaeModel model;
    model.params = init_dae_params(dims, rng());

    const auto n = embeddings.rows();
    const double denom = static_cast<double>(dims.embedding_dim);

    DaeForward f;
    auto full_loss = [&]() {
        const Eigen::MatrixXd cols = embeddings.transpose();
        forward(cols, model.params, f);
        return (f.recon - cols).squaredNorm() / (denom * static_cast<double>(n));
    };
    model.loss_curve.push_back(full_loss());

    Adam opt(options.learning_rate);
    opt.register_tensor(model.params.enc1_w.size());
    opt.register_tensor(model.params.enc1_b.size());
    opt.register_tensor(model.params.enc2_w.size());
    opt.register_tensor(model.params.enc2_b.size());
    opt.register_tensor(model.params.dec1_w.size());
    opt.register_tensor(model.params.dec1_b.size());
    opt.register_tensor(model.params.dec2_w.size());
    opt.register_tensor(model.params.dec2_b.size());

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    const auto batch_size = static_cast<std::size_t>(std::max(1, options.batch_size));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        int batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += batch_size, ++batch_index) {
            const std::size_t end = std::min(start + batch_size, order.size());
            const auto bn = static_cast<Eigen::Index>(end - start);

            Eigen::MatrixXd clean(dims.embedding_dim, bn);
            for (Eigen::Index c = 0; c < bn; ++c)
                clean.col(c) = embeddings.row(order[start + static_cast<std::size_t>(c)]).transpose();

            // Masking corruption: zero each coordinate independently.
            Eigen::MatrixXd corrupted = clean;
            if (options.noise_rate > 0.0) {
                for (Eigen::Index c = 0; c < bn; ++c)
                    for (Eigen::Index r = 0; r < corrupted.rows(); ++r)
                        if (unit(rng) < options.noise_rate) corrupted(r, c) = 0.0;
            }

            forward(corrupted, model.params, f);
            const double scale = 1.0 / (denom * static_cast<double>(bn));
            const Eigen::MatrixXd err = f.recon - clean;
            const double loss = err.squaredNorm() * scale;
            if (!std::isfinite(loss)) {
                throw TrainingError("NaN loss in train_dae at epoch " + std::to_string(epoch) +
                                    ", batch " + std::to_string(batch_index));
            }
            epoch_loss += loss * static_cast<double>(bn);

            const DaeParams& p = model.params;
            const Eigen::MatrixXd g_recon = 2.0 * scale * err;
            const Eigen::MatrixXd g_dec2_w = g_recon * f.dec1.transpose();
            const Eigen::VectorXd g_dec2_b = g_recon.rowwise().sum();
            const Eigen::MatrixXd g_dec1 =
                ((p.dec2_w.transpose() * g_recon).array() * (1.0 - f.dec1.array().square()))
                    .matrix();
            const Eigen::MatrixXd g_dec1_w = g_dec1 * f.logits.transpose();
            const Eigen::VectorXd g_dec1_b = g_dec1.rowwise().sum();
            const Eigen::MatrixXd g_logits =
                ((p.dec1_w.transpose() * g_dec1).array() * f.logits.array() *
                 (1.0 - f.logits.array()))
                    .matrix();
            const Eigen::MatrixXd g_enc2_w = g_logits * f.enc1.transpose();
            const Eigen::VectorXd g_enc2_b = g_logits.rowwise().sum();
            const Eigen::MatrixXd g_enc1 =
                ((p.enc2_w.transpose() * g_logits).array() * (1.0 - f.enc1.array().square()))
                    .matrix();
            const Eigen::MatrixXd g_enc1_w = g_enc1 * corrupted.transpose();
            const Eigen::VectorXd g_enc1_b = g_enc1.rowwise().sum();

            opt.begin_step();
            opt.update(model.params.enc1_w, g_enc1_w);
            opt.update(model.params.enc1_b, g_enc1_b);
            opt.update(model.params.enc2_w, g_enc2_w);
            opt.update(model.params.enc2_b, g_enc2_b);
            opt.update(model.params.dec1_w, g_dec1_w);
            opt.update(model.params.dec1_b, g_dec1_b);
            opt.update(model.params.dec2_w, g_dec2_w);
            opt.update(model.params.dec2_b, g_dec2_b);
        }
        model.loss_curve.push_back(epoch_loss / static_cast<double>(n));
    }
    return model;
}

Eigen::VectorXd encode_logits(const Eigen::VectorXd& embedding, const DaeParams& params) {
    const Eigen::VectorXd h = (params.enc1_w * embedding + params.enc1_b).array().tanh().matrix();
    return (1.0 / (1.0 + (-(params.enc2_w * h + params.enc2_b).array()).exp())).matrix();
}

Eigen::MatrixXd encode_logits_block(const Eigen::MatrixXd& embeddings, const DaeParams& params) {
    const Eigen::MatrixXd h =
        ((params.enc1_w * embeddings.transpose()).colwise() + params.enc1_b)
            .array()
            .tanh()
            .matrix();
    const Eigen::MatrixXd z =
        (1.0 / (1.0 + (-((params.enc2_w * h).colwise() + params.enc2_b).array()).exp())).matrix();
    return z.transpose();  // n x d'
}

BinaryCode binarize(const Eigen::VectorXd& logits, const Eigen::VectorXd& thresholds) {
    const auto width = logits.size();
    if (width != thresholds.size()) throw ConfigError("binarize: dimension mismatch");
    if (width > kMaxCodeWidth) throw ConfigError("binarize: code width exceeds 32 bits");
    BinaryCode code = 0;
    for (Eigen::Index i = 0; i < width; ++i) {
        if (logits[i] >= thresholds[i]) code |= (BinaryCode{1} << i);
    }
    return code;
}

BinaryCode pack_bits(const std::vector<bool>& bits) {
    BinaryCode code = 0;
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i]) code |= (BinaryCode{1} << i);
    }
    return code;
}

std::vector<bool> unpack_bits(BinaryCode code, int width) {
    std::vector<bool> bits(static_cast<std::size_t>(width));
    for (int i = 0; i < width; ++i) bits[static_cast<std::size_t>(i)] = (code >> i) & 1u;
    return bits;
}

}  // namespace refsearch

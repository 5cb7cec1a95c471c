#include "refsearch/attention_autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "refsearch/errors.hpp"
#include "refsearch/optim.hpp"

namespace refsearch {

namespace {

inline Eigen::ArrayXd sigmoid(const Eigen::ArrayXd& x) {
    return 1.0 / (1.0 + (-x).exp());
}

struct ForwardState {
    Eigen::MatrixXd tanh_hidden;   // h_a x m
    Eigen::VectorXd scores;        // m
    Eigen::VectorXd weights;       // m, softmax(scores)
    Eigen::VectorXd combined;      // d, un-normalized U * weights
    Eigen::VectorXd recon_hidden;  // h_r, sigmoid layer
};

// Shared forward pass; loss contribution is the plain sum of squared
// field reconstruction errors (scaled by the callers).
double forward_product(const Eigen::MatrixXd& columns, const AttentionParams& att,
                       const AaeDecoderParams& dec, ForwardState& state,
                       std::vector<Eigen::VectorXd>* errors) {
    const auto m = columns.cols();
    state.tanh_hidden = ((att.hidden_w * columns).colwise() + att.hidden_b).array().tanh().matrix();
    state.scores = state.tanh_hidden.transpose() * att.output_w;
    if (!state.scores.allFinite()) throw TrainingError("non-finite attention score");
    state.weights = softmax(state.scores);
    state.combined = columns * state.weights;
    state.recon_hidden = sigmoid((dec.hidden_w * state.combined + dec.hidden_b).array()).matrix();

    double sum_sq = 0.0;
    if (errors) errors->resize(static_cast<std::size_t>(m));
    for (Eigen::Index j = 0; j < m; ++j) {
        Eigen::VectorXd err =
            dec.field_w[static_cast<std::size_t>(j)] * state.recon_hidden + dec.output_b -
            columns.col(j);
        sum_sq += err.squaredNorm();
        if (errors) (*errors)[static_cast<std::size_t>(j)] = std::move(err);
    }
    return sum_sq;
}

double gradients_impl(std::span<const FieldEmbeddingSet* const> batch, const AttentionParams& att,
                      const AaeDecoderParams& dec, AaeGradients& out) {
    if (batch.empty()) throw ConfigError("empty batch");

    const auto m = batch.front()->columns.cols();
    out.att_hidden_w = Eigen::MatrixXd::Zero(att.hidden_w.rows(), att.hidden_w.cols());
    out.att_hidden_b = Eigen::VectorXd::Zero(att.hidden_b.size());
    out.att_output_w = Eigen::VectorXd::Zero(att.output_w.size());
    out.dec_hidden_w = Eigen::MatrixXd::Zero(dec.hidden_w.rows(), dec.hidden_w.cols());
    out.dec_hidden_b = Eigen::VectorXd::Zero(dec.hidden_b.size());
    out.dec_field_w.assign(dec.field_w.size(),
                           Eigen::MatrixXd::Zero(dec.field_w[0].rows(), dec.field_w[0].cols()));
    out.dec_output_b = Eigen::VectorXd::Zero(dec.output_b.size());

    ForwardState state;
    std::vector<Eigen::VectorXd> errors;
    double sum_sq = 0.0;

    for (const FieldEmbeddingSet* fields : batch) {
        const Eigen::MatrixXd& columns = fields->columns;
        sum_sq += forward_product(columns, att, dec, state, &errors);

        // Decoder heads.
        Eigen::VectorXd grad_recon_hidden = Eigen::VectorXd::Zero(state.recon_hidden.size());
        for (Eigen::Index j = 0; j < m; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            const Eigen::VectorXd grad_out = 2.0 * errors[ju];
            out.dec_field_w[ju].noalias() += grad_out * state.recon_hidden.transpose();
            out.dec_output_b += grad_out;
            grad_recon_hidden.noalias() += dec.field_w[ju].transpose() * grad_out;
        }

        // Sigmoid layer on the combined embedding.
        const Eigen::ArrayXd r = state.recon_hidden.array();
        const Eigen::VectorXd grad_pre_sigmoid =
            (grad_recon_hidden.array() * r * (1.0 - r)).matrix();
        out.dec_hidden_w.noalias() += grad_pre_sigmoid * state.combined.transpose();
        out.dec_hidden_b += grad_pre_sigmoid;

        // Through the convex combination into the attention weights.
        const Eigen::VectorXd grad_combined = dec.hidden_w.transpose() * grad_pre_sigmoid;
        const Eigen::VectorXd grad_weights = columns.transpose() * grad_combined;

        // Softmax backward.
        const double dot = state.weights.dot(grad_weights);
        const Eigen::VectorXd grad_scores =
            (state.weights.array() * (grad_weights.array() - dot)).matrix();

        // Attention scorer backward.
        out.att_output_w.noalias() += state.tanh_hidden * grad_scores;
        const Eigen::MatrixXd grad_pre_tanh =
            ((att.output_w * grad_scores.transpose()).array() *
             (1.0 - state.tanh_hidden.array().square()))
                .matrix();
        out.att_hidden_w.noalias() += grad_pre_tanh * columns.transpose();
        out.att_hidden_b += grad_pre_tanh.rowwise().sum();
    }

    const double scale = 1.0 / (static_cast<double>(m) * static_cast<double>(batch.size()));
    out.att_hidden_w *= scale;
    out.att_hidden_b *= scale;
    out.att_output_w *= scale;
    out.dec_hidden_w *= scale;
    out.dec_hidden_b *= scale;
    for (auto& g : out.dec_field_w) g *= scale;
    out.dec_output_b *= scale;
    return sum_sq * scale;
}

double loss_impl(std::span<const FieldEmbeddingSet* const> batch, const AttentionParams& att,
                 const AaeDecoderParams& dec) {
    if (batch.empty()) throw ConfigError("empty batch");
    const auto m = batch.front()->columns.cols();
    ForwardState state;
    double sum_sq = 0.0;
    for (const FieldEmbeddingSet* fields : batch)
        sum_sq += forward_product(fields->columns, att, dec, state, nullptr);
    return sum_sq / (static_cast<double>(m) * static_cast<double>(batch.size()));
}

std::vector<const FieldEmbeddingSet*> as_pointers(std::span<const FieldEmbeddingSet> batch) {
    std::vector<const FieldEmbeddingSet*> ptrs(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) ptrs[i] = &batch[i];
    return ptrs;
}

}  // namespace

Eigen::VectorXd softmax(const Eigen::VectorXd& scores) {
    const double shift = scores.maxCoeff();
    Eigen::ArrayXd e = (scores.array() - shift).exp();
    return (e / e.sum()).matrix();
}

Eigen::VectorXd field_scores(const Eigen::MatrixXd& columns, const AttentionParams& params) {
    const Eigen::MatrixXd t =
        ((params.hidden_w * columns).colwise() + params.hidden_b).array().tanh().matrix();
    Eigen::VectorXd scores = t.transpose() * params.output_w;
    if (!scores.allFinite()) throw TrainingError("non-finite attention score");
    return scores;
}

Eigen::VectorXd attention_weights(const FieldEmbeddingSet& fields, const AttentionParams& params) {
    return softmax(field_scores(fields.columns, params));
}

Eigen::VectorXd aggregate(const FieldEmbeddingSet& fields, const AttentionParams& params) {
    const Eigen::VectorXd weights = attention_weights(fields, params);
    Eigen::VectorXd combined = fields.columns * weights;
    const double norm = combined.norm();
    if (norm < 1e-12) throw UnembeddableError("degenerate embedding: zero-norm combination");
    return combined / norm;
}

double aae_loss(std::span<const FieldEmbeddingSet> batch, const AttentionParams& att,
                const AaeDecoderParams& dec) {
    const auto ptrs = as_pointers(batch);
    return loss_impl(ptrs, att, dec);
}

double aae_gradients(std::span<const FieldEmbeddingSet> batch, const AttentionParams& att,
                     const AaeDecoderParams& dec, AaeGradients& out) {
    const auto ptrs = as_pointers(batch);
    return gradients_impl(ptrs, att, dec, out);
}

AttentionParams init_attention_params(const AaeDims& dims, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    AttentionParams p;
    p.hidden_w.resize(dims.attention_hidden, dims.embedding_dim);
    p.hidden_b.resize(dims.attention_hidden);
    p.output_w.resize(dims.attention_hidden);
    init_uniform(p.hidden_w, dims.embedding_dim, rng);
    init_uniform(p.hidden_b, dims.embedding_dim, rng);
    init_uniform(p.output_w, dims.attention_hidden, rng);
    return p;
}

AaeDecoderParams init_aae_decoder_params(const AaeDims& dims, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    AaeDecoderParams p;
    p.hidden_w.resize(dims.reconstruction_hidden, dims.embedding_dim);
    p.hidden_b.resize(dims.reconstruction_hidden);
    init_uniform(p.hidden_w, dims.embedding_dim, rng);
    init_uniform(p.hidden_b, dims.embedding_dim, rng);
    p.field_w.resize(static_cast<std::size_t>(dims.field_count));
    for (auto& w : p.field_w) {
        w.resize(dims.embedding_dim, dims.reconstruction_hidden);
        init_uniform(w, dims.reconstruction_hidden, rng);
    }
    p.output_b.resize(dims.embedding_dim);
    init_uniform(p.output_b, dims.reconstruction_hidden, rng);
    return p;
}

AaeModel train_aae(const std::vector<FieldEmbeddingSet>& dataset, const AaeDims& dims,
                   const AaeTrainOptions& options) {
    if (dataset.empty()) throw ConfigError("train_aae: empty dataset");
    for (const auto& fields : dataset) {
        if (fields.field_count() != dims.field_count || fields.dimension() != dims.embedding_dim)
            throw ConfigError("train_aae: dataset shape does not match configured dims");
    }

    std::mt19937_64 rng(options.seed);
    AaeModel model;
    model.attention = init_attention_params(dims, rng());
    model.decoder = init_aae_decoder_params(dims, rng());

    const auto all = as_pointers(std::span<const FieldEmbeddingSet>(dataset));
    model.loss_curve.push_back(loss_impl(all, model.attention, model.decoder));

    Adam opt(options.learning_rate);
    opt.register_tensor(model.attention.hidden_w.size());
    opt.register_tensor(model.attention.hidden_b.size());
    opt.register_tensor(model.attention.output_w.size());
    opt.register_tensor(model.decoder.hidden_w.size());
    opt.register_tensor(model.decoder.hidden_b.size());
    for (const auto& w : model.decoder.field_w) opt.register_tensor(w.size());
    opt.register_tensor(model.decoder.output_b.size());

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    const auto batch_size = static_cast<std::size_t>(std::max(1, options.batch_size));

    AaeGradients grads;
    std::vector<const FieldEmbeddingSet*> batch;
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        int batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += batch_size, ++batch_index) {
            const std::size_t end = std::min(start + batch_size, order.size());
            batch.clear();
            for (std::size_t i = start; i < end; ++i) batch.push_back(&dataset[order[i]]);

            const double loss = gradients_impl(batch, model.attention, model.decoder, grads);
            if (!std::isfinite(loss)) {
                throw TrainingError("NaN loss in train_aae at epoch " + std::to_string(epoch) +
                                    ", batch " + std::to_string(batch_index));
            }
            epoch_loss += loss * static_cast<double>(batch.size());

            opt.begin_step();
            opt.update(model.attention.hidden_w, grads.att_hidden_w);
            opt.update(model.attention.hidden_b, grads.att_hidden_b);
            opt.update(model.attention.output_w, grads.att_output_w);
            opt.update(model.decoder.hidden_w, grads.dec_hidden_w);
            opt.update(model.decoder.hidden_b, grads.dec_hidden_b);
            for (std::size_t j = 0; j < model.decoder.field_w.size(); ++j)
                opt.update(model.decoder.field_w[j], grads.dec_field_w[j]);
            opt.update(model.decoder.output_b, grads.dec_output_b);
        }
        model.loss_curve.push_back(epoch_loss / static_cast<double>(dataset.size()));
    }
    return model;
}

}  // namespace refsearch

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "refsearch/field_vectorizer.hpp"

namespace refsearch {

// Attention scorer: score(u) = output_w . tanh(hidden_w u + hidden_b).
struct AttentionParams {
    Eigen::MatrixXd hidden_w;  // h_a x d
    Eigen::VectorXd hidden_b;  // h_a
    Eigen::VectorXd output_w;  // h_a
};

// Reconstruction head used only during training: a shared sigmoid layer
// on the aggregated embedding followed by one linear head per field.
struct AaeDecoderParams {
    Eigen::MatrixXd hidden_w;              // h_r x d
    Eigen::VectorXd hidden_b;              // h_r
    std::vector<Eigen::MatrixXd> field_w;  // m heads, each d x h_r
    Eigen::VectorXd output_b;              // d, shared across fields
};

struct AaeGradients {
    Eigen::MatrixXd att_hidden_w;
    Eigen::VectorXd att_hidden_b;
    Eigen::VectorXd att_output_w;
    Eigen::MatrixXd dec_hidden_w;
    Eigen::VectorXd dec_hidden_b;
    std::vector<Eigen::MatrixXd> dec_field_w;
    Eigen::VectorXd dec_output_b;
};

struct ProductEmbedding {
    std::string id;
    Eigen::VectorXd values;  // unit norm
};

// Per-field attention scores before the softmax.
Eigen::VectorXd field_scores(const Eigen::MatrixXd& columns, const AttentionParams& params);

// Max-subtracted softmax; sums to 1 with every weight in (0, 1).
Eigen::VectorXd softmax(const Eigen::VectorXd& scores);

Eigen::VectorXd attention_weights(const FieldEmbeddingSet& fields, const AttentionParams& params);

// Convex combination of field columns under the attention weights,
// L2-normalized. Throws on a zero-norm combination.
Eigen::VectorXd aggregate(const FieldEmbeddingSet& fields, const AttentionParams& params);

// Mean squared reconstruction error over all fields of all products in
// the batch. The reconstruction path consumes the un-normalized
// combination.
double aae_loss(std::span<const FieldEmbeddingSet> batch, const AttentionParams& att,
                const AaeDecoderParams& dec);

// Analytic gradients of aae_loss, including the softmax-through-attention
// path. Returns the loss alongside.
double aae_gradients(std::span<const FieldEmbeddingSet> batch, const AttentionParams& att,
                     const AaeDecoderParams& dec, AaeGradients& out);

struct AaeTrainOptions {
    double learning_rate = 1e-3;
    int batch_size = 256;
    int epochs = 30;
    std::uint64_t seed = 0;
};

struct AaeDims {
    int embedding_dim = 100;       // d
    int field_count = 5;           // m
    int attention_hidden = 32;     // h_a
    int reconstruction_hidden = 64;  // h_r
};

struct AaeModel {
    AttentionParams attention;
    AaeDecoderParams decoder;
    // loss_curve[0] is the pre-training loss, then one entry per epoch.
    std::vector<double> loss_curve;
};

AttentionParams init_attention_params(const AaeDims& dims, std::uint64_t seed);
AaeDecoderParams init_aae_decoder_params(const AaeDims& dims, std::uint64_t seed);

// Adam over shuffled mini-batches; deterministic per seed.
AaeModel train_aae(const std::vector<FieldEmbeddingSet>& dataset, const AaeDims& dims,
                   const AaeTrainOptions& options);

}  // namespace refsearch

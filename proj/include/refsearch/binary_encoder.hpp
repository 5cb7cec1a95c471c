#pragma once

#include <Eigen/Dense>

#include <bit>
#include <cstdint>
#include <vector>

namespace refsearch {

// One packed code word; bit i is 1 iff logit i crossed its threshold.
using BinaryCode = std::uint32_t;
inline constexpr int kMaxCodeWidth = 32;

// Two-layer tanh/sigmoid encoder producing logits in (0,1), mirrored
// by a two-layer tanh/linear decoder used only during training.
struct DaeParams {
    Eigen::MatrixXd enc1_w;  // h_e x d, tanh
    Eigen::VectorXd enc1_b;
    Eigen::MatrixXd enc2_w;  // d' x h_e, sigmoid
    Eigen::VectorXd enc2_b;
    Eigen::MatrixXd dec1_w;  // h_e x d', tanh
    Eigen::VectorXd dec1_b;
    Eigen::MatrixXd dec2_w;  // d x h_e, linear
    Eigen::VectorXd dec2_b;

    int input_dim() const { return static_cast<int>(enc1_w.cols()); }
    int code_width() const { return static_cast<int>(enc2_w.rows()); }
};

struct DaeDims {
    int embedding_dim = 100;  // d
    int encoder_hidden = 64;  // h_e
    int code_width = 32;      // d'
};

struct DaeTrainOptions {
    double learning_rate = 1e-3;
    int batch_size = 256;
    int epochs = 30;
    double noise_rate = 0.1;  // per-coordinate masking probability
    std::uint64_t seed = 0;
};

struct DaeModel {
    DaeParams params;
    std::vector<double> loss_curve;  // [0] = pre-training loss, then per epoch
};

DaeParams init_dae_params(const DaeDims& dims, std::uint64_t seed);

// Minimizes per-component MSE of the clean embedding reconstructed from
// its mask-corrupted copy. Rows of `embeddings` are unit-norm vectors.
DaeModel train_dae(const Eigen::MatrixXd& embeddings, const DaeDims& dims,
                   const DaeTrainOptions& options);

// Sigmoid output of the encoder stack; every component in (0,1).
Eigen::VectorXd encode_logits(const Eigen::VectorXd& embedding, const DaeParams& params);

// Row-wise encoder over an n x d block.
Eigen::MatrixXd encode_logits_block(const Eigen::MatrixXd& embeddings, const DaeParams& params);

// bit i = 1 iff logits[i] >= thresholds[i]; equality produces 1.
BinaryCode binarize(const Eigen::VectorXd& logits, const Eigen::VectorXd& thresholds);

inline int hamming(BinaryCode a, BinaryCode b) { return std::popcount(a ^ b); }

BinaryCode pack_bits(const std::vector<bool>& bits);
std::vector<bool> unpack_bits(BinaryCode code, int width);

}  // namespace refsearch

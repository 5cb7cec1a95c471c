#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "refsearch/binary_encoder.hpp"
#include "refsearch/errors.hpp"

using namespace refsearch;

namespace {

Eigen::MatrixXd random_unit_rows(int n, int dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd rows(n, dim);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < dim; ++c) rows(r, c) = gauss(rng);
        rows.row(r).normalize();
    }
    return rows;
}

DaeParams zero_params(const DaeDims& dims) {
    DaeParams p;
    p.enc1_w = Eigen::MatrixXd::Zero(dims.encoder_hidden, dims.embedding_dim);
    p.enc1_b = Eigen::VectorXd::Zero(dims.encoder_hidden);
    p.enc2_w = Eigen::MatrixXd::Zero(dims.code_width, dims.encoder_hidden);
    p.enc2_b = Eigen::VectorXd::Zero(dims.code_width);
    p.dec1_w = Eigen::MatrixXd::Zero(dims.encoder_hidden, dims.code_width);
    p.dec1_b = Eigen::VectorXd::Zero(dims.encoder_hidden);
    p.dec2_w = Eigen::MatrixXd::Zero(dims.embedding_dim, dims.encoder_hidden);
    p.dec2_b = Eigen::VectorXd::Zero(dims.embedding_dim);
    return p;
}

}  // namespace

TEST_CASE("encode_logits") {
    SUBCASE("zero weights and biases give 0.5 everywhere") {
        const DaeDims dims{6, 4, 3};
        const DaeParams params = zero_params(dims);
        const Eigen::VectorXd z = encode_logits(Eigen::VectorXd::Random(6), params);
        REQUIRE(z.size() == 3);
        for (int i = 0; i < 3; ++i) CHECK(z[i] == doctest::Approx(0.5));
    }
    SUBCASE("all-ones 1x1 layers on zero input: sigmoid(tanh(0)) = 0.5") {
        DaeDims dims{1, 1, 1};
        DaeParams p = zero_params(dims);
        p.enc1_w(0, 0) = 1.0;
        p.enc2_w(0, 0) = 1.0;
        const Eigen::VectorXd z = encode_logits(Eigen::VectorXd::Zero(1), p);
        CHECK(z[0] == doctest::Approx(0.5));
    }
    SUBCASE("outputs stay strictly inside (0,1)") {
        const DaeDims dims{8, 5, 4};
        const DaeParams params = init_dae_params(dims, 7);
        std::mt19937_64 rng(9);
        std::normal_distribution<double> gauss(0.0, 5.0);
        for (int trial = 0; trial < 100; ++trial) {
            Eigen::VectorXd v(8);
            for (int i = 0; i < 8; ++i) v[i] = gauss(rng);
            const Eigen::VectorXd z = encode_logits(v, params);
            for (int i = 0; i < 4; ++i) {
                CHECK(z[i] > 0.0);
                CHECK(z[i] < 1.0);
            }
        }
    }
    SUBCASE("block encoder matches the single-vector encoder") {
        const DaeDims dims{8, 5, 4};
        const DaeParams params = init_dae_params(dims, 11);
        const Eigen::MatrixXd rows = random_unit_rows(10, 8, 13);
        const Eigen::MatrixXd block = encode_logits_block(rows, params);
        for (int r = 0; r < 10; ++r) {
            const Eigen::VectorXd single = encode_logits(rows.row(r).transpose(), params);
            CHECK((block.row(r).transpose() - single).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
}

TEST_CASE("binarize") {
    SUBCASE("equality produces a set bit") {
        const Eigen::Vector2d z(0.5, 0.5);
        const Eigen::Vector2d theta(0.5, 0.5);
        CHECK(binarize(z, theta) == 0b11u);
    }
    SUBCASE("hand case (0.9, 0.1) against (0.5, 0.5)") {
        const Eigen::Vector2d z(0.9, 0.1);
        const Eigen::Vector2d theta(0.5, 0.5);
        CHECK(binarize(z, theta) == 0b01u);
    }
    SUBCASE("vanilla semantic hashing at theta = 0.5") {
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const Eigen::VectorXd theta = Eigen::VectorXd::Constant(8, 0.5);
        for (int trial = 0; trial < 50; ++trial) {
            Eigen::VectorXd z(8);
            for (int i = 0; i < 8; ++i) z[i] = unit(rng);
            const BinaryCode code = binarize(z, theta);
            for (int i = 0; i < 8; ++i) CHECK(((code >> i) & 1u) == (z[i] >= 0.5 ? 1u : 0u));
        }
    }
    SUBCASE("raising a threshold can only clear bits") {
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (int trial = 0; trial < 200; ++trial) {
            Eigen::VectorXd z(6), theta(6);
            for (int i = 0; i < 6; ++i) {
                z[i] = unit(rng);
                theta[i] = unit(rng);
            }
            const BinaryCode before = binarize(z, theta);
            const int dim = static_cast<int>(rng() % 6);
            Eigen::VectorXd raised = theta;
            raised[dim] += unit(rng) * (1.0 - raised[dim]);
            const BinaryCode after = binarize(z, raised);
            // Only bit `dim` may change, and only from 1 to 0.
            CHECK((after & ~(BinaryCode{1} << dim)) == (before & ~(BinaryCode{1} << dim)));
            CHECK(((after >> dim) & 1u) <= ((before >> dim) & 1u));
        }
    }
    SUBCASE("dimension mismatch throws") {
        CHECK_THROWS_AS(binarize(Eigen::Vector2d(0.1, 0.2), Eigen::Vector3d(0.1, 0.2, 0.3)),
                        ConfigError);
    }
}

TEST_CASE("packed code round trip") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 100000; ++trial) {
        const auto code = static_cast<BinaryCode>(rng());
        CHECK(pack_bits(unpack_bits(code, 32)) == code);
    }
    // width < 32 keeps only the low bits
    const std::vector<bool> bits = {true, false, true};
    CHECK(pack_bits(bits) == 0b101u);
    CHECK(unpack_bits(0b101u, 3) == bits);
}

TEST_CASE("hamming distance") {
    CHECK(hamming(0xffffffffu, 0xffffffffu) == 0);
    CHECK(hamming(0xffffffffu, 0u) == 32);
    CHECK(hamming(0b1010u, 0b0110u) == 2);
}

TEST_CASE("train_dae") {
    const DaeDims dims{12, 8, 5};
    const Eigen::MatrixXd embeddings = random_unit_rows(800, 12, 17);

    SUBCASE("reconstruction error drops") {
        DaeTrainOptions options;
        options.epochs = 20;
        options.batch_size = 64;
        options.noise_rate = 0.1;
        options.seed = 1;
        const DaeModel model = train_dae(embeddings, dims, options);
        REQUIRE(model.loss_curve.size() == 21);
        CHECK(model.loss_curve.back() < model.loss_curve.front());
    }
    SUBCASE("zero noise reduces to a plain auto-encoder") {
        DaeTrainOptions options;
        options.epochs = 5;
        options.batch_size = 64;
        options.noise_rate = 0.0;
        options.seed = 2;
        const DaeModel model = train_dae(embeddings, dims, options);
        CHECK(model.loss_curve.back() < model.loss_curve.front());
    }
    SUBCASE("same seed twice is identical") {
        DaeTrainOptions options;
        options.epochs = 3;
        options.batch_size = 64;
        options.seed = 3;
        const DaeModel a = train_dae(embeddings, dims, options);
        const DaeModel b = train_dae(embeddings, dims, options);
        CHECK(a.params.enc1_w == b.params.enc1_w);
        CHECK(a.params.enc2_w == b.params.enc2_w);
        CHECK(a.params.dec2_b == b.params.dec2_b);
        CHECK(a.loss_curve == b.loss_curve);
    }
    SUBCASE("empty embedding set throws") {
        DaeTrainOptions options;
        CHECK_THROWS_AS(train_dae(Eigen::MatrixXd(0, 12), dims, options), ConfigError);
    }
}

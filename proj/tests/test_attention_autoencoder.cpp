#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "refsearch/attention_autoencoder.hpp"
#include "refsearch/errors.hpp"

using namespace refsearch;

namespace {

FieldEmbeddingSet make_fields(const Eigen::MatrixXd& columns) {
    FieldEmbeddingSet fields;
    fields.columns = columns;
    fields.present.assign(static_cast<std::size_t>(columns.cols()), true);
    return fields;
}

FieldEmbeddingSet random_fields(int dim, int m, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd columns(dim, m);
    for (int j = 0; j < m; ++j) {
        for (int i = 0; i < dim; ++i) columns(i, j) = gauss(rng);
        columns.col(j).normalize();
    }
    return make_fields(columns);
}

// Attention scorer with phi(u1) = 0 and phi(u2) = ln 3 on the canonical
// basis of R^2, so the softmax is exactly (0.25, 0.75).
AttentionParams quarter_three_quarter_params() {
    AttentionParams params;
    params.hidden_w = Eigen::MatrixXd::Zero(1, 2);
    params.hidden_w(0, 1) = std::atanh(0.5);
    params.hidden_b = Eigen::VectorXd::Zero(1);
    params.output_w = Eigen::VectorXd::Constant(1, 2.0 * std::log(3.0));
    return params;
}

// Independent plain-loop forward pass used as the loss oracle.
double naive_aae_loss(const std::vector<FieldEmbeddingSet>& batch, const AttentionParams& att,
                      const AaeDecoderParams& dec) {
    const int m = batch.front().field_count();
    const int d = batch.front().dimension();
    const int ha = static_cast<int>(att.output_w.size());
    const int hr = static_cast<int>(dec.hidden_b.size());

    double total = 0.0;
    for (const auto& fields : batch) {
        std::vector<double> scores(static_cast<std::size_t>(m));
        for (int j = 0; j < m; ++j) {
            double score = 0.0;
            for (int k = 0; k < ha; ++k) {
                double pre = att.hidden_b[k];
                for (int i = 0; i < d; ++i) pre += att.hidden_w(k, i) * fields.columns(i, j);
                score += att.output_w[k] * std::tanh(pre);
            }
            scores[static_cast<std::size_t>(j)] = score;
        }
        double max_score = scores[0];
        for (double s : scores) max_score = std::max(max_score, s);
        double denom = 0.0;
        std::vector<double> weights(static_cast<std::size_t>(m));
        for (int j = 0; j < m; ++j) {
            weights[static_cast<std::size_t>(j)] =
                std::exp(scores[static_cast<std::size_t>(j)] - max_score);
            denom += weights[static_cast<std::size_t>(j)];
        }
        for (double& w : weights) w /= denom;

        std::vector<double> combined(static_cast<std::size_t>(d), 0.0);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < m; ++j)
                combined[static_cast<std::size_t>(i)] +=
                    weights[static_cast<std::size_t>(j)] * fields.columns(i, j);

        std::vector<double> hidden(static_cast<std::size_t>(hr));
        for (int k = 0; k < hr; ++k) {
            double pre = dec.hidden_b[k];
            for (int i = 0; i < d; ++i)
                pre += dec.hidden_w(k, i) * combined[static_cast<std::size_t>(i)];
            hidden[static_cast<std::size_t>(k)] = 1.0 / (1.0 + std::exp(-pre));
        }
        for (int j = 0; j < m; ++j) {
            for (int i = 0; i < d; ++i) {
                double recon = dec.output_b[i];
                for (int k = 0; k < hr; ++k)
                    recon += dec.field_w[static_cast<std::size_t>(j)](i, k) *
                             hidden[static_cast<std::size_t>(k)];
                const double err = fields.columns(i, j) - recon;
                total += err * err;
            }
        }
    }
    return total / (static_cast<double>(m) * static_cast<double>(batch.size()));
}

struct TensorView {
    double* data;
    Eigen::Index size;
};

std::vector<TensorView> tensor_views(AttentionParams& att, AaeDecoderParams& dec) {
    std::vector<TensorView> views = {{att.hidden_w.data(), att.hidden_w.size()},
                                     {att.hidden_b.data(), att.hidden_b.size()},
                                     {att.output_w.data(), att.output_w.size()},
                                     {dec.hidden_w.data(), dec.hidden_w.size()},
                                     {dec.hidden_b.data(), dec.hidden_b.size()}};
    for (auto& w : dec.field_w) views.push_back({w.data(), w.size()});
    views.push_back({dec.output_b.data(), dec.output_b.size()});
    return views;
}

std::vector<TensorView> gradient_views(AaeGradients& grads) {
    std::vector<TensorView> views = {{grads.att_hidden_w.data(), grads.att_hidden_w.size()},
                                     {grads.att_hidden_b.data(), grads.att_hidden_b.size()},
                                     {grads.att_output_w.data(), grads.att_output_w.size()},
                                     {grads.dec_hidden_w.data(), grads.dec_hidden_w.size()},
                                     {grads.dec_hidden_b.data(), grads.dec_hidden_b.size()}};
    for (auto& w : grads.dec_field_w) views.push_back({w.data(), w.size()});
    views.push_back({grads.dec_output_b.data(), grads.dec_output_b.size()});
    return views;
}

// Largest relative error between analytic and central finite-difference
// gradients over every parameter entry.
double max_gradient_error(const std::vector<FieldEmbeddingSet>& batch, AttentionParams att,
                          AaeDecoderParams dec) {
    AaeGradients grads;
    aae_gradients(batch, att, dec, grads);
    auto params = tensor_views(att, dec);
    auto analytic = gradient_views(grads);
    REQUIRE(params.size() == analytic.size());

    double worst = 0.0;
    for (std::size_t t = 0; t < params.size(); ++t) {
        for (Eigen::Index i = 0; i < params[t].size; ++i) {
            double& entry = params[t].data[i];
            const double saved = entry;
            const double h = 1e-5 * std::max(1.0, std::abs(saved));
            entry = saved + h;
            const double plus = aae_loss(batch, att, dec);
            entry = saved - h;
            const double minus = aae_loss(batch, att, dec);
            entry = saved;
            const double numeric = (plus - minus) / (2.0 * h);
            const double a = analytic[t].data[i];
            const double scale = std::max({1e-8, std::abs(a), std::abs(numeric)});
            worst = std::max(worst, std::abs(a - numeric) / scale);
        }
    }
    return worst;
}

std::vector<FieldEmbeddingSet> random_batch(int dim, int m, int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<FieldEmbeddingSet> batch;
    for (int i = 0; i < count; ++i) batch.push_back(random_fields(dim, m, rng));
    return batch;
}

bool params_equal(const AttentionParams& a, const AttentionParams& b) {
    return a.hidden_w == b.hidden_w && a.hidden_b == b.hidden_b && a.output_w == b.output_w;
}

}  // namespace

TEST_CASE("softmax basics") {
    SUBCASE("identical columns give uniform weights") {
        Eigen::MatrixXd columns(3, 4);
        for (int j = 0; j < 4; ++j) columns.col(j) = Eigen::Vector3d(0.3, -0.2, 0.9);
        const auto fields = make_fields(columns);
        const auto params = init_attention_params({3, 4, 5, 4}, 11);
        const Eigen::VectorXd alpha = attention_weights(fields, params);
        for (int j = 0; j < 4; ++j) CHECK(alpha[j] == doctest::Approx(0.25).epsilon(1e-12));
    }
    SUBCASE("weights sum to one and stay in (0,1)") {
        std::mt19937_64 rng(5);
        for (int trial = 0; trial < 200; ++trial) {
            const auto fields = random_fields(4, 3, rng);
            const auto params = init_attention_params({4, 3, 6, 4}, rng());
            const Eigen::VectorXd alpha = attention_weights(fields, params);
            CHECK(std::abs(alpha.sum() - 1.0) < 1e-9);
            for (int j = 0; j < 3; ++j) {
                CHECK(alpha[j] > 0.0);
                CHECK(alpha[j] < 1.0);
            }
        }
    }
    SUBCASE("shift invariance") {
        std::mt19937_64 rng(6);
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (int trial = 0; trial < 100; ++trial) {
            Eigen::VectorXd scores(5);
            for (int i = 0; i < 5; ++i) scores[i] = gauss(rng);
            const double shift = gauss(rng) * 10.0;
            const Eigen::VectorXd base = softmax(scores);
            const Eigen::VectorXd shifted = softmax(scores + Eigen::VectorXd::Constant(5, shift));
            CHECK((base - shifted).cwiseAbs().maxCoeff() < 1e-9);
        }
    }
    SUBCASE("hand-set scorer gives (0.25, 0.75)") {
        const auto params = quarter_three_quarter_params();
        const auto fields = make_fields(Eigen::Matrix2d::Identity());
        const Eigen::VectorXd alpha = attention_weights(fields, params);
        CHECK(alpha[0] == doctest::Approx(0.25).epsilon(1e-12));
        CHECK(alpha[1] == doctest::Approx(0.75).epsilon(1e-12));
    }
}

TEST_CASE("aggregate") {
    SUBCASE("identical columns reduce to the normalized column") {
        Eigen::MatrixXd columns(3, 3);
        const Eigen::Vector3d u(1.0, 2.0, 2.0);  // norm 3
        for (int j = 0; j < 3; ++j) columns.col(j) = u;
        const auto params = init_attention_params({3, 3, 4, 4}, 2);
        const Eigen::VectorXd v = aggregate(make_fields(columns), params);
        CHECK(v[0] == doctest::Approx(1.0 / 3.0));
        CHECK(v[1] == doctest::Approx(2.0 / 3.0));
        CHECK(v[2] == doctest::Approx(2.0 / 3.0));
    }
    SUBCASE("orthonormal columns under (0.25, 0.75)") {
        const auto params = quarter_three_quarter_params();
        const Eigen::VectorXd v = aggregate(make_fields(Eigen::Matrix2d::Identity()), params);
        // normalize(0.25 e1 + 0.75 e2); norm sqrt(0.625)
        CHECK(v[0] == doctest::Approx(0.31622776601683794).epsilon(1e-12));
        CHECK(v[1] == doctest::Approx(0.9486832980505138).epsilon(1e-12));
        CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("zero columns contribute nothing") {
        Eigen::MatrixXd columns = Eigen::MatrixXd::Zero(3, 2);
        columns(0, 0) = 1.0;  // second column missing
        FieldEmbeddingSet fields = make_fields(columns);
        fields.present = {true, false};
        const auto params = init_attention_params({3, 2, 4, 4}, 3);
        const Eigen::VectorXd v = aggregate(fields, params);
        CHECK(std::abs(v[0]) == doctest::Approx(1.0));
        CHECK(v[1] == doctest::Approx(0.0));
        CHECK(v[2] == doctest::Approx(0.0));
    }
    SUBCASE("all-zero field set is degenerate") {
        const auto fields = make_fields(Eigen::MatrixXd::Zero(3, 2));
        const auto params = init_attention_params({3, 2, 4, 4}, 4);
        CHECK_THROWS_AS(aggregate(fields, params), UnembeddableError);
    }
}

TEST_CASE("permutation equivariance") {
    std::mt19937_64 rng(17);
    const int m = 4;
    auto fields = random_fields(5, m, rng);
    auto params = init_attention_params({5, m, 6, 4}, 19);

    const Eigen::VectorXd alpha = attention_weights(fields, params);
    const Eigen::VectorXd v = aggregate(fields, params);

    // Rotate columns left by one.
    Eigen::MatrixXd permuted(5, m);
    for (int j = 0; j < m; ++j) permuted.col(j) = fields.columns.col((j + 1) % m);
    const auto permuted_fields = make_fields(permuted);
    const Eigen::VectorXd alpha_perm = attention_weights(permuted_fields, params);
    const Eigen::VectorXd v_perm = aggregate(permuted_fields, params);

    for (int j = 0; j < m; ++j)
        CHECK(alpha_perm[j] == doctest::Approx(alpha[(j + 1) % m]).epsilon(1e-12));
    CHECK((v - v_perm).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("aae_loss") {
    SUBCASE("decoder reproducing the single field exactly gives zero loss") {
        const Eigen::Vector3d target(0.2, -0.4, 0.7);
        Eigen::MatrixXd columns(3, 1);
        columns.col(0) = target;

        AttentionParams att = init_attention_params({3, 1, 2, 2}, 5);
        AaeDecoderParams dec;
        dec.hidden_w = Eigen::MatrixXd::Zero(2, 3);
        dec.hidden_b = Eigen::VectorXd::Zero(2);
        dec.field_w = {Eigen::MatrixXd::Zero(3, 2)};
        dec.output_b = target;

        const std::vector<FieldEmbeddingSet> batch = {make_fields(columns)};
        CHECK(aae_loss(batch, att, dec) == doctest::Approx(0.0));
    }
    SUBCASE("all-zero decoder output leaves the mean squared field norm") {
        // two unit fields present, one missing, m = 3 -> loss 2/3
        Eigen::MatrixXd columns = Eigen::MatrixXd::Zero(4, 3);
        columns(0, 0) = 1.0;
        columns(1, 2) = 1.0;

        AttentionParams att = init_attention_params({4, 3, 2, 2}, 6);
        AaeDecoderParams dec;
        dec.hidden_w = Eigen::MatrixXd::Zero(2, 4);
        dec.hidden_b = Eigen::VectorXd::Constant(2, -1e9);  // sigmoid -> 0
        dec.field_w.assign(3, Eigen::MatrixXd::Zero(4, 2));
        dec.output_b = Eigen::VectorXd::Zero(4);

        const std::vector<FieldEmbeddingSet> batch = {make_fields(columns)};
        CHECK(aae_loss(batch, att, dec) == doctest::Approx(2.0 / 3.0));
    }
    SUBCASE("matches an independently coded forward pass") {
        std::mt19937_64 rng(23);
        for (int trial = 0; trial < 10; ++trial) {
            const auto batch = random_batch(3, 2, 2, rng());
            const auto att = init_attention_params({3, 2, 4, 4}, rng());
            const auto dec = init_aae_decoder_params({3, 2, 4, 4}, rng());
            const double fast = aae_loss(batch, att, dec);
            const double naive = naive_aae_loss(batch, att, dec);
            CHECK(fast == doctest::Approx(naive).epsilon(1e-12));
        }
    }
}

TEST_CASE("aae_gradients match central finite differences") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 8; ++trial) {
        const int d = 2 + static_cast<int>(rng() % 4);  // up to 5
        const int m = 2 + static_cast<int>(rng() % 2);  // up to 3
        const auto batch = random_batch(d, m, 2, rng());
        const auto att = init_attention_params({d, m, 4, 4}, rng());
        const auto dec = init_aae_decoder_params({d, m, 4, 4}, rng());
        CHECK(max_gradient_error(batch, att, dec) < 1e-4);
    }
}

TEST_CASE("gradient of a duplicated batch equals the single-copy gradient") {
    const auto batch = random_batch(3, 2, 3, 37);
    std::vector<FieldEmbeddingSet> doubled = batch;
    doubled.insert(doubled.end(), batch.begin(), batch.end());

    const auto att = init_attention_params({3, 2, 4, 4}, 41);
    const auto dec = init_aae_decoder_params({3, 2, 4, 4}, 43);

    AaeGradients single, twice;
    const double loss1 = aae_gradients(batch, att, dec, single);
    const double loss2 = aae_gradients(doubled, att, dec, twice);
    CHECK(loss1 == doctest::Approx(loss2).epsilon(1e-12));
    CHECK((single.att_hidden_w - twice.att_hidden_w).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((single.dec_hidden_w - twice.dec_hidden_w).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((single.dec_output_b - twice.dec_output_b).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("train_aae") {
    const AaeDims dims{8, 3, 6, 8};
    const std::vector<FieldEmbeddingSet> dataset = random_batch(8, 3, 400, 47);

    SUBCASE("loss drops on synthetic data") {
        AaeTrainOptions options;
        options.epochs = 20;
        options.batch_size = 64;
        options.seed = 1;
        const AaeModel model = train_aae(dataset, dims, options);
        REQUIRE(model.loss_curve.size() == 21);
        CHECK(model.loss_curve.back() < 0.9 * model.loss_curve.front());
    }
    SUBCASE("zero epochs returns the initialization unchanged") {
        AaeTrainOptions options;
        options.epochs = 0;
        options.seed = 2;
        const AaeModel model = train_aae(dataset, dims, options);
        REQUIRE(model.loss_curve.size() == 1);
        const double loss = aae_loss(dataset, model.attention, model.decoder);
        CHECK(loss == doctest::Approx(model.loss_curve[0]).epsilon(1e-12));
    }
    SUBCASE("same seed twice is bit-identical") {
        AaeTrainOptions options;
        options.epochs = 3;
        options.batch_size = 64;
        options.seed = 3;
        const AaeModel a = train_aae(dataset, dims, options);
        const AaeModel b = train_aae(dataset, dims, options);
        CHECK(params_equal(a.attention, b.attention));
        CHECK(a.decoder.hidden_w == b.decoder.hidden_w);
        CHECK(a.loss_curve == b.loss_curve);
    }
    SUBCASE("gradient norm is small after training to convergence") {
        // Identical products: reconstruction can fit them almost exactly.
        std::vector<FieldEmbeddingSet> tiny(16, dataset[0]);
        AaeTrainOptions options;
        options.epochs = 1500;
        options.batch_size = 16;
        options.seed = 4;
        const AaeModel model = train_aae(tiny, {8, 3, 4, 4}, options);
        AaeGradients grads;
        aae_gradients(tiny, model.attention, model.decoder, grads);
        double norm_sq = 0.0;
        norm_sq += grads.att_hidden_w.squaredNorm();
        norm_sq += grads.att_hidden_b.squaredNorm();
        norm_sq += grads.att_output_w.squaredNorm();
        norm_sq += grads.dec_hidden_w.squaredNorm();
        norm_sq += grads.dec_hidden_b.squaredNorm();
        for (const auto& g : grads.dec_field_w) norm_sq += g.squaredNorm();
        norm_sq += grads.dec_output_b.squaredNorm();
        CHECK(std::sqrt(norm_sq) < 1e-3);
    }
}

TEST_CASE("attention learns to downweight a noise field") {
    // Fields 0 and 1 carry a shared cluster signal, field 2 is a fresh
    // random direction per product.
    std::mt19937_64 rng(53);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int d = 12;
    const int clusters = 4;

    std::vector<Eigen::VectorXd> centers;
    for (int c = 0; c < clusters; ++c) {
        Eigen::VectorXd center(d);
        for (int i = 0; i < d; ++i) center[i] = gauss(rng);
        center.normalize();
        centers.push_back(center);
    }

    std::vector<FieldEmbeddingSet> dataset;
    for (int n = 0; n < 600; ++n) {
        const auto& center = centers[static_cast<std::size_t>(n % clusters)];
        Eigen::MatrixXd columns(d, 3);
        for (int j = 0; j < 2; ++j) {
            Eigen::VectorXd col = center;
            for (int i = 0; i < d; ++i) col[i] += 0.05 * gauss(rng);
            columns.col(j) = col.normalized();
        }
        Eigen::VectorXd noise(d);
        for (int i = 0; i < d; ++i) noise[i] = gauss(rng);
        columns.col(2) = noise.normalized();
        dataset.push_back(make_fields(columns));
    }

    AaeTrainOptions options;
    options.epochs = 40;
    options.batch_size = 64;
    options.seed = 59;
    const AaeModel model = train_aae(dataset, {d, 3, 8, 16}, options);

    Eigen::Vector3d mean_alpha = Eigen::Vector3d::Zero();
    for (const auto& fields : dataset) mean_alpha += attention_weights(fields, model.attention);
    mean_alpha /= static_cast<double>(dataset.size());

    const double informative = 0.5 * (mean_alpha[0] + mean_alpha[1]);
    CHECK(mean_alpha[2] < informative);
}

#include "moodkit/model.hpp"

#include <cmath>

#include "doctest.h"
#include "moodkit/checkpoint.hpp"
#include "moodkit/error.hpp"
#include "test_helpers.hpp"

using namespace moodkit;
using namespace moodkit::model;

namespace {

MultimodalModel random_model(SeededRng& rng, std::vector<int> dims, int hidden, int embed, int classes) {
    ModelDims d;
    d.modality_dims = std::move(dims);
    d.hidden_dim = hidden;
    d.embed_dim = embed;
    d.class_count = classes;
    return MultimodalModel::initialize(d, rng);
}

}  // namespace

TEST_CASE("softmax of zeros is uniform") {
    Eigen::VectorXd logits = Eigen::VectorXd::Zero(3);
    const Eigen::VectorXd p = softmax(logits);
    for (int i = 0; i < 3; ++i) {
        CHECK(p[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }
}

TEST_CASE("softmax is stable under large logits") {
    Eigen::VectorXd logits(2);
    logits << 1000.0, 0.0;
    const Eigen::VectorXd p = softmax(logits);
    CHECK(std::isfinite(p[0]));
    CHECK(p[0] == doctest::Approx(1.0));
    CHECK(p[1] >= 0.0);
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("softmax of [2,0] matches the direct evaluation") {
    Eigen::VectorXd logits(2);
    logits << 2.0, 0.0;
    const Eigen::VectorXd p = softmax(logits);
    CHECK(p[0] == doctest::Approx(0.8807970779778824).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.11920292202211755).epsilon(1e-12));
}

TEST_CASE("cross entropy basics") {
    Eigen::VectorXd onehot(3);
    onehot << 0, 1, 0;
    CHECK(cross_entropy(onehot, 1) == doctest::Approx(0.0));

    Eigen::VectorXd uniform = Eigen::VectorXd::Constant(4, 0.25);
    CHECK(cross_entropy(uniform, 2) == doctest::Approx(std::log(4.0)).epsilon(1e-12));

    Eigen::VectorXd p(3);
    p << 0.5, 0.25, 0.25;
    CHECK(cross_entropy(p, 1) == doctest::Approx(1.3862943611198906).epsilon(1e-12));

    CHECK_THROWS_AS(cross_entropy(p, 3), ArgumentError);
    CHECK_THROWS_AS(cross_entropy(p, -1), ArgumentError);
}

TEST_CASE("cross entropy clamps at the probability floor") {
    Eigen::VectorXd p(2);
    p << 1.0, 0.0;
    CHECK(cross_entropy(p, 1) == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("entropy basics") {
    Eigen::VectorXd onehot(3);
    onehot << 0, 0, 1;
    CHECK(entropy(onehot) == doctest::Approx(0.0));

    Eigen::VectorXd uniform = Eigen::VectorXd::Constant(5, 0.2);
    CHECK(entropy(uniform) == doctest::Approx(std::log(5.0)).epsilon(1e-12));

    Eigen::VectorXd half(4);
    half << 0.5, 0.5, 0.0, 0.0;
    CHECK(entropy(half) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("logitnorm normalizes to 1/tau and is scale invariant") {
    Eigen::VectorXd v(2);
    v << 3.0, 4.0;
    const Eigen::VectorXd out = logitnorm_logits(v, 1.0);
    CHECK(out[0] == doctest::Approx(0.6).epsilon(1e-9));
    CHECK(out[1] == doctest::Approx(0.8).epsilon(1e-9));

    Eigen::VectorXd unit(2);
    unit << 1.0, 0.0;
    CHECK((logitnorm_logits(unit, 1.0) - unit).norm() < 1e-9);

    SeededRng rng(3);
    for (int i = 0; i < 20; ++i) {
        Eigen::VectorXd x = test::random_matrix(rng, 4, 1);
        const double tau = 0.04;
        const Eigen::VectorXd a = logitnorm_logits(x, tau);
        const Eigen::VectorXd b = logitnorm_logits(3.7 * x, tau);
        CHECK((a - b).norm() < 1e-9);
        CHECK(a.norm() == doctest::Approx(1.0 / tau).epsilon(1e-9));
    }
    CHECK_THROWS_AS(logitnorm_logits(v, 0.0), ArgumentError);
}

TEST_CASE("forward with all-zero parameters yields uniform probabilities") {
    SeededRng rng(1);
    MultimodalModel net = random_model(rng, {3, 4}, 5, 3, 4);
    visit_parameters(net, [](auto& t) { t.setZero(); });
    const auto bundle = forward(net, {test::random_matrix(rng, 6, 3), test::random_matrix(rng, 6, 4)});
    for (Eigen::Index i = 0; i < 6; ++i) {
        for (Eigen::Index c = 0; c < 4; ++c) {
            CHECK(bundle.joint_probs(i, c) == doctest::Approx(0.25).epsilon(1e-12));
            CHECK(bundle.modality_probs[0](i, c) == doctest::Approx(0.25).epsilon(1e-12));
        }
    }
}

TEST_CASE("identity-like single-modality toy reproduces the softmax values") {
    // encoder and heads wired to identity: logits equal the input
    MultimodalModel net;
    net.dims.modality_dims = {2};
    net.dims.hidden_dim = 2;
    net.dims.embed_dim = 2;
    net.dims.class_count = 2;
    MultimodalModel::Encoder enc;
    enc.hidden.weight = Eigen::MatrixXd::Identity(2, 2);
    enc.hidden.bias = Eigen::VectorXd::Zero(2);
    enc.hidden.activation = Activation::relu;
    enc.embed.weight = Eigen::MatrixXd::Identity(2, 2);
    enc.embed.bias = Eigen::VectorXd::Zero(2);
    net.encoders.push_back(enc);
    DenseLayer head;
    head.weight = Eigen::MatrixXd::Identity(2, 2);
    head.bias = Eigen::VectorXd::Zero(2);
    net.modality_heads.push_back(head);
    net.joint_head = head;

    FeatureMatrix input(1, 2);
    input << 1.0, 0.0;
    const auto bundle = forward(net, {input});
    CHECK(bundle.joint_logits(0, 0) == doctest::Approx(1.0));
    CHECK(bundle.joint_logits(0, 1) == doctest::Approx(0.0));
    CHECK(bundle.joint_probs(0, 0) == doctest::Approx(0.7310585786300049).epsilon(1e-12));
    CHECK(bundle.joint_probs(0, 1) == doctest::Approx(0.2689414213699951).epsilon(1e-12));
}

TEST_CASE("permuting batch rows permutes outputs identically") {
    SeededRng rng(9);
    MultimodalModel net = random_model(rng, {3, 2}, 4, 3, 3);
    const auto m1 = test::random_matrix(rng, 5, 3);
    const auto m2 = test::random_matrix(rng, 5, 2);
    const auto bundle = forward(net, {m1, m2});

    std::vector<Eigen::Index> perm{4, 2, 0, 3, 1};
    FeatureMatrix p1(5, 3), p2(5, 2);
    for (int i = 0; i < 5; ++i) {
        p1.row(i) = m1.row(perm[i]);
        p2.row(i) = m2.row(perm[i]);
    }
    const auto permuted = forward(net, {p1, p2});
    for (int i = 0; i < 5; ++i) {
        CHECK((permuted.joint_probs.row(i) - bundle.joint_probs.row(perm[i])).cwiseAbs().maxCoeff() == 0.0);
        CHECK((permuted.embeddings[1].row(i) - bundle.embeddings[1].row(perm[i])).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("forward is pure: repeated calls agree exactly") {
    SeededRng rng(13);
    MultimodalModel net = random_model(rng, {4, 4}, 6, 3, 3);
    const auto m1 = test::random_matrix(rng, 7, 4);
    const auto m2 = test::random_matrix(rng, 7, 4);
    const auto a = forward(net, {m1, m2});
    const auto b = forward(net, {m1, m2});
    CHECK(test::same_matrix(a.joint_logits, b.joint_logits));
    CHECK(test::same_matrix(a.joint_probs, b.joint_probs));
}

TEST_CASE("prediction probability rows sum to one") {
    SeededRng rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        MultimodalModel net = random_model(rng, {3, 5}, 4, 3, 5);
        const auto bundle = forward(net, {test::random_matrix(rng, 4, 3), test::random_matrix(rng, 4, 5)});
        for (Eigen::Index i = 0; i < 4; ++i) {
            CHECK(std::abs(bundle.joint_probs.row(i).sum() - 1.0) < 1e-9);
            CHECK(std::abs(bundle.modality_probs[0].row(i).sum() - 1.0) < 1e-9);
            CHECK(std::abs(bundle.modality_probs[1].row(i).sum() - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("forward rejects mismatched dims") {
    SeededRng rng(2);
    MultimodalModel net = random_model(rng, {3, 4}, 4, 2, 2);
    CHECK_THROWS_AS(forward(net, {test::random_matrix(rng, 2, 3)}), StructuralError);
    CHECK_THROWS_AS(forward(net, {test::random_matrix(rng, 2, 3), test::random_matrix(rng, 2, 5)}),
                    StructuralError);
}

TEST_CASE("adam leaves parameters unchanged on zero gradients") {
    SeededRng rng(31);
    MultimodalModel net = random_model(rng, {2, 2}, 3, 2, 2);
    const MultimodalModel before = net;
    AdamState state = AdamState::init(net);
    state.first_moment.joint_head.weight.setConstant(0.5);
    state.second_moment.joint_head.weight.setConstant(0.25);
    const GradientSet zeros = GradientSet::zeros_like(net);
    adam_step(net, zeros, state, 0.1);
    CHECK(test::same_matrix(net.joint_head.weight, before.joint_head.weight));
    CHECK(test::same_matrix(net.encoders[0].hidden.weight, before.encoders[0].hidden.weight));
    // moments decay toward zero
    CHECK(state.first_moment.joint_head.weight(0, 0) == doctest::Approx(0.45).epsilon(1e-12));
    CHECK(state.second_moment.joint_head.weight(0, 0) == doctest::Approx(0.25 * 0.999).epsilon(1e-12));
}

TEST_CASE("first adam step moves by -lr * g / (|g| + eps) in the scalar sense") {
    SeededRng rng(32);
    MultimodalModel net = random_model(rng, {2}, 2, 2, 2);
    GradientSet grads = GradientSet::zeros_like(net);
    grads.joint_head.bias[0] = 0.37;
    const double before = net.joint_head.bias[0];
    AdamState state = AdamState::init(net);
    const double lr = 0.01;
    adam_step(net, grads, state, lr);
    // bias-corrected first step: mhat = g, vhat = g^2
    const double expected = before - lr * 0.37 / (std::abs(0.37) + 1e-8);
    CHECK(net.joint_head.bias[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("adam is deterministic over 100 steps") {
    auto run = [] {
        SeededRng rng(5);
        MultimodalModel net = random_model(rng, {3, 2}, 4, 2, 3);
        AdamState state = AdamState::init(net);
        SeededRng grad_rng(17);
        for (int step = 0; step < 100; ++step) {
            GradientSet grads = GradientSet::zeros_like(net);
            visit_parameters(grads, [&](auto& t) {
                for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = grad_rng.normal();
            });
            adam_step(net, grads, state, 1e-3);
        }
        return net;
    };
    const MultimodalModel a = run();
    const MultimodalModel b = run();
    CHECK(test::models_identical(a, b));
}

TEST_CASE("checkpoint round-trips parameters exactly") {
    SeededRng rng(8);
    MultimodalModel net = random_model(rng, {3, 4, 2}, 5, 3, 4);
    const auto j = io::checkpoint_to_json(net);
    CHECK(j.at("format_version").get<int>() == 1);
    const MultimodalModel back = io::checkpoint_from_json(j);
    CHECK(back.dims.modality_dims == net.dims.modality_dims);
    CHECK(test::models_identical(net, back));

    // through a file as well
    const auto path = std::filesystem::temp_directory_path() / "moodkit_ckpt_test.json";
    io::save_checkpoint(net, path);
    const MultimodalModel loaded = io::load_checkpoint(path);
    CHECK(test::models_identical(net, loaded));
    std::filesystem::remove(path);
}

TEST_CASE("glorot initialization respects the documented bound") {
    SeededRng rng(44);
    MultimodalModel net = random_model(rng, {6}, 8, 4, 3);
    const double bound = std::sqrt(6.0 / (6 + 8));
    CHECK(net.encoders[0].hidden.weight.cwiseAbs().maxCoeff() <= bound);
    CHECK(net.encoders[0].hidden.bias.cwiseAbs().maxCoeff() == 0.0);
}

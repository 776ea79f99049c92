#include "moodkit/npmix.hpp"

#include <set>

#include "doctest.h"
#include "moodkit/error.hpp"
#include "test_helpers.hpp"

using namespace moodkit;
using namespace moodkit::npmix;

TEST_CASE("prototypes are exact class means") {
    FeatureMatrix joint(3, 2);
    joint << 0, 0, 2, 4, 5, 5;
    const auto protos = compute_prototypes(joint, {0, 0, 1}, 2);
    CHECK(protos.prototypes(0, 0) == doctest::Approx(1.0));
    CHECK(protos.prototypes(0, 1) == doctest::Approx(2.0));
    CHECK(protos.prototypes(1, 0) == doctest::Approx(5.0));
    CHECK(protos.counts[0] == 2);
    CHECK(protos.counts[1] == 1);
}

TEST_CASE("a single sample per class gives that sample as prototype") {
    FeatureMatrix joint(2, 3);
    joint << 1, 2, 3, 4, 5, 6;
    const auto protos = compute_prototypes(joint, {1, 0}, 2);
    CHECK(test::same_matrix(protos.prototypes.row(1), joint.row(0)));
    CHECK(test::same_matrix(protos.prototypes.row(0), joint.row(1)));
}

TEST_CASE("shifting all embeddings shifts all prototypes equally") {
    SeededRng rng(5);
    FeatureMatrix joint = test::random_matrix(rng, 10, 4);
    std::vector<int> labels;
    for (int i = 0; i < 10; ++i) labels.push_back(i % 3);
    const auto base = compute_prototypes(joint, labels, 3);
    FeatureMatrix shifted = joint;
    shifted.array() += 2.5;
    const auto moved = compute_prototypes(shifted, labels, 3);
    CHECK(((moved.prototypes - base.prototypes).array() - 2.5).abs().maxCoeff() < 1e-12);
}

TEST_CASE("prototypes are invariant to sample order") {
    SeededRng rng(6);
    FeatureMatrix joint = test::random_matrix(rng, 8, 3);
    std::vector<int> labels = {0, 1, 0, 1, 2, 2, 0, 1};
    const auto base = compute_prototypes(joint, labels, 3);

    std::vector<Eigen::Index> perm = {7, 2, 5, 0, 3, 6, 1, 4};
    FeatureMatrix permuted(8, 3);
    std::vector<int> permuted_labels(8);
    for (int i = 0; i < 8; ++i) {
        permuted.row(i) = joint.row(perm[i]);
        permuted_labels[i] = labels[perm[i]];
    }
    const auto reordered = compute_prototypes(permuted, permuted_labels, 3);
    CHECK((reordered.prototypes - base.prototypes).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("empty class is reported by index") {
    FeatureMatrix joint(2, 2);
    joint.setZero();
    CHECK_THROWS_WITH_AS(compute_prototypes(joint, {0, 2}, 3), doctest::Contains("class 1"), ArgumentError);
}

TEST_CASE("nearest prototype classes") {
    PrototypeSet protos;
    protos.prototypes = FeatureMatrix(3, 1);
    protos.prototypes << 0, 1, 10;
    protos.counts = {1, 1, 1};

    CHECK(nearest_prototype_classes(protos, 0, 1) == std::vector<int>{1});
    CHECK(nearest_prototype_classes(protos, 2, 2) == std::vector<int>{1, 0});

    SUBCASE("two classes always map to each other") {
        PrototypeSet two;
        two.prototypes = FeatureMatrix(2, 2);
        two.prototypes << 0, 0, 3, 4;
        two.counts = {1, 1};
        CHECK(nearest_prototype_classes(two, 0, 1) == std::vector<int>{1});
        CHECK(nearest_prototype_classes(two, 1, 1) == std::vector<int>{0});
    }
    SUBCASE("equidistant prototypes break ties toward the lower class index") {
        PrototypeSet tie;
        tie.prototypes = FeatureMatrix(3, 1);
        tie.prototypes << 0, -1, 1;
        tie.counts = {1, 1, 1};
        CHECK(nearest_prototype_classes(tie, 0, 1) == std::vector<int>{1});
    }
    SUBCASE("n beyond C-1 is rejected") {
        CHECK_THROWS_AS(nearest_prototype_classes(protos, 0, 3), ArgumentError);
    }
}

TEST_CASE("npmix synthesis: hull, provenance and neighbor constraints") {
    SeededRng data_rng(17);
    const int classes = 5;
    const int rows = 60;
    FeatureMatrix joint = test::random_matrix(data_rng, rows, 6, 2.0);
    std::vector<int> labels;
    for (int i = 0; i < rows; ++i) labels.push_back(i % classes);
    const auto protos = compute_prototypes(joint, labels, classes);

    NpMixConfig cfg;
    cfg.neighbors_n = 2;
    cfg.alpha = 10.0;
    SeededRng rng(99);
    const auto batch = npmix_synthesize(joint, labels, protos, cfg, rng, nullptr, 500);
    REQUIRE(batch.joint_embeddings.rows() == 500);
    REQUIRE(batch.sources.size() == 500);

    for (int i = 0; i < 500; ++i) {
        const auto& src = batch.sources[i];
        CHECK(src.class_c != src.class_s);
        CHECK(src.lambda > 0.0);
        CHECK(src.lambda < 1.0);
        CHECK(labels[src.index_1] == src.class_c);
        CHECK(labels[src.index_2] == src.class_s);

        // neighbor constraint from provenance
        const auto neighbors = nearest_prototype_classes(protos, src.class_c, cfg.neighbors_n);
        CHECK(std::find(neighbors.begin(), neighbors.end(), src.class_s) != neighbors.end());

        // exact reconstruction and component-wise hull
        const Eigen::VectorXd z1 = joint.row(src.index_1).transpose();
        const Eigen::VectorXd z2 = joint.row(src.index_2).transpose();
        const Eigen::VectorXd rebuilt = src.lambda * z1 + (1.0 - src.lambda) * z2;
        CHECK(test::same_matrix(batch.joint_embeddings.row(i).transpose(), rebuilt));
        for (int c = 0; c < 6; ++c) {
            CHECK(batch.joint_embeddings(i, c) >= std::min(z1[c], z2[c]) - 1e-12);
            CHECK(batch.joint_embeddings(i, c) <= std::max(z1[c], z2[c]) + 1e-12);
        }
    }
}

TEST_CASE("npmix synthesis is bit-reproducible under a fixed seed") {
    SeededRng data_rng(18);
    FeatureMatrix joint = test::random_matrix(data_rng, 30, 4);
    std::vector<int> labels;
    for (int i = 0; i < 30; ++i) labels.push_back(i % 3);
    const auto protos = compute_prototypes(joint, labels, 3);
    NpMixConfig cfg;
    SeededRng r1(5), r2(5);
    const auto b1 = npmix_synthesize(joint, labels, protos, cfg, r1, nullptr, 64);
    const auto b2 = npmix_synthesize(joint, labels, protos, cfg, r2, nullptr, 64);
    CHECK(test::same_matrix(b1.joint_embeddings, b2.joint_embeddings));
}

TEST_CASE("npmix falls back to the epoch pool for classes absent from the batch") {
    SeededRng data_rng(19);
    FeatureMatrix pool_joint = test::random_matrix(data_rng, 40, 3);
    std::vector<int> pool_labels;
    for (int i = 0; i < 40; ++i) pool_labels.push_back(i % 4);
    const auto protos = compute_prototypes(pool_joint, pool_labels, 4);

    // batch holds only classes 0 and 1
    FeatureMatrix batch_joint = pool_joint.topRows(2);
    std::vector<int> batch_labels = {0, 1};

    NpMixConfig cfg;
    cfg.neighbors_n = 3;
    SeededRng rng(77);
    SamplePool pool{&pool_joint, &pool_labels};
    const auto batch = npmix_synthesize(batch_joint, batch_labels, protos, cfg, rng, &pool, 200);

    bool pool_used = false;
    for (const auto& src : batch.sources) {
        CHECK((src.class_c == 0 || src.class_c == 1));  // sampled among classes present in batch
        if (src.from_pool_2) {
            pool_used = true;
            CHECK(pool_labels[src.index_2] == src.class_s);
        }
    }
    CHECK(pool_used);

    SUBCASE("without a pool the absent class is an error") {
        SeededRng rng2(78);
        CHECK_THROWS_AS(npmix_synthesize(batch_joint, batch_labels, protos, cfg, rng2, nullptr, 200),
                        ArgumentError);
    }
}

TEST_CASE("beta(10,10) draws concentrate around one half") {
    SeededRng rng(123);
    double sum = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) sum += rng.beta(10.0, 10.0);
    CHECK(sum / n > 0.47);
    CHECK(sum / n < 0.53);
}

TEST_CASE("npmix config validation") {
    NpMixConfig cfg;
    cfg.neighbors_n = 5;
    CHECK_THROWS_AS(cfg.validate(4), ArgumentError);  // needs <= C-1
    cfg.neighbors_n = 2;
    cfg.alpha = 0.0;
    CHECK_THROWS_AS(cfg.validate(4), ArgumentError);
}

TEST_CASE("mixup pairs arbitrary distinct samples") {
    FeatureMatrix joint(2, 2);
    joint << 0, 0, 2, 4;
    SeededRng rng(3);
    const auto batch = mixup_synthesize(joint, {0, 0}, 10.0, rng, 50);
    for (int i = 0; i < 50; ++i) {
        const auto& src = batch.sources[i];
        CHECK(src.index_1 != src.index_2);
        // on the segment between the two rows
        const double t = batch.joint_embeddings(i, 1) / 4.0;
        CHECK(batch.joint_embeddings(i, 0) == doctest::Approx(2.0 * t).epsilon(1e-12));
        CHECK(t >= 0.0);
        CHECK(t <= 1.0);
        // provenance reconstructs the row exactly
        const Eigen::VectorXd rebuilt = src.lambda * joint.row(src.index_1).transpose() +
                                        (1.0 - src.lambda) * joint.row(src.index_2).transpose();
        CHECK(test::same_matrix(batch.joint_embeddings.row(i).transpose(), rebuilt));
    }
    CHECK_THROWS_AS(mixup_synthesize(joint.topRows(1), {0}, 10.0, rng, 5), ArgumentError);
}

TEST_CASE("mixup may pair samples of the same class, npmix never does") {
    SeededRng data_rng(21);
    FeatureMatrix joint = test::random_matrix(data_rng, 20, 3);
    std::vector<int> labels(20, 0);
    for (int i = 10; i < 20; ++i) labels[i] = 1;
    SeededRng rng(9);
    const auto mix = mixup_synthesize(joint, labels, 10.0, rng, 300);
    bool same_class_seen = false;
    for (const auto& src : mix.sources) {
        if (src.class_c == src.class_s) same_class_seen = true;
    }
    CHECK(same_class_seen);
}

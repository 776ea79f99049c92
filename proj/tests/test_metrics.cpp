#include "moodkit/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "moodkit/data_io.hpp"
#include "moodkit/error.hpp"
#include "moodkit/trainer.hpp"
#include "test_helpers.hpp"

using namespace moodkit;
using namespace moodkit::metrics;

namespace {

/// Brute-force threshold sweep: minimal FPR over every candidate threshold
/// whose TPR reaches the target (>= counts ties on both sides).
double fpr_sweep_oracle(const std::vector<double>& id_scores, const std::vector<double>& ood_scores,
                        double tpr_target) {
    std::vector<double> candidates = id_scores;
    candidates.insert(candidates.end(), ood_scores.begin(), ood_scores.end());
    double best = 1.0;
    bool feasible = false;
    for (double eta : candidates) {
        std::size_t tp = 0;
        for (double s : id_scores) {
            if (s >= eta) ++tp;
        }
        if (static_cast<double>(tp) / id_scores.size() + 1e-12 < tpr_target) continue;
        std::size_t fp = 0;
        for (double s : ood_scores) {
            if (s >= eta) ++fp;
        }
        best = feasible ? std::min(best, static_cast<double>(fp) / ood_scores.size())
                        : static_cast<double>(fp) / ood_scores.size();
        feasible = true;
    }
    REQUIRE(feasible);
    return best;
}

/// O(n^2) pairwise counting with half credit for ties.
double auroc_pair_oracle(const std::vector<double>& id_scores, const std::vector<double>& ood_scores) {
    double acc = 0.0;
    for (double a : id_scores) {
        for (double b : ood_scores) {
            if (a > b) {
                acc += 1.0;
            } else if (a == b) {
                acc += 0.5;
            }
        }
    }
    return acc / (static_cast<double>(id_scores.size()) * static_cast<double>(ood_scores.size()));
}

std::vector<double> random_scores_with_ties(SeededRng& rng, std::size_t n) {
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        // quantized values produce deliberate duplicates
        out.push_back(static_cast<double>(rng.index(12)) * 0.5 - 2.0);
    }
    return out;
}

}  // namespace

TEST_CASE("fpr_at_tpr matches the worked example") {
    std::vector<double> id_scores;
    for (int i = 1; i <= 20; ++i) id_scores.push_back(i);
    const std::vector<double> ood_scores = {0.0, 1.5, 2.5};
    CHECK(fpr_at_tpr(id_scores, ood_scores, 0.95) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("fpr_at_tpr is zero under perfect separation") {
    const std::vector<double> id_scores = {5, 6, 7, 8};
    const std::vector<double> ood_scores = {1, 2, 3};
    CHECK(fpr_at_tpr(id_scores, ood_scores, 0.95) == doctest::Approx(0.0));
}

TEST_CASE("fpr_at_tpr and auroc equal brute-force oracles on 100 random multisets") {
    SeededRng rng(314159);
    for (int trial = 0; trial < 100; ++trial) {
        const auto id_scores = random_scores_with_ties(rng, 1 + rng.index(50));
        const auto ood_scores = random_scores_with_ties(rng, 1 + rng.index(50));
        CHECK(fpr_at_tpr(id_scores, ood_scores, 0.95) ==
              doctest::Approx(fpr_sweep_oracle(id_scores, ood_scores, 0.95)).epsilon(1e-15));
        CHECK(auroc(id_scores, ood_scores) ==
              doctest::Approx(auroc_pair_oracle(id_scores, ood_scores)).epsilon(1e-12));
    }
}

TEST_CASE("fpr_at_tpr rejects empty inputs") {
    CHECK_THROWS_AS(fpr_at_tpr({}, {1.0}, 0.95), ArgumentError);
    CHECK_THROWS_AS(fpr_at_tpr({1.0}, {}, 0.95), ArgumentError);
    CHECK_THROWS_AS(auroc({}, {1.0}), ArgumentError);
}

TEST_CASE("auroc basics") {
    CHECK(auroc({2, 3}, {1}) == doctest::Approx(1.0));
    CHECK(auroc({1}, {2}) == doctest::Approx(0.0));
    CHECK(auroc({1, 3}, {2}) == doctest::Approx(0.5));
}

TEST_CASE("identical score multisets give auroc one half exactly") {
    const std::vector<double> s = {0.0, 0.25, 0.5, 0.5, 1.0, -1.0};
    CHECK(auroc(s, s) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("auroc is invariant under strictly increasing transforms") {
    SeededRng rng(2718);
    const auto id_scores = random_scores_with_ties(rng, 30);
    const auto ood_scores = random_scores_with_ties(rng, 25);
    const double base = auroc(id_scores, ood_scores);
    auto transform = [](std::vector<double> v) {
        for (double& x : v) x = std::exp(0.3 * x) + 2.0 * x;
        return v;
    };
    CHECK(auroc(transform(id_scores), transform(ood_scores)) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("fpr95 is monotone non-increasing as OOD scores decrease") {
    SeededRng rng(161803);
    for (int trial = 0; trial < 20; ++trial) {
        const auto id_scores = random_scores_with_ties(rng, 30);
        auto ood_scores = random_scores_with_ties(rng, 20);
        const double before = fpr_at_tpr(id_scores, ood_scores, 0.95);
        for (double& s : ood_scores) s -= 0.5 + rng.uniform();
        const double after = fpr_at_tpr(id_scores, ood_scores, 0.95);
        CHECK(after <= before + 1e-15);
    }
}

TEST_CASE("id_accuracy with argmax ties going to the smallest class") {
    model::PredictionBundle bundle;
    Eigen::MatrixXd probs(4, 3);
    probs << 1, 0, 0,   // correct 0
        0, 1, 0,        // correct 1
        0, 0, 1,        // correct 2
        0.5, 0.5, 0.0;  // tie: predicts 0
    bundle.joint_probs = probs;
    bundle.joint_logits = probs;
    CHECK(id_accuracy(bundle, {0, 1, 2, 0}) == doctest::Approx(1.0));
    CHECK(id_accuracy(bundle, {0, 1, 2, 1}) == doctest::Approx(0.75));

    Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(3, 3, 1.0 / 3.0);
    model::PredictionBundle flat;
    flat.joint_probs = uniform;
    flat.joint_logits = uniform;
    CHECK(id_accuracy(flat, {0, 0, 0}) == doctest::Approx(1.0));
    CHECK(id_accuracy(flat, {1, 1, 1}) == doctest::Approx(0.0));
}

TEST_CASE("evaluate separates a trained separable toy almost perfectly") {
    io::SynthConfig synth;
    synth.id_classes = 4;
    synth.near_ood_classes = 3;
    synth.dims = {6, 6};
    synth.samples_per_class = 60;
    synth.class_sep = 4.0;
    synth.noise_sigma = 0.4;
    synth.far_ood_shift = 9.0;  // far-OOD: cleanly displaced cluster
    synth.seed = 7;
    const LabeledBatch data = io::generate_synthetic(synth);

    trainer::TrainConfig cfg;
    cfg.epochs = 8;
    cfg.lr = 2e-3;
    cfg.a2d.gamma = 0.0;
    cfg.seed = 7;
    cfg.hidden_dim = 32;
    cfg.embed_dim = 16;
    const auto result = trainer::train(data, cfg);

    const LabeledBatch id_train = data.subset(Split::id_train);
    const LabeledBatch id_test = data.subset(Split::id_test);
    const LabeledBatch ood_test = data.subset(Split::ood_test);
    const auto train_bundle = model::forward(result.model, id_train);
    scores::Config scfg;
    const auto state = scores::fit(scores::Kind::knn, train_bundle, id_train.labels, result.model, scfg);
    const EvalReport report = evaluate(result.model, scores::Kind::knn, state, scfg, id_test, ood_test);

    CHECK(report.auroc > 0.99);
    CHECK(report.id_acc > 0.9);
    CHECK(report.n_id_test == id_test.rows());
    CHECK(report.n_ood_test == ood_test.rows());
    CHECK(report.l_id >= 0.0);
    CHECK(report.l_ood <= 2.0);
}

TEST_CASE("report JSON round-trips every field losslessly") {
    EvalReport report;
    report.fpr95 = 1.0 / 3.0;
    report.auroc = 0.987654321987654321;
    report.id_acc = 2.0 / 3.0;
    report.l_id = 0.6300000000000001;
    report.l_ood = 1.42;
    report.scorer_kind = scores::Kind::vim;
    report.n_id_test = 400;
    report.n_ood_test = 2000;

    const auto j = report_to_json(report);
    const std::string text = j.dump();
    const EvalReport back = report_from_json(nlohmann::json::parse(text));
    CHECK(back.fpr95 == report.fpr95);
    CHECK(back.auroc == report.auroc);
    CHECK(back.id_acc == report.id_acc);
    CHECK(back.l_id == report.l_id);
    CHECK(back.l_ood == report.l_ood);
    CHECK(back.scorer_kind == report.scorer_kind);
    CHECK(back.n_id_test == report.n_id_test);
    CHECK(back.n_ood_test == report.n_ood_test);
}

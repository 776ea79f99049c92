#include "moodkit/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "moodkit/a2d.hpp"
#include "moodkit/error.hpp"

namespace moodkit::metrics {

double fpr_at_tpr(const std::vector<double>& id_scores, const std::vector<double>& ood_scores, double tpr_target) {
    if (id_scores.empty() || ood_scores.empty()) {
        throw ArgumentError("fpr_at_tpr: both score lists must be nonempty");
    }
    if (!(tpr_target > 0.0 && tpr_target <= 1.0)) {
        throw ArgumentError("fpr_at_tpr: tpr_target must be in (0, 1]");
    }
    const auto n_id = static_cast<double>(id_scores.size());
    // Minimum number of ID samples that must sit at or above the threshold.
    // The 1e-9 slack keeps exact integer products (0.95 * 20) from rounding up.
    auto required = static_cast<std::size_t>(std::ceil(tpr_target * n_id - 1e-9));
    if (required < 1) required = 1;
    std::vector<double> sorted_id(id_scores);
    std::sort(sorted_id.begin(), sorted_id.end(), std::greater<double>());
    const double eta = sorted_id[required - 1];  // largest eta with TPR >= target
    std::size_t false_positives = 0;
    for (double s : ood_scores) {
        if (s >= eta) ++false_positives;
    }
    return static_cast<double>(false_positives) / static_cast<double>(ood_scores.size());
}

double auroc(const std::vector<double>& id_scores, const std::vector<double>& ood_scores) {
    if (id_scores.empty() || ood_scores.empty()) {
        throw ArgumentError("auroc: both score lists must be nonempty");
    }
    // Pool, assign average ranks across ties, then U = R_id - n_id(n_id+1)/2.
    struct Entry {
        double score;
        bool is_id;
    };
    std::vector<Entry> pooled;
    pooled.reserve(id_scores.size() + ood_scores.size());
    for (double s : id_scores) pooled.push_back({s, true});
    for (double s : ood_scores) pooled.push_back({s, false});
    std::sort(pooled.begin(), pooled.end(), [](const Entry& a, const Entry& b) { return a.score < b.score; });

    double rank_sum_id = 0.0;
    std::size_t i = 0;
    while (i < pooled.size()) {
        std::size_t j = i;
        while (j < pooled.size() && pooled[j].score == pooled[i].score) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));  // 1-based
        for (std::size_t t = i; t < j; ++t) {
            if (pooled[t].is_id) rank_sum_id += avg_rank;
        }
        i = j;
    }
    const double n_id = static_cast<double>(id_scores.size());
    const double n_ood = static_cast<double>(ood_scores.size());
    const double u = rank_sum_id - n_id * (n_id + 1.0) / 2.0;
    return u / (n_id * n_ood);
}

double id_accuracy(const model::PredictionBundle& bundle, const std::vector<int>& labels) {
    const Eigen::Index n = bundle.rows();
    if (static_cast<Eigen::Index>(labels.size()) != n) {
        throw StructuralError("id_accuracy: labels do not align with bundle rows");
    }
    if (n == 0) return 0.0;
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        int arg = 0;
        for (Eigen::Index c = 1; c < bundle.joint_probs.cols(); ++c) {
            if (bundle.joint_probs(i, c) > bundle.joint_probs(i, arg)) {
                arg = static_cast<int>(c);
            }
        }
        if (arg == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

EvalReport evaluate(const model::MultimodalModel& model, scores::Kind kind, const scores::ScorerState& state,
                    const scores::Config& cfg, const LabeledBatch& id_test, const LabeledBatch& ood_test) {
    const model::PredictionBundle id_bundle = model::forward(model, id_test);
    const model::PredictionBundle ood_bundle = model::forward(model, ood_test);

    const scores::ScoreVector id_scores = scores::score_batch(kind, id_bundle, state, model, cfg);
    const scores::ScoreVector ood_scores = scores::score_batch(kind, ood_bundle, state, model, cfg);

    EvalReport report;
    report.scorer_kind = kind;
    report.n_id_test = static_cast<std::int64_t>(id_test.rows());
    report.n_ood_test = static_cast<std::int64_t>(ood_test.rows());
    report.fpr95 = fpr_at_tpr(id_scores.values, ood_scores.values);
    report.auroc = auroc(id_scores.values, ood_scores.values);
    report.id_acc = id_accuracy(id_bundle, id_test.labels);
    report.l_id = a2d::mean_discrepancy(id_bundle);
    report.l_ood = a2d::mean_discrepancy(ood_bundle);
    return report;
}

nlohmann::json report_to_json(const EvalReport& report) {
    return nlohmann::json{
        {"scorer", scores::to_string(report.scorer_kind)},
        {"fpr95", report.fpr95},
        {"auroc", report.auroc},
        {"id_acc", report.id_acc},
        {"l_id", report.l_id},
        {"l_ood", report.l_ood},
        {"n_id_test", report.n_id_test},
        {"n_ood_test", report.n_ood_test},
    };
}

EvalReport report_from_json(const nlohmann::json& j) {
    EvalReport report;
    report.scorer_kind = scores::kind_from_string(j.at("scorer").get<std::string>());
    report.fpr95 = j.at("fpr95").get<double>();
    report.auroc = j.at("auroc").get<double>();
    report.id_acc = j.at("id_acc").get<double>();
    report.l_id = j.at("l_id").get<double>();
    report.l_ood = j.at("l_ood").get<double>();
    report.n_id_test = j.at("n_id_test").get<std::int64_t>();
    report.n_ood_test = j.at("n_ood_test").get<std::int64_t>();
    return report;
}

}  // namespace moodkit::metrics

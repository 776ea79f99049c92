#ifndef MOODKIT_METRICS_HPP
#define MOODKIT_METRICS_HPP

#include <nlohmann/json.hpp>
#include <vector>

#include "moodkit/model.hpp"
#include "moodkit/scores.hpp"
#include "moodkit/types.hpp"

namespace moodkit::metrics {

struct EvalReport {
    double fpr95 = 0.0;
    double auroc = 0.0;
    double id_acc = 0.0;
    double l_id = 0.0;
    double l_ood = 0.0;
    scores::Kind scorer_kind = scores::Kind::msp;
    std::int64_t n_id_test = 0;
    std::int64_t n_ood_test = 0;
};

/// Fraction of OOD scores >= eta, where eta is the largest threshold that
/// still classifies at least tpr_target of the ID scores as ID (ties at eta
/// count toward both rates). Equals the minimum FPR subject to
/// TPR >= tpr_target.
double fpr_at_tpr(const std::vector<double>& id_scores, const std::vector<double>& ood_scores,
                  double tpr_target = 0.95);

/// Tie-aware Mann-Whitney: (#pairs id > ood + 0.5 * #ties) / (n_id * n_ood),
/// computed in O(n log n) via sorted ranks.
double auroc(const std::vector<double>& id_scores, const std::vector<double>& ood_scores);

/// Fraction of rows whose joint-probability argmax equals the label; argmax
/// ties go to the smallest class index. Uses the unmodified forward pass.
double id_accuracy(const model::PredictionBundle& bundle, const std::vector<int>& labels);

/// Runs forward on both splits, scores both with the fitted scorer, and
/// assembles the report (fpr95 / auroc / id_acc / discrepancy means).
EvalReport evaluate(const model::MultimodalModel& model, scores::Kind kind, const scores::ScorerState& state,
                    const scores::Config& cfg, const LabeledBatch& id_test, const LabeledBatch& ood_test);

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

}  // namespace moodkit::metrics

#endif  // MOODKIT_METRICS_HPP

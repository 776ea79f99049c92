#ifndef MOODKIT_A2D_HPP
#define MOODKIT_A2D_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "moodkit/model.hpp"

namespace moodkit::a2d {

enum class Metric { hellinger, l1, l2, wasserstein1d };

const char* to_string(Metric m);
Metric metric_from_string(const std::string& s);

/// sqrt(1/2 * sum_i (sqrt(p_i) - sqrt(q_i))^2). Inputs must be nonnegative;
/// for true probability distributions the result lies in [0, 1].
double hellinger(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

/// order 1: sum |p_i - q_i|; order 2: sqrt(sum (p_i - q_i)^2).
double lp_distance(const Eigen::VectorXd& p, const Eigen::VectorXd& q, int order);

/// Class indices as an ordered 1-D support with unit spacing:
/// sum_i |CDF_p(i) - CDF_q(i)|.
double wasserstein1d(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

double distance(Metric metric, const Eigen::VectorXd& p, const Eigen::VectorXd& q);

/// Gradient of distance(metric, p, q) with respect to p. Subgradient 0 is
/// used at kinks (equal coordinates, identical vectors).
Eigen::VectorXd distance_grad_p(Metric metric, const Eigen::VectorXd& p, const Eigen::VectorXd& q);

struct TruncatedProbabilityVector {
    Eigen::VectorXd values;  // length C-1, order preserved, NOT renormalized
    int removed_class = -1;
};

/// Removes index `label`; requires C >= 2 and label < C.
TruncatedProbabilityVector truncate_prediction(const Eigen::VectorXd& probs, int label);

struct A2DConfig {
    double gamma = 0.5;
    Metric metric = Metric::hellinger;
    bool use_npmix = false;
    int modality_count = 2;

    void validate() const;
};

/// Composite-loss selector consumed by model backward/evaluation. LogitNorm,
/// when set, replaces the logits inside every cross-entropy term.
struct LossSpec {
    A2DConfig a2d;
    std::optional<double> logitnorm_tau;
};

/// -(2/(M(M-1))) sum_{i<j} Discr(pbar^i, pbar^j) over ground-truth-truncated
/// predictions; reduces to -Discr(pbar^1, pbar^2) for M = 2.
double loss_discr(const std::vector<Eigen::VectorXd>& modality_probs, int label, Metric metric);

/// (1/(M+1)) (CE(joint, y) + sum_k CE(p^k, y)).
double loss_cls(const Eigen::VectorXd& joint_probs, const std::vector<Eigen::VectorXd>& modality_probs, int label);

/// Same pairwise form as loss_discr but over FULL (untruncated) predictions.
double loss_discr_syn(const std::vector<Eigen::VectorXd>& syn_probs, Metric metric);

/// -(1/M) sum_k H(p^k).
double loss_ent(const std::vector<Eigen::VectorXd>& syn_probs);

/// Per-modality predictions for synthesized outliers; the joint head is not
/// fed synthesized embeddings.
struct SynthesizedPredictions {
    std::vector<Eigen::MatrixXd> logits;  // M of n_syn x C
    std::vector<Eigen::MatrixXd> probs;
};

SynthesizedPredictions forward_synthesized(const model::MultimodalModel& model,
                                           const FeatureMatrix& joint_syn_embeddings);

struct LossComponents {
    double total = 0.0;
    double cls = 0.0;
    double discr = 0.0;
    double discr_syn = 0.0;
    double ent = 0.0;
};

LossComponents total_loss_components(const model::PredictionBundle& bundle,
                                     const SynthesizedPredictions* syn,
                                     const std::vector<int>& labels, const A2DConfig& cfg);

/// Batch mean of L_cls + gamma*L_Discr, plus the synthesized-outlier terms
/// when cfg.use_npmix is set (syn must then be present).
double total_loss(const model::PredictionBundle& bundle, const SynthesizedPredictions* syn,
                  const std::vector<int>& labels, const A2DConfig& cfg);

/// Per-sample mean over modality pairs of ||p^i - p^j||_1 on full predictions.
Eigen::VectorXd discrepancy_statistic(const model::PredictionBundle& bundle);

/// Mean of discrepancy_statistic over the bundle; l_ID / l_OOD when applied
/// to the respective split.
double mean_discrepancy(const model::PredictionBundle& bundle);

}  // namespace moodkit::a2d

#endif  // MOODKIT_A2D_HPP

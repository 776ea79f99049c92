#ifndef MOODKIT_SCORES_HPP
#define MOODKIT_SCORES_HPP

#include <string>
#include <vector>

#include "moodkit/model.hpp"

namespace moodkit::scores {

/// Higher score = more in-distribution, for every kind.
enum class Kind {
    msp,
    maxlogit,
    energy,
    gen,
    mahalanobis,
    knn,
    vim,
    react,
    ash,
    logitnorm_msp,
};

const char* to_string(Kind k);
Kind kind_from_string(const std::string& s);
const std::vector<Kind>& all_kinds();

/// True for scorers that consume the combined embedding [Z^1|...|Z^M];
/// the rest read the joint probabilities or logits (vim reads both spaces).
bool uses_feature_space(Kind k);

struct Config {
    double energy_temperature = 1.0;
    double gen_gamma = 0.1;
    int gen_top_m = 0;             // 0 -> min(C, 100)
    int knn_k = 0;                 // 0 -> min(10, bank size)
    double react_percentile = 90.0;
    double ash_percentile = 90.0;
    int vim_dim = 0;               // 0 -> min(d/2, 64)
    double mahalanobis_ridge = 1e-6;  // scaled by trace(cov)/d

    void validate() const;
};

struct ScorerState {
    Kind kind = Kind::msp;
    bool fitted = false;

    // mahalanobis
    Eigen::MatrixXd class_means;  // C x d
    Eigen::MatrixXd cov_inverse;  // d x d, symmetric positive definite

    // knn
    Eigen::MatrixXd bank;  // row-normalized training embeddings
    int knn_k = 0;

    // vim
    Eigen::MatrixXd principal_basis;  // d x D, orthonormal columns
    Eigen::VectorXd center;
    double vim_alpha = 0.0;

    // react
    double clip_threshold = 0.0;
};

/// Fits the statistics a scorer needs from ID TRAINING data only. Kinds
/// without fitted state return a trivially-fitted ScorerState.
ScorerState fit(Kind kind, const model::PredictionBundle& id_train, const std::vector<int>& labels,
                const model::MultimodalModel& model, const Config& cfg);

double score_msp(const Eigen::VectorXd& probs);
double score_maxlogit(const Eigen::VectorXd& logits);

/// temperature * logsumexp(logits / temperature); the negative free energy.
double score_energy(const Eigen::VectorXd& logits, double temperature = 1.0);

/// -sum over the top_m largest probabilities of p^gamma (1-p)^gamma.
double score_gen(const Eigen::VectorXd& probs, double gen_gamma, int top_m);

/// -min_c (z - mu_c)^T Sigma^-1 (z - mu_c) with the fitted tied covariance.
double score_mahalanobis(const Eigen::VectorXd& z, const ScorerState& state);

/// -(distance from z/||z|| to its k-th nearest bank row).
double score_knn(const Eigen::VectorXd& z, const ScorerState& state, int k);

/// logsumexp(logits) - alpha * ||(I - B B^T)(z - center)||.
double score_vim(const Eigen::VectorXd& z, const Eigen::VectorXd& logits, const ScorerState& state);

/// Clip z at the fitted threshold, re-run the joint head, return energy.
double score_react(const Eigen::VectorXd& z, const model::DenseLayer& joint_head, const ScorerState& state,
                   double temperature = 1.0);

/// ASH-P: keep the ceil((1-p/100)*d) largest entries of z (ties keep the
/// larger index), zero the rest, re-run the joint head, return energy.
double score_ash(const Eigen::VectorXd& z, const model::DenseLayer& joint_head, double percentile,
                 double temperature = 1.0);

/// Pruned copy of z used by score_ash; exposed for inspection and tests.
Eigen::VectorXd ash_prune(const Eigen::VectorXd& z, double percentile);

struct ScoreVector {
    std::vector<double> values;
    Kind kind = Kind::msp;
};

/// Applies the per-sample scorer with the space routing described above.
/// Throws StateError when the kind requires fitting and state is unfitted.
ScoreVector score_batch(Kind kind, const model::PredictionBundle& bundle, const ScorerState& state,
                        const model::MultimodalModel& model, const Config& cfg);

}  // namespace moodkit::scores

#endif  // MOODKIT_SCORES_HPP

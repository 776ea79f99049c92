#include "moodkit/scores.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "moodkit/error.hpp"

namespace moodkit::scores {

namespace {

double logsumexp(const Eigen::VectorXd& v) {
    const double m = v.maxCoeff();
    return m + std::log((v.array() - m).exp().sum());
}

void require_fitted(const ScorerState& state, Kind kind) {
    if (!state.fitted || state.kind != kind) {
        throw StateError(std::string("scorer '") + to_string(kind) + "' used before fit");
    }
}

/// Nearest-rank percentile: the ceil(p/100 * n)-th smallest of the values.
double percentile_nearest_rank(std::vector<double> values, double p) {
    if (values.empty()) {
        throw ArgumentError("percentile: empty sample");
    }
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
    if (rank < 1) rank = 1;
    if (rank > values.size()) rank = values.size();
    return values[rank - 1];
}

}  // namespace

const char* to_string(Kind k) {
    switch (k) {
        case Kind::msp: return "msp";
        case Kind::maxlogit: return "maxlogit";
        case Kind::energy: return "energy";
        case Kind::gen: return "gen";
        case Kind::mahalanobis: return "mahalanobis";
        case Kind::knn: return "knn";
        case Kind::vim: return "vim";
        case Kind::react: return "react";
        case Kind::ash: return "ash";
        case Kind::logitnorm_msp: return "logitnorm_msp";
    }
    throw ArgumentError("unknown scorer kind value");
}

Kind kind_from_string(const std::string& s) {
    for (Kind k : all_kinds()) {
        if (s == to_string(k)) return k;
    }
    throw ArgumentError("unknown scorer kind '" + s + "'");
}

const std::vector<Kind>& all_kinds() {
    static const std::vector<Kind> kinds = {Kind::msp,  Kind::maxlogit,    Kind::energy, Kind::gen,
                                            Kind::mahalanobis, Kind::knn, Kind::vim,    Kind::react,
                                            Kind::ash,  Kind::logitnorm_msp};
    return kinds;
}

bool uses_feature_space(Kind k) {
    switch (k) {
        case Kind::mahalanobis:
        case Kind::knn:
        case Kind::vim:
        case Kind::react:
        case Kind::ash:
            return true;
        default:
            return false;
    }
}

void Config::validate() const {
    if (!(energy_temperature > 0.0)) throw ArgumentError("scores.energy_temperature must be positive");
    if (!(gen_gamma > 0.0 && gen_gamma < 1.0)) throw ArgumentError("scores.gen_gamma must be in (0, 1)");
    if (gen_top_m < 0) throw ArgumentError("scores.gen_top_m must be nonnegative");
    if (knn_k < 0) throw ArgumentError("scores.knn_k must be nonnegative");
    if (react_percentile < 0.0 || react_percentile > 100.0)
        throw ArgumentError("scores.react_percentile must be in [0, 100]");
    if (ash_percentile < 0.0 || ash_percentile > 100.0)
        throw ArgumentError("scores.ash_percentile must be in [0, 100]");
    if (vim_dim < 0) throw ArgumentError("scores.vim_dim must be nonnegative");
    if (!(mahalanobis_ridge >= 0.0)) throw ArgumentError("scores.mahalanobis_ridge must be nonnegative");
}

ScorerState fit(Kind kind, const model::PredictionBundle& id_train, const std::vector<int>& labels,
                const model::MultimodalModel& model, const Config& cfg) {
    cfg.validate();
    const Eigen::Index n = id_train.rows();
    if (n == 0) {
        throw ArgumentError("fit: id_train is empty");
    }
    ScorerState state;
    state.kind = kind;

    switch (kind) {
        case Kind::msp:
        case Kind::maxlogit:
        case Kind::energy:
        case Kind::gen:
        case Kind::ash:
        case Kind::logitnorm_msp:
            break;  // no fitted statistics

        case Kind::mahalanobis: {
            if (static_cast<Eigen::Index>(labels.size()) != n) {
                throw StructuralError("fit(mahalanobis): labels do not align with bundle");
            }
            const FeatureMatrix z = id_train.joint_embedding();
            const Eigen::Index d = z.cols();
            const int classes = model.dims.class_count;
            std::vector<Eigen::Index> counts(classes, 0);
            state.class_means = Eigen::MatrixXd::Zero(classes, d);
            for (Eigen::Index i = 0; i < n; ++i) {
                const int c = labels[i];
                if (c < 0 || c >= classes) {
                    throw ArgumentError("fit(mahalanobis): label " + std::to_string(c) + " out of range");
                }
                state.class_means.row(c) += z.row(i);
                counts[c] += 1;
            }
            for (int c = 0; c < classes; ++c) {
                if (counts[c] < 2) {
                    throw ArgumentError("fit(mahalanobis): class " + std::to_string(c) +
                                        " needs at least 2 samples");
                }
                state.class_means.row(c) /= static_cast<double>(counts[c]);
            }
            Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
            for (Eigen::Index i = 0; i < n; ++i) {
                const Eigen::VectorXd diff = (z.row(i) - state.class_means.row(labels[i])).transpose();
                cov += diff * diff.transpose();
            }
            cov /= static_cast<double>(n);
            const double ridge = cfg.mahalanobis_ridge * cov.trace() / static_cast<double>(d);
            cov += ridge * Eigen::MatrixXd::Identity(d, d);
            const Eigen::LLT<Eigen::MatrixXd> llt(cov);
            if (llt.info() != Eigen::Success) {
                throw NumericalError("fit(mahalanobis): covariance singular after regularization");
            }
            Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(d, d));
            state.cov_inverse = 0.5 * (inv + inv.transpose());  // enforce exact symmetry
            break;
        }

        case Kind::knn: {
            FeatureMatrix z = id_train.joint_embedding();
            for (Eigen::Index i = 0; i < z.rows(); ++i) {
                z.row(i) /= std::max(z.row(i).norm(), 1e-12);
            }
            state.bank = std::move(z);
            state.knn_k = cfg.knn_k > 0 ? cfg.knn_k : 10;
            state.knn_k = std::min<int>(state.knn_k, static_cast<int>(state.bank.rows()));
            break;
        }

        case Kind::vim: {
            const FeatureMatrix z = id_train.joint_embedding();
            const Eigen::Index d = z.cols();
            state.center = z.colwise().mean().transpose();
            const Eigen::MatrixXd centered = z.rowwise() - state.center.transpose();
            const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n);
            int subspace = cfg.vim_dim > 0 ? cfg.vim_dim : std::min<int>(static_cast<int>(d) / 2, 64);
            subspace = std::max(1, std::min<int>(subspace, static_cast<int>(d)));
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
            if (eig.info() != Eigen::Success) {
                throw NumericalError("fit(vim): eigendecomposition failed");
            }
            // eigenvalues ascending; principal directions are the last columns
            state.principal_basis = eig.eigenvectors().rightCols(subspace);
            double mean_maxlogit = 0.0;
            double mean_residual = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                mean_maxlogit += id_train.joint_logits.row(i).maxCoeff();
                const Eigen::VectorXd diff = centered.row(i).transpose();
                const Eigen::VectorXd residual = diff - state.principal_basis * (state.principal_basis.transpose() * diff);
                mean_residual += residual.norm();
            }
            mean_maxlogit /= static_cast<double>(n);
            mean_residual /= static_cast<double>(n);
            // A degenerate subspace leaves zero residual everywhere; the
            // correction term then vanishes regardless of alpha.
            state.vim_alpha = mean_residual > 1e-12 ? mean_maxlogit / mean_residual : 0.0;
            break;
        }

        case Kind::react: {
            const FeatureMatrix z = id_train.joint_embedding();
            std::vector<double> pooled;
            pooled.reserve(static_cast<std::size_t>(z.size()));
            for (Eigen::Index i = 0; i < z.rows(); ++i) {
                for (Eigen::Index j = 0; j < z.cols(); ++j) {
                    pooled.push_back(z(i, j));
                }
            }
            state.clip_threshold = percentile_nearest_rank(std::move(pooled), cfg.react_percentile);
            break;
        }
    }
    state.fitted = true;
    return state;
}

double score_msp(const Eigen::VectorXd& probs) { return probs.maxCoeff(); }

double score_maxlogit(const Eigen::VectorXd& logits) { return logits.maxCoeff(); }

double score_energy(const Eigen::VectorXd& logits, double temperature) {
    if (!(temperature > 0.0)) {
        throw ArgumentError("score_energy: temperature must be positive");
    }
    return temperature * logsumexp(logits / temperature);
}

double score_gen(const Eigen::VectorXd& probs, double gen_gamma, int top_m) {
    if (!(gen_gamma > 0.0 && gen_gamma < 1.0)) {
        throw ArgumentError("score_gen: gamma must be in (0, 1)");
    }
    std::vector<double> p(probs.data(), probs.data() + probs.size());
    const auto m = static_cast<std::size_t>(std::min<Eigen::Index>(std::max(top_m, 1), probs.size()));
    std::partial_sort(p.begin(), p.begin() + m, p.end(), std::greater<double>());
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        acc += std::pow(p[i], gen_gamma) * std::pow(1.0 - p[i], gen_gamma);
    }
    return -acc;
}

double score_mahalanobis(const Eigen::VectorXd& z, const ScorerState& state) {
    require_fitted(state, Kind::mahalanobis);
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < state.class_means.rows(); ++c) {
        const Eigen::VectorXd diff = z - state.class_means.row(c).transpose();
        best = std::min(best, diff.dot(state.cov_inverse * diff));
    }
    return -best;
}

double score_knn(const Eigen::VectorXd& z, const ScorerState& state, int k) {
    require_fitted(state, Kind::knn);
    const Eigen::Index bank_size = state.bank.rows();
    int kk = k > 0 ? k : state.knn_k;
    kk = std::min<int>(kk, static_cast<int>(bank_size));
    if (kk < 1) {
        throw ArgumentError("score_knn: k must be >= 1");
    }
    const Eigen::VectorXd q = z / std::max(z.norm(), 1e-12);
    Eigen::VectorXd dist = (state.bank.rowwise() - q.transpose()).rowwise().norm();
    std::vector<double> d(dist.data(), dist.data() + dist.size());
    std::nth_element(d.begin(), d.begin() + (kk - 1), d.end());
    return -d[kk - 1];
}

double score_vim(const Eigen::VectorXd& z, const Eigen::VectorXd& logits, const ScorerState& state) {
    require_fitted(state, Kind::vim);
    const Eigen::VectorXd diff = z - state.center;
    const Eigen::VectorXd residual = diff - state.principal_basis * (state.principal_basis.transpose() * diff);
    return logsumexp(logits) - state.vim_alpha * residual.norm();
}

double score_react(const Eigen::VectorXd& z, const model::DenseLayer& joint_head, const ScorerState& state,
                   double temperature) {
    require_fitted(state, Kind::react);
    const Eigen::VectorXd clipped = z.cwiseMin(state.clip_threshold);
    const Eigen::VectorXd logits = joint_head.weight * clipped + joint_head.bias;
    return score_energy(logits, temperature);
}

Eigen::VectorXd ash_prune(const Eigen::VectorXd& z, double percentile) {
    if (percentile < 0.0 || percentile > 100.0) {
        throw ArgumentError("ash_prune: percentile must be in [0, 100]");
    }
    const Eigen::Index d = z.size();
    const auto keep = static_cast<Eigen::Index>(std::ceil((1.0 - percentile / 100.0) * static_cast<double>(d)));
    if (keep >= d) {
        return z;
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
    std::iota(order.begin(), order.end(), 0);
    // value descending; among equal values larger indices survive
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        if (z[a] != z[b]) return z[a] > z[b];
        return a > b;
    });
    Eigen::VectorXd out = Eigen::VectorXd::Zero(d);
    for (Eigen::Index i = 0; i < keep; ++i) {
        out[order[static_cast<std::size_t>(i)]] = z[order[static_cast<std::size_t>(i)]];
    }
    return out;
}

double score_ash(const Eigen::VectorXd& z, const model::DenseLayer& joint_head, double percentile,
                 double temperature) {
    const Eigen::VectorXd pruned = ash_prune(z, percentile);
    const Eigen::VectorXd logits = joint_head.weight * pruned + joint_head.bias;
    return score_energy(logits, temperature);
}

ScoreVector score_batch(Kind kind, const model::PredictionBundle& bundle, const ScorerState& state,
                        const model::MultimodalModel& model, const Config& cfg) {
    cfg.validate();
    const Eigen::Index n = bundle.rows();
    ScoreVector out;
    out.kind = kind;
    out.values.resize(static_cast<std::size_t>(n));

    const bool needs_features = uses_feature_space(kind);
    FeatureMatrix joint;
    if (needs_features) {
        joint = bundle.joint_embedding();
    }
    const int top_m = cfg.gen_top_m > 0 ? cfg.gen_top_m : std::min<int>(model.dims.class_count, 100);

    for (Eigen::Index i = 0; i < n; ++i) {
        double s = 0.0;
        switch (kind) {
            case Kind::msp:
            case Kind::logitnorm_msp:
                // logitnorm_msp is MSP applied to a LogitNorm-trained model;
                // routing only, no extra math at inference.
                s = score_msp(bundle.joint_probs.row(i).transpose());
                break;
            case Kind::maxlogit:
                s = score_maxlogit(bundle.joint_logits.row(i).transpose());
                break;
            case Kind::energy:
                s = score_energy(bundle.joint_logits.row(i).transpose(), cfg.energy_temperature);
                break;
            case Kind::gen:
                s = score_gen(bundle.joint_probs.row(i).transpose(), cfg.gen_gamma, top_m);
                break;
            case Kind::mahalanobis:
                s = score_mahalanobis(joint.row(i).transpose(), state);
                break;
            case Kind::knn:
                s = score_knn(joint.row(i).transpose(), state, cfg.knn_k);
                break;
            case Kind::vim:
                s = score_vim(joint.row(i).transpose(), bundle.joint_logits.row(i).transpose(), state);
                break;
            case Kind::react:
                s = score_react(joint.row(i).transpose(), model.joint_head, state, cfg.energy_temperature);
                break;
            case Kind::ash:
                s = score_ash(joint.row(i).transpose(), model.joint_head, cfg.ash_percentile,
                              cfg.energy_temperature);
                break;
        }
        out.values[static_cast<std::size_t>(i)] = s;
    }
    return out;
}

}  // namespace moodkit::scores

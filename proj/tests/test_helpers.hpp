#ifndef MOODKIT_TEST_HELPERS_HPP
#define MOODKIT_TEST_HELPERS_HPP

#include <Eigen/Dense>
#include <vector>

#include "moodkit/backward.hpp"
#include "moodkit/model.hpp"
#include "moodkit/rng.hpp"
#include "moodkit/types.hpp"

namespace moodkit::test {

template <typename A, typename B>
bool same_matrix(const A& a, const B& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    return (a.array() == b.array()).all();
}

template <typename A, typename B>
bool models_identical(const A& a, const B& b) {
    bool identical = true;
    model::visit_parameter_pairs(a, b, [&](const auto& x, const auto& y) {
        if (!same_matrix(x, y)) identical = false;
    });
    return identical;
}

inline Eigen::VectorXd random_prob_vector(SeededRng& rng, int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) {
        v[i] = rng.gamma(1.0);  // exponential draws normalize to a Dirichlet(1)
    }
    return v / v.sum();
}

inline FeatureMatrix random_matrix(SeededRng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
    FeatureMatrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = scale * rng.normal();
        }
    }
    return m;
}

struct GradCheckInstance {
    model::MultimodalModel net;
    std::vector<FeatureMatrix> modalities;
    std::vector<int> labels;
    FeatureMatrix synthesized;  // n_syn x joint dim
};

/// Random small instance for finite-difference checks, resampled until every
/// relu preactivation, pairwise probability gap, CDF gap and logit norm is
/// clear of the loss's kinks (gradient claims apply at differentiable points).
inline GradCheckInstance make_grad_instance(SeededRng& rng, int m_count, int classes) {
    for (;;) {
        GradCheckInstance inst;
        model::ModelDims dims;
        for (int k = 0; k < m_count; ++k) {
            dims.modality_dims.push_back(2 + static_cast<int>(rng.index(3)));  // 2..4
        }
        dims.hidden_dim = 3 + static_cast<int>(rng.index(3));
        dims.embed_dim = 2 + static_cast<int>(rng.index(2));
        dims.class_count = classes;
        inst.net = model::MultimodalModel::initialize(dims, rng);
        // nonzero biases exercise every gradient path
        model::visit_parameters(inst.net, [&](auto& tensor) {
            for (Eigen::Index i = 0; i < tensor.size(); ++i) {
                tensor.data()[i] += 0.2 * rng.normal();
            }
        });
        const int n = 3 + static_cast<int>(rng.index(4));  // 3..6 rows
        for (int k = 0; k < m_count; ++k) {
            inst.modalities.push_back(random_matrix(rng, n, dims.modality_dims[k]));
        }
        for (int i = 0; i < n; ++i) {
            inst.labels.push_back(static_cast<int>(rng.index(classes)));
        }
        const int n_syn = 2 + static_cast<int>(rng.index(3));
        inst.synthesized = random_matrix(rng, n_syn, dims.joint_dim());

        // conditioning checks
        bool ok = true;
        for (int k = 0; k < m_count && ok; ++k) {
            const auto& enc = inst.net.encoders[k];
            Eigen::MatrixXd a = inst.modalities[k] * enc.hidden.weight.transpose();
            a.rowwise() += enc.hidden.bias.transpose();
            if (a.cwiseAbs().minCoeff() < 1e-3) ok = false;
        }
        if (ok) {
            const model::PredictionBundle bundle = model::forward(inst.net, inst.modalities);
            if (bundle.joint_logits.cwiseAbs().rowwise().sum().minCoeff() < 1e-2) ok = false;
            for (int a = 0; a < m_count && ok; ++a) {
                for (int b = a + 1; b < m_count && ok; ++b) {
                    Eigen::MatrixXd diff = bundle.modality_probs[a] - bundle.modality_probs[b];
                    if (diff.cwiseAbs().minCoeff() < 1e-4) ok = false;
                }
            }
            const a2d::SynthesizedPredictions syn = a2d::forward_synthesized(inst.net, inst.synthesized);
            for (int a = 0; a < m_count && ok; ++a) {
                for (int b = a + 1; b < m_count && ok; ++b) {
                    Eigen::MatrixXd diff = syn.probs[a] - syn.probs[b];
                    if (diff.cwiseAbs().minCoeff() < 1e-4) ok = false;
                }
            }
        }
        if (ok) return inst;
    }
}

/// Central finite differences of evaluate_loss over every parameter entry.
inline model::GradientSet finite_difference_grads(const GradCheckInstance& inst, const a2d::LossSpec& spec,
                                                  double h = 1e-5) {
    model::GradientSet fd = model::GradientSet::zeros_like(inst.net);
    model::MultimodalModel net = inst.net;
    const FeatureMatrix* syn = spec.a2d.use_npmix ? &inst.synthesized : nullptr;
    model::visit_parameter_pairs(net, fd, [&](auto& param, auto& grad) {
        for (Eigen::Index i = 0; i < param.size(); ++i) {
            const double original = param.data()[i];
            param.data()[i] = original + h;
            const double up = model::evaluate_loss(net, inst.modalities, inst.labels, spec, syn).total;
            param.data()[i] = original - h;
            const double down = model::evaluate_loss(net, inst.modalities, inst.labels, spec, syn).total;
            param.data()[i] = original;
            grad.data()[i] = (up - down) / (2.0 * h);
        }
    });
    return fd;
}

inline double max_relative_error(const model::GradientSet& a, const model::GradientSet& b) {
    double worst = 0.0;
    model::visit_parameter_pairs(a, b, [&](const auto& ga, const auto& gb) {
        for (Eigen::Index i = 0; i < ga.size(); ++i) {
            const double x = ga.data()[i];
            const double y = gb.data()[i];
            const double denom = std::max({std::abs(x), std::abs(y), 1e-6});
            worst = std::max(worst, std::abs(x - y) / denom);
        }
    });
    return worst;
}

}  // namespace moodkit::test

#endif  // MOODKIT_TEST_HELPERS_HPP

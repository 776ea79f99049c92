#include "moodkit/backward.hpp"

#include <cmath>

#include "moodkit/error.hpp"

namespace moodkit::model {

namespace {

// d loss / d logits for g = d loss / d probs through a softmax row.
Eigen::VectorXd softmax_jacobian_apply(const Eigen::VectorXd& probs, const Eigen::VectorXd& g) {
    const double dot = g.dot(probs);
    return probs.cwiseProduct(g.array().matrix() - Eigen::VectorXd::Constant(probs.size(), dot));
}

// Cross entropy of one logit row, optionally through the LogitNorm transform.
// Writes d ce / d logits into *grad when grad != nullptr.
double ce_value_grad(const Eigen::VectorXd& logits, int label, const std::optional<double>& tau,
                     Eigen::VectorXd* grad) {
    if (!tau) {
        const Eigen::VectorXd p = softmax(logits);
        const double value = cross_entropy(p, label);
        if (grad) {
            if (p[label] > kProbFloor) {
                *grad = p;
                (*grad)[label] -= 1.0;
            } else {
                // loss saturated at -log(kProbFloor): locally constant
                grad->setZero(logits.size());
            }
        }
        return value;
    }
    const double s = logits.norm();
    const double denom = *tau * (s + 1e-12);
    const Eigen::VectorXd u = logits / denom;
    const Eigen::VectorXd p = softmax(u);
    const double value = cross_entropy(p, label);
    if (grad) {
        grad->setZero(logits.size());
        if (p[label] > kProbFloor && s > 1e-12) {
            Eigen::VectorXd gu = p;
            gu[label] -= 1.0;
            // u = l / (tau (||l|| + eps)):  du_i/dl_j = delta_ij/denom - l_i l_j / (denom^2 s / tau)
            const double coupling = gu.dot(logits) / (denom * denom * s / *tau);
            *grad = gu / denom - coupling * logits;
        }
    }
    return value;
}

struct ForwardCache {
    std::vector<Eigen::MatrixXd> preact;      // A_k, n x hidden
    std::vector<Eigen::MatrixXd> hidden;      // H_k = relu(A_k)
    std::vector<Eigen::MatrixXd> embed;       // Z_k, n x e
    std::vector<Eigen::MatrixXd> mod_logits;  // n x C
    std::vector<Eigen::MatrixXd> mod_probs;
    Eigen::MatrixXd joint_input;              // n x M*e
    Eigen::MatrixXd joint_logits;
    Eigen::MatrixXd joint_probs;
};

ForwardCache run_forward(const MultimodalModel& model, const std::vector<FeatureMatrix>& modalities) {
    const int m_count = model.dims.modality_count();
    if (static_cast<int>(modalities.size()) != m_count) {
        throw StructuralError("backward: modality count mismatch");
    }
    ForwardCache fc;
    for (int k = 0; k < m_count; ++k) {
        const auto& enc = model.encoders[k];
        if (modalities[k].cols() != enc.hidden.in_dim()) {
            throw StructuralError("backward: modality " + std::to_string(k) + " dim mismatch");
        }
        Eigen::MatrixXd a = modalities[k] * enc.hidden.weight.transpose();
        a.rowwise() += enc.hidden.bias.transpose();
        Eigen::MatrixXd h = a.cwiseMax(0.0);
        Eigen::MatrixXd z = h * enc.embed.weight.transpose();
        z.rowwise() += enc.embed.bias.transpose();
        Eigen::MatrixXd logits = z * model.modality_heads[k].weight.transpose();
        logits.rowwise() += model.modality_heads[k].bias.transpose();
        fc.mod_probs.push_back(softmax_rows(logits));
        fc.mod_logits.push_back(std::move(logits));
        fc.embed.push_back(std::move(z));
        fc.hidden.push_back(std::move(h));
        fc.preact.push_back(std::move(a));
    }
    fc.joint_input = concat_modalities(fc.embed);
    fc.joint_logits = fc.joint_input * model.joint_head.weight.transpose();
    fc.joint_logits.rowwise() += model.joint_head.bias.transpose();
    fc.joint_probs = softmax_rows(fc.joint_logits);
    return fc;
}

struct BackwardOptions {
    bool want_grads = true;
};

BackwardResult backward_impl(const MultimodalModel& model, const std::vector<FeatureMatrix>& modalities,
                             const std::vector<int>& labels, const a2d::LossSpec& spec,
                             const FeatureMatrix* synthesized_joint, const BackwardOptions& opt) {
    spec.a2d.validate();
    if (spec.a2d.use_npmix && synthesized_joint == nullptr) {
        throw ArgumentError("backward: synthesized embeddings required when use_npmix is set");
    }
    const ForwardCache fc = run_forward(model, modalities);
    const int m_count = model.dims.modality_count();
    const Eigen::Index n = fc.joint_logits.rows();
    const int classes = model.dims.class_count;
    if (static_cast<Eigen::Index>(labels.size()) != n) {
        throw StructuralError("backward: labels do not align with batch rows");
    }
    const double gamma = spec.a2d.gamma;
    const bool with_discr = gamma != 0.0;
    if (with_discr && m_count < 2) {
        throw ArgumentError("backward: discrepancy term requires at least 2 modalities");
    }

    BackwardResult result;
    result.grads = GradientSet::zeros_like(model);

    Eigen::MatrixXd g_joint_logits = Eigen::MatrixXd::Zero(n, classes);
    std::vector<Eigen::MatrixXd> g_mod_logits(m_count, Eigen::MatrixXd::Zero(n, classes));

    const double cls_weight = 1.0 / static_cast<double>(m_count + 1);
    const double pair_norm = m_count >= 2
        ? 2.0 / (static_cast<double>(m_count) * static_cast<double>(m_count - 1))
        : 0.0;

    Eigen::VectorXd ce_grad(classes);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int y = labels[i];
        if (y < 0 || y >= classes) {
            throw ArgumentError("backward: label " + std::to_string(y) + " outside [0, " + std::to_string(classes) +
                                ") at row " + std::to_string(i));
        }
        double cls_i = ce_value_grad(fc.joint_logits.row(i).transpose(), y, spec.logitnorm_tau,
                                     opt.want_grads ? &ce_grad : nullptr);
        if (opt.want_grads) {
            g_joint_logits.row(i) += (cls_weight / static_cast<double>(n)) * ce_grad.transpose();
        }
        for (int k = 0; k < m_count; ++k) {
            cls_i += ce_value_grad(fc.mod_logits[k].row(i).transpose(), y, spec.logitnorm_tau,
                                   opt.want_grads ? &ce_grad : nullptr);
            if (opt.want_grads) {
                g_mod_logits[k].row(i) += (cls_weight / static_cast<double>(n)) * ce_grad.transpose();
            }
        }
        result.loss.cls += cls_weight * cls_i;

        if (with_discr) {
            std::vector<Eigen::VectorXd> truncated(m_count);
            for (int k = 0; k < m_count; ++k) {
                truncated[k] = a2d::truncate_prediction(fc.mod_probs[k].row(i).transpose(), y).values;
            }
            for (int a = 0; a + 1 < m_count; ++a) {
                for (int b = a + 1; b < m_count; ++b) {
                    result.loss.discr -= pair_norm * a2d::distance(spec.a2d.metric, truncated[a], truncated[b]);
                }
            }
            if (opt.want_grads) {
                for (int k = 0; k < m_count; ++k) {
                    Eigen::VectorXd g_trunc = Eigen::VectorXd::Zero(classes - 1);
                    for (int b = 0; b < m_count; ++b) {
                        if (b == k) continue;
                        g_trunc -= pair_norm * a2d::distance_grad_p(spec.a2d.metric, truncated[k], truncated[b]);
                    }
                    // scatter back around the removed ground-truth index
                    Eigen::VectorXd g_full = Eigen::VectorXd::Zero(classes);
                    Eigen::Index j = 0;
                    for (int c = 0; c < classes; ++c) {
                        if (c != y) g_full[c] = g_trunc[j++];
                    }
                    const Eigen::VectorXd g_logits =
                        softmax_jacobian_apply(fc.mod_probs[k].row(i).transpose(), g_full);
                    g_mod_logits[k].row(i) += (gamma / static_cast<double>(n)) * g_logits.transpose();
                }
            }
        }
    }
    result.loss.cls /= static_cast<double>(n);
    result.loss.discr /= static_cast<double>(n);

    // Synthesized-outlier terms: embeddings are constants; only the modality
    // heads receive gradients.
    if (spec.a2d.use_npmix) {
        const FeatureMatrix& syn = *synthesized_joint;
        if (syn.rows() == 0) {
            throw ArgumentError("backward: synthesized batch is empty");
        }
        if (syn.cols() != model.dims.joint_dim()) {
            throw StructuralError("backward: synthesized joint dim mismatch");
        }
        if (m_count < 2) {
            throw ArgumentError("backward: synthesized terms require at least 2 modalities");
        }
        const Eigen::Index n_syn = syn.rows();
        const int e = model.dims.embed_dim;
        std::vector<Eigen::MatrixXd> syn_embed(m_count), syn_logits(m_count), syn_probs(m_count);
        for (int k = 0; k < m_count; ++k) {
            syn_embed[k] = syn.middleCols(static_cast<Eigen::Index>(k) * e, e);
            Eigen::MatrixXd logits = syn_embed[k] * model.modality_heads[k].weight.transpose();
            logits.rowwise() += model.modality_heads[k].bias.transpose();
            syn_probs[k] = softmax_rows(logits);
            syn_logits[k] = std::move(logits);
        }
        std::vector<Eigen::MatrixXd> g_syn_logits(m_count, Eigen::MatrixXd::Zero(n_syn, classes));
        for (Eigen::Index j = 0; j < n_syn; ++j) {
            std::vector<Eigen::VectorXd> probs(m_count);
            for (int k = 0; k < m_count; ++k) {
                probs[k] = syn_probs[k].row(j).transpose();
            }
            for (int a = 0; a + 1 < m_count; ++a) {
                for (int b = a + 1; b < m_count; ++b) {
                    result.loss.discr_syn -= pair_norm * a2d::distance(spec.a2d.metric, probs[a], probs[b]);
                }
            }
            for (int k = 0; k < m_count; ++k) {
                result.loss.ent -= entropy(probs[k]) / static_cast<double>(m_count);
            }
            if (opt.want_grads) {
                for (int k = 0; k < m_count; ++k) {
                    Eigen::VectorXd g_p = Eigen::VectorXd::Zero(classes);
                    for (int b = 0; b < m_count; ++b) {
                        if (b == k) continue;
                        g_p -= (gamma / static_cast<double>(n_syn)) * pair_norm *
                               a2d::distance_grad_p(spec.a2d.metric, probs[k], probs[b]);
                    }
                    // d(-H)/dp_i = log p_i + 1; softmax outputs are strictly positive
                    const double ent_scale = gamma / (static_cast<double>(m_count) * static_cast<double>(n_syn));
                    for (int c = 0; c < classes; ++c) {
                        g_p[c] += ent_scale * (std::log(std::max(probs[k][c], 1e-300)) + 1.0);
                    }
                    g_syn_logits[k].row(j) += softmax_jacobian_apply(probs[k], g_p).transpose();
                }
            }
        }
        result.loss.discr_syn /= static_cast<double>(n_syn);
        result.loss.ent /= static_cast<double>(n_syn);
        if (opt.want_grads) {
            for (int k = 0; k < m_count; ++k) {
                result.grads.modality_heads[k].weight += g_syn_logits[k].transpose() * syn_embed[k];
                result.grads.modality_heads[k].bias += g_syn_logits[k].colwise().sum().transpose();
            }
        }
    }

    result.loss.total = result.loss.cls + gamma * (result.loss.discr + result.loss.discr_syn + result.loss.ent);

    if (!opt.want_grads) {
        return result;
    }

    // Joint head and its upstream signal into the concatenated embeddings.
    result.grads.joint_head.weight += g_joint_logits.transpose() * fc.joint_input;
    result.grads.joint_head.bias += g_joint_logits.colwise().sum().transpose();
    const Eigen::MatrixXd g_joint_input = g_joint_logits * model.joint_head.weight;

    const int e = model.dims.embed_dim;
    for (int k = 0; k < m_count; ++k) {
        result.grads.modality_heads[k].weight += g_mod_logits[k].transpose() * fc.embed[k];
        result.grads.modality_heads[k].bias += g_mod_logits[k].colwise().sum().transpose();

        Eigen::MatrixXd g_embed = g_mod_logits[k] * model.modality_heads[k].weight;
        g_embed += g_joint_input.middleCols(static_cast<Eigen::Index>(k) * e, e);

        result.grads.encoders[k].embed.weight += g_embed.transpose() * fc.hidden[k];
        result.grads.encoders[k].embed.bias += g_embed.colwise().sum().transpose();

        Eigen::MatrixXd g_hidden = g_embed * model.encoders[k].embed.weight;
        g_hidden = (fc.preact[k].array() > 0.0).select(g_hidden, 0.0);

        result.grads.encoders[k].hidden.weight += g_hidden.transpose() * modalities[k];
        result.grads.encoders[k].hidden.bias += g_hidden.colwise().sum().transpose();
    }
    return result;
}

}  // namespace

BackwardResult backward(const MultimodalModel& model, const std::vector<FeatureMatrix>& modalities,
                        const std::vector<int>& labels, const a2d::LossSpec& spec,
                        const FeatureMatrix* synthesized_joint) {
    return backward_impl(model, modalities, labels, spec, synthesized_joint, BackwardOptions{true});
}

a2d::LossComponents evaluate_loss(const MultimodalModel& model, const std::vector<FeatureMatrix>& modalities,
                                  const std::vector<int>& labels, const a2d::LossSpec& spec,
                                  const FeatureMatrix* synthesized_joint) {
    return backward_impl(model, modalities, labels, spec, synthesized_joint, BackwardOptions{false}).loss;
}

}  // namespace moodkit::model

#include "moodkit/a2d.hpp"

#include <cmath>

#include "moodkit/error.hpp"

namespace moodkit::a2d {

namespace {

void check_same_length(const Eigen::VectorXd& p, const Eigen::VectorXd& q, const char* op) {
    if (p.size() != q.size()) {
        throw ArgumentError(std::string(op) + ": length mismatch (" + std::to_string(p.size()) + " vs " +
                            std::to_string(q.size()) + ")");
    }
}

void check_nonnegative(const Eigen::VectorXd& v, const char* op) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (v[i] < 0.0) {
            throw ArgumentError(std::string(op) + ": negative entry at index " + std::to_string(i));
        }
    }
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

double pairwise_normalizer(std::size_t m) {
    return 2.0 / (static_cast<double>(m) * static_cast<double>(m - 1));
}

}  // namespace

const char* to_string(Metric m) {
    switch (m) {
        case Metric::hellinger: return "hellinger";
        case Metric::l1: return "l1";
        case Metric::l2: return "l2";
        case Metric::wasserstein1d: return "wasserstein1d";
    }
    throw ArgumentError("unknown metric value");
}

Metric metric_from_string(const std::string& s) {
    if (s == "hellinger") return Metric::hellinger;
    if (s == "l1") return Metric::l1;
    if (s == "l2") return Metric::l2;
    if (s == "wasserstein1d" || s == "wasserstein") return Metric::wasserstein1d;
    throw ArgumentError("unknown metric '" + s + "'");
}

double hellinger(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
    check_same_length(p, q, "hellinger");
    check_nonnegative(p, "hellinger");
    check_nonnegative(q, "hellinger");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double d = std::sqrt(p[i]) - std::sqrt(q[i]);
        acc += d * d;
    }
    return std::sqrt(0.5 * acc);
}

double lp_distance(const Eigen::VectorXd& p, const Eigen::VectorXd& q, int order) {
    check_same_length(p, q, "lp_distance");
    if (order == 1) {
        return (p - q).cwiseAbs().sum();
    }
    if (order == 2) {
        return (p - q).norm();
    }
    throw ArgumentError("lp_distance: order must be 1 or 2");
}

double wasserstein1d(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
    check_same_length(p, q, "wasserstein1d");
    check_nonnegative(p, "wasserstein1d");
    check_nonnegative(q, "wasserstein1d");
    double cdf_p = 0.0, cdf_q = 0.0, acc = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        cdf_p += p[i];
        cdf_q += q[i];
        acc += std::abs(cdf_p - cdf_q);
    }
    return acc;
}

double distance(Metric metric, const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
    switch (metric) {
        case Metric::hellinger: return hellinger(p, q);
        case Metric::l1: return lp_distance(p, q, 1);
        case Metric::l2: return lp_distance(p, q, 2);
        case Metric::wasserstein1d: return wasserstein1d(p, q);
    }
    throw ArgumentError("unknown metric value");
}

Eigen::VectorXd distance_grad_p(Metric metric, const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
    check_same_length(p, q, "distance_grad_p");
    const Eigen::Index n = p.size();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
    switch (metric) {
        case Metric::hellinger: {
            const double d = hellinger(p, q);
            if (d < 1e-12) return g;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double sp = std::max(std::sqrt(p[i]), 1e-12);
                g[i] = (std::sqrt(p[i]) - std::sqrt(q[i])) / (4.0 * d * sp);
            }
            return g;
        }
        case Metric::l1: {
            for (Eigen::Index i = 0; i < n; ++i) {
                g[i] = sign(p[i] - q[i]);
            }
            return g;
        }
        case Metric::l2: {
            const double d = (p - q).norm();
            if (d < 1e-12) return g;
            return (p - q) / d;
        }
        case Metric::wasserstein1d: {
            // d/dp_j sum_i |CDF_p(i) - CDF_q(i)| = sum_{i >= j} sign(CDF diff at i)
            double cdf_p = 0.0, cdf_q = 0.0;
            Eigen::VectorXd s(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                cdf_p += p[i];
                cdf_q += q[i];
                s[i] = sign(cdf_p - cdf_q);
            }
            double suffix = 0.0;
            for (Eigen::Index i = n - 1; i >= 0; --i) {
                suffix += s[i];
                g[i] = suffix;
            }
            return g;
        }
    }
    throw ArgumentError("unknown metric value");
}

TruncatedProbabilityVector truncate_prediction(const Eigen::VectorXd& probs, int label) {
    const Eigen::Index c = probs.size();
    if (c < 2) {
        throw ArgumentError("truncate_prediction: need at least 2 classes");
    }
    if (label < 0 || label >= c) {
        throw ArgumentError("truncate_prediction: label " + std::to_string(label) + " outside [0, " +
                            std::to_string(c) + ")");
    }
    TruncatedProbabilityVector out;
    out.removed_class = label;
    out.values.resize(c - 1);
    Eigen::Index j = 0;
    for (Eigen::Index i = 0; i < c; ++i) {
        if (i != label) {
            out.values[j++] = probs[i];
        }
    }
    return out;
}

void A2DConfig::validate() const {
    if (gamma < 0.0) {
        throw ArgumentError("A2DConfig: gamma must be nonnegative");
    }
    if (modality_count < 1) {
        throw ArgumentError("A2DConfig: modality_count must be >= 1");
    }
}

double loss_discr(const std::vector<Eigen::VectorXd>& modality_probs, int label, Metric metric) {
    const std::size_t m = modality_probs.size();
    if (m < 2) {
        throw ArgumentError("loss_discr: need at least 2 modalities");
    }
    std::vector<Eigen::VectorXd> truncated;
    truncated.reserve(m);
    for (const auto& p : modality_probs) {
        truncated.push_back(truncate_prediction(p, label).values);
    }
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            acc += distance(metric, truncated[i], truncated[j]);
        }
    }
    return -pairwise_normalizer(m) * acc;
}

double loss_cls(const Eigen::VectorXd& joint_probs, const std::vector<Eigen::VectorXd>& modality_probs, int label) {
    double acc = model::cross_entropy(joint_probs, label);
    for (const auto& p : modality_probs) {
        acc += model::cross_entropy(p, label);
    }
    return acc / static_cast<double>(modality_probs.size() + 1);
}

double loss_discr_syn(const std::vector<Eigen::VectorXd>& syn_probs, Metric metric) {
    const std::size_t m = syn_probs.size();
    if (m < 2) {
        throw ArgumentError("loss_discr_syn: need at least 2 modalities");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            acc += distance(metric, syn_probs[i], syn_probs[j]);
        }
    }
    return -pairwise_normalizer(m) * acc;
}

double loss_ent(const std::vector<Eigen::VectorXd>& syn_probs) {
    if (syn_probs.empty()) {
        throw ArgumentError("loss_ent: need at least 1 modality");
    }
    double acc = 0.0;
    for (const auto& p : syn_probs) {
        acc += model::entropy(p);
    }
    return -acc / static_cast<double>(syn_probs.size());
}

SynthesizedPredictions forward_synthesized(const model::MultimodalModel& model,
                                           const FeatureMatrix& joint_syn_embeddings) {
    const int m_count = model.dims.modality_count();
    if (joint_syn_embeddings.cols() != model.dims.joint_dim()) {
        throw StructuralError("forward_synthesized: joint embedding dim " +
                              std::to_string(joint_syn_embeddings.cols()) + " does not match model joint dim " +
                              std::to_string(model.dims.joint_dim()));
    }
    SynthesizedPredictions out;
    out.logits.reserve(m_count);
    out.probs.reserve(m_count);
    for (int k = 0; k < m_count; ++k) {
        const Eigen::MatrixXd part = joint_syn_embeddings.middleCols(
            static_cast<Eigen::Index>(k) * model.dims.embed_dim, model.dims.embed_dim);
        Eigen::MatrixXd logits = model.modality_heads[k].apply(part);
        out.probs.push_back(model::softmax_rows(logits));
        out.logits.push_back(std::move(logits));
    }
    return out;
}

namespace {

std::vector<Eigen::VectorXd> gather_row(const std::vector<Eigen::MatrixXd>& mats, Eigen::Index row) {
    std::vector<Eigen::VectorXd> out;
    out.reserve(mats.size());
    for (const auto& m : mats) {
        out.push_back(m.row(row).transpose());
    }
    return out;
}

}  // namespace

LossComponents total_loss_components(const model::PredictionBundle& bundle, const SynthesizedPredictions* syn,
                                     const std::vector<int>& labels, const A2DConfig& cfg) {
    cfg.validate();
    if (cfg.use_npmix && syn == nullptr) {
        throw ArgumentError("total_loss: synthesized predictions required when use_npmix is set");
    }
    const Eigen::Index n = bundle.rows();
    if (static_cast<Eigen::Index>(labels.size()) != n) {
        throw StructuralError("total_loss: labels do not align with bundle rows");
    }
    LossComponents out;
    if (cfg.gamma != 0.0 && bundle.modality_count() < 2) {
        throw ArgumentError("total_loss: discrepancy term requires at least 2 modalities");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto probs = gather_row(bundle.modality_probs, i);
        out.cls += loss_cls(bundle.joint_probs.row(i).transpose(), probs, labels[i]);
        if (cfg.gamma != 0.0) {
            out.discr += loss_discr(probs, labels[i], cfg.metric);
        }
    }
    out.cls /= static_cast<double>(n);
    out.discr /= static_cast<double>(n);

    if (cfg.use_npmix) {
        const Eigen::Index n_syn = syn->probs.empty() ? 0 : syn->probs.front().rows();
        if (n_syn == 0) {
            throw ArgumentError("total_loss: synthesized batch is empty");
        }
        for (Eigen::Index j = 0; j < n_syn; ++j) {
            const auto probs = gather_row(syn->probs, j);
            out.discr_syn += loss_discr_syn(probs, cfg.metric);
            out.ent += loss_ent(probs);
        }
        out.discr_syn /= static_cast<double>(n_syn);
        out.ent /= static_cast<double>(n_syn);
    }
    out.total = out.cls + cfg.gamma * (out.discr + out.discr_syn + out.ent);
    return out;
}

double total_loss(const model::PredictionBundle& bundle, const SynthesizedPredictions* syn,
                  const std::vector<int>& labels, const A2DConfig& cfg) {
    return total_loss_components(bundle, syn, labels, cfg).total;
}

Eigen::VectorXd discrepancy_statistic(const model::PredictionBundle& bundle) {
    const std::size_t m = bundle.modality_probs.size();
    if (m < 2) {
        throw ArgumentError("discrepancy_statistic: need at least 2 modalities");
    }
    const Eigen::Index n = bundle.rows();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    const double norm = 1.0 / (0.5 * static_cast<double>(m) * static_cast<double>(m - 1));
    for (std::size_t i = 0; i + 1 < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            out += (bundle.modality_probs[i] - bundle.modality_probs[j]).cwiseAbs().rowwise().sum();
        }
    }
    return out * norm;
}

double mean_discrepancy(const model::PredictionBundle& bundle) {
    const Eigen::VectorXd per_sample = discrepancy_statistic(bundle);
    return per_sample.size() == 0 ? 0.0 : per_sample.mean();
}

}  // namespace moodkit::a2d

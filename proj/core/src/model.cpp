#include "moodkit/model.hpp"

#include <cmath>
#include <string>

#include "moodkit/error.hpp"

namespace moodkit::model {

namespace {

DenseLayer make_layer(int out_dim, int in_dim, Activation act, SeededRng& rng) {
    DenseLayer layer;
    layer.activation = act;
    layer.weight.resize(out_dim, in_dim);
    const double bound = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
    for (int r = 0; r < out_dim; ++r) {
        for (int c = 0; c < in_dim; ++c) {
            layer.weight(r, c) = rng.uniform(-bound, bound);
        }
    }
    layer.bias = Eigen::VectorXd::Zero(out_dim);
    return layer;
}

}  // namespace

Eigen::MatrixXd DenseLayer::apply(const Eigen::MatrixXd& input) const {
    if (input.cols() != weight.cols()) {
        throw StructuralError("DenseLayer: input has " + std::to_string(input.cols()) + " columns, expected " +
                              std::to_string(weight.cols()));
    }
    Eigen::MatrixXd out = input * weight.transpose();
    out.rowwise() += bias.transpose();
    if (activation == Activation::relu) {
        out = out.cwiseMax(0.0);
    }
    return out;
}

void ModelDims::validate() const {
    if (modality_dims.empty()) {
        throw StructuralError("ModelDims: at least one modality required");
    }
    for (int d : modality_dims) {
        if (d < 1) throw ArgumentError("ModelDims: modality dims must be >= 1");
    }
    if (hidden_dim < 1 || embed_dim < 1 || class_count < 2) {
        throw ArgumentError("ModelDims: hidden_dim, embed_dim >= 1 and class_count >= 2 required");
    }
}

MultimodalModel MultimodalModel::initialize(const ModelDims& dims, SeededRng& rng) {
    dims.validate();
    MultimodalModel m;
    m.dims = dims;
    for (int d : dims.modality_dims) {
        Encoder enc;
        enc.hidden = make_layer(dims.hidden_dim, d, Activation::relu, rng);
        enc.embed = make_layer(dims.embed_dim, dims.hidden_dim, Activation::identity, rng);
        m.encoders.push_back(std::move(enc));
    }
    for (int k = 0; k < dims.modality_count(); ++k) {
        m.modality_heads.push_back(make_layer(dims.class_count, dims.embed_dim, Activation::identity, rng));
    }
    m.joint_head = make_layer(dims.class_count, dims.joint_dim(), Activation::identity, rng);
    return m;
}

PredictionBundle forward(const MultimodalModel& model, const std::vector<FeatureMatrix>& modalities) {
    const int m_count = model.dims.modality_count();
    if (static_cast<int>(modalities.size()) != m_count) {
        throw StructuralError("forward: batch has " + std::to_string(modalities.size()) + " modalities, model expects " +
                              std::to_string(m_count));
    }
    PredictionBundle bundle;
    bundle.embeddings.reserve(m_count);
    bundle.modality_logits.reserve(m_count);
    bundle.modality_probs.reserve(m_count);
    for (int k = 0; k < m_count; ++k) {
        if (modalities[k].cols() != model.dims.modality_dims[k]) {
            throw StructuralError("forward: modality " + std::to_string(k) + " has dim " +
                                  std::to_string(modalities[k].cols()) + ", model expects " +
                                  std::to_string(model.dims.modality_dims[k]));
        }
        const Eigen::MatrixXd hidden = model.encoders[k].hidden.apply(modalities[k]);
        Eigen::MatrixXd embed = model.encoders[k].embed.apply(hidden);
        Eigen::MatrixXd logits = model.modality_heads[k].apply(embed);
        bundle.modality_probs.push_back(softmax_rows(logits));
        bundle.modality_logits.push_back(std::move(logits));
        bundle.embeddings.push_back(std::move(embed));
    }
    const FeatureMatrix joint = concat_modalities(bundle.embeddings);
    bundle.joint_logits = model.joint_head.apply(joint);
    bundle.joint_probs = softmax_rows(bundle.joint_logits);
    return bundle;
}

PredictionBundle forward(const MultimodalModel& model, const LabeledBatch& batch) {
    return forward(model, batch.modalities);
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
    const double m = logits.maxCoeff();
    Eigen::VectorXd e = (logits.array() - m).exp();
    return e / e.sum();
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        out.row(i) = softmax(logits.row(i).transpose()).transpose();
    }
    return out;
}

double cross_entropy(const Eigen::VectorXd& probs, int label) {
    if (label < 0 || label >= probs.size()) {
        throw ArgumentError("cross_entropy: label " + std::to_string(label) + " outside [0, " +
                            std::to_string(probs.size()) + ")");
    }
    return -std::log(std::max(probs[label], kProbFloor));
}

double entropy(const Eigen::VectorXd& probs) {
    double h = 0.0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        const double p = probs[i];
        if (p > 0.0) {
            h -= p * std::log(p);
        }
    }
    return h;
}

Eigen::VectorXd logitnorm_logits(const Eigen::VectorXd& logits, double tau) {
    if (!(tau > 0.0)) {
        throw ArgumentError("logitnorm_logits: tau must be positive");
    }
    const double norm = logits.norm() + 1e-12;
    return logits / (tau * norm);
}

GradientSet GradientSet::zeros_like(const MultimodalModel& model) {
    GradientSet g;
    for (const auto& enc : model.encoders) {
        EncoderGrad eg;
        eg.hidden.weight = Eigen::MatrixXd::Zero(enc.hidden.weight.rows(), enc.hidden.weight.cols());
        eg.hidden.bias = Eigen::VectorXd::Zero(enc.hidden.bias.size());
        eg.embed.weight = Eigen::MatrixXd::Zero(enc.embed.weight.rows(), enc.embed.weight.cols());
        eg.embed.bias = Eigen::VectorXd::Zero(enc.embed.bias.size());
        g.encoders.push_back(std::move(eg));
    }
    for (const auto& head : model.modality_heads) {
        LayerGrad lg;
        lg.weight = Eigen::MatrixXd::Zero(head.weight.rows(), head.weight.cols());
        lg.bias = Eigen::VectorXd::Zero(head.bias.size());
        g.modality_heads.push_back(std::move(lg));
    }
    g.joint_head.weight = Eigen::MatrixXd::Zero(model.joint_head.weight.rows(), model.joint_head.weight.cols());
    g.joint_head.bias = Eigen::VectorXd::Zero(model.joint_head.bias.size());
    return g;
}

AdamState AdamState::init(const MultimodalModel& model) {
    AdamState s;
    s.first_moment = GradientSet::zeros_like(model);
    s.second_moment = GradientSet::zeros_like(model);
    s.step = 0;
    return s;
}

void adam_step(MultimodalModel& model, const GradientSet& grads, AdamState& state, double lr,
               const AdamConfig& cfg) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

    auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
        v = cfg.beta2 * v.array().matrix() + (1.0 - cfg.beta2) * grad.array().square().matrix();
        param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.epsilon);
    };

    for (std::size_t k = 0; k < model.encoders.size(); ++k) {
        update(model.encoders[k].hidden.weight, grads.encoders[k].hidden.weight,
               state.first_moment.encoders[k].hidden.weight, state.second_moment.encoders[k].hidden.weight);
        update(model.encoders[k].hidden.bias, grads.encoders[k].hidden.bias,
               state.first_moment.encoders[k].hidden.bias, state.second_moment.encoders[k].hidden.bias);
        update(model.encoders[k].embed.weight, grads.encoders[k].embed.weight,
               state.first_moment.encoders[k].embed.weight, state.second_moment.encoders[k].embed.weight);
        update(model.encoders[k].embed.bias, grads.encoders[k].embed.bias,
               state.first_moment.encoders[k].embed.bias, state.second_moment.encoders[k].embed.bias);
    }
    for (std::size_t k = 0; k < model.modality_heads.size(); ++k) {
        update(model.modality_heads[k].weight, grads.modality_heads[k].weight,
               state.first_moment.modality_heads[k].weight, state.second_moment.modality_heads[k].weight);
        update(model.modality_heads[k].bias, grads.modality_heads[k].bias,
               state.first_moment.modality_heads[k].bias, state.second_moment.modality_heads[k].bias);
    }
    update(model.joint_head.weight, grads.joint_head.weight, state.first_moment.joint_head.weight,
           state.second_moment.joint_head.weight);
    update(model.joint_head.bias, grads.joint_head.bias, state.first_moment.joint_head.bias,
           state.second_moment.joint_head.bias);
}

}  // namespace moodkit::model

#ifndef MOODKIT_MODEL_HPP
#define MOODKIT_MODEL_HPP

#include <Eigen/Dense>
#include <vector>

#include "moodkit/rng.hpp"
#include "moodkit/types.hpp"

namespace moodkit::model {

/// Floor applied inside log terms so saturated softmax cannot produce -inf.
constexpr double kProbFloor = 1e-12;

enum class Activation { relu, identity };

struct DenseLayer {
    Eigen::MatrixXd weight;  // d_out x d_in
    Eigen::VectorXd bias;    // d_out
    Activation activation = Activation::identity;

    Eigen::Index in_dim() const { return weight.cols(); }
    Eigen::Index out_dim() const { return weight.rows(); }

    /// input is n x d_in; returns n x d_out.
    Eigen::MatrixXd apply(const Eigen::MatrixXd& input) const;
};

struct ModelDims {
    std::vector<int> modality_dims;  // d_k
    int hidden_dim = 64;
    int embed_dim = 32;
    int class_count = 0;

    int modality_count() const { return static_cast<int>(modality_dims.size()); }
    int joint_dim() const { return modality_count() * embed_dim; }
    void validate() const;
};

/// The multimodal classifier: per-modality two-layer encoders g_k
/// (relu hidden, identity embed), per-modality heads h_k, and a joint head h
/// over the concatenated embeddings.
struct MultimodalModel {
    struct Encoder {
        DenseLayer hidden;  // d_k -> hidden_dim, relu
        DenseLayer embed;   // hidden_dim -> embed_dim, identity
    };

    ModelDims dims;
    std::vector<Encoder> encoders;
    std::vector<DenseLayer> modality_heads;  // embed_dim -> C
    DenseLayer joint_head;                   // M * embed_dim -> C

    /// Glorot-uniform weights, zero biases, all draws from rng in a fixed order.
    static MultimodalModel initialize(const ModelDims& dims, SeededRng& rng);
};

struct PredictionBundle {
    Eigen::MatrixXd joint_logits;                 // n x C
    Eigen::MatrixXd joint_probs;                  // n x C
    std::vector<Eigen::MatrixXd> modality_logits; // M of n x C
    std::vector<Eigen::MatrixXd> modality_probs;  // M of n x C
    std::vector<Eigen::MatrixXd> embeddings;      // M of n x embed_dim

    Eigen::Index rows() const { return joint_logits.rows(); }
    int modality_count() const { return static_cast<int>(modality_probs.size()); }
    FeatureMatrix joint_embedding() const { return concat_modalities(embeddings); }
};

/// Deterministic, pure in (model, inputs). Throws StructuralError when the
/// modality dims do not match the model.
PredictionBundle forward(const MultimodalModel& model, const std::vector<FeatureMatrix>& modalities);
PredictionBundle forward(const MultimodalModel& model, const LabeledBatch& batch);

/// Numerically stable row softmax (max subtraction).
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);

/// -log probs[label], clamped at kProbFloor. Throws ArgumentError on a label
/// outside [0, C).
double cross_entropy(const Eigen::VectorXd& probs, int label);

/// Shannon entropy with 0*log 0 = 0; in [0, ln C] for probability vectors.
double entropy(const Eigen::VectorXd& probs);

/// logits / (tau * (||logits||_2 + 1e-12)); scale-invariant in the input.
Eigen::VectorXd logitnorm_logits(const Eigen::VectorXd& logits, double tau);

/// One gradient tensor per parameter tensor of MultimodalModel.
struct GradientSet {
    struct LayerGrad {
        Eigen::MatrixXd weight;
        Eigen::VectorXd bias;
    };
    struct EncoderGrad {
        LayerGrad hidden;
        LayerGrad embed;
    };
    std::vector<EncoderGrad> encoders;
    std::vector<LayerGrad> modality_heads;
    LayerGrad joint_head;

    static GradientSet zeros_like(const MultimodalModel& model);
};

/// Visits every parameter tensor (weights and biases) in a fixed order.
/// Fn receives Eigen::MatrixXd& or Eigen::VectorXd&.
template <typename Model, typename Fn>
void visit_parameters(Model&& model, Fn&& fn) {
    for (auto&& enc : model.encoders) {
        fn(enc.hidden.weight);
        fn(enc.hidden.bias);
        fn(enc.embed.weight);
        fn(enc.embed.bias);
    }
    for (auto&& head : model.modality_heads) {
        fn(head.weight);
        fn(head.bias);
    }
    fn(model.joint_head.weight);
    fn(model.joint_head.bias);
}

/// Visits (parameter, companion) tensor pairs in the same fixed order, where
/// the companion is a GradientSet (or anything shaped like one).
template <typename Model, typename Grads, typename Fn>
void visit_parameter_pairs(Model&& model, Grads&& grads, Fn&& fn) {
    for (std::size_t k = 0; k < model.encoders.size(); ++k) {
        fn(model.encoders[k].hidden.weight, grads.encoders[k].hidden.weight);
        fn(model.encoders[k].hidden.bias, grads.encoders[k].hidden.bias);
        fn(model.encoders[k].embed.weight, grads.encoders[k].embed.weight);
        fn(model.encoders[k].embed.bias, grads.encoders[k].embed.bias);
    }
    for (std::size_t k = 0; k < model.modality_heads.size(); ++k) {
        fn(model.modality_heads[k].weight, grads.modality_heads[k].weight);
        fn(model.modality_heads[k].bias, grads.modality_heads[k].bias);
    }
    fn(model.joint_head.weight, grads.joint_head.weight);
    fn(model.joint_head.bias, grads.joint_head.bias);
}

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    GradientSet first_moment;
    GradientSet second_moment;
    long step = 0;

    static AdamState init(const MultimodalModel& model);
};

/// Standard Adam update with bias correction; deterministic.
void adam_step(MultimodalModel& model, const GradientSet& grads, AdamState& state, double lr,
               const AdamConfig& cfg = {});

}  // namespace moodkit::model

#endif  // MOODKIT_MODEL_HPP

#ifndef MOODKIT_BACKWARD_HPP
#define MOODKIT_BACKWARD_HPP

#include "moodkit/a2d.hpp"
#include "moodkit/model.hpp"

namespace moodkit::model {

struct BackwardResult {
    a2d::LossComponents loss;
    GradientSet grads;
};

/// Analytic gradients of the composite loss selected by `spec` with respect
/// to every model parameter. Synthesized joint embeddings, when given, are
/// treated as constants and reach only the per-modality heads. Matches
/// central finite differences of evaluate_loss.
BackwardResult backward(const MultimodalModel& model, const std::vector<FeatureMatrix>& modalities,
                        const std::vector<int>& labels, const a2d::LossSpec& spec,
                        const FeatureMatrix* synthesized_joint = nullptr);

/// Forward-only evaluation of the same scalar the gradients differentiate;
/// shares its arithmetic with backward().
a2d::LossComponents evaluate_loss(const MultimodalModel& model, const std::vector<FeatureMatrix>& modalities,
                                  const std::vector<int>& labels, const a2d::LossSpec& spec,
                                  const FeatureMatrix* synthesized_joint = nullptr);

}  // namespace moodkit::model

#endif  // MOODKIT_BACKWARD_HPP

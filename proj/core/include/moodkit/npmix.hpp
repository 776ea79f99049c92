#ifndef MOODKIT_NPMIX_HPP
#define MOODKIT_NPMIX_HPP

#include <cstdint>
#include <vector>

#include "moodkit/rng.hpp"
#include "moodkit/types.hpp"

namespace moodkit::npmix {

/// Per-class mean embeddings in the joint space; row c is the exact mean of
/// all joint embeddings labelled c.
struct PrototypeSet {
    FeatureMatrix prototypes;  // C x D
    std::vector<Eigen::Index> counts;

    int class_count() const { return static_cast<int>(prototypes.rows()); }
};

struct NpMixConfig {
    int neighbors_n = 2;        // N, must be <= C-1
    double alpha = 10.0;        // Beta(alpha, alpha); defaults require > 1
    int outliers_per_batch = 0; // 0 means "match the batch size"

    void validate(int class_count) const;
};

/// Where each synthesized row came from: classes, source rows, whether the
/// row index refers to the epoch pool instead of the batch, and the mixing
/// coefficient. Enough to reconstruct the output exactly.
struct SourceRef {
    int class_c = -1;
    int class_s = -1;
    Eigen::Index index_1 = -1;
    Eigen::Index index_2 = -1;
    bool from_pool_1 = false;
    bool from_pool_2 = false;
    double lambda = 0.0;
};

struct SynthesizedBatch {
    FeatureMatrix joint_embeddings;  // n_syn x D
    std::vector<SourceRef> sources;
};

/// Epoch-level fallback used when a class is absent from the current batch.
struct SamplePool {
    const FeatureMatrix* joint = nullptr;
    const std::vector<int>* labels = nullptr;
};

/// Requires every class in [0, class_count) to have at least one sample;
/// throws ArgumentError naming the first empty class.
PrototypeSet compute_prototypes(const FeatureMatrix& joint, const std::vector<int>& labels, int class_count);

/// The n classes s != cls closest to cls in Euclidean prototype distance,
/// ties broken by the smaller class index. Requires n <= C-1.
std::vector<int> nearest_prototype_classes(const PrototypeSet& protos, int cls, int n);

/// Nearest-neighbor prototype mixup: for each outlier pick a class c present
/// in the batch, a neighbor class s among c's top-N prototype neighbors, one
/// sample from each (batch first, pool fallback), and blend with
/// lambda ~ Beta(alpha, alpha).
SynthesizedBatch npmix_synthesize(const FeatureMatrix& batch_joint, const std::vector<int>& batch_labels,
                                  const PrototypeSet& protos, const NpMixConfig& cfg, SeededRng& rng,
                                  const SamplePool* fallback_pool, int n_outliers);

/// Table-baseline mixup: pairs drawn uniformly over all distinct sample pairs
/// regardless of class; same convex combination. Source classes may coincide.
SynthesizedBatch mixup_synthesize(const FeatureMatrix& batch_joint, const std::vector<int>& batch_labels,
                                  double alpha, SeededRng& rng, int n_outliers);

}  // namespace moodkit::npmix

#endif  // MOODKIT_NPMIX_HPP

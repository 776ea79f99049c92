#ifndef MOODKIT_TYPES_HPP
#define MOODKIT_TYPES_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace moodkit {

/// Rows are samples, columns are embedding coordinates. Entries must be
/// finite 64-bit reals; validated at the I/O boundaries.
using FeatureMatrix = Eigen::MatrixXd;

/// Sentinel label carried by ood_test rows.
constexpr int kOodLabel = -1;

enum class Split { id_train, id_val, id_test, ood_test };

const char* to_string(Split s);
Split split_from_string(const std::string& s);

/// Aligned multimodal dataset: M feature matrices with identical row counts,
/// one label and one split tag per row. OOD rows carry kOodLabel.
struct LabeledBatch {
    std::vector<FeatureMatrix> modalities;
    std::vector<int> labels;
    std::vector<Split> splits;
    std::vector<std::int64_t> sample_ids;  // stable external ids, row-aligned
    int class_count = 0;

    Eigen::Index rows() const { return modalities.empty() ? 0 : modalities.front().rows(); }
    int modality_count() const { return static_cast<int>(modalities.size()); }
    std::vector<int> modality_dims() const;

    /// Throws StructuralError / ArgumentError when an invariant is violated.
    void validate() const;

    std::vector<Eigen::Index> rows_with_split(Split s) const;
    LabeledBatch subset(Split s) const;
    LabeledBatch subset(const std::vector<Eigen::Index>& rows) const;
};

void check_finite(const FeatureMatrix& m, const std::string& what);

/// [Z^1 | Z^2 | ... | Z^M] with row order preserved. Throws StructuralError
/// on row-count mismatch.
FeatureMatrix concat_modalities(const std::vector<FeatureMatrix>& modalities);
FeatureMatrix concat_modalities(const LabeledBatch& batch);

/// Inverse of concat_modalities for the given per-modality widths.
std::vector<FeatureMatrix> split_modalities(const FeatureMatrix& joint, const std::vector<int>& dims);

/// Probability-vector sanity: entries in [0,1] within tol, sum within tol of 1.
bool is_probability_vector(const Eigen::VectorXd& v, double tol = 1e-9);

}  // namespace moodkit

#endif  // MOODKIT_TYPES_HPP

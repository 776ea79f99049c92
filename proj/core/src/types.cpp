#include "moodkit/types.hpp"

#include <cmath>

#include "moodkit/error.hpp"

namespace moodkit {

const char* to_string(Split s) {
    switch (s) {
        case Split::id_train: return "id_train";
        case Split::id_val: return "id_val";
        case Split::id_test: return "id_test";
        case Split::ood_test: return "ood_test";
    }
    throw ArgumentError("unknown split value");
}

Split split_from_string(const std::string& s) {
    if (s == "id_train") return Split::id_train;
    if (s == "id_val") return Split::id_val;
    if (s == "id_test") return Split::id_test;
    if (s == "ood_test") return Split::ood_test;
    throw ArgumentError("unknown split tag '" + s + "'");
}

std::vector<int> LabeledBatch::modality_dims() const {
    std::vector<int> dims;
    dims.reserve(modalities.size());
    for (const auto& m : modalities) {
        dims.push_back(static_cast<int>(m.cols()));
    }
    return dims;
}

void LabeledBatch::validate() const {
    if (modalities.empty()) {
        throw StructuralError("LabeledBatch: at least one modality required");
    }
    const Eigen::Index n = modalities.front().rows();
    for (std::size_t k = 0; k < modalities.size(); ++k) {
        if (modalities[k].rows() != n) {
            throw StructuralError("LabeledBatch: modality " + std::to_string(k) + " has " +
                                  std::to_string(modalities[k].rows()) + " rows, expected " + std::to_string(n));
        }
        if (modalities[k].cols() < 1 || modalities[k].rows() < 1) {
            throw StructuralError("LabeledBatch: modality " + std::to_string(k) + " is empty");
        }
        check_finite(modalities[k], "modality " + std::to_string(k));
    }
    if (static_cast<Eigen::Index>(labels.size()) != n || static_cast<Eigen::Index>(splits.size()) != n ||
        static_cast<Eigen::Index>(sample_ids.size()) != n) {
        throw StructuralError("LabeledBatch: labels/splits/sample_ids must align with rows");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (splits[i] == Split::ood_test) {
            if (labels[i] != kOodLabel) {
                throw ArgumentError("LabeledBatch: ood_test row " + std::to_string(i) +
                                    " must carry sentinel label -1");
            }
        } else if (labels[i] < 0 || labels[i] >= class_count) {
            throw ArgumentError("LabeledBatch: row " + std::to_string(i) + " label " + std::to_string(labels[i]) +
                                " outside [0, " + std::to_string(class_count) + ")");
        }
    }
}

std::vector<Eigen::Index> LabeledBatch::rows_with_split(Split s) const {
    std::vector<Eigen::Index> out;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(splits.size()); ++i) {
        if (splits[i] == s) out.push_back(i);
    }
    return out;
}

LabeledBatch LabeledBatch::subset(Split s) const { return subset(rows_with_split(s)); }

LabeledBatch LabeledBatch::subset(const std::vector<Eigen::Index>& rows) const {
    LabeledBatch out;
    out.class_count = class_count;
    out.modalities.reserve(modalities.size());
    for (const auto& m : modalities) {
        FeatureMatrix sel(static_cast<Eigen::Index>(rows.size()), m.cols());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            sel.row(static_cast<Eigen::Index>(r)) = m.row(rows[r]);
        }
        out.modalities.push_back(std::move(sel));
    }
    out.labels.reserve(rows.size());
    out.splits.reserve(rows.size());
    out.sample_ids.reserve(rows.size());
    for (Eigen::Index r : rows) {
        out.labels.push_back(labels[r]);
        out.splits.push_back(splits[r]);
        out.sample_ids.push_back(sample_ids[r]);
    }
    return out;
}

void check_finite(const FeatureMatrix& m, const std::string& what) {
    if (!m.allFinite()) {
        throw ArgumentError(what + ": non-finite entry");
    }
}

FeatureMatrix concat_modalities(const std::vector<FeatureMatrix>& modalities) {
    if (modalities.empty()) {
        throw StructuralError("concat_modalities: no modalities");
    }
    const Eigen::Index n = modalities.front().rows();
    Eigen::Index total = 0;
    for (std::size_t k = 0; k < modalities.size(); ++k) {
        if (modalities[k].rows() != n) {
            throw StructuralError("concat_modalities: row-count mismatch at modality " + std::to_string(k));
        }
        total += modalities[k].cols();
    }
    FeatureMatrix joint(n, total);
    Eigen::Index col = 0;
    for (const auto& m : modalities) {
        joint.middleCols(col, m.cols()) = m;
        col += m.cols();
    }
    return joint;
}

FeatureMatrix concat_modalities(const LabeledBatch& batch) { return concat_modalities(batch.modalities); }

std::vector<FeatureMatrix> split_modalities(const FeatureMatrix& joint, const std::vector<int>& dims) {
    Eigen::Index total = 0;
    for (int d : dims) {
        if (d < 1) {
            throw ArgumentError("split_modalities: dims must be >= 1");
        }
        total += d;
    }
    if (total != joint.cols()) {
        throw StructuralError("split_modalities: dims sum to " + std::to_string(total) + " but joint has " +
                              std::to_string(joint.cols()) + " columns");
    }
    std::vector<FeatureMatrix> out;
    out.reserve(dims.size());
    Eigen::Index col = 0;
    for (int d : dims) {
        out.push_back(joint.middleCols(col, d));
        col += d;
    }
    return out;
}

bool is_probability_vector(const Eigen::VectorXd& v, double tol) {
    if (v.size() == 0) return false;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double x = v[i];
        if (!std::isfinite(x) || x < -tol || x > 1.0 + tol) return false;
        sum += x;
    }
    return std::abs(sum - 1.0) <= tol;
}

}  // namespace moodkit

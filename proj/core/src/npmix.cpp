#include "moodkit/npmix.hpp"

#include <algorithm>
#include <string>

#include "moodkit/error.hpp"

namespace moodkit::npmix {

namespace {

std::vector<Eigen::Index> rows_of_class(const std::vector<int>& labels, int cls) {
    std::vector<Eigen::Index> out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == cls) out.push_back(static_cast<Eigen::Index>(i));
    }
    return out;
}

}  // namespace

void NpMixConfig::validate(int class_count) const {
    if (neighbors_n < 1 || neighbors_n > class_count - 1) {
        throw ArgumentError("NpMixConfig: neighbors_n must be in [1, C-1], got " + std::to_string(neighbors_n) +
                            " with C = " + std::to_string(class_count));
    }
    if (!(alpha > 0.0)) {
        throw ArgumentError("NpMixConfig: alpha must be positive");
    }
    if (outliers_per_batch < 0) {
        throw ArgumentError("NpMixConfig: outliers_per_batch must be nonnegative");
    }
}

PrototypeSet compute_prototypes(const FeatureMatrix& joint, const std::vector<int>& labels, int class_count) {
    if (static_cast<Eigen::Index>(labels.size()) != joint.rows()) {
        throw StructuralError("compute_prototypes: labels do not align with rows");
    }
    if (class_count < 1) {
        throw ArgumentError("compute_prototypes: class_count must be >= 1");
    }
    PrototypeSet out;
    out.prototypes = FeatureMatrix::Zero(class_count, joint.cols());
    out.counts.assign(class_count, 0);
    for (Eigen::Index i = 0; i < joint.rows(); ++i) {
        const int c = labels[i];
        if (c < 0 || c >= class_count) {
            throw ArgumentError("compute_prototypes: label " + std::to_string(c) + " outside [0, " +
                                std::to_string(class_count) + ")");
        }
        out.prototypes.row(c) += joint.row(i);
        out.counts[c] += 1;
    }
    for (int c = 0; c < class_count; ++c) {
        if (out.counts[c] == 0) {
            throw ArgumentError("compute_prototypes: class " + std::to_string(c) + " has no samples");
        }
        out.prototypes.row(c) /= static_cast<double>(out.counts[c]);
    }
    return out;
}

std::vector<int> nearest_prototype_classes(const PrototypeSet& protos, int cls, int n) {
    const int c_total = protos.class_count();
    if (cls < 0 || cls >= c_total) {
        throw ArgumentError("nearest_prototype_classes: class " + std::to_string(cls) + " outside [0, " +
                            std::to_string(c_total) + ")");
    }
    if (n < 1 || n > c_total - 1) {
        throw ArgumentError("nearest_prototype_classes: n must be in [1, C-1], got " + std::to_string(n));
    }
    std::vector<std::pair<double, int>> by_distance;
    by_distance.reserve(c_total - 1);
    for (int s = 0; s < c_total; ++s) {
        if (s == cls) continue;
        const double d = (protos.prototypes.row(cls) - protos.prototypes.row(s)).norm();
        by_distance.emplace_back(d, s);
    }
    std::sort(by_distance.begin(), by_distance.end());  // ties fall to the smaller class index
    std::vector<int> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        out.push_back(by_distance[i].second);
    }
    return out;
}

SynthesizedBatch npmix_synthesize(const FeatureMatrix& batch_joint, const std::vector<int>& batch_labels,
                                  const PrototypeSet& protos, const NpMixConfig& cfg, SeededRng& rng,
                                  const SamplePool* fallback_pool, int n_outliers) {
    const int class_count = protos.class_count();
    cfg.validate(class_count);
    if (static_cast<Eigen::Index>(batch_labels.size()) != batch_joint.rows()) {
        throw StructuralError("npmix_synthesize: labels do not align with rows");
    }
    if (class_count < 2) {
        throw ArgumentError("npmix_synthesize: need at least 2 classes");
    }
    std::vector<int> present;
    for (int c = 0; c < class_count; ++c) {
        if (!rows_of_class(batch_labels, c).empty()) present.push_back(c);
    }
    if (present.empty()) {
        throw ArgumentError("npmix_synthesize: batch contains no labelled samples");
    }

    auto pick_sample = [&](int cls, Eigen::Index* row, bool* from_pool) -> Eigen::VectorXd {
        const auto batch_rows = rows_of_class(batch_labels, cls);
        if (!batch_rows.empty()) {
            *row = batch_rows[rng.index(batch_rows.size())];
            *from_pool = false;
            return batch_joint.row(*row).transpose();
        }
        if (fallback_pool == nullptr || fallback_pool->joint == nullptr) {
            throw ArgumentError("npmix_synthesize: class " + std::to_string(cls) +
                                " absent from batch and no fallback pool given");
        }
        const auto pool_rows = rows_of_class(*fallback_pool->labels, cls);
        if (pool_rows.empty()) {
            throw ArgumentError("npmix_synthesize: class " + std::to_string(cls) + " absent from fallback pool");
        }
        *row = pool_rows[rng.index(pool_rows.size())];
        *from_pool = true;
        return fallback_pool->joint->row(*row).transpose();
    };

    SynthesizedBatch out;
    out.joint_embeddings.resize(n_outliers, batch_joint.cols());
    out.sources.resize(n_outliers);
    for (int i = 0; i < n_outliers; ++i) {
        SourceRef& src = out.sources[i];
        src.class_c = present[rng.index(present.size())];
        const auto neighbors = nearest_prototype_classes(protos, src.class_c, cfg.neighbors_n);
        src.class_s = neighbors[rng.index(neighbors.size())];
        const Eigen::VectorXd z1 = pick_sample(src.class_c, &src.index_1, &src.from_pool_1);
        const Eigen::VectorXd z2 = pick_sample(src.class_s, &src.index_2, &src.from_pool_2);
        src.lambda = rng.beta(cfg.alpha, cfg.alpha);
        out.joint_embeddings.row(i) = (src.lambda * z1 + (1.0 - src.lambda) * z2).transpose();
    }
    return out;
}

SynthesizedBatch mixup_synthesize(const FeatureMatrix& batch_joint, const std::vector<int>& batch_labels,
                                  double alpha, SeededRng& rng, int n_outliers) {
    const Eigen::Index n = batch_joint.rows();
    if (n < 2) {
        throw ArgumentError("mixup_synthesize: need at least 2 samples");
    }
    if (static_cast<Eigen::Index>(batch_labels.size()) != n) {
        throw StructuralError("mixup_synthesize: labels do not align with rows");
    }
    if (!(alpha > 0.0)) {
        throw ArgumentError("mixup_synthesize: alpha must be positive");
    }
    SynthesizedBatch out;
    out.joint_embeddings.resize(n_outliers, batch_joint.cols());
    out.sources.resize(n_outliers);
    for (int i = 0; i < n_outliers; ++i) {
        SourceRef& src = out.sources[i];
        src.index_1 = static_cast<Eigen::Index>(rng.index(n));
        src.index_2 = static_cast<Eigen::Index>(rng.index(n - 1));
        if (src.index_2 >= src.index_1) src.index_2 += 1;
        src.class_c = batch_labels[src.index_1];
        src.class_s = batch_labels[src.index_2];
        src.lambda = rng.beta(alpha, alpha);
        out.joint_embeddings.row(i) =
            src.lambda * batch_joint.row(src.index_1) + (1.0 - src.lambda) * batch_joint.row(src.index_2);
    }
    return out;
}

}  // namespace moodkit::npmix

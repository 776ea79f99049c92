#ifndef MOODKIT_DATA_IO_HPP
#define MOODKIT_DATA_IO_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "moodkit/types.hpp"

namespace moodkit::io {

/// Synthetic multimodal generator. Each class draws a shared latent mean;
/// modality-k class means blend a fixed random projection of that latent
/// (weight modality_corr) with an independent draw, scaled by class_sep.
/// Held-out classes become ood_test rows; a nonzero far_ood_shift switches
/// them to Far-OOD (fresh-seed means plus a constant coordinate shift).
struct SynthConfig {
    int id_classes = 10;
    int near_ood_classes = 10;
    std::vector<int> dims = {16, 16};
    int samples_per_class = 200;
    double class_sep = 3.0;
    double modality_corr = 0.8;
    double far_ood_shift = 0.0;
    double noise_sigma = 1.0;
    std::uint64_t seed = 7;

    void validate() const;
};

LabeledBatch generate_synthetic(const SynthConfig& cfg);

struct DatasetManifest {
    struct ModalityFile {
        std::string path;  // relative to the manifest directory
        int dim = 0;
    };
    int format_version = 1;
    std::int64_t sample_count = 0;
    int class_count = 0;
    std::vector<ModalityFile> modalities;
    std::string labels_path;
    std::string splits_path;
    std::map<std::string, std::string> checksums;  // file name -> fnv1a64 hex
};

/// Writes modality_<k>.csv, labels.csv, splits.csv and manifest.json into
/// dir. Values carry 17 significant digits so float64 round-trips exactly.
DatasetManifest export_manifest(const LabeledBatch& batch, const std::filesystem::path& dir);

/// Parses and validates a dataset directory; every violation throws with
/// file and row location.
LabeledBatch load_manifest(const std::filesystem::path& manifest_path);

/// FNV-1a 64-bit over the file bytes, as a 16-digit hex string.
std::string fnv1a64_file(const std::filesystem::path& path);

/// Feature-table CSV ("f0,f1,..." header, one sample per row, 17 significant
/// digits); shared with the synthesized-outlier debug export.
void write_feature_csv(const FeatureMatrix& m, const std::filesystem::path& path);
FeatureMatrix read_feature_csv(const std::filesystem::path& path);

/// Exact decimal formatting used across all CSV output.
std::string format_double(double v);

}  // namespace moodkit::io

#endif  // MOODKIT_DATA_IO_HPP

#include "moodkit/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "moodkit/error.hpp"
#include "moodkit/rng.hpp"

namespace moodkit::io {

namespace {

constexpr std::uint64_t kFarOodStream = 0xFA400DULL;

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    out << content;
    if (!out) {
        throw IoError("write failed for '" + path.string() + "'");
    }
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
        fields.push_back(field);
    }
    if (!line.empty() && line.back() == ',') {
        fields.emplace_back();
    }
    return fields;
}

double parse_double(const std::string& s, const std::string& where) {
    double v = 0.0;
    const char* begin = s.data();
    const char* end = begin + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end) {
        throw IoError(where + ": cannot parse real number '" + s + "'");
    }
    if (!std::isfinite(v)) {
        throw ArgumentError(where + ": non-finite value '" + s + "'");
    }
    return v;
}

long parse_long(const std::string& s, const std::string& where) {
    long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw IoError(where + ": cannot parse integer '" + s + "'");
    }
    return v;
}

std::vector<std::string> read_lines(const std::string& content) {
    std::vector<std::string> lines;
    std::string line;
    std::istringstream ss(content);
    while (std::getline(ss, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void SynthConfig::validate() const {
    if (id_classes < 2) throw ArgumentError("synth.id_classes must be >= 2");
    if (near_ood_classes < 1) throw ArgumentError("synth.near_ood_classes must be >= 1");
    if (dims.empty()) throw ArgumentError("synth.dims must name at least one modality");
    for (int d : dims) {
        if (d < 1) throw ArgumentError("synth.dims entries must be >= 1");
    }
    if (samples_per_class < 1) throw ArgumentError("synth.samples_per_class must be >= 1");
    if (class_sep < 0.0) throw ArgumentError("synth.class_sep must be nonnegative");
    if (modality_corr < 0.0 || modality_corr > 1.0) throw ArgumentError("synth.modality_corr must be in [0, 1]");
    if (noise_sigma < 0.0) throw ArgumentError("synth.noise_sigma must be nonnegative");
}

LabeledBatch generate_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    SeededRng rng(cfg.seed);
    const int m_count = static_cast<int>(cfg.dims.size());
    const int latent_dim = *std::max_element(cfg.dims.begin(), cfg.dims.end());
    const int total_classes = cfg.id_classes + cfg.near_ood_classes;
    const bool far_ood = cfg.far_ood_shift != 0.0;

    // Fixed random projections from the shared latent into each modality.
    std::vector<Eigen::MatrixXd> projections;
    projections.reserve(m_count);
    const double proj_scale = 1.0 / std::sqrt(static_cast<double>(latent_dim));
    for (int k = 0; k < m_count; ++k) {
        Eigen::MatrixXd a(cfg.dims[k], latent_dim);
        for (Eigen::Index r = 0; r < a.rows(); ++r) {
            for (Eigen::Index c = 0; c < a.cols(); ++c) {
                a(r, c) = rng.normal() * proj_scale;
            }
        }
        projections.push_back(std::move(a));
    }

    auto draw_class_means = [&](SeededRng& src, int cls_count, double shift) {
        // one mean per (class, modality)
        std::vector<std::vector<Eigen::VectorXd>> means(cls_count);
        for (int c = 0; c < cls_count; ++c) {
            Eigen::VectorXd latent(latent_dim);
            for (int i = 0; i < latent_dim; ++i) latent[i] = src.normal();
            means[c].resize(m_count);
            for (int k = 0; k < m_count; ++k) {
                Eigen::VectorXd indep(cfg.dims[k]);
                for (int i = 0; i < cfg.dims[k]; ++i) indep[i] = src.normal();
                means[c][k] = cfg.class_sep * (cfg.modality_corr * (projections[k] * latent) +
                                               (1.0 - cfg.modality_corr) * indep);
                means[c][k].array() += shift;
            }
        }
        return means;
    };

    const auto id_means = draw_class_means(rng, cfg.id_classes, 0.0);
    std::vector<std::vector<Eigen::VectorXd>> ood_means;
    if (far_ood) {
        SeededRng fresh = rng.derive(kFarOodStream);
        ood_means = draw_class_means(fresh, cfg.near_ood_classes, cfg.far_ood_shift);
    } else {
        ood_means = draw_class_means(rng, cfg.near_ood_classes, 0.0);
    }

    const std::int64_t total_rows =
        static_cast<std::int64_t>(total_classes) * static_cast<std::int64_t>(cfg.samples_per_class);
    LabeledBatch batch;
    batch.class_count = cfg.id_classes;
    for (int k = 0; k < m_count; ++k) {
        batch.modalities.emplace_back(total_rows, cfg.dims[k]);
    }
    batch.labels.resize(total_rows);
    batch.splits.resize(total_rows);
    batch.sample_ids.resize(total_rows);

    const int n_train = (cfg.samples_per_class * 70) / 100;
    const int n_val = (cfg.samples_per_class * 10) / 100;

    std::int64_t row = 0;
    for (int c = 0; c < total_classes; ++c) {
        const bool is_ood = c >= cfg.id_classes;
        const auto& means = is_ood ? ood_means[c - cfg.id_classes] : id_means[c];
        for (int s = 0; s < cfg.samples_per_class; ++s, ++row) {
            for (int k = 0; k < m_count; ++k) {
                for (int i = 0; i < cfg.dims[k]; ++i) {
                    batch.modalities[k](row, i) = means[k][i] + cfg.noise_sigma * rng.normal();
                }
            }
            batch.sample_ids[row] = row;
            if (is_ood) {
                batch.labels[row] = kOodLabel;
                batch.splits[row] = Split::ood_test;
            } else {
                batch.labels[row] = c;
                batch.splits[row] = s < n_train            ? Split::id_train
                                    : s < n_train + n_val  ? Split::id_val
                                                           : Split::id_test;
            }
        }
    }
    batch.validate();
    return batch;
}

std::string fnv1a64_file(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    std::uint64_t hash = 1469598103934665603ULL;
    for (unsigned char b : bytes) {
        hash ^= static_cast<std::uint64_t>(b);
        hash *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

void write_feature_csv(const FeatureMatrix& m, const std::filesystem::path& path) {
    std::string out;
    out.reserve(static_cast<std::size_t>(m.size()) * 24);
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (c > 0) out += ',';
        out += "f" + std::to_string(c);
    }
    out += '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c > 0) out += ',';
            out += format_double(m(r, c));
        }
        out += '\n';
    }
    write_file(path, out);
}

FeatureMatrix read_feature_csv(const std::filesystem::path& path) {
    const auto lines = read_lines(read_file(path));
    if (lines.empty()) {
        throw IoError(path.string() + ": empty feature file");
    }
    const auto header = split_csv_line(lines[0]);
    const Eigen::Index dim = static_cast<Eigen::Index>(header.size());
    for (Eigen::Index c = 0; c < dim; ++c) {
        if (header[c] != "f" + std::to_string(c)) {
            throw IoError(path.string() + ": unexpected header field '" + header[c] + "' at column " +
                          std::to_string(c));
        }
    }
    FeatureMatrix m(static_cast<Eigen::Index>(lines.size()) - 1, dim);
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto fields = split_csv_line(lines[r]);
        const std::string where = path.string() + ":" + std::to_string(r + 1);
        if (static_cast<Eigen::Index>(fields.size()) != dim) {
            throw IoError(where + ": expected " + std::to_string(dim) + " fields, found " +
                          std::to_string(fields.size()));
        }
        for (Eigen::Index c = 0; c < dim; ++c) {
            m(static_cast<Eigen::Index>(r) - 1, c) = parse_double(fields[c], where);
        }
    }
    return m;
}

DatasetManifest export_manifest(const LabeledBatch& batch, const std::filesystem::path& dir) {
    batch.validate();
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
    }

    DatasetManifest manifest;
    manifest.sample_count = batch.rows();
    manifest.class_count = batch.class_count;

    for (int k = 0; k < batch.modality_count(); ++k) {
        const std::string name = "modality_" + std::to_string(k) + ".csv";
        write_feature_csv(batch.modalities[k], dir / name);
        manifest.modalities.push_back({name, static_cast<int>(batch.modalities[k].cols())});
    }

    {
        std::string out = "sample_id,label\n";
        for (Eigen::Index i = 0; i < batch.rows(); ++i) {
            out += std::to_string(batch.sample_ids[i]) + "," + std::to_string(batch.labels[i]) + "\n";
        }
        manifest.labels_path = "labels.csv";
        write_file(dir / manifest.labels_path, out);
    }
    {
        std::string out = "sample_id,split\n";
        for (Eigen::Index i = 0; i < batch.rows(); ++i) {
            out += std::to_string(batch.sample_ids[i]) + "," + to_string(batch.splits[i]) + "\n";
        }
        manifest.splits_path = "splits.csv";
        write_file(dir / manifest.splits_path, out);
    }

    for (const auto& mod : manifest.modalities) {
        manifest.checksums[mod.path] = fnv1a64_file(dir / mod.path);
    }
    manifest.checksums[manifest.labels_path] = fnv1a64_file(dir / manifest.labels_path);
    manifest.checksums[manifest.splits_path] = fnv1a64_file(dir / manifest.splits_path);

    nlohmann::json j;
    j["format_version"] = manifest.format_version;
    j["sample_count"] = manifest.sample_count;
    j["class_count"] = manifest.class_count;
    j["modalities"] = nlohmann::json::array();
    for (const auto& mod : manifest.modalities) {
        j["modalities"].push_back({{"path", mod.path}, {"dim", mod.dim}});
    }
    j["labels_path"] = manifest.labels_path;
    j["splits_path"] = manifest.splits_path;
    j["checksums"] = manifest.checksums;
    write_file(dir / "manifest.json", j.dump(2) + "\n");
    return manifest;
}

LabeledBatch load_manifest(const std::filesystem::path& manifest_path) {
    const std::filesystem::path dir = manifest_path.parent_path();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(manifest_path));
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError(manifest_path.string() + ": " + e.what());
    }

    DatasetManifest manifest;
    try {
        manifest.format_version = j.at("format_version").get<int>();
        manifest.sample_count = j.at("sample_count").get<std::int64_t>();
        manifest.class_count = j.at("class_count").get<int>();
        for (const auto& mod : j.at("modalities")) {
            manifest.modalities.push_back({mod.at("path").get<std::string>(), mod.at("dim").get<int>()});
        }
        manifest.labels_path = j.at("labels_path").get<std::string>();
        manifest.splits_path = j.at("splits_path").get<std::string>();
        manifest.checksums = j.at("checksums").get<std::map<std::string, std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError(manifest_path.string() + ": " + e.what());
    }
    if (manifest.format_version != 1) {
        throw IoError(manifest_path.string() + ": unsupported format_version " +
                      std::to_string(manifest.format_version));
    }

    for (const auto& [name, expected] : manifest.checksums) {
        const std::string actual = fnv1a64_file(dir / name);
        if (actual != expected) {
            throw IoError(dir.string() + "/" + name + ": checksum mismatch (manifest " + expected + ", file " +
                          actual + ")");
        }
    }

    LabeledBatch batch;
    batch.class_count = manifest.class_count;
    for (const auto& mod : manifest.modalities) {
        FeatureMatrix m = read_feature_csv(dir / mod.path);
        if (m.cols() != mod.dim) {
            throw IoError(dir.string() + "/" + mod.path + ": dim " + std::to_string(m.cols()) +
                          " does not match manifest dim " + std::to_string(mod.dim));
        }
        if (m.rows() != manifest.sample_count) {
            throw IoError(dir.string() + "/" + mod.path + ": " + std::to_string(m.rows()) +
                          " rows do not align with manifest sample_count " +
                          std::to_string(manifest.sample_count));
        }
        batch.modalities.push_back(std::move(m));
    }

    const auto label_lines = read_lines(read_file(dir / manifest.labels_path));
    const auto split_lines = read_lines(read_file(dir / manifest.splits_path));
    const std::string labels_file = (dir / manifest.labels_path).string();
    const std::string splits_file = (dir / manifest.splits_path).string();
    if (label_lines.empty() || label_lines[0] != "sample_id,label") {
        throw IoError(labels_file + ":1: expected header 'sample_id,label'");
    }
    if (split_lines.empty() || split_lines[0] != "sample_id,split") {
        throw IoError(splits_file + ":1: expected header 'sample_id,split'");
    }
    if (static_cast<std::int64_t>(label_lines.size()) - 1 != manifest.sample_count) {
        throw IoError(labels_file + ": " + std::to_string(label_lines.size() - 1) +
                      " rows do not align with manifest sample_count " + std::to_string(manifest.sample_count));
    }
    if (static_cast<std::int64_t>(split_lines.size()) - 1 != manifest.sample_count) {
        throw IoError(splits_file + ": " + std::to_string(split_lines.size() - 1) +
                      " rows do not align with manifest sample_count " + std::to_string(manifest.sample_count));
    }

    batch.labels.resize(manifest.sample_count);
    batch.splits.resize(manifest.sample_count);
    batch.sample_ids.resize(manifest.sample_count);
    for (std::int64_t i = 0; i < manifest.sample_count; ++i) {
        const std::string lwhere = labels_file + ":" + std::to_string(i + 2);
        const auto lf = split_csv_line(label_lines[static_cast<std::size_t>(i) + 1]);
        if (lf.size() != 2) {
            throw IoError(lwhere + ": expected 'sample_id,label'");
        }
        batch.sample_ids[i] = parse_long(lf[0], lwhere);
        batch.labels[i] = static_cast<int>(parse_long(lf[1], lwhere));

        const std::string swhere = splits_file + ":" + std::to_string(i + 2);
        const auto sf = split_csv_line(split_lines[static_cast<std::size_t>(i) + 1]);
        if (sf.size() != 2) {
            throw IoError(swhere + ": expected 'sample_id,split'");
        }
        if (parse_long(sf[0], swhere) != batch.sample_ids[i]) {
            throw IoError(swhere + ": sample_id does not align with " + lwhere);
        }
        try {
            batch.splits[i] = split_from_string(sf[1]);
        } catch (const ArgumentError&) {
            throw ArgumentError(swhere + ": unknown split tag '" + sf[1] + "'");
        }
    }
    batch.validate();
    return batch;
}

}  // namespace moodkit::io

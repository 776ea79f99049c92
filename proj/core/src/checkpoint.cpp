#include "moodkit/checkpoint.hpp"

#include <fstream>

#include "moodkit/error.hpp"

namespace moodkit::io {

namespace {

constexpr int kCheckpointVersion = 1;

nlohmann::json layer_to_json(const model::DenseLayer& layer) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(layer.weight.size()));
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
        for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
            w.push_back(layer.weight(r, c));
        }
    }
    return nlohmann::json{
        {"out_dim", layer.weight.rows()},
        {"in_dim", layer.weight.cols()},
        {"weight", w},
        {"bias", std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size())},
        {"activation", layer.activation == model::Activation::relu ? "relu" : "identity"},
    };
}

model::DenseLayer layer_from_json(const nlohmann::json& j) {
    model::DenseLayer layer;
    const auto out_dim = j.at("out_dim").get<Eigen::Index>();
    const auto in_dim = j.at("in_dim").get<Eigen::Index>();
    const auto w = j.at("weight").get<std::vector<double>>();
    const auto b = j.at("bias").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != out_dim * in_dim ||
        static_cast<Eigen::Index>(b.size()) != out_dim) {
        throw IoError("checkpoint: layer parameter size mismatch");
    }
    layer.weight.resize(out_dim, in_dim);
    std::size_t idx = 0;
    for (Eigen::Index r = 0; r < out_dim; ++r) {
        for (Eigen::Index c = 0; c < in_dim; ++c) {
            layer.weight(r, c) = w[idx++];
        }
    }
    layer.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), out_dim);
    const auto act = j.at("activation").get<std::string>();
    if (act == "relu") {
        layer.activation = model::Activation::relu;
    } else if (act == "identity") {
        layer.activation = model::Activation::identity;
    } else {
        throw IoError("checkpoint: unknown activation '" + act + "'");
    }
    return layer;
}

}  // namespace

nlohmann::json checkpoint_to_json(const model::MultimodalModel& m) {
    nlohmann::json j;
    j["format_version"] = kCheckpointVersion;
    j["dims"] = {
        {"modality_dims", m.dims.modality_dims},
        {"hidden_dim", m.dims.hidden_dim},
        {"embed_dim", m.dims.embed_dim},
        {"class_count", m.dims.class_count},
    };
    j["encoders"] = nlohmann::json::array();
    for (const auto& enc : m.encoders) {
        j["encoders"].push_back({{"hidden", layer_to_json(enc.hidden)}, {"embed", layer_to_json(enc.embed)}});
    }
    j["modality_heads"] = nlohmann::json::array();
    for (const auto& head : m.modality_heads) {
        j["modality_heads"].push_back(layer_to_json(head));
    }
    j["joint_head"] = layer_to_json(m.joint_head);
    return j;
}

model::MultimodalModel checkpoint_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format_version").get<int>() != kCheckpointVersion) {
            throw IoError("checkpoint: unsupported format_version");
        }
        model::MultimodalModel m;
        const auto& dims = j.at("dims");
        m.dims.modality_dims = dims.at("modality_dims").get<std::vector<int>>();
        m.dims.hidden_dim = dims.at("hidden_dim").get<int>();
        m.dims.embed_dim = dims.at("embed_dim").get<int>();
        m.dims.class_count = dims.at("class_count").get<int>();
        for (const auto& enc : j.at("encoders")) {
            m.encoders.push_back({layer_from_json(enc.at("hidden")), layer_from_json(enc.at("embed"))});
        }
        for (const auto& head : j.at("modality_heads")) {
            m.modality_heads.push_back(layer_from_json(head));
        }
        m.joint_head = layer_from_json(j.at("joint_head"));
        if (static_cast<int>(m.encoders.size()) != m.dims.modality_count() ||
            static_cast<int>(m.modality_heads.size()) != m.dims.modality_count()) {
            throw IoError("checkpoint: encoder/head count does not match dims");
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("checkpoint: ") + e.what());
    }
}

void save_checkpoint(const model::MultimodalModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    out << checkpoint_to_json(model).dump(2) << "\n";
    if (!out) {
        throw IoError("write failed for '" + path.string() + "'");
    }
}

model::MultimodalModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "'");
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError(path.string() + ": " + e.what());
    }
    return checkpoint_from_json(j);
}

}  // namespace moodkit::io

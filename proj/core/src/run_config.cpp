#include "moodkit/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "moodkit/error.hpp"

namespace moodkit::config {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed, const std::string& path) {
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) {
            throw ArgumentError("config: unknown key '" + path + key + "'");
        }
    }
}

const json* find(const json& j, const char* key) {
    const auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

double as_number(const json& j, const std::string& path) {
    if (!j.is_number()) {
        throw ArgumentError("config: '" + path + "' must be a number");
    }
    return j.get<double>();
}

int as_int(const json& j, const std::string& path) {
    if (!j.is_number_integer()) {
        throw ArgumentError("config: '" + path + "' must be an integer");
    }
    return j.get<int>();
}

std::uint64_t as_seed(const json& j, const std::string& path) {
    if (!j.is_number_unsigned() && !j.is_number_integer()) {
        throw ArgumentError("config: '" + path + "' must be a nonnegative integer");
    }
    if (j.is_number_integer() && j.get<std::int64_t>() < 0) {
        throw ArgumentError("config: '" + path + "' must be a nonnegative integer");
    }
    return j.get<std::uint64_t>();
}

std::string as_string(const json& j, const std::string& path) {
    if (!j.is_string()) {
        throw ArgumentError("config: '" + path + "' must be a string");
    }
    return j.get<std::string>();
}

void parse_synth(const json& j, io::SynthConfig& out) {
    reject_unknown_keys(j,
                        {"id_classes", "near_ood_classes", "dims", "samples_per_class", "class_sep",
                         "modality_corr", "far_ood_shift", "noise_sigma", "seed"},
                        "synth.");
    if (const json* v = find(j, "id_classes")) out.id_classes = as_int(*v, "synth.id_classes");
    if (const json* v = find(j, "near_ood_classes")) out.near_ood_classes = as_int(*v, "synth.near_ood_classes");
    if (const json* v = find(j, "dims")) {
        if (!v->is_array() || v->empty()) {
            throw ArgumentError("config: 'synth.dims' must be a nonempty array of integers");
        }
        out.dims.clear();
        for (std::size_t i = 0; i < v->size(); ++i) {
            out.dims.push_back(as_int((*v)[i], "synth.dims[" + std::to_string(i) + "]"));
        }
    }
    if (const json* v = find(j, "samples_per_class")) out.samples_per_class = as_int(*v, "synth.samples_per_class");
    if (const json* v = find(j, "class_sep")) out.class_sep = as_number(*v, "synth.class_sep");
    if (const json* v = find(j, "modality_corr")) out.modality_corr = as_number(*v, "synth.modality_corr");
    if (const json* v = find(j, "far_ood_shift")) out.far_ood_shift = as_number(*v, "synth.far_ood_shift");
    if (const json* v = find(j, "noise_sigma")) out.noise_sigma = as_number(*v, "synth.noise_sigma");
    if (const json* v = find(j, "seed")) out.seed = as_seed(*v, "synth.seed");
    out.validate();
}

void parse_npmix(const json& j, npmix::NpMixConfig& out) {
    reject_unknown_keys(j, {"neighbors", "alpha", "outliers_per_batch"}, "train.npmix.");
    if (const json* v = find(j, "neighbors")) out.neighbors_n = as_int(*v, "train.npmix.neighbors");
    if (const json* v = find(j, "alpha")) out.alpha = as_number(*v, "train.npmix.alpha");
    if (const json* v = find(j, "outliers_per_batch"))
        out.outliers_per_batch = as_int(*v, "train.npmix.outliers_per_batch");
}

void parse_train(const json& j, trainer::TrainConfig& out, trainer::Mode& mode) {
    reject_unknown_keys(j,
                        {"epochs", "batch_size", "lr", "seed", "gamma", "metric", "mode", "logitnorm_tau",
                         "npmix", "model"},
                        "train.");
    if (const json* v = find(j, "epochs")) out.epochs = as_int(*v, "train.epochs");
    if (const json* v = find(j, "batch_size")) out.batch_size = as_int(*v, "train.batch_size");
    if (const json* v = find(j, "lr")) out.lr = as_number(*v, "train.lr");
    if (const json* v = find(j, "seed")) out.seed = as_seed(*v, "train.seed");
    if (const json* v = find(j, "gamma")) out.a2d.gamma = as_number(*v, "train.gamma");
    if (const json* v = find(j, "metric")) out.a2d.metric = a2d::metric_from_string(as_string(*v, "train.metric"));
    if (const json* v = find(j, "mode")) mode = trainer::mode_from_string(as_string(*v, "train.mode"));
    if (const json* v = find(j, "logitnorm_tau")) {
        if (!v->is_null()) out.logitnorm_tau = as_number(*v, "train.logitnorm_tau");
    }
    if (const json* v = find(j, "npmix")) {
        npmix::NpMixConfig cfg;
        parse_npmix(*v, cfg);
        out.npmix = cfg;
    }
    if (const json* v = find(j, "model")) {
        reject_unknown_keys(*v, {"hidden_dim", "embed_dim"}, "train.model.");
        if (const json* h = find(*v, "hidden_dim")) out.hidden_dim = as_int(*h, "train.model.hidden_dim");
        if (const json* e = find(*v, "embed_dim")) out.embed_dim = as_int(*e, "train.model.embed_dim");
    }
    out.validate();
}

void parse_eval(const json& j, RunConfig& out) {
    reject_unknown_keys(j, {"scorers", "overrides"}, "eval.");
    if (const json* v = find(j, "scorers")) {
        if (!v->is_array() || v->empty()) {
            throw ArgumentError("config: 'eval.scorers' must be a nonempty array of scorer names");
        }
        out.scorers.clear();
        for (std::size_t i = 0; i < v->size(); ++i) {
            out.scorers.push_back(scores::kind_from_string(as_string((*v)[i], "eval.scorers[" + std::to_string(i) + "]")));
        }
    }
    if (const json* v = find(j, "overrides")) {
        reject_unknown_keys(*v,
                            {"energy_temperature", "gen_gamma", "gen_top_m", "knn_k", "react_percentile",
                             "ash_percentile", "vim_dim", "mahalanobis_ridge"},
                            "eval.overrides.");
        auto& sc = out.scorer_config;
        if (const json* x = find(*v, "energy_temperature"))
            sc.energy_temperature = as_number(*x, "eval.overrides.energy_temperature");
        if (const json* x = find(*v, "gen_gamma")) sc.gen_gamma = as_number(*x, "eval.overrides.gen_gamma");
        if (const json* x = find(*v, "gen_top_m")) sc.gen_top_m = as_int(*x, "eval.overrides.gen_top_m");
        if (const json* x = find(*v, "knn_k")) sc.knn_k = as_int(*x, "eval.overrides.knn_k");
        if (const json* x = find(*v, "react_percentile"))
            sc.react_percentile = as_number(*x, "eval.overrides.react_percentile");
        if (const json* x = find(*v, "ash_percentile"))
            sc.ash_percentile = as_number(*x, "eval.overrides.ash_percentile");
        if (const json* x = find(*v, "vim_dim")) sc.vim_dim = as_int(*x, "eval.overrides.vim_dim");
        if (const json* x = find(*v, "mahalanobis_ridge"))
            sc.mahalanobis_ridge = as_number(*x, "eval.overrides.mahalanobis_ridge");
        sc.validate();
    }
}

}  // namespace

RunConfig parse_run_config(const json& j) {
    if (!j.is_object()) {
        throw ArgumentError("config: top-level document must be an object");
    }
    reject_unknown_keys(j, {"version", "synth", "train", "eval", "out_dir"}, "");
    if (const json* v = find(j, "version")) {
        if (as_int(*v, "version") != 1) {
            throw ArgumentError("config: unsupported version " + v->dump());
        }
    }
    RunConfig out;
    out.scorers = scores::all_kinds();
    if (const json* v = find(j, "synth")) parse_synth(*v, out.synth);
    if (const json* v = find(j, "train")) parse_train(*v, out.train, out.mode);
    if (const json* v = find(j, "eval")) parse_eval(*v, out);
    if (const json* v = find(j, "out_dir")) out.out_dir = as_string(*v, "out_dir");
    return out;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open config '" + path.string() + "'");
    }
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ArgumentError("config: " + path.string() + ": " + e.what());
    }
    return parse_run_config(j);
}

std::vector<scores::Kind> parse_scorer_list(const std::string& csv) {
    std::vector<scores::Kind> out;
    std::istringstream ss(csv);
    std::string name;
    while (std::getline(ss, name, ',')) {
        if (!name.empty()) {
            out.push_back(scores::kind_from_string(name));
        }
    }
    if (out.empty()) {
        throw ArgumentError("scorer list is empty");
    }
    return out;
}

}  // namespace moodkit::config

#ifndef MOODKIT_RUN_CONFIG_HPP
#define MOODKIT_RUN_CONFIG_HPP

#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "moodkit/data_io.hpp"
#include "moodkit/scores.hpp"
#include "moodkit/trainer.hpp"

namespace moodkit::config {

/// One JSON document configures the whole pipeline. Validation is strict:
/// unknown keys and type mismatches are rejected with the field path.
struct RunConfig {
    io::SynthConfig synth;
    trainer::TrainConfig train;
    trainer::Mode mode = trainer::Mode::a2d;
    std::vector<scores::Kind> scorers;  // defaults to all ten
    scores::Config scorer_config;
    std::optional<std::string> out_dir;
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// Comma-separated scorer list ("msp,energy,knn").
std::vector<scores::Kind> parse_scorer_list(const std::string& csv);

}  // namespace moodkit::config

#endif  // MOODKIT_RUN_CONFIG_HPP

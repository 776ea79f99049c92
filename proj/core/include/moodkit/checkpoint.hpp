#ifndef MOODKIT_CHECKPOINT_HPP
#define MOODKIT_CHECKPOINT_HPP

#include <filesystem>
#include <nlohmann/json.hpp>

#include "moodkit/model.hpp"

namespace moodkit::io {

/// Versioned JSON checkpoint: dims plus row-major parameter arrays. Doubles
/// serialize shortest-round-trip, so load reproduces parameters exactly.
nlohmann::json checkpoint_to_json(const model::MultimodalModel& model);
model::MultimodalModel checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const model::MultimodalModel& model, const std::filesystem::path& path);
model::MultimodalModel load_checkpoint(const std::filesystem::path& path);

}  // namespace moodkit::io

#endif  // MOODKIT_CHECKPOINT_HPP

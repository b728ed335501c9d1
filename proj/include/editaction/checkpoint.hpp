// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "editaction/denoiser.hpp"

namespace editaction {

inline constexpr const char* kCheckpointFormat = "editaction-checkpoint/1";

struct Checkpoint {
    Denoiser model{nullptr};
    nlohmann::json train_config; ///< the configuration the weights were trained with (may be null)
    int step = 0;
};

/// One archive holding the format tag, a JSON header (arch, vocabulary,
/// parameter tags, training configuration, step) and all weights.
void save_checkpoint(const std::filesystem::path& path, const Denoiser& model, const nlohmann::json& train_config,
                     int step);

/// Throws std::runtime_error on a missing file, an unknown format tag or a
/// tag table that disagrees with the rebuilt model.
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json vocabulary_to_json(const Vocabulary& v);
Vocabulary vocabulary_from_json(const nlohmann::json& j);

} // namespace editaction

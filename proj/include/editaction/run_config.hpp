// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: every training, data and evaluation setting as one flat
// key/value set. Files use `key = value` lines with `#` comments; unknown keys
// are rejected. Command-line flags override file values.
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "editaction/denoiser.hpp"
#include "editaction/evaluation.hpp"
#include "editaction/trainer.hpp"

namespace editaction {

struct RunConfig {
    TrainConfig train;
    ArchConfig arch;
    Regime regime = Regime::lc;
    std::string train_manifest;
    std::string test_manifest;
    std::string out_dir;
    int inference_steps = 100;
    int eval_seeds = 3;
    int workers = 1;

    RunConfig();

    /// Sets one key from its text form. Throws std::invalid_argument on an
    /// unknown key or an unparsable value.
    void set(const std::string& key, const std::string& value);
    /// Every key with its current value, in a stable order.
    std::vector<std::pair<std::string, std::string>> entries() const;
    static const std::vector<std::string>& keys();

    void load_file(const std::filesystem::path& path);
    /// `key = value` lines that load_file reads back to the same configuration.
    std::string to_text() const;

    /// "toy" (x0-residual patch-4 model, 1000 steps at lr 1e-4) or "paper"
    /// (resolution 256, batch 64, 10000 steps, lr 1e-4).
    void apply_profile(const std::string& name);

    SamplerSettings sampler() const;
};

/// Default output directory: $EDITACTION_OUT if set, else "runs".
std::filesystem::path default_output_dir();

} // namespace editaction

// SPDX-License-Identifier: Apache-2.0
//
// Toy edit benchmark on the fixed-camera synthetic world: dataset
// preparation, base pretraining on the plain denoising loss, fine-tuning from
// that base and multi-seed evaluation.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "editaction/dataset.hpp"
#include "editaction/denoiser.hpp"
#include "editaction/evaluation.hpp"
#include "editaction/trainer.hpp"

namespace editaction {

struct ToyBenchmarkConfig {
    int train_count = 2000;
    int test_count = 200;
    int resolution = 32;
    std::vector<Verb> verbs; ///< empty: the LC defaults
    std::vector<Verb> held_out_verbs;
    int held_out_count = 0;
    int min_objects = 2;
    int max_objects = 4;
    std::vector<Background> backgrounds; ///< empty: every background
    std::uint64_t data_seed = 0;
    int workers = 1;

    ArchConfig arch;
    int base_steps = 4000;     ///< plain denoising pretraining
    double base_lr = 1e-3;
    bool base_static_on_x0 = false; ///< pretrain on the x0 MSE instead of the noise MSE
    TrainConfig finetune;       ///< steps, weights and freezing of the fine-tuning stage
    SamplerSettings sampler;
    std::vector<std::uint64_t> eval_seeds{0, 1, 2};
    int log_every = 0;
};

struct ToyData {
    std::filesystem::path manifest;
    std::vector<EditSample> train;
    std::vector<EditSample> test;
    std::vector<EditSample> held_out;
    std::filesystem::path held_out_manifest;
    PairTensors train_tensors;
    Vocabulary vocab;
};

/// Generates train_count + test_count pairs under `dir` (reusing an existing
/// manifest with the same size) and splits off a random test set.
ToyData prepare_toy_data(const ToyBenchmarkConfig& cfg, const std::filesystem::path& dir);

/// Trains a fresh model on the plain denoising loss only (both weights 0,
/// nothing frozen). Reuses `dir/model.pt` when present.
Denoiser pretrain_base(const ToyBenchmarkConfig& cfg, const ToyData& data, const std::filesystem::path& dir);

/// Fine-tunes a deep copy of `base`; the copy also serves as the frozen reference.
TrainResult finetune_from(const Denoiser& base, const TrainConfig& config, const ToyData& data,
                          const TrainOptions& opts = {});

/// Oracle accuracy and FID over the benchmark's evaluation seeds.
EvalReport evaluate_toy(const Denoiser& model, const ToyBenchmarkConfig& cfg, const std::filesystem::path& manifest,
                        std::span<const EditSample> samples, const std::string& name);

} // namespace editaction

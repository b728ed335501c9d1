// SPDX-License-Identifier: Apache-2.0
//
// Fine-tuning loop with a frozen reference copy, conditioning dropout,
// cross-attention freezing, metrics logging and checkpoints; the lambda sweep
// and the ablation harness built on it.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "editaction/dataset.hpp"
#include "editaction/denoiser.hpp"
#include "editaction/diffusion.hpp"
#include "editaction/evaluation.hpp"
#include "editaction/objectives.hpp"

namespace editaction {

struct TrainConfig {
    double lambda1 = 5e-4;
    double lambda2 = 3e-2;
    double lr = 1e-4;
    int batch_size = 16;
    int steps = 3000;
    bool freeze_cross_attention = true;
    DropRates drop_rates;
    int train_resolution = 32;
    GuidanceParams guidance_defaults;
    std::uint64_t seed = 0;
    double grad_clip = 1.0; ///< global gradient norm; 0 disables
    int diffusion_steps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    bool static_on_x0 = false; ///< see LossWeights::static_on_x0

    void validate() const;
    NoiseSchedule schedule() const { return build_schedule(diffusion_steps, beta_start, beta_end); }
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TrainOptions {
    std::filesystem::path out_dir; ///< metrics.jsonl, checkpoints/ and model.pt; empty: nothing written
    std::function<void(int step, const LossBreakdown&)> on_step;
    int log_every = 0; ///< progress lines on stderr every N steps; 0 = silent
};

struct TrainResult {
    Denoiser model{nullptr};
    std::vector<LossBreakdown> log; ///< one entry per optimizer step
    std::size_t resampled_items = 0; ///< batch items redrawn for lack of a disjoint negative
};

/// Fresh denoiser with weights drawn from `seed`.
Denoiser init_denoiser(const ArchConfig& arch, const Vocabulary& vocab, std::uint64_t seed);

/// Runs `config.steps` Adam steps of the combined loss on pairs drawn with
/// replacement from `data`. The frozen reference is a deep copy of `model`
/// taken before the first step. Returns the trained model (the same object).
/// Throws TrainingDiverged on a non-finite loss.
TrainResult train(const TrainConfig& config, const PairTensors& data, Denoiser model, const TrainOptions& opts = {});

/// Checkpoint cadence: every max(steps / 10, 100) steps plus the final step.
bool is_checkpoint_step(int step, int total_steps);

enum class SweepAxis { lambda1, lambda2 };

struct SweepRow {
    double value = 0.0;
    double fid_output = 0.0;
};

struct SweepTable {
    SweepAxis axis = SweepAxis::lambda1;
    std::vector<SweepRow> rows; ///< ascending FID_output
    double best = 0.0;
};

using ModelFactory = std::function<Denoiser()>;
using FidEval = std::function<double(const Denoiser&)>;

/// Trains one model per value with only that loss term active (the other
/// weight set to 0) and ranks the values by FID_output.
SweepTable sweep_lambdas(const TrainConfig& base, SweepAxis axis, const std::vector<double>& grid,
                         const PairTensors& data, const ModelFactory& make_model, const FidEval& eval_fn);

std::string format_sweep_table(const SweepTable& t);

struct AblationVariant {
    std::string name;
    std::function<void(TrainConfig&)> apply;
};

/// full, no_action_loss, no_reg_loss, no_freezing.
std::vector<AblationVariant> standard_variants();
AblationVariant variant_by_name(const std::string& name);

using ReportEval = std::function<EvalReport(const Denoiser&)>;

/// Trains every variant from the same initial model and data, evaluates each
/// with `eval_fn` and returns one named report per variant.
std::vector<EvalReport> run_ablation(const TrainConfig& base, const std::vector<AblationVariant>& variants,
                                     const PairTensors& data, const ModelFactory& make_model,
                                     const ReportEval& eval_fn, const TrainOptions& opts = {});

} // namespace editaction

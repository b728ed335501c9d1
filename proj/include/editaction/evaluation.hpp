// SPDX-License-Identifier: Apache-2.0
//
// Action accuracy (scene-parser oracle and learned recognizer over 4+4
// pseudo-clips), Frechet distance between feature sets, multi-seed
// evaluation reports and inference timing.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "editaction/dataset.hpp"
#include "editaction/denoiser.hpp"
#include "editaction/diffusion.hpp"
#include "editaction/world.hpp"

namespace editaction {

class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual int dimension() const = 0;
    /// [N, 3, H, W] images -> [N, dimension()] float64 features.
    virtual torch::Tensor extract(const torch::Tensor& images) = 0;
};

/// Flattened area-downsampled pixels.
class PixelFeatures : public FeatureExtractor {
public:
    explicit PixelFeatures(int grid = 8) : grid_(grid) {}
    int dimension() const override { return 3 * grid_ * grid_; }
    torch::Tensor extract(const torch::Tensor& images) override;

private:
    int grid_;
};

struct FidOptions {
    double shrinkage = 1e-6; ///< added to both covariance diagonals
};

/// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}) over rows of [N, D]
/// feature matrices. The trace of the square root is taken from the
/// eigenvalues of the symmetric product S_a^{1/2} S_b S_a^{1/2}, with negative
/// eigenvalues clamped at 0. Throws std::invalid_argument when shrinkage is 0
/// and a set has fewer than D + 1 rows.
double fid(const torch::Tensor& features_a, const torch::Tensor& features_b, const FidOptions& opts = {});

/// Viewports needed to read a pair in world coordinates.
struct ViewContext {
    Regime regime = Regime::lc;
    Camera camera_before;
    Camera camera_after;

    static ViewContext of(const EditSample& s);
};

/// True iff `after` is what `action` does to `before`. In the HC regime only
/// objects fully inside the after-view are checked and objects that were not
/// visible before may appear.
bool delta_matches(const SceneSpec& before, const SceneSpec& after, const ActionSpec& action, const ViewContext& view);

/// Parses both images and checks the labeled action's delta exactly.
/// Parse failure on either image counts as incorrect.
bool oracle_correct(const Image& input, const Image& generated, const ActionSpec& action, const ViewContext& view);

struct EvalPair {
    Image input;
    Image generated;
    EditSample sample; ///< label, action and viewports
};

/// Percentage of pairs the oracle accepts. Samples without action metadata count as incorrect.
double action_accuracy_oracle(std::span<const EvalPair> pairs);

/// [input x4, generated x4]
std::vector<Image> make_clip_4_4(const Image& input, const Image& generated);

class ActionRecognizer {
public:
    virtual ~ActionRecognizer() = default;
    virtual const std::vector<std::string>& labels() const = 0;
    /// One score per label for an 8-frame clip.
    virtual std::vector<double> scores(std::span<const Image> clip, const ViewContext& view) = 0;
};

/// Scores 1 for every action label whose delta the parser confirms, 0 otherwise.
class OracleRecognizer : public ActionRecognizer {
public:
    OracleRecognizer(std::vector<Verb> verbs, int move_distance = 2);
    const std::vector<std::string>& labels() const override { return labels_; }
    std::vector<double> scores(std::span<const Image> clip, const ViewContext& view) override;

private:
    std::vector<Verb> verbs_;
    int move_distance_;
    std::vector<std::string> labels_;
};

/// Top-1 accuracy over 4+4 clips. A pair is correct when its label attains the
/// highest positive score. Throws std::invalid_argument when a sample label is
/// outside the recognizer's label space.
double action_accuracy_learned(std::span<const EvalPair> pairs, ActionRecognizer& recognizer);

/// Every label an action over the given verbs can carry.
std::vector<std::string> action_label_space(const std::vector<Verb>& verbs);

/// Candidate actions on the objects of `scene`.
std::vector<ActionSpec> enumerate_actions(const SceneSpec& scene, const std::vector<Verb>& verbs, int move_distance);

/// Generates edited images [B, 3, H, W] for inputs and token rows under a seed.
using EditFn = std::function<torch::Tensor(const torch::Tensor& inputs, const torch::Tensor& tokens, std::uint64_t seed)>;

struct SamplerSettings {
    GuidanceParams guidance;
    int steps = 100;
    SampleOptions options;
};

/// Sampling with the denoiser under the given settings.
EditFn model_editor(Denoiser model, NoiseSchedule schedule, SamplerSettings settings);

struct EvalConfig {
    std::vector<std::uint64_t> seeds{0, 1, 2};
    int batch_size = 50;
    bool long_distance = false; ///< long-distance sets report no FID_input
    std::filesystem::path grid_path; ///< optional (input, generated, ground truth) grid
    int grid_rows = 8;
};

struct SampleRecord {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    std::string action_id;
    std::optional<bool> oracle_correct;
    std::optional<bool> learned_correct;
};

struct EvalReport {
    std::string name;
    double acc_mean = 0.0;
    double acc_var = 0.0;
    std::string acc_source; ///< "oracle" or "learned"
    std::optional<double> fid_input_mean;
    std::optional<double> fid_input_var;
    double fid_output_mean = 0.0;
    double fid_output_var = 0.0;
    std::optional<double> learned_acc_mean;
    std::optional<double> learned_acc_var;
    int n_seeds = 0;
    std::vector<double> acc_per_seed;
    std::vector<double> fid_input_per_seed;
    std::vector<double> fid_output_per_seed;
    std::vector<double> learned_acc_per_seed;
    std::vector<SampleRecord> per_sample;
};

/// Mean and population variance.
std::pair<double, double> mean_and_variance(std::span<const double> values);

/// Generates one edit per test pair and seed, then aggregates accuracy,
/// FID(generated, inputs) and FID(generated, ground-truth edits) over seeds.
/// The oracle provides accuracy when every sample carries action metadata;
/// the recognizer (optional) adds learned accuracy and takes over otherwise.
EvalReport evaluate_run(const EditFn& edit, const Vocabulary& vocab, const std::filesystem::path& manifest,
                        std::span<const EditSample> samples, ActionRecognizer* recognizer,
                        FeatureExtractor& extractor, const EvalConfig& cfg);

nlohmann::json report_to_json(const EvalReport& r);

/// Aligned text table, columns Method | Acc | FID_input | FID_output, values "mean ± var".
std::string format_report_table(std::span<const EvalReport> reports);

/// Median wall-clock seconds per call over `repeats` timed calls after one warmup call.
double measure_inference_time(const std::function<void()>& edit_once, int repeats);

} // namespace editaction

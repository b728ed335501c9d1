// SPDX-License-Identifier: Apache-2.0
//
// Edit-pair manifests, frame-pair extraction from annotated videos, dataset
// statistics, test splits and synthetic dataset generation.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "editaction/world.hpp"

namespace editaction {

enum class SampleSource { synthetic, video };

struct EditSample {
    std::string input_path;  ///< first frame / pre-action render
    std::string edited_path; ///< last frame / post-action render
    InstructionText instruction;
    std::string action_id;
    Regime regime = Regime::lc;
    bool long_distance = false;
    SampleSource source = SampleSource::synthetic;
    // Synthetic samples also carry the action and the two viewports so the
    // scene-parser oracle can check generated edits.
    std::optional<ActionSpec> action;
    std::optional<Camera> camera_before;
    std::optional<Camera> camera_after;

    friend bool operator==(const EditSample&, const EditSample&) = default;
};

void to_json(nlohmann::json& j, const EditSample& s);
void from_json(const nlohmann::json& j, EditSample& s);
void to_json(nlohmann::json& j, const InstructionText& c);
void from_json(const nlohmann::json& j, InstructionText& c);
void to_json(nlohmann::json& j, const ActionSpec& a);
void from_json(const nlohmann::json& j, ActionSpec& a);

inline constexpr const char* kManifestSchema = "editaction-manifest";
inline constexpr int kManifestVersion = 1;

class ManifestError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Line-delimited JSON: one header line with the schema tag and version, then
/// one record per sample.
void write_manifest(const std::filesystem::path& path, std::span<const EditSample> samples);

/// Image paths are stored as written. With `strict`, every referenced image
/// must exist (relative paths resolve against the manifest's directory).
std::vector<EditSample> read_manifest(const std::filesystem::path& path, bool strict = false);

/// Relative sample paths resolve against the manifest's directory.
std::filesystem::path resolve_path(const std::filesystem::path& manifest, const std::string& sample_path);

struct SegmentAnnotation {
    std::string video_id;
    double start_time = 0.0;
    double end_time = 0.0;
    std::string verb;
    std::string object;
    std::optional<std::string> start_point;
    std::optional<std::string> end_point;
};

/// Delimiter-separated annotations, columns
///   video_id, start_time, end_time, verb, object[, start_point[, end_point]]
/// Empty optional columns are absent. Lines starting with '#' and a header line
/// whose first field is "video_id" are skipped.
std::vector<SegmentAnnotation> read_annotations(const std::filesystem::path& path, char delimiter = ',');

/// "verb object [from start] [to end]"
InstructionText instruction_from_annotation(const SegmentAnnotation& a);

/// Seekable frame provider.
class FrameSource {
public:
    virtual ~FrameSource() = default;
    /// Video length in seconds; nullopt when the video cannot be opened.
    virtual std::optional<double> duration(const std::string& video_id) = 0;
    /// First decodable frame at or after `seconds`.
    virtual std::optional<Image> frame_at(const std::string& video_id, double seconds) = 0;
};

/// Video files `<dir>/<video_id><extension>` decoded through OpenCV.
class VideoFileSource : public FrameSource {
public:
    VideoFileSource(std::filesystem::path dir, std::string extension = ".mp4");
    std::optional<double> duration(const std::string& video_id) override;
    std::optional<Image> frame_at(const std::string& video_id, double seconds) override;

private:
    std::filesystem::path dir_;
    std::string extension_;
};

struct ExtractSkip {
    std::size_t annotation_index = 0;
    std::string reason;
};

struct ExtractResult {
    std::vector<EditSample> samples;
    std::vector<ExtractSkip> skipped;
};

struct ExtractOptions {
    std::filesystem::path out_dir;
    int resolution = 0; ///< 0 keeps the native frame size, otherwise square resize
    Regime regime = Regime::lc;
};

/// One pair per annotation: the frame at start_time is the input, the frame at
/// end_time the edited image. Unreadable videos and out-of-range timestamps are
/// skipped with a reason; samples + skips always account for every annotation.
/// Throws std::invalid_argument on an annotation with start_time >= end_time.
ExtractResult extract_pairs(std::span<const SegmentAnnotation> annotations, FrameSource& frames,
                            const ExtractOptions& opts);

struct DatasetStats {
    std::size_t pairs = 0;
    std::size_t with_start = 0;
    std::size_t with_end = 0;
    std::size_t verb_object_only = 0;
    std::size_t distinct_actions = 0;
    std::size_t long_distance = 0;

    double fraction(std::size_t count) const { return pairs == 0 ? 0.0 : static_cast<double>(count) / pairs; }
};

DatasetStats dataset_stats(std::span<const EditSample> samples);
nlohmann::json stats_to_json(const DatasetStats& s);

struct Split {
    std::vector<EditSample> train;
    std::vector<EditSample> test_random;
    std::vector<EditSample> test_long_distance;
};

/// Long-distance test items are drawn from the flagged samples first, the
/// random test items from the rest; train keeps the manifest order.
/// Throws std::invalid_argument when there are not enough candidates.
Split split(std::span<const EditSample> samples, std::size_t n_test, std::size_t n_long_distance,
            std::uint64_t seed);

struct GenerateConfig {
    Regime regime = Regime::lc;
    int count = 100;
    int resolution = 32;
    std::vector<Verb> verbs; ///< empty: the regime's default vocabulary
    std::vector<Verb> held_out_verbs;
    int held_out_count = 0; ///< samples written to the held-out manifest
    int min_objects = 3;
    int max_objects = 6;
    std::vector<double> scales{1.0, 2.0};
    std::vector<Background> backgrounds{kBackgrounds.begin(), kBackgrounds.end()};
    std::optional<InstructionStyle> style; ///< default: the regime's style
};

/// Default verbs: LC uses every verb except move_to, HC every verb.
std::vector<Verb> default_verbs(Regime regime);

struct GeneratedDataset {
    std::filesystem::path manifest;
    std::filesystem::path held_out_manifest; ///< empty when no verb is held out
    std::vector<EditSample> samples;
    std::vector<EditSample> held_out;
};

/// Renders `count` before/after pairs into `out_dir/images` and writes
/// `out_dir/manifest.jsonl` (plus `heldout.jsonl` for held-out verbs). Sample k
/// is a pure function of (seed, k).
GeneratedDataset generate_dataset(const GenerateConfig& cfg, std::uint64_t seed, const std::filesystem::path& out_dir,
                                  int workers = 1);

/// One synthetic pair without touching the filesystem.
struct SyntheticPair {
    SceneSpec before;
    SceneSpec after;
    ActionSpec action;
    InstructionText instruction;
    bool long_distance = false;
};
SyntheticPair synthesize_pair(const GenerateConfig& cfg, const std::vector<Verb>& verbs, Rng& rng);

/// [3, H, W] float tensor from an image and back.
torch::Tensor image_to_tensor(const Image& img);
Image tensor_to_image(const torch::Tensor& t);

/// In-memory tensors for a manifest.
struct PairTensors {
    torch::Tensor inputs; ///< [N, 3, H, W]
    torch::Tensor edited; ///< [N, 3, H, W]
    std::vector<InstructionText> instructions;
};
PairTensors load_pairs(const std::filesystem::path& manifest, std::span<const EditSample> samples);

/// Seed for item `index` of a stream rooted at `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

} // namespace editaction

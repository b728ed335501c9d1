// SPDX-License-Identifier: Apache-2.0
//
// Small frame-pair action recognizer. A 4+4 clip carries only two distinct
// frames, so the network reads the first and last frame stacked on channels.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "editaction/evaluation.hpp"

namespace editaction {

class PairNetImpl : public torch::nn::Module {
public:
    PairNetImpl(int num_labels, int feature_dim = 64);
    /// [B, 6, H, W] -> [B, feature_dim]
    torch::Tensor features(const torch::Tensor& pair);
    /// [B, 6, H, W] -> [B, num_labels] logits
    torch::Tensor forward(const torch::Tensor& pair);
    int feature_dim() const { return feature_dim_; }

private:
    int feature_dim_;
    torch::nn::Sequential trunk_{nullptr};
    torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(PairNet);

struct RecognizerTrainConfig {
    int steps = 1500;
    int batch_size = 32;
    double lr = 1e-3;
    std::uint64_t seed = 0;
};

class LearnedRecognizer : public ActionRecognizer {
public:
    LearnedRecognizer(std::vector<std::string> labels, int feature_dim = 64);

    const std::vector<std::string>& labels() const override { return labels_; }
    /// Softmax over labels for the clip's first and last frame.
    std::vector<double> scores(std::span<const Image> clip, const ViewContext& view) override;

    /// Fits on ground-truth pairs; labels outside the label space are an error.
    void train(const torch::Tensor& inputs, const torch::Tensor& edited, const std::vector<std::string>& sample_labels,
               const RecognizerTrainConfig& cfg);
    /// Top-1 accuracy (percent) on ground-truth pairs.
    double accuracy(const torch::Tensor& inputs, const torch::Tensor& edited,
                    const std::vector<std::string>& sample_labels);

    PairNet& net() { return net_; }

    void save(const std::filesystem::path& path);
    static LearnedRecognizer load(const std::filesystem::path& path);

private:
    std::vector<std::int64_t> label_ids(const std::vector<std::string>& sample_labels) const;

    std::vector<std::string> labels_;
    int feature_dim_;
    PairNet net_{nullptr};
};

/// Penultimate recognizer activations of the pair (image, image).
class RecognizerFeatures : public FeatureExtractor {
public:
    explicit RecognizerFeatures(PairNet net) : net_(std::move(net)) {}
    int dimension() const override { return net_->feature_dim(); }
    torch::Tensor extract(const torch::Tensor& images) override;

private:
    PairNet net_;
};

} // namespace editaction

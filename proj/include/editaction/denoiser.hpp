// SPDX-License-Identifier: Apache-2.0
//
// Conditional noise-prediction U-Net. The input image enters by channel
// concatenation with x_t; the instruction enters only through cross-attention.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "editaction/diffusion.hpp"
#include "editaction/text.hpp"

namespace editaction {

struct ArchConfig {
    int resolution = 32;
    int patch = 2;                      ///< space-to-depth factor of the stem
    std::vector<int> widths{32, 64, 128}; ///< one entry per U-Net level
    int heads = 4;
    int text_dim = 64;
    int groups = 8; ///< GroupNorm groups (clamped to divide each width)
    /// eps: the network predicts the noise directly. x0_residual: it predicts a
    /// correction to the conditioning image, x0_hat = image + net, and the noise
    /// estimate follows from x_t = sqrt(abar_t) x0_hat + sqrt(1 - abar_t) eps.
    enum class Output { eps, x0_residual } output = Output::eps;
    int diffusion_steps = 1000; ///< schedule used by x0_residual
    double beta_start = 1e-4;
    double beta_end = 0.02;

    void validate() const;
    friend bool operator==(const ArchConfig&, const ArchConfig&) = default;
};

std::string_view to_string(ArchConfig::Output o);
ArchConfig::Output output_from_string(std::string_view s);

void to_json(nlohmann::json& j, const ArchConfig& a);
void from_json(const nlohmann::json& j, ArchConfig& a);

enum class ParamTag { cross_attention, other };

struct TextEmbedding {
    std::vector<std::int64_t> token_ids; ///< padded to the vocabulary's max_tokens
    int length = 0;                      ///< non-padding tokens; 0 for the null instruction
    torch::Tensor embeddings;            ///< [max_tokens, text_dim]
};

class ResBlockImpl : public torch::nn::Module {
public:
    ResBlockImpl(int in_ch, int out_ch, int temb_dim, int groups);
    torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& temb);

private:
    torch::nn::GroupNorm norm1_{nullptr}, norm2_{nullptr};
    torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr}, skip_{nullptr};
    torch::nn::Linear time_proj_{nullptr};
};
TORCH_MODULE(ResBlock);

/// Image queries attend over text-token keys/values.
class CrossAttentionImpl : public torch::nn::Module {
public:
    CrossAttentionImpl(int channels, int text_dim, int heads, int groups);
    torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& text);

    /// Names (relative to this block) of the q/k/v/out projection parameters.
    static const std::set<std::string>& projection_names();

private:
    int heads_;
    torch::nn::GroupNorm norm_{nullptr};
    torch::nn::Linear to_q_{nullptr}, to_k_{nullptr}, to_v_{nullptr}, to_out_{nullptr};
};
TORCH_MODULE(CrossAttention);

class DenoiserImpl : public torch::nn::Module {
public:
    DenoiserImpl(ArchConfig arch, Vocabulary vocab);

    /// eps_theta(x_t, t, i, c). Undefined `image` means the zeros image; undefined
    /// `tokens` means the null instruction.
    torch::Tensor forward(const torch::Tensor& x_t, const torch::Tensor& t, const torch::Tensor& image,
                          const torch::Tensor& tokens);

    TextEmbedding encode_text(const InstructionText* c);

    const ArchConfig& arch() const { return arch_; }
    const Vocabulary& vocab() const { return vocab_; }
    const std::map<std::string, ParamTag>& param_tags() const { return tags_; }
    std::int64_t num_parameters() const;

    /// The denoiser as a diffusion-core noise function.
    NoiseFn noise_fn();

private:
    torch::Tensor embed_tokens(const torch::Tensor& tokens);
    torch::Tensor timestep_embedding(const torch::Tensor& t);

    ArchConfig arch_;
    Vocabulary vocab_;
    std::map<std::string, ParamTag> tags_;

    torch::nn::Embedding token_embedding_{nullptr};
    torch::Tensor positional_; // buffer
    torch::Tensor alpha_bars_; // float64, x0_residual only
    torch::nn::Linear time_fc1_{nullptr}, time_fc2_{nullptr};
    torch::nn::Conv2d stem_{nullptr};
    torch::nn::ModuleList down_res_, down_attn_, up_res_, up_attn_;
    ResBlock mid1_{nullptr}, mid2_{nullptr};
    torch::nn::GroupNorm out_norm_{nullptr};
    torch::nn::Conv2d out_conv_{nullptr};
};
TORCH_MODULE(Denoiser);

/// Sinusoidal embedding of integer timesteps, [B, dim].
torch::Tensor sinusoidal_embedding(const torch::Tensor& t, int dim);

/// Deep copy with identical weights and buffers.
Denoiser clone_denoiser(const Denoiser& model);

struct ParameterPartition {
    std::set<std::string> frozen;
    std::set<std::string> trainable;
};

/// Frozen = every cross-attention projection when `freeze_cross_attention` is set.
/// Throws std::logic_error if a parameter carries no tag.
ParameterPartition partition_parameters(const Denoiser& model, bool freeze_cross_attention);

/// Marks frozen parameters as not requiring grad and returns the trainable ones.
std::vector<torch::Tensor> apply_partition(Denoiser& model, const ParameterPartition& part);

struct DropRates {
    double image = 0.05; ///< drop only the input image
    double text = 0.05;  ///< drop only the instruction
    double both = 0.05;  ///< drop both

    void validate() const;
};

struct DropDecision {
    bool drop_image = false;
    bool drop_text = false;
};

DropDecision drop_conditioning(const DropRates& rates, Rng& rng);

} // namespace editaction

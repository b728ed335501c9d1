// SPDX-License-Identifier: Apache-2.0
//
// Noise schedule, forward noising, ancestral reverse steps and the two-axis
// (image, text) classifier-free guided noise estimate.
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <torch/torch.h>

namespace editaction {

struct NoiseSchedule {
    std::vector<double> betas;
    std::vector<double> alpha_bars; ///< alpha_bars[t] = prod_{i<=t} (1 - betas[i])

    int steps() const { return static_cast<int>(betas.size()); }
};

/// Linear betas from beta_start to beta_end over T steps.
NoiseSchedule build_schedule(int T, double beta_start = 1e-4, double beta_end = 0.02);
/// Schedule from explicit betas in [0, 1).
NoiseSchedule schedule_from_betas(std::vector<double> betas);

/// Evenly spaced descending timesteps, floor(k * T / steps) for k = steps-1 .. 0.
std::vector<int> inference_timesteps(int T, int steps);

/// Schedule over a timestep subsequence; beta_k = 1 - abar[t_k] / abar[t_{k-1}].
NoiseSchedule respace(const NoiseSchedule& schedule, const std::vector<int>& ascending_timesteps);

struct GuidanceParams {
    double image_scale = 1.0; ///< s_i
    double text_scale = 7.5;  ///< s_c

    void validate() const;
};

struct NoisyState {
    torch::Tensor x; ///< [B, C, H, W]
    int t = 0;
};

/// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps, with per-item timesteps t: [B] int64.
torch::Tensor forward_noise(const torch::Tensor& x0, const torch::Tensor& t, const torch::Tensor& eps,
                            const NoiseSchedule& schedule);
/// Same, one timestep for the whole batch.
NoisyState forward_noise(const torch::Tensor& x0, int t, const torch::Tensor& eps, const NoiseSchedule& schedule);

/// eps_theta(x_t, t, image, tokens). An undefined image or token tensor means the
/// condition is dropped.
using NoiseFn = std::function<torch::Tensor(const torch::Tensor& x_t, const torch::Tensor& t,
                                            const torch::Tensor& image, const torch::Tensor& tokens)>;

/// eps(x,t) + s_i (eps(x,t,i) - eps(x,t)) + s_c (eps(x,t,i,c) - eps(x,t,i)); three evaluations.
/// `model_t` is the timestep handed to the network (differs from state.t under respacing).
torch::Tensor guided_noise_estimate(const NoiseFn& model, const NoisyState& state, const torch::Tensor& image,
                                    const torch::Tensor& tokens, const GuidanceParams& g, int model_t);
torch::Tensor guided_noise_estimate(const NoiseFn& model, const NoisyState& state, const torch::Tensor& image,
                                    const torch::Tensor& tokens, const GuidanceParams& g);

struct StepOptions {
    bool stochastic = true;  ///< false: variance-0 mode
    bool clip_x0 = false;    ///< clip the predicted x0 to [-1, 1] before forming the mean
};

/// One ancestral DDPM step t -> t-1:
/// mean = (x_t - beta_t / sqrt(1 - abar_t) eps_hat) / sqrt(1 - beta_t), plus sqrt(beta_t) noise for t > 0.
/// At t = 0 the result is the noise-free predicted x0.
NoisyState denoise_step(const NoisyState& state, const torch::Tensor& eps_hat, const NoiseSchedule& schedule,
                        at::Generator& gen, const StepOptions& opts = {});

struct SampleOptions {
    bool stochastic = true;
    bool clip_x0 = true;
};

/// Starts from x_T ~ N(0, I) drawn from `seed` and runs `steps` guided reverse
/// steps over the stride-subsampled schedule; returns images clipped to [-1, 1].
torch::Tensor sample_edit(const NoiseFn& model, const NoiseSchedule& schedule, const torch::Tensor& image,
                          const torch::Tensor& tokens, const GuidanceParams& g, int steps, std::uint64_t seed,
                          const SampleOptions& opts = {});

at::Generator make_generator(std::uint64_t seed);

} // namespace editaction

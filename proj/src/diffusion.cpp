// SPDX-License-Identifier: Apache-2.0
#include "editaction/diffusion.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cmath>
#include <stdexcept>
#include <string>

namespace editaction {

NoiseSchedule schedule_from_betas(std::vector<double> betas)
{
    if (betas.empty()) {
        throw std::invalid_argument("noise schedule needs at least one step");
    }
    NoiseSchedule s;
    s.alpha_bars.reserve(betas.size());
    double prod = 1.0;
    for (double b : betas) {
        if (!(b >= 0.0 && b < 1.0)) {
            throw std::invalid_argument("beta out of range [0, 1): " + std::to_string(b));
        }
        prod *= 1.0 - b;
        s.alpha_bars.push_back(prod);
    }
    s.betas = std::move(betas);
    return s;
}

NoiseSchedule build_schedule(int T, double beta_start, double beta_end)
{
    if (T < 1) {
        throw std::invalid_argument("build_schedule: T must be positive");
    }
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
        throw std::invalid_argument("build_schedule: need 0 < beta_start <= beta_end < 1");
    }
    std::vector<double> betas(static_cast<std::size_t>(T));
    for (int i = 0; i < T; ++i) {
        const double frac = T == 1 ? 0.0 : static_cast<double>(i) / (T - 1);
        betas[i] = beta_start + frac * (beta_end - beta_start);
    }
    return schedule_from_betas(std::move(betas));
}

std::vector<int> inference_timesteps(int T, int steps)
{
    if (steps < 1 || steps > T) {
        throw std::invalid_argument("inference steps must lie in [1, T]");
    }
    std::vector<int> ts;
    ts.reserve(steps);
    for (int k = steps - 1; k >= 0; --k) {
        ts.push_back(static_cast<int>((static_cast<std::int64_t>(k) * T) / steps));
    }
    return ts;
}

NoiseSchedule respace(const NoiseSchedule& schedule, const std::vector<int>& ascending_timesteps)
{
    std::vector<double> betas;
    betas.reserve(ascending_timesteps.size());
    double prev = 1.0;
    for (int t : ascending_timesteps) {
        if (t < 0 || t >= schedule.steps()) {
            throw std::invalid_argument("respace: timestep out of range");
        }
        const double ab = schedule.alpha_bars[t];
        betas.push_back(1.0 - ab / prev);
        prev = ab;
    }
    NoiseSchedule s = schedule_from_betas(std::move(betas));
    // Keep the exact source products rather than the re-multiplied ones.
    for (std::size_t k = 0; k < ascending_timesteps.size(); ++k) {
        s.alpha_bars[k] = schedule.alpha_bars[ascending_timesteps[k]];
    }
    return s;
}

void GuidanceParams::validate() const
{
    if (!std::isfinite(image_scale) || !std::isfinite(text_scale) || image_scale < 0.0 || text_scale < 0.0) {
        throw std::invalid_argument("guidance scales must be finite and non-negative");
    }
}

torch::Tensor forward_noise(const torch::Tensor& x0, const torch::Tensor& t, const torch::Tensor& eps,
                            const NoiseSchedule& schedule)
{
    TORCH_CHECK(x0.sizes() == eps.sizes(), "forward_noise: eps shape ", eps.sizes(), " != x0 shape ", x0.sizes());
    TORCH_CHECK(t.dim() == 1 && t.size(0) == x0.size(0), "forward_noise: need one timestep per batch item");
    auto ab = torch::tensor(schedule.alpha_bars, torch::kFloat64);
    const auto tl = t.to(torch::kLong);
    TORCH_CHECK(tl.min().item<std::int64_t>() >= 0 && tl.max().item<std::int64_t>() < schedule.steps(),
                "forward_noise: timestep out of range");
    std::vector<std::int64_t> shape(static_cast<std::size_t>(x0.dim()), 1);
    shape[0] = x0.size(0);
    const auto a = ab.index_select(0, tl).to(x0.scalar_type()).view(shape);
    return a.sqrt() * x0 + (1.0 - a).sqrt() * eps;
}

NoisyState forward_noise(const torch::Tensor& x0, int t, const torch::Tensor& eps, const NoiseSchedule& schedule)
{
    TORCH_CHECK(x0.sizes() == eps.sizes(), "forward_noise: eps shape ", eps.sizes(), " != x0 shape ", x0.sizes());
    if (t < 0 || t >= schedule.steps()) {
        throw std::out_of_range("forward_noise: timestep out of range");
    }
    const double ab = schedule.alpha_bars[t];
    return {std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps, t};
}

torch::Tensor guided_noise_estimate(const NoiseFn& model, const NoisyState& state, const torch::Tensor& image,
                                    const torch::Tensor& tokens, const GuidanceParams& g, int model_t)
{
    g.validate();
    const auto t = torch::full({state.x.size(0)}, model_t, torch::kLong);
    const auto e_none = model(state.x, t, torch::Tensor(), torch::Tensor());
    const auto e_img = model(state.x, t, image, torch::Tensor());
    const auto e_full = model(state.x, t, image, tokens);
    return e_none + g.image_scale * (e_img - e_none) + g.text_scale * (e_full - e_img);
}

torch::Tensor guided_noise_estimate(const NoiseFn& model, const NoisyState& state, const torch::Tensor& image,
                                    const torch::Tensor& tokens, const GuidanceParams& g)
{
    return guided_noise_estimate(model, state, image, tokens, g, state.t);
}

NoisyState denoise_step(const NoisyState& state, const torch::Tensor& eps_hat, const NoiseSchedule& schedule,
                        at::Generator& gen, const StepOptions& opts)
{
    const int t = state.t;
    if (t < 0 || t >= schedule.steps()) {
        throw std::out_of_range("denoise_step: timestep out of range");
    }
    TORCH_CHECK(eps_hat.sizes() == state.x.sizes(), "denoise_step: eps_hat shape mismatch");
    const double beta = schedule.betas[t];
    const double ab = schedule.alpha_bars[t];
    const double ab_prev = t > 0 ? schedule.alpha_bars[t - 1] : 1.0;

    torch::Tensor mean;
    if (opts.clip_x0) {
        const auto x0 = ((state.x - std::sqrt(1.0 - ab) * eps_hat) / std::sqrt(ab)).clamp(-1.0, 1.0);
        if (t == 0) {
            mean = x0;
        } else {
            mean = (std::sqrt(ab_prev) * beta / (1.0 - ab)) * x0 +
                   (std::sqrt(1.0 - beta) * (1.0 - ab_prev) / (1.0 - ab)) * state.x;
        }
    } else {
        const double coef = beta > 0.0 ? beta / std::sqrt(1.0 - ab) : 0.0;
        mean = (state.x - coef * eps_hat) / std::sqrt(1.0 - beta);
    }
    if (t > 0 && opts.stochastic && beta > 0.0) {
        mean = mean + std::sqrt(beta) * torch::randn(state.x.sizes(), gen, state.x.options());
    }
    return {mean, t - 1};
}

at::Generator make_generator(std::uint64_t seed)
{
    return at::make_generator<at::CPUGeneratorImpl>(seed);
}

torch::Tensor sample_edit(const NoiseFn& model, const NoiseSchedule& schedule, const torch::Tensor& image,
                          const torch::Tensor& tokens, const GuidanceParams& g, int steps, std::uint64_t seed,
                          const SampleOptions& opts)
{
    torch::NoGradGuard no_grad;
    const auto descending = inference_timesteps(schedule.steps(), steps);
    const std::vector<int> ascending(descending.rbegin(), descending.rend());
    const NoiseSchedule sub = respace(schedule, ascending);

    auto gen = make_generator(seed);
    NoisyState state{torch::randn(image.sizes(), gen, image.options()), steps - 1};
    const StepOptions step_opts{opts.stochastic, opts.clip_x0};
    for (int k = steps - 1; k >= 0; --k) {
        state.t = k;
        const auto eps = guided_noise_estimate(model, state, image, tokens, g, ascending[k]);
        state = denoise_step(state, eps, sub, gen, step_opts);
    }
    return state.x.clamp(-1.0, 1.0);
}

} // namespace editaction

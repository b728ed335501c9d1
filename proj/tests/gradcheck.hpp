// SPDX-License-Identifier: Apache-2.0
//
// Central finite differences against autograd on random weight coordinates.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include <torch/torch.h>

struct GradCheckResult {
    double max_rel_error = 0.0;
    int coordinates = 0;
};

/// `loss` must be a deterministic function of the parameters. Relative error is
/// |autograd - fd| / max(|autograd|, |fd|, floor).
inline GradCheckResult grad_check(const std::vector<torch::Tensor>& params, const std::function<torch::Tensor()>& loss,
                                  int coordinates, std::uint64_t seed, double h = 1e-6, double floor = 1e-6)
{
    for (const auto& p : params) {
        if (p.grad().defined()) {
            p.mutable_grad().zero_();
        }
    }
    loss().backward();
    std::vector<std::pair<std::size_t, std::int64_t>> all;
    for (std::size_t k = 0; k < params.size(); ++k) {
        for (std::int64_t j = 0; j < params[k].numel(); ++j) {
            all.emplace_back(k, j);
        }
    }
    std::mt19937_64 rng(seed);
    std::shuffle(all.begin(), all.end(), rng);
    GradCheckResult res;
    torch::NoGradGuard no_grad;
    for (int c = 0; c < std::min<int>(coordinates, static_cast<int>(all.size())); ++c) {
        const auto [k, j] = all[static_cast<std::size_t>(c)];
        auto flat = params[k].view({-1});
        const double orig = flat[j].item<double>();
        flat[j] = orig + h;
        const double up = loss().item<double>();
        flat[j] = orig - h;
        const double down = loss().item<double>();
        flat[j] = orig;
        const double fd = (up - down) / (2 * h);
        const double an = params[k].grad().view({-1})[j].item<double>();
        const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), floor});
        res.max_rel_error = std::max(res.max_rel_error, rel);
        ++res.coordinates;
    }
    return res;
}

// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "editaction/objectives.hpp"
#include "gradcheck.hpp"
#include "tiny_model.hpp"

using namespace editaction;

namespace {

struct Fixture {
    TinyNet net;
    TinyNet frozen;
    NoiseSchedule schedule = build_schedule(1000);
    torch::Tensor x0, image, tokens, neg, t, eps;

    explicit Fixture(std::uint64_t seed)
    {
        torch::manual_seed(seed);
        net = TinyNet();
        frozen = TinyNet();
        x0 = torch::rand({3, 3, 4, 4}, torch::kDouble) * 2 - 1;
        image = torch::rand({3, 3, 4, 4}, torch::kDouble) * 2 - 1;
        tokens = torch::randint(3, 12, {3, 5}, torch::kLong);
        neg = torch::randint(3, 12, {3, 5}, torch::kLong);
        t = torch::tensor({40, 400, 900}, torch::kLong);
        eps = torch::randn({3, 3, 4, 4}, torch::kDouble);
    }
};

} // namespace

TEST(GradCheck, ModelIsSmall)
{
    TinyNet net;
    std::int64_t n = 0;
    for (const auto& p : net->parameters()) {
        n += p.numel();
    }
    EXPECT_LE(n, 1000);
}

TEST(GradCheck, StaticLoss)
{
    Fixture f(1);
    const auto fn = as_noise_fn(f.net);
    const auto r = grad_check(f.net->parameters(), [&] {
        return static_loss(fn, f.x0, f.image, f.tokens, f.t, f.eps, f.schedule);
    }, 50, 1);
    EXPECT_EQ(r.coordinates, 50);
    EXPECT_LE(r.max_rel_error, 1e-4);
}

TEST(GradCheck, ActionLoss)
{
    Fixture f(2);
    const auto fn = as_noise_fn(f.net);
    const auto r = grad_check(f.net->parameters(), [&] {
        return action_loss(fn, f.x0, f.image, f.tokens, f.neg, f.t, f.eps, f.schedule);
    }, 50, 2);
    EXPECT_LE(r.max_rel_error, 1e-4);
}

TEST(GradCheck, RegLoss)
{
    Fixture f(3);
    const auto fn = as_noise_fn(f.net);
    const auto frozen = as_noise_fn(f.frozen);
    const auto x_t = forward_noise(f.x0, f.t, f.eps, f.schedule);
    const auto r = grad_check(f.net->parameters(), [&] {
        return reg_loss(fn, frozen, x_t, f.t, f.image, f.tokens);
    }, 50, 3);
    EXPECT_LE(r.max_rel_error, 1e-4);
}

TEST(GradCheck, TotalLoss)
{
    Fixture f(4);
    LossBatch b{f.x0, f.image, f.tokens, f.neg, torch::tensor({1.0, 0.0, 1.0}, torch::kDouble)};
    const auto fn = as_noise_fn(f.net);
    const auto frozen = as_noise_fn(f.frozen);
    const auto r = grad_check(f.net->parameters(), [&] {
        return total_loss(fn, frozen, b, {0.5, 0.3}, f.schedule, f.t, f.eps).total;
    }, 50, 4);
    EXPECT_LE(r.max_rel_error, 1e-4);
}

TEST(GradCheck, StaticOnX0)
{
    Fixture f(5);
    LossBatch b{f.x0, f.image, f.tokens, f.neg, {}};
    const auto fn = as_noise_fn(f.net);
    LossWeights w{0.0, 0.0, true};
    // Late timesteps scale the loss by (1 - abar) / abar ~ 1e4 and swamp the finite differences.
    const auto t = torch::tensor({10, 150, 300}, torch::kLong);
    const auto r = grad_check(f.net->parameters(), [&] {
        return total_loss(fn, {}, b, w, f.schedule, t, f.eps).total;
    }, 50, 5);
    EXPECT_LE(r.max_rel_error, 1e-4);
}

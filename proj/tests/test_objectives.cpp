// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "editaction/objectives.hpp"
#include "oracles.hpp"
#include "tiny_model.hpp"

using namespace editaction;

TEST(Posterior, TwoInstructionsByHand)
{
    const auto p = classifier_posterior({{"c", 1.0}, {"c'", 2.0}});
    EXPECT_NEAR(p.at("c"), 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
    EXPECT_NEAR(p.at("c"), 0.73106, 1e-5);
}

TEST(Posterior, MatchesBruteForceSoftmax)
{
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> kdist(2, 8);
    std::uniform_real_distribution<double> mdist(0.0, 5.0);
    for (int rep = 0; rep < 1000; ++rep) {
        const int k = kdist(rng);
        std::vector<double> mse;
        std::map<std::string, double> named;
        for (int j = 0; j < k; ++j) {
            mse.push_back(mdist(rng));
            named["c" + std::to_string(j)] = mse.back();
        }
        const auto ref = oracle::softmax_neg(mse);
        const auto p = classifier_posterior(named);
        const auto pt = classifier_posterior(torch::tensor(mse, torch::kDouble).view({1, k}));
        double sum = 0.0;
        for (int j = 0; j < k; ++j) {
            EXPECT_NEAR(p.at("c" + std::to_string(j)), ref[static_cast<std::size_t>(j)], 1e-6);
            EXPECT_NEAR(pt[0][j].item<double>(), ref[static_cast<std::size_t>(j)], 1e-6);
            sum += p.at("c" + std::to_string(j));
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(Posterior, ShiftInvariantAndStableForLargeMse)
{
    const auto a = classifier_posterior({{"a", 1000.0}, {"b", 1001.0}});
    EXPECT_NEAR(a.at("a"), 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
    EXPECT_THROW(classifier_posterior(std::map<std::string, double>{}), std::invalid_argument);
    EXPECT_THROW(classifier_posterior({{"a", std::nan("")}}), std::invalid_argument);
}

TEST(ActionLoss, ByHand)
{
    const auto l = action_loss_from_mse(torch::tensor({1.0}, torch::kDouble), torch::tensor({2.0}, torch::kDouble));
    EXPECT_NEAR(l.item<double>(), -std::log(1.0 / (1.0 + std::exp(-1.0))), 1e-12);
    EXPECT_NEAR(l.item<double>(), 0.3133, 1e-4);
}

TEST(ActionLoss, DecreasesAsPositiveWins)
{
    const auto far = action_loss_from_mse(torch::tensor({0.1}, torch::kDouble), torch::tensor({5.0}, torch::kDouble));
    const auto near = action_loss_from_mse(torch::tensor({1.0}, torch::kDouble), torch::tensor({1.0}, torch::kDouble));
    EXPECT_LT(far.item<double>(), near.item<double>());
    EXPECT_NEAR(near.item<double>(), std::log(2.0), 1e-12);
}

TEST(RegLoss, ConstantOffsetGivesSquare)
{
    const NoiseFn frozen = [](const torch::Tensor& x, const torch::Tensor&, const torch::Tensor&,
                              const torch::Tensor&) { return x * 2.0; };
    const NoiseFn live = [](const torch::Tensor& x, const torch::Tensor&, const torch::Tensor&,
                            const torch::Tensor&) { return x * 2.0 + 0.25; };
    const auto x = torch::randn({2, 3, 4, 4}, torch::kDouble);
    const auto t = torch::zeros({2}, torch::kLong);
    EXPECT_NEAR(reg_loss(live, frozen, x, t, {}, {}).item<double>(), 0.0625, 1e-12);
    EXPECT_NEAR(reg_loss(frozen, frozen, x, t, {}, {}).item<double>(), 0.0, 1e-15);
}

TEST(RegLoss, NoGradientThroughFrozen)
{
    torch::manual_seed(0);
    TinyNet live;
    TinyNet frozen;
    const auto x = torch::randn({2, 3, 4, 4}, torch::kDouble);
    const auto t = torch::full({2}, 7, torch::kLong);
    reg_loss(as_noise_fn(live), as_noise_fn(frozen), x, t, {}, {}).backward();
    for (const auto& p : frozen->parameters()) {
        EXPECT_FALSE(p.grad().defined());
    }
    EXPECT_TRUE(live->conv->weight.grad().defined());
}

TEST(StaticLoss, ZeroModelExpectsOne)
{
    const NoiseFn zero = [](const torch::Tensor& x, const torch::Tensor&, const torch::Tensor&, const torch::Tensor&) {
        return torch::zeros_like(x);
    };
    const auto s = build_schedule(1000);
    auto gen = make_generator(2);
    const auto x0 = torch::zeros({64, 3, 8, 8}, torch::kDouble);
    const auto eps = torch::randn({64, 3, 8, 8}, gen, torch::kDouble);
    const auto t = torch::randint(0, 1000, {64}, gen, torch::kLong);
    const double l = static_loss(zero, x0, {}, {}, t, eps, s).item<double>();
    // 12288 squared standard normals: standard error sqrt(2/12288).
    EXPECT_NEAR(l, 1.0, 3.0 * std::sqrt(2.0 / 12288.0));
}

namespace {

LossBatch tiny_batch(int b)
{
    LossBatch batch;
    batch.x0 = torch::rand({b, 3, 4, 4}, torch::kDouble) * 2 - 1;
    batch.image = torch::rand({b, 3, 4, 4}, torch::kDouble) * 2 - 1;
    batch.tokens = torch::randint(3, 12, {b, 5}, torch::kLong);
    batch.neg_tokens = torch::randint(3, 12, {b, 5}, torch::kLong);
    batch.action_mask = torch::ones({b}, torch::kDouble);
    return batch;
}

} // namespace

TEST(TotalLoss, ZeroWeightsReduceToStatic)
{
    torch::manual_seed(4);
    TinyNet net;
    const auto fn = as_noise_fn(net);
    const auto s = build_schedule(1000);
    const auto batch = tiny_batch(4);
    const auto t = torch::randint(0, 1000, {4}, torch::kLong);
    const auto eps = torch::randn({4, 3, 4, 4}, torch::kDouble);
    const auto terms = total_loss(fn, {}, batch, {0.0, 0.0}, s, t, eps);
    const auto ref = static_loss(fn, batch.x0, batch.image, batch.tokens, t, eps, s);
    EXPECT_DOUBLE_EQ(terms.total.item<double>(), ref.item<double>());
    EXPECT_EQ(terms.breakdown.action, 0.0);
    EXPECT_EQ(terms.breakdown.reg, 0.0);
}

TEST(TotalLoss, BreakdownIdentity)
{
    torch::manual_seed(5);
    TinyNet net;
    TinyNet frozen;
    const auto s = build_schedule(1000);
    auto gen = make_generator(5);
    for (int rep = 0; rep < 20; ++rep) {
        const auto batch = tiny_batch(3);
        const auto terms = total_loss(as_noise_fn(net), as_noise_fn(frozen), batch, {5e-4, 3e-2}, s, gen);
        const auto& br = terms.breakdown;
        EXPECT_NEAR(br.total, br.static_term + br.lambda1 * br.action + br.lambda2 * br.reg, 1e-12);
        EXPECT_NEAR(br.total, terms.total.item<double>(), 1e-12);
        EXPECT_GT(br.action, 0.0);
        EXPECT_GT(br.reg, 0.0);
    }
}

TEST(TotalLoss, StaticOnX0IsSnrWeightedNoiseError)
{
    torch::manual_seed(6);
    TinyNet net;
    const auto fn = as_noise_fn(net);
    const auto s = build_schedule(1000);
    const auto batch = tiny_batch(4);
    const auto t = torch::tensor({0, 250, 600, 999}, torch::kLong);
    const auto eps = torch::randn({4, 3, 4, 4}, torch::kDouble);
    LossWeights w{0.0, 0.0, true};
    const double got = total_loss(fn, {}, batch, w, s, t, eps).breakdown.static_term;
    // x0_hat - x0 = -sqrt((1 - abar) / abar) (eps_hat - eps), elementwise.
    const auto x_t = forward_noise(batch.x0, t, eps, s);
    const auto err = (fn(x_t, t, batch.image, batch.tokens) - eps).square().mean({1, 2, 3});
    double ref = 0.0;
    for (int k = 0; k < 4; ++k) {
        const double ab = s.alpha_bars[static_cast<std::size_t>(t[k].item<std::int64_t>())];
        ref += (1.0 - ab) / ab * err[k].item<double>() / 4.0;
    }
    EXPECT_NEAR(got, ref, 1e-10 * std::max(1.0, ref));
}

TEST(TotalLoss, ActionTermIgnoresDroppedText)
{
    torch::manual_seed(6);
    TinyNet net;
    const auto fn = as_noise_fn(net);
    const auto s = build_schedule(1000);
    auto batch = tiny_batch(4);
    const auto t = torch::randint(0, 1000, {4}, torch::kLong);
    const auto eps = torch::randn({4, 3, 4, 4}, torch::kDouble);
    batch.action_mask = torch::tensor({1.0, 1.0, 0.0, 0.0}, torch::kDouble);
    const auto masked = total_loss(fn, {}, batch, {1.0, 0.0}, s, t, eps);
    LossBatch kept;
    auto first2 = [](const torch::Tensor& x) { return x.slice(0, 0, 2); };
    kept.x0 = first2(batch.x0);
    kept.image = first2(batch.image);
    kept.tokens = first2(batch.tokens);
    kept.neg_tokens = first2(batch.neg_tokens);
    kept.action_mask = torch::ones({2}, torch::kDouble);
    const auto ref = action_loss(fn, kept.x0, kept.image, kept.tokens, kept.neg_tokens, first2(t), first2(eps), s);
    EXPECT_NEAR(masked.breakdown.action, ref.item<double>(), 1e-12);
}

TEST(Negatives, DisjointOverManyDraws)
{
    std::vector<InstructionText> corpus;
    for (const auto* raw : {"move the red square left", "rotate blue bar", "flip green triangle",
                            "swap red circle with cyan bar", "move yellow square up", "rotate magenta circle",
                            "flip the blue square"}) {
        corpus.push_back(make_instruction_text(raw, "", ""));
    }
    NegativeSampler sampler(corpus);
    Rng rng(1);
    std::map<std::string, int> counts;
    const auto& pos = corpus[0];
    const auto cand = sampler.candidates(pos);
    std::set<std::string> expected;
    for (const auto& c : corpus) {
        if (oracle::disjoint(pos.raw, c.raw)) {
            expected.insert(c.raw);
        }
    }
    ASSERT_EQ(cand.size(), expected.size());
    for (int k = 0; k < 10000; ++k) {
        const auto pair = sampler.sample(pos, rng);
        ASSERT_TRUE(oracle::disjoint(pair.positive.raw, pair.negative.raw)) << pair.negative.raw;
        EXPECT_NO_THROW(check_disjoint(pair));
        ++counts[pair.negative.raw];
    }
    // Uniform over the disjoint subset: each within 3 sigma of 10000 / |subset|.
    const double p = 1.0 / static_cast<double>(expected.size());
    const double sd = std::sqrt(10000.0 * p * (1 - p));
    for (const auto& raw : expected) {
        EXPECT_NEAR(counts[raw], 10000.0 * p, 3.0 * sd) << raw;
    }
}

TEST(Negatives, NoCandidateThrows)
{
    std::vector<InstructionText> corpus{make_instruction_text("move red square", "", ""),
                                        make_instruction_text("move blue bar", "", "")};
    NegativeSampler sampler(corpus);
    Rng rng(0);
    EXPECT_THROW(sampler.sample(corpus[0], rng), NoValidNegative);
    EXPECT_THROW(check_disjoint({corpus[0], corpus[1]}), std::invalid_argument);
}

// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "editaction/checkpoint.hpp"
#include "editaction/denoiser.hpp"
#include "editaction/trainer.hpp"
#include "helpers.hpp"

using namespace editaction;

namespace {

Denoiser small_model(std::uint64_t seed = 0)
{
    const auto corpus = testutil::small_corpus();
    return init_denoiser(testutil::small_arch(), Vocabulary::build(corpus), seed);
}

} // namespace

TEST(Arch, Validation)
{
    ArchConfig a;
    EXPECT_NO_THROW(a.validate());
    a.widths = {30};
    EXPECT_THROW(a.validate(), std::invalid_argument);
    a = ArchConfig{};
    a.resolution = 20;
    EXPECT_THROW(a.validate(), std::invalid_argument);
}

TEST(Denoiser, OutputShapeAndNullConditioning)
{
    auto m = small_model();
    const auto x = torch::randn({2, 3, 8, 8});
    const auto t = torch::tensor({3, 700}, torch::kLong);
    const auto img = torch::randn({2, 3, 8, 8});
    const auto tok = m->vocab().encode_batch(testutil::small_corpus()).slice(0, 0, 2);
    EXPECT_EQ(m->forward(x, t, img, tok).sizes(), x.sizes());
    // Undefined conditions equal the explicit zeros image and the null row.
    const auto a = m->forward(x, t, {}, {});
    const auto b = m->forward(x, t, torch::zeros_like(img), m->vocab().null_batch(2));
    EXPECT_TRUE(torch::allclose(a, b));
}

TEST(Denoiser, X0ResidualWithZeroHeadPredictsTheInput)
{
    auto arch = testutil::small_arch();
    arch.output = ArchConfig::Output::x0_residual;
    auto m = init_denoiser(arch, Vocabulary::build(testutil::small_corpus()), 3);
    m->to(torch::kDouble);
    {
        torch::NoGradGuard no_grad;
        for (auto& p : m->named_parameters()) {
            if (p.key().starts_with("out_conv.")) {
                p.value().zero_();
            }
        }
    }
    const auto s = build_schedule(1000);
    const auto x = torch::randn({3, 3, 8, 8}, torch::kDouble);
    const auto img = torch::randn({3, 3, 8, 8}, torch::kDouble);
    const auto t = torch::tensor({0, 500, 999}, torch::kLong);
    const auto eps = m->forward(x, t, img, {});
    for (int k = 0; k < 3; ++k) {
        const double ab = s.alpha_bars[static_cast<std::size_t>(t[k].item<std::int64_t>())];
        const auto x0 = (x[k] - std::sqrt(1.0 - ab) * eps[k]) / std::sqrt(ab);
        EXPECT_LT((x0 - img[k]).abs().max().item<double>(), 1e-9);
    }
    const nlohmann::json j = arch;
    EXPECT_EQ(j.get<ArchConfig>(), arch);
    EXPECT_THROW(output_from_string("v"), std::invalid_argument);
}

TEST(Denoiser, EveryParameterTagged)
{
    auto m = small_model();
    const auto& tags = m->param_tags();
    std::size_t attn = 0;
    for (const auto& p : m->named_parameters()) {
        ASSERT_TRUE(tags.count(p.key()) == 1) << p.key();
        attn += tags.at(p.key()) == ParamTag::cross_attention ? 1 : 0;
    }
    // q, k, v, out weight and bias in each of the 2 down, 2 up attention blocks.
    EXPECT_EQ(attn, 4U * 8U);
}

TEST(Denoiser, TextOnlyEntersThroughCrossAttention)
{
    auto m = small_model(1);
    {
        torch::NoGradGuard g;
        for (auto& p : m->named_parameters()) {
            if (m->param_tags().at(p.key()) == ParamTag::cross_attention) {
                p.value().zero_();
            }
        }
    }
    const auto x = torch::randn({4, 3, 8, 8});
    const auto t = torch::full({4}, 100, torch::kLong);
    const auto img = torch::randn({4, 3, 8, 8});
    const auto corpus = testutil::small_corpus();
    const auto tok = m->vocab().encode_batch(corpus);
    const auto shuffled = tok.index_select(0, torch::tensor({3, 2, 1, 0}, torch::kLong));
    EXPECT_TRUE(torch::equal(m->forward(x, t, img, tok), m->forward(x, t, img, shuffled)));
}

TEST(Denoiser, CloneIsIndependentDeepCopy)
{
    auto m = small_model(2);
    auto c = clone_denoiser(m);
    const auto x = torch::randn({1, 3, 8, 8});
    const auto t = torch::tensor({5}, torch::kLong);
    EXPECT_TRUE(torch::equal(m->forward(x, t, {}, {}), c->forward(x, t, {}, {})));
    {
        torch::NoGradGuard g;
        c->parameters()[0].add_(1.0);
    }
    EXPECT_FALSE(torch::equal(m->parameters()[0], c->parameters()[0]));
}

TEST(Partition, FreezingShrinksTrainableSet)
{
    auto m = small_model();
    const auto on = partition_parameters(m, true);
    const auto off = partition_parameters(m, false);
    EXPECT_TRUE(off.frozen.empty());
    EXPECT_LT(on.trainable.size(), off.trainable.size());
    EXPECT_EQ(on.trainable.size() + on.frozen.size(), off.trainable.size());
}

TEST(Freezing, CrossAttentionBitwiseUnchangedAfterTraining)
{
    auto m = small_model(3);
    std::map<std::string, torch::Tensor> before;
    for (const auto& p : m->named_parameters()) {
        before[p.key()] = p.value().clone();
    }
    TrainConfig cfg;
    cfg.steps = 200;
    cfg.batch_size = 4;
    cfg.lr = 1e-3;
    cfg.train_resolution = 8;
    const auto data = testutil::random_pairs(16, 3);
    train(cfg, data, m);
    std::size_t changed_other = 0;
    for (const auto& p : m->named_parameters()) {
        if (m->param_tags().at(p.key()) == ParamTag::cross_attention) {
            EXPECT_TRUE(torch::equal(p.value(), before.at(p.key()))) << p.key();
        } else {
            changed_other += torch::equal(p.value(), before.at(p.key())) ? 0 : 1;
        }
    }
    EXPECT_GT(changed_other, 0U);
}

TEST(DropConditioning, FrequenciesMatchRates)
{
    const DropRates r{0.05, 0.05, 0.05};
    Rng rng(7);
    int img = 0;
    int txt = 0;
    int both = 0;
    const int n = 100000;
    for (int k = 0; k < n; ++k) {
        const auto d = drop_conditioning(r, rng);
        img += d.drop_image && !d.drop_text ? 1 : 0;
        txt += d.drop_text && !d.drop_image ? 1 : 0;
        both += d.drop_image && d.drop_text ? 1 : 0;
    }
    const double sd = std::sqrt(n * 0.05 * 0.95);
    EXPECT_NEAR(img, n * 0.05, 3 * sd);
    EXPECT_NEAR(txt, n * 0.05, 3 * sd);
    EXPECT_NEAR(both, n * 0.05, 3 * sd);
    EXPECT_THROW((DropRates{0.5, 0.4, 0.2}.validate()), std::invalid_argument);
}

TEST(Checkpoint, RoundTripPreservesOutputs)
{
    auto m = small_model(4);
    const auto dir = testutil::temp_dir("ckpt");
    TrainConfig cfg;
    save_checkpoint(dir / "m.pt", m, cfg, 12);
    auto ck = load_checkpoint(dir / "m.pt");
    EXPECT_EQ(ck.step, 12);
    EXPECT_EQ(ck.model->arch(), m->arch());
    EXPECT_EQ(ck.model->vocab(), m->vocab());
    const auto x = torch::randn({1, 3, 8, 8});
    const auto t = torch::tensor({9}, torch::kLong);
    m->eval();
    ck.model->eval();
    EXPECT_TRUE(torch::equal(m->forward(x, t, {}, {}), ck.model->forward(x, t, {}, {})));
    EXPECT_THROW(load_checkpoint(dir / "missing.pt"), std::runtime_error);
}

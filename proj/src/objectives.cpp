// SPDX-License-Identifier: Apache-2.0
#include "editaction/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace editaction {

namespace {

std::vector<std::string> token_set(const InstructionText& c)
{
    auto tokens = tokenize(c.raw);
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    return tokens;
}

bool disjoint(const std::vector<std::string>& a, const std::vector<std::string>& b)
{
    auto i = a.begin();
    auto j = b.begin();
    while (i != a.end() && j != b.end()) {
        if (*i == *j) {
            return false;
        }
        if (*i < *j) {
            ++i;
        } else {
            ++j;
        }
    }
    return true;
}

} // namespace

torch::Tensor per_item_mse(const torch::Tensor& a, const torch::Tensor& b)
{
    TORCH_CHECK(a.sizes() == b.sizes(), "per_item_mse: shape mismatch ", a.sizes(), " vs ", b.sizes());
    return (a - b).square().flatten(1).mean(1);
}

torch::Tensor static_loss(const NoiseFn& model, const torch::Tensor& x0, const torch::Tensor& image,
                          const torch::Tensor& tokens, const torch::Tensor& t, const torch::Tensor& eps,
                          const NoiseSchedule& schedule)
{
    const auto x_t = forward_noise(x0, t, eps, schedule);
    const auto pred = model(x_t, t, image, tokens);
    TORCH_CHECK(pred.sizes() == eps.sizes(), "static_loss: prediction shape mismatch");
    return (pred - eps).square().mean();
}

std::map<std::string, double> classifier_posterior(const std::map<std::string, double>& mse_per_instruction)
{
    if (mse_per_instruction.empty()) {
        throw std::invalid_argument("classifier_posterior: no instructions");
    }
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& [name, mse] : mse_per_instruction) {
        if (!std::isfinite(mse)) {
            throw std::invalid_argument("classifier_posterior: non-finite MSE for " + name);
        }
        lo = std::min(lo, mse);
    }
    double z = 0.0;
    std::map<std::string, double> out;
    for (const auto& [name, mse] : mse_per_instruction) {
        const double e = std::exp(-(mse - lo));
        out[name] = e;
        z += e;
    }
    for (auto& [name, p] : out) {
        p /= z;
    }
    return out;
}

torch::Tensor classifier_posterior(const torch::Tensor& mse)
{
    TORCH_CHECK(mse.dim() == 2 && mse.size(1) >= 1, "classifier_posterior: expected [B, K]");
    return torch::softmax(-mse, 1);
}

torch::Tensor action_loss_from_mse(const torch::Tensor& mse_pos, const torch::Tensor& mse_neg)
{
    return torch::nn::functional::softplus(mse_pos - mse_neg);
}

torch::Tensor action_loss(const NoiseFn& model, const torch::Tensor& x0, const torch::Tensor& image,
                          const torch::Tensor& tokens_pos, const torch::Tensor& tokens_neg, const torch::Tensor& t,
                          const torch::Tensor& eps, const NoiseSchedule& schedule)
{
    const auto x_t = forward_noise(x0, t, eps, schedule);
    const auto mse_pos = per_item_mse(model(x_t, t, image, tokens_pos), eps);
    const auto mse_neg = per_item_mse(model(x_t, t, image, tokens_neg), eps);
    return action_loss_from_mse(mse_pos, mse_neg).mean();
}

void check_disjoint(const NegativePair& pair)
{
    if (!disjoint(token_set(pair.positive), token_set(pair.negative))) {
        throw std::invalid_argument("negative instruction '" + pair.negative.raw + "' shares a token with '" +
                                    pair.positive.raw + "'");
    }
}

torch::Tensor reg_loss(const NoiseFn& model, const NoiseFn& frozen, const torch::Tensor& x_t, const torch::Tensor& t,
                       const torch::Tensor& image, const torch::Tensor& tokens)
{
    const auto live = model(x_t, t, image, tokens);
    torch::Tensor ref;
    {
        torch::NoGradGuard no_grad;
        ref = frozen(x_t, t, image, tokens);
    }
    TORCH_CHECK(live.sizes() == ref.sizes(), "reg_loss: live and frozen outputs differ in shape");
    return (live - ref.detach()).square().mean();
}

LossTerms total_loss(const NoiseFn& model, const NoiseFn& frozen, const LossBatch& batch, const LossWeights& w,
                     const NoiseSchedule& schedule, at::Generator& gen)
{
    const auto b = batch.x0.size(0);
    const auto t = torch::randint(0, schedule.steps(), {b}, gen, torch::kLong);
    const auto eps = torch::randn(batch.x0.sizes(), gen, batch.x0.options());
    return total_loss(model, frozen, batch, w, schedule, t, eps);
}

LossTerms total_loss(const NoiseFn& model, const NoiseFn& frozen, const LossBatch& batch, const LossWeights& w,
                     const NoiseSchedule& schedule, const torch::Tensor& t, const torch::Tensor& eps)
{
    if (w.lambda1 < 0.0 || w.lambda2 < 0.0) {
        throw std::invalid_argument("loss weights must be non-negative");
    }
    const auto x_t = forward_noise(batch.x0, t, eps, schedule);
    const auto pred = model(x_t, t, batch.image, batch.tokens);
    TORCH_CHECK(pred.sizes() == eps.sizes(), "total_loss: prediction shape mismatch");

    LossTerms out;
    if (w.static_on_x0) {
        const auto abar = torch::tensor(schedule.alpha_bars, torch::kFloat64)
                              .index_select(0, t)
                              .to(pred.scalar_type())
                              .view({-1, 1, 1, 1});
        const auto x0_hat = (x_t.to(pred.scalar_type()) - (1 - abar).sqrt() * pred) / abar.sqrt();
        out.static_term = (x0_hat - batch.x0).square().mean();
    } else {
        out.static_term = (pred - eps).square().mean();
    }
    out.total = out.static_term;
    out.breakdown.lambda1 = w.lambda1;
    out.breakdown.lambda2 = w.lambda2;

    if (w.lambda1 > 0.0) {
        const auto mse_pos = per_item_mse(pred, eps);
        const auto mse_neg = per_item_mse(model(x_t, t, batch.image, batch.neg_tokens), eps);
        const auto per_item = action_loss_from_mse(mse_pos, mse_neg);
        if (batch.action_mask.defined()) {
            const auto mask = batch.action_mask.to(per_item.scalar_type());
            out.action = (per_item * mask).sum() / mask.sum().clamp_min(1.0);
        } else {
            out.action = per_item.mean();
        }
        out.total = out.total + w.lambda1 * out.action;
    } else {
        out.action = torch::zeros({}, pred.options());
    }

    if (w.lambda2 > 0.0) {
        if (!frozen) {
            throw std::invalid_argument("total_loss: regularizer weight set without a frozen model");
        }
        torch::Tensor ref;
        {
            torch::NoGradGuard no_grad;
            ref = frozen(x_t, t, batch.image, batch.tokens);
        }
        TORCH_CHECK(ref.sizes() == pred.sizes(), "total_loss: frozen model output shape mismatch");
        out.reg = (pred - ref).square().mean();
        out.total = out.total + w.lambda2 * out.reg;
    } else {
        out.reg = torch::zeros({}, pred.options());
    }

    out.breakdown.static_term = out.static_term.item<double>();
    out.breakdown.action = out.action.item<double>();
    out.breakdown.reg = out.reg.item<double>();
    out.breakdown.total = out.breakdown.static_term + w.lambda1 * out.breakdown.action + w.lambda2 * out.breakdown.reg;
    return out;
}

NegativeSampler::NegativeSampler(std::vector<InstructionText> corpus) : corpus_(std::move(corpus))
{
    token_sets_.reserve(corpus_.size());
    for (const auto& c : corpus_) {
        token_sets_.push_back(token_set(c));
    }
}

const std::vector<std::size_t>& NegativeSampler::candidates(const InstructionText& c)
{
    const auto key = token_set(c);
    std::string joined;
    for (const auto& tok : key) {
        joined += tok;
        joined += ' ';
    }
    auto it = cache_.find(joined);
    if (it == cache_.end()) {
        std::vector<std::size_t> ids;
        for (std::size_t k = 0; k < corpus_.size(); ++k) {
            if (disjoint(key, token_sets_[k])) {
                ids.push_back(k);
            }
        }
        it = cache_.emplace(joined, std::move(ids)).first;
    }
    return it->second;
}

NegativePair NegativeSampler::sample(const InstructionText& c, Rng& rng)
{
    const auto& ids = candidates(c);
    if (ids.empty()) {
        throw NoValidNegative("no valid negative for '" + c.raw + "'");
    }
    const auto k = std::uniform_int_distribution<std::size_t>(0, ids.size() - 1)(rng);
    return {c, corpus_[ids[k]]};
}

NegativePair sample_negative_instruction(const InstructionText& c, std::span<const InstructionText> corpus, Rng& rng)
{
    NegativeSampler sampler({corpus.begin(), corpus.end()});
    return sampler.sample(c, rng);
}

} // namespace editaction

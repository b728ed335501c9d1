// SPDX-License-Identifier: Apache-2.0
//
// Training losses: the noise-prediction loss, the diffusion-classifier
// posterior over instructions, the contrastive action loss, the frozen-copy
// regularizer and their weighted sum.
#pragma once

#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "editaction/diffusion.hpp"
#include "editaction/world.hpp"

namespace editaction {

struct LossBreakdown {
    double static_term = 0.0;
    double action = 0.0;
    double reg = 0.0;
    double total = 0.0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
};

struct NegativePair {
    InstructionText positive;
    InstructionText negative;
};

class NoValidNegative : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Per-item mean squared error over all non-batch dims, [B].
torch::Tensor per_item_mse(const torch::Tensor& a, const torch::Tensor& b);

/// Mean over all elements of (eps - eps_theta(forward_noise(x0, t, eps), t, i, c))^2.
torch::Tensor static_loss(const NoiseFn& model, const torch::Tensor& x0, const torch::Tensor& image,
                          const torch::Tensor& tokens, const torch::Tensor& t, const torch::Tensor& eps,
                          const NoiseSchedule& schedule);

/// p(c_j) = exp(-mse_j) / sum_k exp(-mse_k) under a uniform prior over instructions.
std::map<std::string, double> classifier_posterior(const std::map<std::string, double>& mse_per_instruction);
/// Row-wise softmax of negated MSEs, [B, K] -> [B, K].
torch::Tensor classifier_posterior(const torch::Tensor& mse);

/// -log p(c) for the two-way posterior {c, c'}: softplus(mse_c - mse_c').
/// The logits are negated MSEs; with exp(+mse) in the numerator, minimizing
/// the loss would lower p(c) instead of raising it.
torch::Tensor action_loss_from_mse(const torch::Tensor& mse_pos, const torch::Tensor& mse_neg);

/// Action loss with one shared (t, eps) for both instructions; batch mean.
torch::Tensor action_loss(const NoiseFn& model, const torch::Tensor& x0, const torch::Tensor& image,
                          const torch::Tensor& tokens_pos, const torch::Tensor& tokens_neg, const torch::Tensor& t,
                          const torch::Tensor& eps, const NoiseSchedule& schedule);

/// Throws std::invalid_argument when the two instructions share a token.
void check_disjoint(const NegativePair& pair);

/// Mean squared difference between the live and frozen predictions on the same
/// inputs. The frozen network is evaluated without gradient.
torch::Tensor reg_loss(const NoiseFn& model, const NoiseFn& frozen, const torch::Tensor& x_t, const torch::Tensor& t,
                       const torch::Tensor& image, const torch::Tensor& tokens);

struct LossWeights {
    double lambda1 = 5e-4;
    double lambda2 = 3e-2;
    /// Static term as the MSE of the implied x0, (x_t - sqrt(1 - abar) eps_hat) / sqrt(abar),
    /// against the ground truth instead of the noise MSE. Used for base pretraining.
    bool static_on_x0 = false;
};

/// One training batch after conditioning dropout. A dropped image is a zeros
/// image; a dropped instruction is the null token row. `action_mask` selects
/// the items whose instruction was kept, the only ones the action term sees.
struct LossBatch {
    torch::Tensor x0;          ///< [B, 3, H, W] ground-truth edited images
    torch::Tensor image;       ///< [B, 3, H, W] input images
    torch::Tensor tokens;      ///< [B, L]
    torch::Tensor neg_tokens;  ///< [B, L]
    torch::Tensor action_mask; ///< [B] float, 1 = instruction kept
};

struct LossTerms {
    torch::Tensor static_term, action, reg, total;
    LossBreakdown breakdown;
};

/// Evaluates all three terms on one draw of (t, eps) per item and combines
/// them as static + lambda1 action + lambda2 reg. Terms with zero weight are
/// not evaluated and are reported as 0. `frozen` may be empty when
/// lambda2 == 0.
LossTerms total_loss(const NoiseFn& model, const NoiseFn& frozen, const LossBatch& batch, const LossWeights& w,
                     const NoiseSchedule& schedule, at::Generator& gen);

/// Same, with caller-supplied (t, eps).
LossTerms total_loss(const NoiseFn& model, const NoiseFn& frozen, const LossBatch& batch, const LossWeights& w,
                     const NoiseSchedule& schedule, const torch::Tensor& t, const torch::Tensor& eps);

/// Draws negatives uniformly among corpus entries whose token set shares no
/// token with the positive. Tokens are the lowercase whitespace split of the
/// raw text; every token counts.
class NegativeSampler {
public:
    explicit NegativeSampler(std::vector<InstructionText> corpus);

    /// Throws NoValidNegative when no corpus entry is disjoint from `c`.
    NegativePair sample(const InstructionText& c, Rng& rng);
    /// Indices of the corpus entries disjoint from `c`.
    const std::vector<std::size_t>& candidates(const InstructionText& c);
    const std::vector<InstructionText>& corpus() const { return corpus_; }

private:
    std::vector<InstructionText> corpus_;
    std::vector<std::vector<std::string>> token_sets_;
    std::map<std::string, std::vector<std::size_t>> cache_;
};

NegativePair sample_negative_instruction(const InstructionText& c, std::span<const InstructionText> corpus, Rng& rng);

} // namespace editaction

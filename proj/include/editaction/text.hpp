// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <torch/torch.h>

#include "editaction/world.hpp"

namespace editaction {

/// Closed token vocabulary built from a training corpus.
///
/// Ids 0..2 are reserved: padding, the dropped-conditioning null token and
/// the unknown token. Remaining ids follow lexicographic token order so the
/// same corpus always yields the same vocabulary.
class Vocabulary {
public:
    static constexpr std::int64_t kPad = 0;
    static constexpr std::int64_t kNull = 1;
    static constexpr std::int64_t kUnk = 2;

    Vocabulary() : Vocabulary(std::vector<std::string>{}, 16) {}
    Vocabulary(std::vector<std::string> tokens, int max_tokens);

    static Vocabulary build(std::span<const InstructionText> corpus, int max_tokens = 16);

    std::int64_t id(std::string_view token) const;
    const std::vector<std::string>& tokens() const { return tokens_; }
    std::int64_t size() const { return static_cast<std::int64_t>(tokens_.size()) + 3; }
    int max_tokens() const { return max_tokens_; }

    /// Padded id row of length max_tokens(); nullptr maps to the all-null row.
    std::vector<std::int64_t> encode(const InstructionText* c) const;
    /// [B, max_tokens] int64 tensor.
    torch::Tensor encode_batch(std::span<const InstructionText> batch) const;
    torch::Tensor null_batch(std::int64_t batch) const;

    friend bool operator==(const Vocabulary&, const Vocabulary&) = default;

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::int64_t> index_;
    int max_tokens_ = 16;
};

} // namespace editaction

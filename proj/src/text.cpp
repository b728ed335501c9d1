// SPDX-License-Identifier: Apache-2.0
#include "editaction/text.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace editaction {

Vocabulary::Vocabulary(std::vector<std::string> tokens, int max_tokens) : tokens_(std::move(tokens)), max_tokens_(max_tokens)
{
    if (max_tokens < 1) {
        throw std::invalid_argument("Vocabulary: max_tokens must be positive");
    }
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (!index_.emplace(tokens_[i], static_cast<std::int64_t>(i) + 3).second) {
            throw std::invalid_argument("Vocabulary: duplicate token " + tokens_[i]);
        }
    }
}

Vocabulary Vocabulary::build(std::span<const InstructionText> corpus, int max_tokens)
{
    std::set<std::string> unique;
    for (const auto& c : corpus) {
        unique.insert(c.tokens.begin(), c.tokens.end());
    }
    return Vocabulary({unique.begin(), unique.end()}, max_tokens);
}

std::int64_t Vocabulary::id(std::string_view token) const
{
    const auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnk : it->second;
}

std::vector<std::int64_t> Vocabulary::encode(const InstructionText* c) const
{
    if (c == nullptr) {
        return std::vector<std::int64_t>(static_cast<std::size_t>(max_tokens_), kNull);
    }
    std::vector<std::int64_t> ids(static_cast<std::size_t>(max_tokens_), kPad);
    const std::size_t n = std::min(ids.size(), c->tokens.size());
    for (std::size_t i = 0; i < n; ++i) {
        ids[i] = id(c->tokens[i]);
    }
    return ids;
}

torch::Tensor Vocabulary::encode_batch(std::span<const InstructionText> batch) const
{
    std::vector<std::int64_t> flat;
    flat.reserve(batch.size() * static_cast<std::size_t>(max_tokens_));
    for (const auto& c : batch) {
        const auto ids = encode(&c);
        flat.insert(flat.end(), ids.begin(), ids.end());
    }
    return torch::tensor(flat, torch::kLong).view({static_cast<std::int64_t>(batch.size()), max_tokens_});
}

torch::Tensor Vocabulary::null_batch(std::int64_t batch) const
{
    return torch::full({batch, max_tokens_}, kNull, torch::kLong);
}

} // namespace editaction

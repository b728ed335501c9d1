// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include "editaction/dataset.hpp"
#include "editaction/denoiser.hpp"
#include "editaction/text.hpp"

namespace testutil {

inline std::vector<editaction::InstructionText> small_corpus()
{
    using editaction::make_instruction_text;
    return {make_instruction_text("move the red square left", "move left", "red square"),
            make_instruction_text("rotate the blue bar", "rotate", "blue bar"),
            make_instruction_text("flip green triangle", "flip", "green triangle"),
            make_instruction_text("move yellow circle up", "move up", "yellow circle")};
}

inline editaction::ArchConfig small_arch()
{
    editaction::ArchConfig a;
    a.resolution = 8;
    a.patch = 1;
    a.widths = {8, 16};
    a.heads = 2;
    a.text_dim = 8;
    a.groups = 4;
    return a;
}

/// Random pairs at 8x8 with instructions cycling through small_corpus().
inline editaction::PairTensors random_pairs(int n, std::uint64_t seed)
{
    torch::manual_seed(seed);
    editaction::PairTensors d;
    d.inputs = torch::rand({n, 3, 8, 8}) * 2 - 1;
    d.edited = torch::rand({n, 3, 8, 8}) * 2 - 1;
    const auto corpus = small_corpus();
    for (int k = 0; k < n; ++k) {
        d.instructions.push_back(corpus[static_cast<std::size_t>(k) % corpus.size()]);
    }
    return d;
}

inline std::filesystem::path temp_dir(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / ("editaction_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace testutil

// SPDX-License-Identifier: Apache-2.0
#include "editaction/checkpoint.hpp"

#include <stdexcept>

namespace editaction {

namespace {

const char* tag_name(ParamTag tag)
{
    return tag == ParamTag::cross_attention ? "cross_attention" : "other";
}

} // namespace

nlohmann::json vocabulary_to_json(const Vocabulary& v)
{
    return {{"tokens", v.tokens()}, {"max_tokens", v.max_tokens()}};
}

Vocabulary vocabulary_from_json(const nlohmann::json& j)
{
    return Vocabulary(j.at("tokens").get<std::vector<std::string>>(), j.at("max_tokens").get<int>());
}

void save_checkpoint(const std::filesystem::path& path, const Denoiser& model, const nlohmann::json& train_config,
                     int step)
{
    nlohmann::json tags = nlohmann::json::object();
    for (const auto& [name, tag] : model->param_tags()) {
        tags[name] = tag_name(tag);
    }
    const nlohmann::json header = {{"format", kCheckpointFormat},
                                   {"arch", model->arch()},
                                   {"vocab", vocabulary_to_json(model->vocab())},
                                   {"param_tags", tags},
                                   {"train_config", train_config},
                                   {"step", step}};
    torch::serialize::OutputArchive archive;
    archive.write("format", c10::IValue(std::string(kCheckpointFormat)));
    archive.write("header", c10::IValue(header.dump()));
    torch::serialize::OutputArchive weights;
    model->save(weights);
    archive.write("weights", weights);
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    archive.save_to(path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    if (!std::filesystem::exists(path)) {
        throw std::runtime_error("checkpoint not found: " + path.string());
    }
    torch::serialize::InputArchive archive;
    archive.load_from(path.string());
    c10::IValue format;
    if (!archive.try_read("format", format) || !format.isString() || format.toStringRef() != kCheckpointFormat) {
        throw std::runtime_error("unsupported checkpoint format in " + path.string());
    }
    c10::IValue header_value;
    archive.read("header", header_value);
    const auto header = nlohmann::json::parse(header_value.toStringRef());

    Checkpoint ck;
    ck.model = Denoiser(header.at("arch").get<ArchConfig>(), vocabulary_from_json(header.at("vocab")));
    for (const auto& [name, tag] : ck.model->param_tags()) {
        if (!header.at("param_tags").contains(name) || header.at("param_tags").at(name) != tag_name(tag)) {
            throw std::runtime_error("checkpoint parameter tags disagree with the architecture at " + name);
        }
    }
    torch::serialize::InputArchive weights;
    archive.read("weights", weights);
    ck.model->load(weights);
    ck.train_config = header.value("train_config", nlohmann::json());
    ck.step = header.value("step", 0);
    return ck;
}

} // namespace editaction

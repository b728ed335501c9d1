// SPDX-License-Identifier: Apache-2.0
#include "editaction/recognizer.hpp"

#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "editaction/dataset.hpp"

namespace editaction {

namespace {

torch::nn::Conv2d conv(int in, int out)
{
    return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).padding(1));
}

} // namespace

PairNetImpl::PairNetImpl(int num_labels, int feature_dim) : feature_dim_(feature_dim)
{
    if (num_labels < 1 || feature_dim < 1) {
        throw std::invalid_argument("PairNet: need at least one label and a positive feature size");
    }
    trunk_ = register_module(
        "trunk", torch::nn::Sequential(conv(6, 32), torch::nn::SiLU(), torch::nn::MaxPool2d(2), conv(32, 64),
                                       torch::nn::SiLU(), torch::nn::MaxPool2d(2), conv(64, 64), torch::nn::SiLU(),
                                       torch::nn::AdaptiveAvgPool2d(4), torch::nn::Flatten(),
                                       torch::nn::Linear(64 * 16, feature_dim), torch::nn::SiLU()));
    head_ = register_module("head", torch::nn::Linear(feature_dim, num_labels));
}

torch::Tensor PairNetImpl::features(const torch::Tensor& pair)
{
    return trunk_->forward(pair);
}

torch::Tensor PairNetImpl::forward(const torch::Tensor& pair)
{
    return head_(features(pair));
}

LearnedRecognizer::LearnedRecognizer(std::vector<std::string> labels, int feature_dim)
    : labels_(std::move(labels)), feature_dim_(feature_dim), net_(static_cast<int>(labels_.size()), feature_dim)
{
}

std::vector<std::int64_t> LearnedRecognizer::label_ids(const std::vector<std::string>& sample_labels) const
{
    std::map<std::string, std::int64_t> index;
    for (std::size_t k = 0; k < labels_.size(); ++k) {
        index.emplace(labels_[k], static_cast<std::int64_t>(k));
    }
    std::vector<std::int64_t> ids;
    for (const auto& l : sample_labels) {
        const auto it = index.find(l);
        if (it == index.end()) {
            throw std::invalid_argument("label '" + l + "' is outside the recognizer's label space");
        }
        ids.push_back(it->second);
    }
    return ids;
}

std::vector<double> LearnedRecognizer::scores(std::span<const Image> clip, const ViewContext& /*view*/)
{
    if (clip.empty()) {
        throw std::invalid_argument("LearnedRecognizer: empty clip");
    }
    torch::NoGradGuard no_grad;
    net_->eval();
    const auto pair = torch::cat({image_to_tensor(clip.front()), image_to_tensor(clip.back())}, 0).unsqueeze(0);
    const auto p = torch::softmax(net_->forward(pair), 1).squeeze(0).to(torch::kFloat64).contiguous();
    return {p.data_ptr<double>(), p.data_ptr<double>() + p.numel()};
}

void LearnedRecognizer::train(const torch::Tensor& inputs, const torch::Tensor& edited,
                              const std::vector<std::string>& sample_labels, const RecognizerTrainConfig& cfg)
{
    TORCH_CHECK(inputs.size(0) == static_cast<std::int64_t>(sample_labels.size()), "one label per pair required");
    const auto targets = torch::tensor(label_ids(sample_labels), torch::kLong);
    const auto pairs = torch::cat({inputs, edited}, 1);
    torch::manual_seed(cfg.seed);
    auto gen = make_generator(cfg.seed);
    torch::optim::Adam opt(net_->parameters(), torch::optim::AdamOptions(cfg.lr));
    net_->train();
    for (int step = 0; step < cfg.steps; ++step) {
        const auto idx = torch::randint(0, pairs.size(0), {cfg.batch_size}, gen, torch::kLong);
        const auto loss = torch::nn::functional::cross_entropy(net_->forward(pairs.index_select(0, idx)),
                                                               targets.index_select(0, idx));
        opt.zero_grad();
        loss.backward();
        opt.step();
    }
    net_->eval();
}

double LearnedRecognizer::accuracy(const torch::Tensor& inputs, const torch::Tensor& edited,
                                   const std::vector<std::string>& sample_labels)
{
    torch::NoGradGuard no_grad;
    net_->eval();
    const auto targets = torch::tensor(label_ids(sample_labels), torch::kLong);
    const auto pred = net_->forward(torch::cat({inputs, edited}, 1)).argmax(1);
    return 100.0 * pred.eq(targets).to(torch::kFloat64).mean().item<double>();
}

void LearnedRecognizer::save(const std::filesystem::path& path)
{
    torch::serialize::OutputArchive archive;
    archive.write("labels", c10::IValue(nlohmann::json(labels_).dump()));
    archive.write("feature_dim", c10::IValue(static_cast<std::int64_t>(feature_dim_)));
    torch::serialize::OutputArchive weights;
    net_->save(weights);
    archive.write("weights", weights);
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    archive.save_to(path.string());
}

LearnedRecognizer LearnedRecognizer::load(const std::filesystem::path& path)
{
    if (!std::filesystem::exists(path)) {
        throw std::runtime_error("recognizer not found: " + path.string());
    }
    torch::serialize::InputArchive archive;
    archive.load_from(path.string());
    c10::IValue labels;
    c10::IValue dim;
    archive.read("labels", labels);
    archive.read("feature_dim", dim);
    LearnedRecognizer r(nlohmann::json::parse(labels.toStringRef()).get<std::vector<std::string>>(),
                        static_cast<int>(dim.toInt()));
    torch::serialize::InputArchive weights;
    archive.read("weights", weights);
    r.net_->load(weights);
    r.net_->eval();
    return r;
}

torch::Tensor RecognizerFeatures::extract(const torch::Tensor& images)
{
    torch::NoGradGuard no_grad;
    net_->eval();
    return net_->features(torch::cat({images, images}, 1).to(torch::kFloat32)).to(torch::kFloat64);
}

} // namespace editaction

// SPDX-License-Identifier: Apache-2.0
#include "editaction/denoiser.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace editaction {

namespace {

int fit_groups(int channels, int groups)
{
    int g = std::max(1, std::min(groups, channels));
    while (channels % g != 0) {
        --g;
    }
    return g;
}

torch::nn::GroupNorm group_norm(int channels, int groups)
{
    return torch::nn::GroupNorm(torch::nn::GroupNormOptions(fit_groups(channels, groups), channels));
}

torch::nn::Conv2d conv3x3(int in, int out)
{
    return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).padding(1));
}

} // namespace

void ArchConfig::validate() const
{
    if (widths.empty() || patch < 1 || heads < 1 || text_dim < 1 || groups < 1 || resolution < 1) {
        throw std::invalid_argument("ArchConfig: invalid architecture");
    }
    for (int w : widths) {
        if (w < 1 || w % heads != 0) {
            throw std::invalid_argument("ArchConfig: every width must be a positive multiple of heads");
        }
    }
    if (output == Output::x0_residual) {
        build_schedule(diffusion_steps, beta_start, beta_end); // throws on a bad schedule
    }
    const int divisor = patch << (widths.size() - 1);
    if (resolution % divisor != 0) {
        throw std::invalid_argument("ArchConfig: resolution must be divisible by patch * 2^(levels-1)");
    }
}

std::string_view to_string(ArchConfig::Output o)
{
    return o == ArchConfig::Output::eps ? "eps" : "x0_residual";
}

ArchConfig::Output output_from_string(std::string_view s)
{
    if (s == "eps") {
        return ArchConfig::Output::eps;
    }
    if (s == "x0_residual") {
        return ArchConfig::Output::x0_residual;
    }
    throw std::invalid_argument("unknown output parameterization: " + std::string(s));
}

void to_json(nlohmann::json& j, const ArchConfig& a)
{
    j = {{"resolution", a.resolution}, {"patch", a.patch},       {"widths", a.widths},
         {"heads", a.heads},           {"text_dim", a.text_dim}, {"groups", a.groups},
         {"output", to_string(a.output)}};
    if (a.output == ArchConfig::Output::x0_residual) {
        j["diffusion_steps"] = a.diffusion_steps;
        j["beta_start"] = a.beta_start;
        j["beta_end"] = a.beta_end;
    }
}

void from_json(const nlohmann::json& j, ArchConfig& a)
{
    j.at("resolution").get_to(a.resolution);
    j.at("patch").get_to(a.patch);
    j.at("widths").get_to(a.widths);
    j.at("heads").get_to(a.heads);
    j.at("text_dim").get_to(a.text_dim);
    j.at("groups").get_to(a.groups);
    a.output = output_from_string(j.value("output", std::string("eps")));
    a.diffusion_steps = j.value("diffusion_steps", 1000);
    a.beta_start = j.value("beta_start", 1e-4);
    a.beta_end = j.value("beta_end", 0.02);
}

torch::Tensor sinusoidal_embedding(const torch::Tensor& t, int dim)
{
    const int half = dim / 2;
    auto opts = torch::TensorOptions().dtype(torch::kFloat64);
    const auto freqs = torch::exp(-std::log(10000.0) * torch::arange(half, opts) / std::max(half, 1));
    const auto args = t.to(torch::kFloat64).unsqueeze(1) * freqs.unsqueeze(0);
    auto emb = torch::cat({args.sin(), args.cos()}, 1);
    if (dim % 2 == 1) {
        emb = torch::nn::functional::pad(emb, torch::nn::functional::PadFuncOptions({0, 1}));
    }
    return emb;
}

ResBlockImpl::ResBlockImpl(int in_ch, int out_ch, int temb_dim, int groups)
{
    norm1_ = register_module("norm1", group_norm(in_ch, groups));
    conv1_ = register_module("conv1", conv3x3(in_ch, out_ch));
    time_proj_ = register_module("time_proj", torch::nn::Linear(temb_dim, out_ch));
    norm2_ = register_module("norm2", group_norm(out_ch, groups));
    conv2_ = register_module("conv2", conv3x3(out_ch, out_ch));
    if (in_ch != out_ch) {
        skip_ = register_module("skip", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_ch, out_ch, 1)));
    }
}

torch::Tensor ResBlockImpl::forward(const torch::Tensor& x, const torch::Tensor& temb)
{
    auto h = conv1_(torch::silu(norm1_(x)));
    h = h + time_proj_(torch::silu(temb)).unsqueeze(-1).unsqueeze(-1);
    h = conv2_(torch::silu(norm2_(h)));
    return h + (skip_ ? skip_(x) : x);
}

CrossAttentionImpl::CrossAttentionImpl(int channels, int text_dim, int heads, int groups) : heads_(heads)
{
    norm_ = register_module("norm", group_norm(channels, groups));
    to_q_ = register_module("to_q", torch::nn::Linear(channels, channels));
    to_k_ = register_module("to_k", torch::nn::Linear(text_dim, channels));
    to_v_ = register_module("to_v", torch::nn::Linear(text_dim, channels));
    to_out_ = register_module("to_out", torch::nn::Linear(channels, channels));
}

const std::set<std::string>& CrossAttentionImpl::projection_names()
{
    static const std::set<std::string> names{"to_q.weight", "to_q.bias", "to_k.weight", "to_k.bias",
                                             "to_v.weight", "to_v.bias", "to_out.weight", "to_out.bias"};
    return names;
}

torch::Tensor CrossAttentionImpl::forward(const torch::Tensor& x, const torch::Tensor& text)
{
    const auto b = x.size(0);
    const auto c = x.size(1);
    const auto h = x.size(2);
    const auto w = x.size(3);
    const auto dh = c / heads_;
    const auto tokens = text.size(1);
    auto q = to_q_(norm_(x).flatten(2).transpose(1, 2)); // [B, HW, C]
    q = q.view({b, h * w, heads_, dh}).transpose(1, 2);
    const auto k = to_k_(text).view({b, tokens, heads_, dh}).transpose(1, 2);
    const auto v = to_v_(text).view({b, tokens, heads_, dh}).transpose(1, 2);
    const auto attn = torch::softmax(torch::matmul(q, k.transpose(-2, -1)) / std::sqrt(static_cast<double>(dh)), -1);
    const auto out = torch::matmul(attn, v).transpose(1, 2).reshape({b, h * w, c});
    return x + to_out_(out).transpose(1, 2).reshape({b, c, h, w});
}

DenoiserImpl::DenoiserImpl(ArchConfig arch, Vocabulary vocab) : arch_(std::move(arch)), vocab_(std::move(vocab))
{
    arch_.validate();
    const int w0 = arch_.widths.front();
    const int temb = 4 * w0;
    const int p2 = arch_.patch * arch_.patch;

    token_embedding_ = register_module("token_embedding", torch::nn::Embedding(vocab_.size(), arch_.text_dim));
    positional_ = register_buffer(
        "positional", sinusoidal_embedding(torch::arange(vocab_.max_tokens()), arch_.text_dim).to(torch::kFloat32));
    time_fc1_ = register_module("time_fc1", torch::nn::Linear(w0, temb));
    time_fc2_ = register_module("time_fc2", torch::nn::Linear(temb, temb));
    stem_ = register_module("stem", conv3x3(6 * p2, w0));

    int c = w0;
    for (int w : arch_.widths) {
        down_res_->push_back(ResBlock(c, w, temb, arch_.groups));
        down_attn_->push_back(CrossAttention(w, arch_.text_dim, arch_.heads, arch_.groups));
        c = w;
    }
    mid1_ = register_module("mid1", ResBlock(c, c, temb, arch_.groups));
    mid2_ = register_module("mid2", ResBlock(c, c, temb, arch_.groups));
    for (auto it = arch_.widths.rbegin(); it != arch_.widths.rend(); ++it) {
        up_res_->push_back(ResBlock(c + *it, *it, temb, arch_.groups));
        up_attn_->push_back(CrossAttention(*it, arch_.text_dim, arch_.heads, arch_.groups));
        c = *it;
    }
    register_module("down_res", down_res_);
    register_module("down_attn", down_attn_);
    register_module("up_res", up_res_);
    register_module("up_attn", up_attn_);
    out_norm_ = register_module("out_norm", group_norm(c, arch_.groups));
    out_conv_ = register_module("out_conv", conv3x3(c, 3 * p2));
    if (arch_.output == ArchConfig::Output::x0_residual) {
        const auto s = build_schedule(arch_.diffusion_steps, arch_.beta_start, arch_.beta_end);
        alpha_bars_ = torch::tensor(s.alpha_bars, torch::kFloat64);
    }

    std::set<std::string> cross;
    for (const auto& item : named_modules("", false)) {
        if (dynamic_cast<CrossAttentionImpl*>(item.value().get()) == nullptr) {
            continue;
        }
        for (const auto& p : item.value()->named_parameters()) {
            if (CrossAttentionImpl::projection_names().contains(p.key())) {
                cross.insert(item.key() + "." + p.key());
            }
        }
    }
    for (const auto& p : named_parameters()) {
        tags_[p.key()] = cross.contains(p.key()) ? ParamTag::cross_attention : ParamTag::other;
    }
}

std::int64_t DenoiserImpl::num_parameters() const
{
    std::int64_t n = 0;
    for (const auto& p : parameters()) {
        n += p.numel();
    }
    return n;
}

torch::Tensor DenoiserImpl::embed_tokens(const torch::Tensor& tokens)
{
    TORCH_CHECK(tokens.dim() == 2 && tokens.size(1) == vocab_.max_tokens(), "token batch must be [B, ",
                vocab_.max_tokens(), "]");
    return token_embedding_(tokens) + positional_.unsqueeze(0);
}

torch::Tensor DenoiserImpl::timestep_embedding(const torch::Tensor& t)
{
    const auto dtype = time_fc1_->weight.scalar_type();
    const auto base = sinusoidal_embedding(t, arch_.widths.front()).to(dtype);
    return time_fc2_(torch::silu(time_fc1_(base)));
}

TextEmbedding DenoiserImpl::encode_text(const InstructionText* c)
{
    TextEmbedding e;
    e.token_ids = vocab_.encode(c);
    e.length = 0;
    if (c != nullptr) {
        e.length = static_cast<int>(std::min<std::size_t>(c->tokens.size(), e.token_ids.size()));
    }
    const auto ids = torch::tensor(e.token_ids, torch::kLong).unsqueeze(0);
    e.embeddings = embed_tokens(ids).squeeze(0);
    return e;
}

torch::Tensor DenoiserImpl::forward(const torch::Tensor& x_t, const torch::Tensor& t, const torch::Tensor& image,
                                    const torch::Tensor& tokens)
{
    TORCH_CHECK(x_t.dim() == 4 && x_t.size(1) == 3, "x_t must be [B, 3, H, W]");
    const auto b = x_t.size(0);
    const auto dtype = stem_->weight.scalar_type();
    auto x = x_t.to(dtype);
    torch::Tensor cond;
    if (image.defined()) {
        TORCH_CHECK(image.sizes() == x_t.sizes(), "conditioning image shape ", image.sizes(), " != x_t shape ",
                    x_t.sizes());
        cond = image.to(dtype);
    } else {
        cond = torch::zeros_like(x);
    }
    const auto ids = tokens.defined() ? tokens : vocab_.null_batch(b);
    TORCH_CHECK(ids.size(0) == b, "token batch size mismatch");
    TORCH_CHECK(t.numel() == b, "need one timestep per batch item");

    const auto text = embed_tokens(ids).to(dtype);
    const auto temb = timestep_embedding(t.view({b}));

    auto h = torch::cat({x, cond}, 1);
    if (arch_.patch > 1) {
        h = torch::pixel_unshuffle(h, arch_.patch);
    }
    h = stem_(h);
    std::vector<torch::Tensor> skips;
    const auto levels = arch_.widths.size();
    for (std::size_t l = 0; l < levels; ++l) {
        h = down_res_[l]->as<ResBlock>()->forward(h, temb);
        h = down_attn_[l]->as<CrossAttention>()->forward(h, text);
        skips.push_back(h);
        if (l + 1 < levels) {
            h = torch::avg_pool2d(h, 2);
        }
    }
    h = mid2_(mid1_(h, temb), temb);
    for (std::size_t l = 0; l < levels; ++l) {
        auto skip = skips.back();
        skips.pop_back();
        if (h.size(-1) != skip.size(-1)) {
            h = torch::upsample_nearest2d(h, {skip.size(2), skip.size(3)});
        }
        h = up_res_[l]->as<ResBlock>()->forward(torch::cat({h, skip}, 1), temb);
        h = up_attn_[l]->as<CrossAttention>()->forward(h, text);
    }
    h = out_conv_(torch::silu(out_norm_(h)));
    if (arch_.patch > 1) {
        h = torch::pixel_shuffle(h, arch_.patch);
    }
    if (arch_.output == ArchConfig::Output::eps) {
        return h;
    }
    const auto abar = alpha_bars_.index_select(0, t.view({b}).to(torch::kLong)).to(dtype).view({b, 1, 1, 1});
    const auto x0_hat = cond + h;
    return (x - abar.sqrt() * x0_hat) / (1 - abar).sqrt();
}

NoiseFn DenoiserImpl::noise_fn()
{
    auto self = std::dynamic_pointer_cast<DenoiserImpl>(shared_from_this());
    return [self](const torch::Tensor& x, const torch::Tensor& t, const torch::Tensor& image,
                  const torch::Tensor& tokens) { return self->forward(x, t, image, tokens); };
}

Denoiser clone_denoiser(const Denoiser& model)
{
    Denoiser copy(model->arch(), model->vocab());
    const auto dtype = model->parameters().front().scalar_type();
    copy->to(dtype);
    torch::NoGradGuard no_grad;
    const auto src = model->named_parameters();
    for (auto& p : copy->named_parameters()) {
        p.value().copy_(src[p.key()]);
    }
    const auto src_buf = model->named_buffers();
    for (auto& b : copy->named_buffers()) {
        b.value().copy_(src_buf[b.key()]);
    }
    copy->train(model->is_training());
    return copy;
}

ParameterPartition partition_parameters(const Denoiser& model, bool freeze_cross_attention)
{
    ParameterPartition part;
    const auto& tags = model->param_tags();
    for (const auto& p : model->named_parameters()) {
        const auto it = tags.find(p.key());
        if (it == tags.end()) {
            throw std::logic_error("parameter without tag: " + p.key());
        }
        if (freeze_cross_attention && it->second == ParamTag::cross_attention) {
            part.frozen.insert(p.key());
        } else {
            part.trainable.insert(p.key());
        }
    }
    return part;
}

std::vector<torch::Tensor> apply_partition(Denoiser& model, const ParameterPartition& part)
{
    std::vector<torch::Tensor> trainable;
    for (auto& p : model->named_parameters()) {
        const bool frozen = part.frozen.contains(p.key());
        p.value().set_requires_grad(!frozen);
        if (!frozen) {
            trainable.push_back(p.value());
        }
    }
    return trainable;
}

void DropRates::validate() const
{
    if (image < 0.0 || text < 0.0 || both < 0.0 || image + text + both > 1.0 + 1e-12) {
        throw std::invalid_argument("drop rates must be non-negative and sum to at most 1");
    }
}

DropDecision drop_conditioning(const DropRates& rates, Rng& rng)
{
    rates.validate();
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    if (u < rates.image) {
        return {true, false};
    }
    if (u < rates.image + rates.text) {
        return {false, true};
    }
    if (u < rates.image + rates.text + rates.both) {
        return {true, true};
    }
    return {};
}

} // namespace editaction

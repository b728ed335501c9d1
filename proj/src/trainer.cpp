// SPDX-License-Identifier: Apache-2.0
#include "editaction/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "editaction/checkpoint.hpp"

namespace editaction {

void TrainConfig::validate() const
{
    if (steps < 1 || batch_size < 1 || !(lr > 0.0)) {
        throw std::invalid_argument("TrainConfig: need steps >= 1, batch_size >= 1 and lr > 0");
    }
    if (lambda1 < 0.0 || lambda2 < 0.0 || grad_clip < 0.0) {
        throw std::invalid_argument("TrainConfig: loss weights and grad_clip must be non-negative");
    }
    if (train_resolution < 1) {
        throw std::invalid_argument("TrainConfig: train_resolution must be positive");
    }
    drop_rates.validate();
    guidance_defaults.validate();
}

void to_json(nlohmann::json& j, const TrainConfig& c)
{
    j = {{"lambda1", c.lambda1},
         {"lambda2", c.lambda2},
         {"lr", c.lr},
         {"batch_size", c.batch_size},
         {"steps", c.steps},
         {"freeze_cross_attention", c.freeze_cross_attention},
         {"drop_rates", {c.drop_rates.image, c.drop_rates.text, c.drop_rates.both}},
         {"train_resolution", c.train_resolution},
         {"guidance_defaults", {{"si", c.guidance_defaults.image_scale}, {"sc", c.guidance_defaults.text_scale}}},
         {"seed", c.seed},
         {"grad_clip", c.grad_clip},
         {"diffusion_steps", c.diffusion_steps},
         {"beta_start", c.beta_start},
         {"beta_end", c.beta_end},
         {"static_on_x0", c.static_on_x0}};
}

void from_json(const nlohmann::json& j, TrainConfig& c)
{
    j.at("lambda1").get_to(c.lambda1);
    j.at("lambda2").get_to(c.lambda2);
    j.at("lr").get_to(c.lr);
    j.at("batch_size").get_to(c.batch_size);
    j.at("steps").get_to(c.steps);
    j.at("freeze_cross_attention").get_to(c.freeze_cross_attention);
    const auto rates = j.at("drop_rates").get<std::vector<double>>();
    if (rates.size() != 3) {
        throw std::invalid_argument("drop_rates needs three values");
    }
    c.drop_rates = {rates[0], rates[1], rates[2]};
    j.at("train_resolution").get_to(c.train_resolution);
    c.guidance_defaults.image_scale = j.at("guidance_defaults").at("si").get<double>();
    c.guidance_defaults.text_scale = j.at("guidance_defaults").at("sc").get<double>();
    j.at("seed").get_to(c.seed);
    c.grad_clip = j.value("grad_clip", 1.0);
    c.diffusion_steps = j.value("diffusion_steps", 1000);
    c.beta_start = j.value("beta_start", 1e-4);
    c.beta_end = j.value("beta_end", 0.02);
    c.static_on_x0 = j.value("static_on_x0", false);
}

Denoiser init_denoiser(const ArchConfig& arch, const Vocabulary& vocab, std::uint64_t seed)
{
    torch::manual_seed(seed);
    return Denoiser(arch, vocab);
}

bool is_checkpoint_step(int step, int total_steps)
{
    const int every = std::max(total_steps / 10, 100);
    return step == total_steps || step % every == 0;
}

TrainResult train(const TrainConfig& config, const PairTensors& data, Denoiser model, const TrainOptions& opts)
{
    config.validate();
    if (!data.inputs.defined() || data.inputs.size(0) == 0) {
        throw std::invalid_argument("train: empty dataset");
    }
    if (data.inputs.size(-1) != config.train_resolution) {
        throw std::invalid_argument("train: data resolution " + std::to_string(data.inputs.size(-1)) +
                                    " differs from train_resolution " + std::to_string(config.train_resolution));
    }
    const auto schedule = config.schedule();
    const auto& vocab = model->vocab();
    const auto n = static_cast<std::int64_t>(data.instructions.size());

    Denoiser frozen = clone_denoiser(model);
    for (auto& p : frozen->parameters()) {
        p.set_requires_grad(false);
    }
    frozen->eval();

    model->train();
    const auto trainable = apply_partition(model, partition_parameters(model, config.freeze_cross_attention));
    torch::optim::Adam opt(trainable, torch::optim::AdamOptions(config.lr));

    Rng rng(derive_seed(config.seed, 0));
    auto gen = make_generator(derive_seed(config.seed, 1));
    NegativeSampler negatives(data.instructions);
    const NoiseFn live_fn = model->noise_fn();
    const NoiseFn frozen_fn = frozen->noise_fn();
    const LossWeights weights{config.lambda1, config.lambda2, config.static_on_x0};

    std::ofstream metrics;
    if (!opts.out_dir.empty()) {
        std::filesystem::create_directories(opts.out_dir / "checkpoints");
        metrics.open(opts.out_dir / "metrics.jsonl");
        if (!metrics) {
            throw std::runtime_error("cannot write " + (opts.out_dir / "metrics.jsonl").string());
        }
    }

    TrainResult result;
    result.log.reserve(static_cast<std::size_t>(config.steps));
    const auto b = config.batch_size;
    const auto null_row = vocab.encode(nullptr);
    for (int step = 1; step <= config.steps; ++step) {
        std::vector<std::int64_t> idx;
        std::vector<std::int64_t> tokens;
        std::vector<std::int64_t> neg_tokens;
        std::vector<float> keep_image;
        std::vector<float> keep_text;
        std::size_t redraws = 0;
        while (static_cast<int>(idx.size()) < b) {
            const auto k = std::uniform_int_distribution<std::int64_t>(0, n - 1)(rng);
            const auto& instr = data.instructions[static_cast<std::size_t>(k)];
            // Negatives are drawn even when the action term is off so every
            // loss configuration sees the same batches.
            std::vector<std::int64_t> neg;
            try {
                const auto pair = negatives.sample(instr, rng);
                neg = vocab.encode(&pair.negative);
            } catch (const NoValidNegative&) {
                ++result.resampled_items;
                if (++redraws > 1000 * static_cast<std::size_t>(b)) {
                    throw std::runtime_error("train: no training instruction has a token-disjoint negative");
                }
                continue;
            }
            const auto drop = drop_conditioning(config.drop_rates, rng);
            const auto row = drop.drop_text ? null_row : vocab.encode(&instr);
            idx.push_back(k);
            tokens.insert(tokens.end(), row.begin(), row.end());
            neg_tokens.insert(neg_tokens.end(), neg.begin(), neg.end());
            keep_image.push_back(drop.drop_image ? 0.0F : 1.0F);
            keep_text.push_back(drop.drop_text ? 0.0F : 1.0F);
        }
        const auto index = torch::tensor(idx, torch::kLong);
        const auto len = static_cast<std::int64_t>(vocab.max_tokens());
        LossBatch batch;
        batch.x0 = data.edited.index_select(0, index);
        batch.image = data.inputs.index_select(0, index) * torch::tensor(keep_image).view({b, 1, 1, 1});
        batch.tokens = torch::tensor(tokens, torch::kLong).view({b, len});
        batch.neg_tokens = torch::tensor(neg_tokens, torch::kLong).view({b, len});
        batch.action_mask = torch::tensor(keep_text);

        auto terms = total_loss(live_fn, frozen_fn, batch, weights, schedule, gen);
        const auto& br = terms.breakdown;
        if (!std::isfinite(br.total)) {
            std::ostringstream os;
            os << "non-finite loss at step " << step << " (static " << br.static_term << ", action " << br.action
               << ", reg " << br.reg << ")";
            throw TrainingDiverged(os.str());
        }
        opt.zero_grad();
        terms.total.backward();
        if (config.grad_clip > 0.0) {
            torch::nn::utils::clip_grad_norm_(trainable, config.grad_clip);
        }
        opt.step();

        result.log.push_back(br);
        if (metrics.is_open()) {
            metrics << nlohmann::json{{"step", step},          {"static", br.static_term}, {"action", br.action},
                                      {"reg", br.reg},         {"total", br.total},        {"lambda1", br.lambda1},
                                      {"lambda2", br.lambda2}, {"lr", config.lr},          {"seed", config.seed}}
                           .dump()
                    << '\n';
        }
        if (opts.on_step) {
            opts.on_step(step, br);
        }
        if (opts.log_every > 0 && step % opts.log_every == 0) {
            std::cerr << "step " << step << "/" << config.steps << " total " << std::setprecision(5) << br.total
                      << " static " << br.static_term << " action " << br.action << " reg " << br.reg << '\n';
        }
        if (!opts.out_dir.empty() && is_checkpoint_step(step, config.steps)) {
            char name[32];
            std::snprintf(name, sizeof(name), "step_%06d.pt", step);
            save_checkpoint(opts.out_dir / "checkpoints" / name, model, config, step);
        }
    }
    model->eval();
    if (!opts.out_dir.empty()) {
        save_checkpoint(opts.out_dir / "model.pt", model, config, config.steps);
    }
    result.model = model;
    return result;
}

SweepTable sweep_lambdas(const TrainConfig& base, SweepAxis axis, const std::vector<double>& grid,
                         const PairTensors& data, const ModelFactory& make_model, const FidEval& eval_fn)
{
    if (grid.empty()) {
        throw std::invalid_argument("sweep_lambdas: empty grid");
    }
    SweepTable table;
    table.axis = axis;
    for (double v : grid) {
        TrainConfig cfg = base;
        cfg.lambda1 = axis == SweepAxis::lambda1 ? v : 0.0;
        cfg.lambda2 = axis == SweepAxis::lambda2 ? v : 0.0;
        const auto trained = train(cfg, data, make_model());
        table.rows.push_back({v, eval_fn(trained.model)});
    }
    std::stable_sort(table.rows.begin(), table.rows.end(),
                     [](const SweepRow& a, const SweepRow& b) { return a.fid_output < b.fid_output; });
    table.best = table.rows.front().value;
    return table;
}

std::string format_sweep_table(const SweepTable& t)
{
    std::ostringstream os;
    os << (t.axis == SweepAxis::lambda1 ? "lambda1" : "lambda2") << " | FID_output\n";
    for (const auto& r : t.rows) {
        os << std::setw(7) << std::defaultfloat << r.value << " | " << std::fixed << std::setprecision(2)
           << r.fid_output << std::defaultfloat << '\n';
    }
    os << "best " << t.best << '\n';
    return os.str();
}

std::vector<AblationVariant> standard_variants()
{
    return {{"full", [](TrainConfig&) {}},
            {"no_action_loss", [](TrainConfig& c) { c.lambda1 = 0.0; }},
            {"no_reg_loss", [](TrainConfig& c) { c.lambda2 = 0.0; }},
            {"no_freezing", [](TrainConfig& c) { c.freeze_cross_attention = false; }}};
}

AblationVariant variant_by_name(const std::string& name)
{
    for (auto& v : standard_variants()) {
        if (v.name == name) {
            return v;
        }
    }
    throw std::invalid_argument("unknown ablation variant: " + name);
}

std::vector<EvalReport> run_ablation(const TrainConfig& base, const std::vector<AblationVariant>& variants,
                                     const PairTensors& data, const ModelFactory& make_model,
                                     const ReportEval& eval_fn, const TrainOptions& opts)
{
    std::vector<EvalReport> reports;
    for (const auto& v : variants) {
        TrainConfig cfg = base;
        v.apply(cfg);
        TrainOptions variant_opts = opts;
        if (!opts.out_dir.empty()) {
            variant_opts.out_dir = opts.out_dir / v.name;
        }
        const auto trained = train(cfg, data, make_model(), variant_opts);
        auto report = eval_fn(trained.model);
        report.name = v.name;
        reports.push_back(std::move(report));
    }
    return reports;
}

} // namespace editaction

// SPDX-License-Identifier: Apache-2.0
#include "editaction/benchmark.hpp"

#include <fstream>

#include "editaction/checkpoint.hpp"

namespace editaction {

ToyData prepare_toy_data(const ToyBenchmarkConfig& cfg, const std::filesystem::path& dir)
{
    const auto total = cfg.train_count + cfg.test_count;
    ToyData data;
    data.manifest = dir / "manifest.jsonl";
    data.held_out_manifest = cfg.held_out_verbs.empty() ? std::filesystem::path{} : dir / "heldout.jsonl";

    GenerateConfig gen;
    gen.regime = Regime::lc;
    gen.count = total;
    gen.resolution = cfg.resolution;
    gen.verbs = cfg.verbs;
    gen.held_out_verbs = cfg.held_out_verbs;
    gen.held_out_count = cfg.held_out_count;
    gen.min_objects = cfg.min_objects;
    gen.max_objects = cfg.max_objects;
    if (!cfg.backgrounds.empty()) {
        gen.backgrounds = cfg.backgrounds;
    }

    // The stamp ties a cached dataset to the settings that produced it.
    nlohmann::json stamp = {{"count", total},
                            {"resolution", cfg.resolution},
                            {"held_out_count", cfg.held_out_count},
                            {"min_objects", cfg.min_objects},
                            {"max_objects", cfg.max_objects},
                            {"seed", cfg.data_seed}};
    for (auto v : gen.verbs) {
        stamp["verbs"].push_back(to_string(v));
    }
    for (auto v : gen.held_out_verbs) {
        stamp["held_out_verbs"].push_back(to_string(v));
    }
    for (auto b : gen.backgrounds) {
        stamp["backgrounds"].push_back(to_string(b));
    }
    const auto stamp_path = dir / "generation.json";
    bool cached = std::filesystem::exists(data.manifest) && std::filesystem::exists(stamp_path);
    if (cached) {
        std::ifstream in(stamp_path);
        cached = nlohmann::json::parse(in) == stamp;
    }

    std::vector<EditSample> all;
    if (cached) {
        all = read_manifest(data.manifest, true);
        if (!data.held_out_manifest.empty()) {
            data.held_out = read_manifest(data.held_out_manifest, true);
        }
    } else {
        auto generated = generate_dataset(gen, cfg.data_seed, dir, cfg.workers);
        all = std::move(generated.samples);
        data.held_out = std::move(generated.held_out);
        std::ofstream(stamp_path) << stamp.dump(2) << '\n';
    }
    auto parts = split(all, static_cast<std::size_t>(cfg.test_count), 0, derive_seed(cfg.data_seed, 7));
    data.train = std::move(parts.train);
    data.test = std::move(parts.test_random);
    data.train_tensors = load_pairs(data.manifest, data.train);
    data.vocab = Vocabulary::build(data.train_tensors.instructions);
    return data;
}

Denoiser pretrain_base(const ToyBenchmarkConfig& cfg, const ToyData& data, const std::filesystem::path& dir)
{
    const auto path = dir / "model.pt";
    if (std::filesystem::exists(path)) {
        auto ck = load_checkpoint(path);
        if (ck.model->arch() == cfg.arch && ck.model->vocab() == data.vocab && ck.step == cfg.base_steps &&
            ck.train_config.value("static_on_x0", false) == cfg.base_static_on_x0) {
            return ck.model;
        }
    }
    TrainConfig base = cfg.finetune;
    base.lambda1 = 0.0;
    base.lambda2 = 0.0;
    base.freeze_cross_attention = false;
    base.steps = cfg.base_steps;
    base.lr = cfg.base_lr;
    base.static_on_x0 = cfg.base_static_on_x0;
    base.seed = derive_seed(cfg.finetune.seed, 100);
    TrainOptions opts;
    opts.out_dir = dir;
    opts.log_every = cfg.log_every;
    auto model = init_denoiser(cfg.arch, data.vocab, base.seed);
    return train(base, data.train_tensors, model, opts).model;
}

TrainResult finetune_from(const Denoiser& base, const TrainConfig& config, const ToyData& data,
                          const TrainOptions& opts)
{
    return train(config, data.train_tensors, clone_denoiser(base), opts);
}

EvalReport evaluate_toy(const Denoiser& model, const ToyBenchmarkConfig& cfg, const std::filesystem::path& manifest,
                        std::span<const EditSample> samples, const std::string& name)
{
    PixelFeatures features;
    EvalConfig ec;
    ec.seeds = cfg.eval_seeds;
    const auto editor = model_editor(model, cfg.finetune.schedule(), cfg.sampler);
    auto report = evaluate_run(editor, model->vocab(), manifest, samples, nullptr, features, ec);
    report.name = name;
    return report;
}

} // namespace editaction

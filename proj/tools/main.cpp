// SPDX-License-Identifier: Apache-2.0
//
// editaction: data generation, frame-pair extraction, training, editing,
// evaluation, sweeps, ablations and timing from one binary.
//
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "editaction/benchmark.hpp"
#include "editaction/checkpoint.hpp"
#include "editaction/dataset.hpp"
#include "editaction/evaluation.hpp"
#include "editaction/recognizer.hpp"
#include "editaction/run_config.hpp"
#include "editaction/trainer.hpp"

namespace fs = std::filesystem;
using namespace editaction;

namespace {

struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Config plumbing shared by the training-side subcommands: --config and
// --profile are applied first, then any flag given on the command line.
struct ConfigFlags {
    std::string file;
    std::string profile = "toy";
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;

    void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help)
    {
        options[key] = app->add_option(flag, values[key], help);
    }

    void add_common(CLI::App* app)
    {
        app->add_option("--config", file, "key = value configuration file");
        app->add_option("--profile", profile, "toy (default) or paper")->check(CLI::IsMember({"toy", "paper"}));
        add(app, "--seed", "seed", "root of all randomness");
        add(app, "--workers", "workers", "worker threads");
        add(app, "--out", "out_dir", "output directory (default $EDITACTION_OUT or ./runs)");
    }

    void add_training(CLI::App* app)
    {
        add(app, "--manifest", "train_manifest", "training manifest");
        add(app, "--steps", "steps", "optimizer steps");
        add(app, "--lambda1", "lambda1", "action loss weight");
        add(app, "--lambda2", "lambda2", "regularization loss weight");
        add(app, "--lr", "lr", "learning rate");
        add(app, "--batch", "batch_size", "batch size");
        add(app, "--freeze", "freeze_cross_attention", "freeze cross-attention projections (true/false)");
        add(app, "--resolution", "train_resolution", "training resolution");
        add(app, "--widths", "widths", "U-Net widths, comma separated");
        add(app, "--patch", "patch", "stem space-to-depth factor");
        add(app, "--output", "output", "network output: eps or x0_residual");
        add(app, "--static-on-x0", "static_on_x0", "static loss on the implied x0 (true/false)");
    }

    void add_sampling(CLI::App* app)
    {
        add(app, "--si", "si", "image guidance scale");
        add(app, "--sc", "sc", "text guidance scale");
        add(app, "--inference-steps", "inference_steps", "reverse diffusion steps");
    }

    RunConfig resolve() const
    {
        RunConfig cfg;
        try {
            cfg.apply_profile(profile);
            if (!file.empty()) {
                cfg.load_file(file);
            }
            for (const auto& [key, opt] : options) {
                if (opt->count() > 0) {
                    cfg.set(key, values.at(key));
                }
            }
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        return cfg;
    }
};

void log_config(const RunConfig& cfg, const fs::path& dir)
{
    std::cerr << "# resolved configuration\n" << cfg.to_text();
    if (!dir.empty()) {
        fs::create_directories(dir);
        std::ofstream(dir / "config.txt") << cfg.to_text();
    }
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

std::vector<Verb> parse_verbs(const std::vector<std::string>& names)
{
    std::vector<Verb> verbs;
    for (const auto& n : names) {
        try {
            verbs.push_back(verb_from_string(n));
        } catch (const std::exception&) {
            throw UsageError("unknown verb: " + n);
        }
    }
    return verbs;
}

// Copy of `samples` with image paths rewritten relative to `dest_dir`.
std::vector<EditSample> rebase(std::span<const EditSample> samples, const fs::path& manifest, const fs::path& dest_dir)
{
    std::vector<EditSample> out(samples.begin(), samples.end());
    const auto base = fs::absolute(dest_dir);
    for (auto& s : out) {
        s.input_path = fs::relative(fs::absolute(resolve_path(manifest, s.input_path)), base).generic_string();
        s.edited_path = fs::relative(fs::absolute(resolve_path(manifest, s.edited_path)), base).generic_string();
    }
    return out;
}

void write_json(const fs::path& path, const nlohmann::json& j)
{
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << j.dump(2) << '\n';
}

Denoiser model_for_training(const RunConfig& cfg, const std::string& init, const PairTensors& data)
{
    if (!init.empty()) {
        return load_checkpoint(init).model;
    }
    auto arch = cfg.arch;
    arch.resolution = cfg.train.train_resolution;
    return init_denoiser(arch, Vocabulary::build(data.instructions), derive_seed(cfg.train.seed, 100));
}

EvalReport evaluate_model(const Denoiser& model, const RunConfig& cfg, const fs::path& manifest,
                          std::span<const EditSample> samples, const std::string& name, ActionRecognizer* recognizer,
                          const fs::path& grid)
{
    PixelFeatures features;
    EvalConfig ec;
    ec.seeds.clear();
    for (int k = 0; k < cfg.eval_seeds; ++k) {
        ec.seeds.push_back(derive_seed(cfg.train.seed, 1000 + static_cast<std::uint64_t>(k)));
    }
    ec.long_distance = !samples.empty() && std::all_of(samples.begin(), samples.end(), [](const EditSample& s) {
        return s.long_distance;
    });
    ec.grid_path = grid;
    auto report = evaluate_run(model_editor(model, cfg.train.schedule(), cfg.sampler()), model->vocab(), manifest,
                               samples, recognizer, features, ec);
    report.name = name;
    return report;
}

void write_reports(const fs::path& dir, std::span<const EvalReport> reports)
{
    fs::create_directories(dir);
    nlohmann::json all = nlohmann::json::array();
    for (const auto& r : reports) {
        all.push_back(report_to_json(r));
    }
    write_json(dir / "report.json", all);
    std::ofstream per(dir / "per_sample.jsonl");
    for (const auto& r : reports) {
        for (const auto& s : r.per_sample) {
            nlohmann::json j = {{"method", r.name}, {"index", s.index}, {"seed", s.seed}, {"action_id", s.action_id}};
            if (s.oracle_correct) {
                j["oracle_correct"] = *s.oracle_correct;
            }
            if (s.learned_correct) {
                j["learned_correct"] = *s.learned_correct;
            }
            per << j.dump() << '\n';
        }
    }
    const auto table = format_report_table(reports);
    std::ofstream(dir / "table.txt") << table;
    std::cout << table;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Instruction-driven image editing with action-aware diffusion fine-tuning"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "render a synthetic before/after dataset");
    std::string gen_regime = "lc";
    int gen_count = 1000;
    int gen_res = 32;
    std::string gen_out;
    std::uint64_t gen_seed = 0;
    int gen_workers = 1;
    std::string gen_verbs;
    std::string gen_hold;
    int gen_hold_count = 0;
    int gen_min = 3;
    int gen_max = 6;
    gen->add_option("--regime", gen_regime, "lc or hc")->check(CLI::IsMember({"lc", "hc"}));
    gen->add_option("--count", gen_count, "number of pairs");
    gen->add_option("--resolution", gen_res, "image side in pixels");
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--seed", gen_seed, "random seed");
    gen->add_option("--workers", gen_workers, "render threads");
    gen->add_option("--verbs", gen_verbs, "comma-separated verbs (default: the regime's set)");
    gen->add_option("--hold-out", gen_hold, "comma-separated verbs kept out of the main manifest");
    gen->add_option("--hold-out-count", gen_hold_count, "pairs written to heldout.jsonl");
    gen->add_option("--min-objects", gen_min, "fewest objects per scene");
    gen->add_option("--max-objects", gen_max, "most objects per scene");

    // extract-pairs
    auto* ext = app.add_subcommand("extract-pairs", "cut first/last frame pairs from annotated videos");
    std::string ext_ann;
    std::string ext_videos;
    std::string ext_suffix = ".mp4";
    std::string ext_out;
    std::string ext_delim = ",";
    std::string ext_regime = "lc";
    int ext_res = 0;
    ext->add_option("--annotations", ext_ann, "segment annotation file")->required();
    ext->add_option("--videos", ext_videos, "directory of <video_id><ext> files")->required();
    ext->add_option("--ext", ext_suffix, "video file extension");
    ext->add_option("--out", ext_out, "output directory")->required();
    ext->add_option("--delimiter", ext_delim, "annotation column delimiter");
    ext->add_option("--regime", ext_regime, "lc or hc")->check(CLI::IsMember({"lc", "hc"}));
    ext->add_option("--resolution", ext_res, "square resize (0 keeps native size)");

    // stats
    auto* stats = app.add_subcommand("stats", "count instruction phrase coverage in a manifest");
    std::string stats_manifest;
    std::string stats_out;
    stats->add_option("--manifest", stats_manifest, "manifest")->required();
    stats->add_option("--out", stats_out, "write the statistics as JSON");

    // split
    auto* spl = app.add_subcommand("split", "split a manifest into train and test sets");
    std::string spl_manifest;
    std::string spl_out;
    std::size_t spl_test = 500;
    std::size_t spl_long = 0;
    std::uint64_t spl_seed = 0;
    spl->add_option("--manifest", spl_manifest, "manifest")->required();
    spl->add_option("--out", spl_out, "output directory (default: next to the manifest)");
    spl->add_option("--test", spl_test, "random test pairs");
    spl->add_option("--long", spl_long, "long-distance test pairs");
    spl->add_option("--seed", spl_seed, "random seed");

    // train
    auto* trn = app.add_subcommand("train", "train or fine-tune a denoiser");
    ConfigFlags trn_cfg;
    trn_cfg.add_common(trn);
    trn_cfg.add_training(trn);
    std::string trn_init;
    int trn_log_every = 100;
    trn->add_option("--init", trn_init, "checkpoint to fine-tune (default: fresh weights)");
    trn->add_option("--log-every", trn_log_every, "progress line every N steps (0 = silent)");

    // edit
    auto* edt = app.add_subcommand("edit", "edit one image with an instruction");
    std::string edt_ck;
    std::string edt_input;
    std::string edt_instr;
    std::string edt_out = "edited.png";
    double edt_si = 1.0;
    double edt_sc = 7.5;
    int edt_steps = 100;
    std::uint64_t edt_seed = 0;
    edt->add_option("--checkpoint", edt_ck, "model checkpoint")->required();
    edt->add_option("--input", edt_input, "input image")->required();
    edt->add_option("--instruction", edt_instr, "edit instruction")->required();
    edt->add_option("--out", edt_out, "output image");
    edt->add_option("--si", edt_si, "image guidance scale");
    edt->add_option("--sc", edt_sc, "text guidance scale");
    edt->add_option("--steps", edt_steps, "reverse diffusion steps");
    edt->add_option("--seed", edt_seed, "sampling seed");

    // evaluate
    auto* evl = app.add_subcommand("evaluate", "action accuracy and FID over seeds");
    ConfigFlags evl_cfg;
    evl_cfg.add_common(evl);
    evl_cfg.add_sampling(evl);
    evl_cfg.add(evl, "--seeds", "eval_seeds", "number of sampling seeds");
    std::string evl_ck;
    std::string evl_manifest;
    std::string evl_recognizer;
    std::string evl_name = "model";
    evl->add_option("--checkpoint", evl_ck, "model checkpoint")->required();
    evl->add_option("--manifest", evl_manifest, "test manifest")->required();
    evl->add_option("--recognizer", evl_recognizer, "learned recognizer weights (optional)");
    evl->add_option("--name", evl_name, "method name in the report");

    // sweep
    auto* swp = app.add_subcommand("sweep", "rank loss weights by FID_output");
    ConfigFlags swp_cfg;
    swp_cfg.add_common(swp);
    swp_cfg.add_training(swp);
    swp_cfg.add_sampling(swp);
    std::string swp_axis = "lambda1";
    std::string swp_values;
    std::string swp_test;
    std::string swp_init;
    swp->add_option("--axis", swp_axis, "lambda1 or lambda2")->check(CLI::IsMember({"lambda1", "lambda2"}));
    swp->add_option("--values", swp_values, "comma-separated grid")->required();
    swp->add_option("--test-manifest", swp_test, "evaluation manifest")->required();
    swp->add_option("--init", swp_init, "checkpoint every run starts from");

    // ablate
    auto* abl = app.add_subcommand("ablate", "train and evaluate loss/freezing ablations");
    ConfigFlags abl_cfg;
    abl_cfg.add_common(abl);
    abl_cfg.add_training(abl);
    abl_cfg.add_sampling(abl);
    abl_cfg.add(abl, "--seeds", "eval_seeds", "number of sampling seeds");
    std::string abl_test;
    std::string abl_init;
    std::string abl_variants = "full,no_action_loss,no_reg_loss,no_freezing";
    abl->add_option("--test-manifest", abl_test, "evaluation manifest")->required();
    abl->add_option("--init", abl_init, "checkpoint every variant starts from");
    abl->add_option("--variants", abl_variants, "comma-separated variant names");

    // time
    auto* tim = app.add_subcommand("time", "median wall time per edit");
    std::vector<std::string> tim_ck;
    std::string tim_input;
    std::string tim_instr;
    int tim_steps = 100;
    int tim_repeats = 5;
    double tim_si = 1.0;
    double tim_sc = 7.5;
    tim->add_option("--checkpoint", tim_ck, "one or more checkpoints")->required();
    tim->add_option("--input", tim_input, "input image")->required();
    tim->add_option("--instruction", tim_instr, "edit instruction")->required();
    tim->add_option("--steps", tim_steps, "reverse diffusion steps");
    tim->add_option("--repeats", tim_repeats, "timed edits per checkpoint");
    tim->add_option("--si", tim_si, "image guidance scale");
    tim->add_option("--sc", tim_sc, "text guidance scale");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        torch::set_num_threads(1);
        if (*gen) {
            GenerateConfig cfg;
            cfg.regime = regime_from_string(gen_regime);
            cfg.count = gen_count;
            cfg.resolution = gen_res;
            cfg.verbs = parse_verbs(split_list(gen_verbs));
            cfg.held_out_verbs = parse_verbs(split_list(gen_hold));
            cfg.held_out_count = gen_hold_count;
            cfg.min_objects = gen_min;
            cfg.max_objects = gen_max;
            const auto out = generate_dataset(cfg, gen_seed, gen_out, gen_workers);
            std::cout << out.samples.size() << " pairs -> " << out.manifest.string() << '\n';
            if (!out.held_out_manifest.empty()) {
                std::cout << out.held_out.size() << " held-out pairs -> " << out.held_out_manifest.string() << '\n';
            }
        } else if (*ext) {
            if (ext_delim.size() != 1) {
                throw UsageError("--delimiter must be one character");
            }
            const auto ann = read_annotations(ext_ann, ext_delim[0]);
            VideoFileSource frames(ext_videos, ext_suffix);
            ExtractOptions opts;
            opts.out_dir = ext_out;
            opts.resolution = ext_res;
            opts.regime = regime_from_string(ext_regime);
            const auto res = extract_pairs(ann, frames, opts);
            write_manifest(fs::path(ext_out) / "manifest.jsonl", res.samples);
            for (const auto& s : res.skipped) {
                std::cerr << "skipped annotation " << s.annotation_index << ": " << s.reason << '\n';
            }
            std::cout << res.samples.size() << " pairs, " << res.skipped.size() << " skipped\n";
        } else if (*stats) {
            const auto samples = read_manifest(stats_manifest);
            const auto j = stats_to_json(dataset_stats(samples));
            if (!stats_out.empty()) {
                write_json(stats_out, j);
            }
            std::cout << j.dump(2) << '\n';
        } else if (*spl) {
            const auto samples = read_manifest(spl_manifest);
            const auto parts = split(samples, spl_test, spl_long, spl_seed);
            const fs::path dir = spl_out.empty() ? fs::path(spl_manifest).parent_path() : fs::path(spl_out);
            fs::create_directories(dir);
            write_manifest(dir / "train.jsonl", rebase(parts.train, spl_manifest, dir));
            write_manifest(dir / "test.jsonl", rebase(parts.test_random, spl_manifest, dir));
            if (spl_long > 0) {
                write_manifest(dir / "test_long.jsonl", rebase(parts.test_long_distance, spl_manifest, dir));
            }
            std::cout << "train " << parts.train.size() << ", test " << parts.test_random.size()
                      << ", long-distance test " << parts.test_long_distance.size() << '\n';
        } else if (*trn) {
            const auto cfg = trn_cfg.resolve();
            if (cfg.train_manifest.empty()) {
                throw UsageError("train needs --manifest or train_manifest in the config");
            }
            torch::set_num_threads(std::max(1, cfg.workers));
            log_config(cfg, cfg.out_dir);
            const auto samples = read_manifest(cfg.train_manifest, true);
            const auto data = load_pairs(cfg.train_manifest, samples);
            auto model = model_for_training(cfg, trn_init, data);
            TrainOptions opts;
            opts.out_dir = cfg.out_dir;
            opts.log_every = trn_log_every;
            const auto res = train(cfg.train, data, model, opts);
            std::cout << "trained " << cfg.train.steps << " steps, " << model->num_parameters()
                      << " parameters -> " << (fs::path(cfg.out_dir) / "model.pt").string() << '\n';
            if (res.resampled_items > 0) {
                std::cerr << res.resampled_items << " items redrawn for lack of a disjoint negative\n";
            }
        } else if (*edt) {
            auto ck = load_checkpoint(edt_ck);
            auto model = ck.model;
            model->eval();
            const auto img = read_image(edt_input);
            if (img.height() != model->arch().resolution || img.width() != model->arch().resolution) {
                throw std::runtime_error("input is " + std::to_string(img.width()) + "x" +
                                         std::to_string(img.height()) + ", model expects " +
                                         std::to_string(model->arch().resolution));
            }
            const auto instr = make_instruction_text(edt_instr, "", "");
            const std::vector<InstructionText> batch{instr};
            TrainConfig tc;
            if (!ck.train_config.is_null()) {
                tc = ck.train_config.get<TrainConfig>();
            }
            SamplerSettings s;
            s.guidance = {edt_si, edt_sc};
            s.guidance.validate();
            s.steps = edt_steps;
            const auto out = model_editor(model, tc.schedule(), s)(image_to_tensor(img).unsqueeze(0),
                                                                   model->vocab().encode_batch(batch), edt_seed);
            write_image(edt_out, tensor_to_image(out[0]));
            std::cout << edt_out << '\n';
        } else if (*evl) {
            auto cfg = evl_cfg.resolve();
            cfg.test_manifest = evl_manifest;
            log_config(cfg, cfg.out_dir);
            auto ck = load_checkpoint(evl_ck);
            if (!ck.train_config.is_null()) {
                const auto tc = ck.train_config.get<TrainConfig>();
                cfg.train.diffusion_steps = tc.diffusion_steps;
                cfg.train.beta_start = tc.beta_start;
                cfg.train.beta_end = tc.beta_end;
            }
            const auto samples = read_manifest(evl_manifest, true);
            std::optional<LearnedRecognizer> rec;
            if (!evl_recognizer.empty()) {
                rec = LearnedRecognizer::load(evl_recognizer);
            }
            const std::vector<EvalReport> reports{evaluate_model(ck.model, cfg, evl_manifest, samples, evl_name,
                                                                 rec ? &*rec : nullptr,
                                                                 fs::path(cfg.out_dir) / "grid.png")};
            write_reports(cfg.out_dir, reports);
        } else if (*swp) {
            const auto cfg = swp_cfg.resolve();
            if (cfg.train_manifest.empty()) {
                throw UsageError("sweep needs --manifest or train_manifest in the config");
            }
            log_config(cfg, cfg.out_dir);
            std::vector<double> grid;
            for (const auto& v : split_list(swp_values)) {
                grid.push_back(std::stod(v));
            }
            const auto data = load_pairs(cfg.train_manifest, read_manifest(cfg.train_manifest, true));
            const auto test = read_manifest(swp_test, true);
            const auto base = model_for_training(cfg, swp_init, data);
            const auto table = sweep_lambdas(
                cfg.train, swp_axis == "lambda1" ? SweepAxis::lambda1 : SweepAxis::lambda2, grid, data,
                [&] { return clone_denoiser(base); },
                [&](const Denoiser& m) {
                    return evaluate_model(m, cfg, swp_test, test, "sweep", nullptr, {}).fid_output_mean;
                });
            const auto text = format_sweep_table(table);
            std::ofstream(fs::path(cfg.out_dir) / "sweep.txt") << text;
            std::cout << text;
        } else if (*abl) {
            const auto cfg = abl_cfg.resolve();
            if (cfg.train_manifest.empty()) {
                throw UsageError("ablate needs --manifest or train_manifest in the config");
            }
            log_config(cfg, cfg.out_dir);
            std::vector<AblationVariant> variants;
            for (const auto& name : split_list(abl_variants)) {
                try {
                    variants.push_back(variant_by_name(name));
                } catch (const std::invalid_argument& e) {
                    throw UsageError(e.what());
                }
            }
            const auto data = load_pairs(cfg.train_manifest, read_manifest(cfg.train_manifest, true));
            const auto test = read_manifest(abl_test, true);
            const auto base = model_for_training(cfg, abl_init, data);
            TrainOptions opts;
            opts.out_dir = cfg.out_dir;
            const auto reports = run_ablation(
                cfg.train, variants, data, [&] { return clone_denoiser(base); },
                [&](const Denoiser& m) { return evaluate_model(m, cfg, abl_test, test, "", nullptr, {}); }, opts);
            write_reports(cfg.out_dir, reports);
        } else if (*tim) {
            const auto img = read_image(tim_input);
            const std::vector<InstructionText> batch{make_instruction_text(tim_instr, "", "")};
            for (const auto& path : tim_ck) {
                auto ck = load_checkpoint(path);
                TrainConfig tc;
                if (!ck.train_config.is_null()) {
                    tc = ck.train_config.get<TrainConfig>();
                }
                SamplerSettings s;
                s.guidance = {tim_si, tim_sc};
                s.steps = tim_steps;
                const auto edit = model_editor(ck.model, tc.schedule(), s);
                const auto input = image_to_tensor(img).unsqueeze(0);
                const auto tokens = ck.model->vocab().encode_batch(batch);
                const double sec = measure_inference_time([&] { edit(input, tokens, 0); }, tim_repeats);
                std::cout << path << '\t' << sec << " s/edit\n";
            }
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

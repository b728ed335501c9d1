// SPDX-License-Identifier: Apache-2.0
#include "editaction/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

namespace editaction {

namespace {

torch::Tensor covariance(const torch::Tensor& x)
{
    const auto centered = x - x.mean(0, true);
    return centered.t().matmul(centered) / static_cast<double>(x.size(0) - 1);
}

torch::Tensor psd_sqrt(const torch::Tensor& m)
{
    const auto [evals, evecs] = torch::linalg_eigh(m);
    return evecs.matmul(torch::diag(evals.clamp_min(0.0).sqrt())).matmul(evecs.t());
}

std::vector<int> rotations_of(Shape s)
{
    if (s == Shape::triangle) {
        return {90, 180, 270};
    }
    if (s == Shape::bar) {
        return {90, 270};
    }
    return {};
}

bool contains_verb(const std::vector<Verb>& verbs, Verb v)
{
    return std::find(verbs.begin(), verbs.end(), v) != verbs.end();
}

bool fully_inside(const ObjectState& o, const Rect& r)
{
    return o.x >= r.x0 && o.y >= r.y0 && o.x + o.scale <= r.x1 && o.y + o.scale <= r.y1;
}

torch::Tensor quantize_tensor(const torch::Tensor& x)
{
    return ((x.clamp(-1.0, 1.0) + 1.0) * 127.5).round() / 127.5 - 1.0;
}

std::string fmt(double v)
{
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << v;
    return os.str();
}

} // namespace

torch::Tensor PixelFeatures::extract(const torch::Tensor& images)
{
    TORCH_CHECK(images.dim() == 4 && images.size(1) == 3, "PixelFeatures: expected [N, 3, H, W]");
    return torch::adaptive_avg_pool2d(images.to(torch::kFloat64), {grid_, grid_}).flatten(1);
}

double fid(const torch::Tensor& features_a, const torch::Tensor& features_b, const FidOptions& opts)
{
    TORCH_CHECK(features_a.dim() == 2 && features_b.dim() == 2 && features_a.size(1) == features_b.size(1),
                "fid: expected [N, D] feature sets of equal dimension");
    const auto d = features_a.size(1);
    for (const auto* f : {&features_a, &features_b}) {
        if (f->size(0) < 2 || (opts.shrinkage <= 0.0 && f->size(0) < d + 1)) {
            throw std::invalid_argument("fid: " + std::to_string(f->size(0)) + " samples are too few for dimension " +
                                        std::to_string(d));
        }
    }
    const auto a = features_a.to(torch::kFloat64);
    const auto b = features_b.to(torch::kFloat64);
    const auto eye = torch::eye(d, torch::kFloat64) * opts.shrinkage;
    const auto sa = covariance(a) + eye;
    const auto sb = covariance(b) + eye;
    const auto root_a = psd_sqrt(sa);
    auto product = root_a.matmul(sb).matmul(root_a);
    product = (product + product.t()) / 2.0;
    const auto cross = torch::linalg_eigvalsh(product).clamp_min(0.0).sqrt().sum();
    const auto mean_term = (a.mean(0) - b.mean(0)).square().sum();
    const double value = (mean_term + sa.trace() + sb.trace() - 2.0 * cross).item<double>();
    return std::max(value, 0.0);
}

ViewContext ViewContext::of(const EditSample& s)
{
    return {s.regime, s.camera_before.value_or(Camera{}), s.camera_after.value_or(Camera{})};
}

bool delta_matches(const SceneSpec& before, const SceneSpec& after, const ActionSpec& action, const ViewContext& view)
{
    SceneSpec expected;
    const ObjectState* target_before = before.find(action.target);
    if (view.regime == Regime::hc && action.verb == Verb::swap_with && action.partner && target_before != nullptr &&
        before.find(*action.partner) == nullptr) {
        // The partner was out of view, so the target's destination is unknown:
        // take it from the output, require that the target moved, and expect
        // the partner (if visible) where the target was.
        const ObjectState* target_after = after.find(action.target);
        if (target_after == nullptr) {
            return false;
        }
        ObjectState moved = *target_before;
        moved.x = target_after->x;
        moved.y = target_after->y;
        if (moved == *target_before || !(moved == *target_after)) {
            return false;
        }
        if (const ObjectState* partner = after.find(*action.partner);
            partner != nullptr && (partner->x != target_before->x || partner->y != target_before->y)) {
            return false;
        }
        expected = before;
        *expected.find(action.target) = moved;
    } else {
        try {
            expected = apply_action(before, action, arena_for(view.regime));
        } catch (const std::invalid_argument&) {
            return false;
        }
    }
    if (expected.background != after.background) {
        return false;
    }
    if (view.regime == Regime::lc) {
        return expected.objects == after.objects;
    }
    const Rect seen = viewport_rect(view.camera_after);
    if (after.find(action.target) == nullptr) {
        return false;
    }
    for (const auto& e : expected.objects) {
        const ObjectState* got = after.find(e.id());
        if (got != nullptr ? !(*got == e) : fully_inside(e, seen)) {
            return false;
        }
    }
    return true;
}

bool oracle_correct(const Image& input, const Image& generated, const ActionSpec& action, const ViewContext& view)
{
    const auto before = parse_scene(input, view.camera_before);
    if (!before) {
        return false;
    }
    const auto after = parse_scene(generated, view.camera_after);
    if (!after) {
        return false;
    }
    return delta_matches(*before.scene, *after.scene, action, view);
}

double action_accuracy_oracle(std::span<const EvalPair> pairs)
{
    if (pairs.empty()) {
        return 0.0;
    }
    std::size_t correct = 0;
    for (const auto& p : pairs) {
        if (p.sample.action && oracle_correct(p.input, p.generated, *p.sample.action, ViewContext::of(p.sample))) {
            ++correct;
        }
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(pairs.size());
}

std::vector<Image> make_clip_4_4(const Image& input, const Image& generated)
{
    return {input, input, input, input, generated, generated, generated, generated};
}

std::vector<std::string> action_label_space(const std::vector<Verb>& verbs)
{
    SceneSpec all;
    for (Shape s : kShapes) {
        for (Color c : kColors) {
            all.objects.push_back({s, c, 0, 0, 0, 1.0});
        }
    }
    std::vector<std::string> labels;
    for (const auto& a : enumerate_actions(all, verbs, 2)) {
        labels.push_back(action_label(a));
    }
    return labels;
}

std::vector<ActionSpec> enumerate_actions(const SceneSpec& scene, const std::vector<Verb>& verbs, int move_distance)
{
    std::vector<ActionSpec> out;
    for (Verb v : kVerbs) {
        if (!contains_verb(verbs, v)) {
            continue;
        }
        for (const auto& o : scene.objects) {
            ActionSpec a;
            a.verb = v;
            a.target = o.id();
            switch (v) {
            case Verb::move_left:
            case Verb::move_right:
            case Verb::move_up:
            case Verb::move_down:
                a.magnitude = move_distance;
                out.push_back(a);
                break;
            case Verb::rotate:
                for (int deg : rotations_of(o.shape)) {
                    a.magnitude = deg;
                    out.push_back(a);
                }
                break;
            case Verb::flip:
                if (o.shape == Shape::triangle) {
                    out.push_back(a);
                }
                break;
            case Verb::swap_with:
                for (const auto& p : scene.objects) {
                    if (!(p.id() == o.id())) {
                        a.partner = p.id();
                        out.push_back(a);
                    }
                }
                break;
            case Verb::move_to:
                for (int loc = 0; loc < static_cast<int>(kLocationNames.size()); ++loc) {
                    a.location = loc;
                    out.push_back(a);
                }
                break;
            }
        }
    }
    return out;
}

OracleRecognizer::OracleRecognizer(std::vector<Verb> verbs, int move_distance)
    : verbs_(std::move(verbs)), move_distance_(move_distance), labels_(action_label_space(verbs_))
{
}

std::vector<double> OracleRecognizer::scores(std::span<const Image> clip, const ViewContext& view)
{
    if (clip.empty()) {
        throw std::invalid_argument("OracleRecognizer: empty clip");
    }
    std::vector<double> out(labels_.size(), 0.0);
    const auto before = parse_scene(clip.front(), view.camera_before);
    const auto after = parse_scene(clip.back(), view.camera_after);
    if (!before || !after) {
        return out;
    }
    std::map<std::string, std::size_t> index;
    for (std::size_t k = 0; k < labels_.size(); ++k) {
        index.emplace(labels_[k], k);
    }
    for (const auto& a : enumerate_actions(*before.scene, verbs_, move_distance_)) {
        if (delta_matches(*before.scene, *after.scene, a, view)) {
            const auto it = index.find(action_label(a));
            if (it != index.end()) {
                out[it->second] = 1.0;
            }
        }
    }
    return out;
}

double action_accuracy_learned(std::span<const EvalPair> pairs, ActionRecognizer& recognizer)
{
    if (pairs.empty()) {
        return 0.0;
    }
    std::map<std::string, std::size_t> index;
    for (std::size_t k = 0; k < recognizer.labels().size(); ++k) {
        index.emplace(recognizer.labels()[k], k);
    }
    std::size_t correct = 0;
    for (const auto& p : pairs) {
        const auto it = index.find(p.sample.action_id);
        if (it == index.end()) {
            throw std::invalid_argument("label '" + p.sample.action_id + "' is outside the recognizer's label space");
        }
        const auto clip = make_clip_4_4(p.input, p.generated);
        const auto s = recognizer.scores(clip, ViewContext::of(p.sample));
        const double best = *std::max_element(s.begin(), s.end());
        if (best > 0.0 && s[it->second] == best) {
            ++correct;
        }
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(pairs.size());
}

EditFn model_editor(Denoiser model, NoiseSchedule schedule, SamplerSettings settings)
{
    model->eval();
    auto fn = model->noise_fn();
    return [fn, schedule = std::move(schedule), settings](const torch::Tensor& inputs, const torch::Tensor& tokens,
                                                          std::uint64_t seed) {
        return sample_edit(fn, schedule, inputs, tokens, settings.guidance, settings.steps, seed, settings.options);
    };
}

std::pair<double, double> mean_and_variance(std::span<const double> values)
{
    if (values.empty()) {
        return {0.0, 0.0};
    }
    double mean = 0.0;
    for (double v : values) {
        mean += v;
    }
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) {
        var += (v - mean) * (v - mean);
    }
    return {mean, var / static_cast<double>(values.size())};
}

EvalReport evaluate_run(const EditFn& edit, const Vocabulary& vocab, const std::filesystem::path& manifest,
                        std::span<const EditSample> samples, ActionRecognizer* recognizer,
                        FeatureExtractor& extractor, const EvalConfig& cfg)
{
    if (samples.empty()) {
        throw std::invalid_argument("evaluate_run: no samples");
    }
    if (cfg.seeds.empty() || cfg.batch_size < 1) {
        throw std::invalid_argument("evaluate_run: need at least one seed and a positive batch size");
    }
    const auto data = load_pairs(manifest, samples);
    const auto tokens = vocab.encode_batch(data.instructions);
    const bool use_oracle = std::all_of(samples.begin(), samples.end(), [](const EditSample& s) {
        return s.action.has_value();
    });
    if (!use_oracle && recognizer == nullptr) {
        throw std::invalid_argument("evaluate_run: samples without action metadata need a recognizer");
    }

    const auto n = static_cast<std::int64_t>(samples.size());
    std::vector<Image> inputs;
    std::vector<Image> targets;
    for (std::int64_t k = 0; k < n; ++k) {
        inputs.push_back(tensor_to_image(data.inputs[k]));
        targets.push_back(tensor_to_image(data.edited[k]));
    }
    torch::Tensor input_features;
    if (!cfg.long_distance) {
        input_features = extractor.extract(data.inputs);
    }
    const auto target_features = extractor.extract(data.edited);

    EvalReport report;
    report.acc_source = use_oracle ? "oracle" : "learned";
    report.n_seeds = static_cast<int>(cfg.seeds.size());
    for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
        const auto seed = cfg.seeds[si];
        std::vector<torch::Tensor> chunks;
        for (std::int64_t b0 = 0, batch = 0; b0 < n; b0 += cfg.batch_size, ++batch) {
            const auto b1 = std::min<std::int64_t>(n, b0 + cfg.batch_size);
            chunks.push_back(quantize_tensor(edit(data.inputs.slice(0, b0, b1), tokens.slice(0, b0, b1),
                                                  derive_seed(seed, static_cast<std::uint64_t>(batch)))));
        }
        const auto generated = torch::cat(chunks, 0);

        std::vector<EvalPair> pairs;
        for (std::int64_t k = 0; k < n; ++k) {
            pairs.push_back({inputs[k], tensor_to_image(generated[k]), samples[k]});
        }
        std::size_t oracle_hits = 0;
        std::size_t learned_hits = 0;
        for (std::int64_t k = 0; k < n; ++k) {
            SampleRecord rec;
            rec.index = static_cast<std::size_t>(k);
            rec.seed = seed;
            rec.action_id = samples[k].action_id;
            if (use_oracle) {
                rec.oracle_correct = action_accuracy_oracle(std::span(&pairs[k], 1)) > 0.0;
                oracle_hits += *rec.oracle_correct ? 1 : 0;
            }
            if (recognizer != nullptr) {
                rec.learned_correct = action_accuracy_learned(std::span(&pairs[k], 1), *recognizer) > 0.0;
                learned_hits += *rec.learned_correct ? 1 : 0;
            }
            report.per_sample.push_back(rec);
        }
        const double denom = static_cast<double>(n);
        if (recognizer != nullptr) {
            report.learned_acc_per_seed.push_back(100.0 * static_cast<double>(learned_hits) / denom);
        }
        report.acc_per_seed.push_back(use_oracle ? 100.0 * static_cast<double>(oracle_hits) / denom
                                                 : report.learned_acc_per_seed.back());

        const auto gen_features = extractor.extract(generated);
        if (!cfg.long_distance) {
            report.fid_input_per_seed.push_back(fid(gen_features, input_features));
        }
        report.fid_output_per_seed.push_back(fid(gen_features, target_features));

        if (si == 0 && !cfg.grid_path.empty()) {
            std::vector<Image> rows;
            for (std::int64_t k = 0; k < std::min<std::int64_t>(n, cfg.grid_rows); ++k) {
                const std::vector<Image> row{inputs[k], pairs[k].generated, targets[k]};
                rows.push_back(hconcat(row));
            }
            write_image(cfg.grid_path, vconcat(rows));
        }
    }
    std::tie(report.acc_mean, report.acc_var) = mean_and_variance(report.acc_per_seed);
    std::tie(report.fid_output_mean, report.fid_output_var) = mean_and_variance(report.fid_output_per_seed);
    if (!cfg.long_distance) {
        const auto [m, v] = mean_and_variance(report.fid_input_per_seed);
        report.fid_input_mean = m;
        report.fid_input_var = v;
    }
    if (recognizer != nullptr) {
        const auto [m, v] = mean_and_variance(report.learned_acc_per_seed);
        report.learned_acc_mean = m;
        report.learned_acc_var = v;
    }
    return report;
}

nlohmann::json report_to_json(const EvalReport& r)
{
    nlohmann::json j = {{"name", r.name},
                        {"acc_mean", r.acc_mean},
                        {"acc_var", r.acc_var},
                        {"acc_source", r.acc_source},
                        {"fid_output_mean", r.fid_output_mean},
                        {"fid_output_var", r.fid_output_var},
                        {"n_seeds", r.n_seeds},
                        {"acc_per_seed", r.acc_per_seed},
                        {"fid_output_per_seed", r.fid_output_per_seed}};
    if (r.fid_input_mean) {
        j["fid_input_mean"] = *r.fid_input_mean;
        j["fid_input_var"] = *r.fid_input_var;
        j["fid_input_per_seed"] = r.fid_input_per_seed;
    }
    if (r.learned_acc_mean) {
        j["learned_acc_mean"] = *r.learned_acc_mean;
        j["learned_acc_var"] = *r.learned_acc_var;
        j["learned_acc_per_seed"] = r.learned_acc_per_seed;
    }
    auto& per = j["per_sample"] = nlohmann::json::array();
    for (const auto& s : r.per_sample) {
        nlohmann::json rec = {{"index", s.index}, {"seed", s.seed}, {"action_id", s.action_id}};
        if (s.oracle_correct) {
            rec["oracle_correct"] = *s.oracle_correct;
        }
        if (s.learned_correct) {
            rec["learned_correct"] = *s.learned_correct;
        }
        per.push_back(rec);
    }
    return j;
}

std::string format_report_table(std::span<const EvalReport> reports)
{
    const std::vector<std::string> header{"Method", "Acc", "FID_input", "FID_output"};
    std::vector<std::vector<std::string>> rows{header};
    for (const auto& r : reports) {
        rows.push_back({r.name.empty() ? "-" : r.name, fmt(r.acc_mean) + " ± " + fmt(r.acc_var),
                        r.fid_input_mean ? fmt(*r.fid_input_mean) + " ± " + fmt(*r.fid_input_var) : "-",
                        fmt(r.fid_output_mean) + " ± " + fmt(r.fid_output_var)});
    }
    // "±" is two bytes but one column wide.
    const auto width = [](const std::string& s) {
        std::size_t w = 0;
        for (unsigned char c : s) {
            w += (c & 0xC0) != 0x80 ? 1 : 0;
        }
        return w;
    };
    std::vector<std::size_t> widths(header.size(), 0);
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            widths[c] = std::max(widths[c], width(row[c]));
        }
    }
    std::ostringstream os;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            os << (c == 0 ? "" : " | ") << rows[r][c] << std::string(widths[c] - width(rows[r][c]), ' ');
        }
        os << '\n';
        if (r == 0) {
            for (std::size_t c = 0; c < widths.size(); ++c) {
                os << (c == 0 ? "" : "-|-") << std::string(widths[c], '-');
            }
            os << '\n';
        }
    }
    return os.str();
}

double measure_inference_time(const std::function<void()>& edit_once, int repeats)
{
    if (repeats < 1) {
        throw std::invalid_argument("measure_inference_time: repeats must be positive");
    }
    edit_once();
    std::vector<double> times;
    for (int k = 0; k < repeats; ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        edit_once();
        times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    std::sort(times.begin(), times.end());
    const auto mid = times.size() / 2;
    return times.size() % 2 == 1 ? times[mid] : 0.5 * (times[mid - 1] + times[mid]);
}

} // namespace editaction

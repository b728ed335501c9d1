// SPDX-License-Identifier: Apache-2.0
#include "editaction/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <opencv2/imgproc.hpp>
#include <opencv2/videoio.hpp>

namespace editaction {

namespace {

std::string_view source_name(SampleSource s)
{
    return s == SampleSource::synthetic ? "synthetic" : "video";
}

SampleSource source_from_string(std::string_view s)
{
    if (s == "synthetic") {
        return SampleSource::synthetic;
    }
    if (s == "video") {
        return SampleSource::video;
    }
    throw ManifestError("unknown sample source: " + std::string(s));
}

nlohmann::json object_id_json(ObjectId id)
{
    return {{"shape", to_string(id.shape)}, {"color", to_string(id.color)}};
}

ObjectId object_id_from_json(const nlohmann::json& j)
{
    return {shape_from_string(j.at("shape").get<std::string>()), color_from_string(j.at("color").get<std::string>())};
}

nlohmann::json camera_json(const Camera& c)
{
    return {{"cx", c.cx}, {"cy", c.cy}, {"zoom", c.zoom}};
}

Camera camera_from_json(const nlohmann::json& j)
{
    return {j.at("cx").get<double>(), j.at("cy").get<double>(), j.at("zoom").get<double>()};
}

std::string trim(std::string s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

Image mat_to_image(const cv::Mat& bgr, int resolution)
{
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    if (resolution > 0 && (rgb.rows != resolution || rgb.cols != resolution)) {
        cv::resize(rgb, rgb, cv::Size(resolution, resolution), 0, 0, cv::INTER_AREA);
    }
    Image img(rgb.rows, rgb.cols);
    for (int y = 0; y < rgb.rows; ++y) {
        const auto* row = rgb.ptr<std::uint8_t>(y);
        for (int x = 0; x < rgb.cols; ++x) {
            for (int c = 0; c < 3; ++c) {
                img.at(y, x, c) = from_byte(row[x * 3 + c]);
            }
        }
    }
    return img;
}

Image resize_image(const Image& img, int resolution)
{
    if (resolution <= 0 || (img.height() == resolution && img.width() == resolution)) {
        return img;
    }
    cv::Mat rgb(img.height(), img.width(), CV_8UC3);
    for (int y = 0; y < img.height(); ++y) {
        auto* row = rgb.ptr<std::uint8_t>(y);
        for (int x = 0; x < img.width(); ++x) {
            for (int c = 0; c < 3; ++c) {
                row[x * 3 + c] = to_byte(img.at(y, x, c));
            }
        }
    }
    cv::Mat bgr;
    cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
    return mat_to_image(bgr, resolution);
}

} // namespace

void to_json(nlohmann::json& j, const InstructionText& c)
{
    j = {{"raw", c.raw}, {"tokens", c.tokens}, {"verb", c.verb}, {"object", c.object}};
    if (c.start_point) {
        j["start_point"] = *c.start_point;
    }
    if (c.end_point) {
        j["end_point"] = *c.end_point;
    }
}

void from_json(const nlohmann::json& j, InstructionText& c)
{
    j.at("raw").get_to(c.raw);
    j.at("tokens").get_to(c.tokens);
    j.at("verb").get_to(c.verb);
    j.at("object").get_to(c.object);
    c.start_point = j.contains("start_point") ? std::optional(j.at("start_point").get<std::string>()) : std::nullopt;
    c.end_point = j.contains("end_point") ? std::optional(j.at("end_point").get<std::string>()) : std::nullopt;
}

void to_json(nlohmann::json& j, const ActionSpec& a)
{
    j = {{"verb", to_string(a.verb)}, {"target", object_id_json(a.target)}, {"magnitude", a.magnitude}};
    if (a.partner) {
        j["partner"] = object_id_json(*a.partner);
    }
    if (a.location) {
        j["location"] = kLocationNames.at(*a.location);
    }
}

void from_json(const nlohmann::json& j, ActionSpec& a)
{
    a.verb = verb_from_string(j.at("verb").get<std::string>());
    a.target = object_id_from_json(j.at("target"));
    a.magnitude = j.at("magnitude").get<int>();
    a.partner = j.contains("partner") ? std::optional(object_id_from_json(j.at("partner"))) : std::nullopt;
    a.location = j.contains("location") ? std::optional(location_from_string(j.at("location").get<std::string>()))
                                        : std::nullopt;
}

void to_json(nlohmann::json& j, const EditSample& s)
{
    j = {{"input_path", s.input_path},
         {"edited_path", s.edited_path},
         {"instruction", s.instruction},
         {"action_id", s.action_id},
         {"regime", to_string(s.regime)},
         {"long_distance", s.long_distance},
         {"source", source_name(s.source)}};
    if (s.action) {
        j["action"] = *s.action;
    }
    if (s.camera_before) {
        j["camera_before"] = camera_json(*s.camera_before);
    }
    if (s.camera_after) {
        j["camera_after"] = camera_json(*s.camera_after);
    }
}

void from_json(const nlohmann::json& j, EditSample& s)
{
    j.at("input_path").get_to(s.input_path);
    j.at("edited_path").get_to(s.edited_path);
    j.at("instruction").get_to(s.instruction);
    j.at("action_id").get_to(s.action_id);
    s.regime = regime_from_string(j.at("regime").get<std::string>());
    j.at("long_distance").get_to(s.long_distance);
    s.source = source_from_string(j.at("source").get<std::string>());
    s.action = j.contains("action") ? std::optional(j.at("action").get<ActionSpec>()) : std::nullopt;
    s.camera_before = j.contains("camera_before") ? std::optional(camera_from_json(j.at("camera_before"))) : std::nullopt;
    s.camera_after = j.contains("camera_after") ? std::optional(camera_from_json(j.at("camera_after"))) : std::nullopt;
    if (s.regime == Regime::lc && s.long_distance) {
        throw ManifestError("LC sample flagged long-distance: " + s.input_path);
    }
}

void write_manifest(const std::filesystem::path& path, std::span<const EditSample> samples)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write manifest " + path.string());
    }
    out << nlohmann::json{{"schema", kManifestSchema}, {"version", kManifestVersion}}.dump() << '\n';
    for (const auto& s : samples) {
        out << nlohmann::json(s).dump() << '\n';
    }
    if (!out) {
        throw std::runtime_error("write failed for manifest " + path.string());
    }
}

std::filesystem::path resolve_path(const std::filesystem::path& manifest, const std::string& sample_path)
{
    const std::filesystem::path p(sample_path);
    return p.is_absolute() ? p : manifest.parent_path() / p;
}

std::vector<EditSample> read_manifest(const std::filesystem::path& path, bool strict)
{
    std::ifstream in(path);
    if (!in) {
        throw ManifestError("cannot open manifest " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw ManifestError("empty manifest " + path.string());
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
        throw ManifestError("manifest header is not a schema record: " + path.string());
    }
    if (!header.is_object() || header.value("schema", "") != kManifestSchema) {
        throw ManifestError("manifest header is not a schema record: " + path.string());
    }
    if (header.value("version", -1) != kManifestVersion) {
        throw ManifestError("unsupported manifest version " + header.value("version", nlohmann::json()).dump() +
                            " in " + path.string() + " (expected " + std::to_string(kManifestVersion) + ")");
    }
    std::vector<EditSample> samples;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        try {
            samples.push_back(nlohmann::json::parse(line).get<EditSample>());
        } catch (const nlohmann::json::exception& e) {
            throw ManifestError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const std::invalid_argument& e) {
            throw ManifestError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (strict) {
        for (const auto& s : samples) {
            for (const auto* p : {&s.input_path, &s.edited_path}) {
                const auto full = resolve_path(path, *p);
                if (!std::filesystem::exists(full)) {
                    throw ManifestError("missing image file: " + full.string());
                }
            }
        }
    }
    return samples;
}

std::vector<SegmentAnnotation> read_annotations(const std::filesystem::path& path, char delimiter)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open annotations " + path.string());
    }
    std::vector<SegmentAnnotation> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty() || trim(line).front() == '#') {
            continue;
        }
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, delimiter)) {
            fields.push_back(trim(field));
        }
        if (!fields.empty() && fields[0] == "video_id") {
            continue;
        }
        if (fields.size() < 5) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected at least 5 columns");
        }
        SegmentAnnotation a;
        a.video_id = fields[0];
        try {
            a.start_time = std::stod(fields[1]);
            a.end_time = std::stod(fields[2]);
        } catch (const std::exception&) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": bad timestamp");
        }
        a.verb = fields[3];
        a.object = fields[4];
        if (fields.size() > 5 && !fields[5].empty()) {
            a.start_point = fields[5];
        }
        if (fields.size() > 6 && !fields[6].empty()) {
            a.end_point = fields[6];
        }
        out.push_back(std::move(a));
    }
    return out;
}

InstructionText instruction_from_annotation(const SegmentAnnotation& a)
{
    std::string raw = a.verb + " " + a.object;
    if (a.start_point) {
        raw += " from " + *a.start_point;
    }
    if (a.end_point) {
        raw += " to " + *a.end_point;
    }
    return make_instruction_text(raw, a.verb, a.object, a.start_point, a.end_point);
}

VideoFileSource::VideoFileSource(std::filesystem::path dir, std::string extension)
    : dir_(std::move(dir)), extension_(std::move(extension))
{
}

std::optional<double> VideoFileSource::duration(const std::string& video_id)
{
    cv::VideoCapture cap((dir_ / (video_id + extension_)).string());
    if (!cap.isOpened()) {
        return std::nullopt;
    }
    const double fps = cap.get(cv::CAP_PROP_FPS);
    const double frames = cap.get(cv::CAP_PROP_FRAME_COUNT);
    if (fps <= 0.0 || frames <= 0.0) {
        return std::nullopt;
    }
    return frames / fps;
}

std::optional<Image> VideoFileSource::frame_at(const std::string& video_id, double seconds)
{
    cv::VideoCapture cap((dir_ / (video_id + extension_)).string());
    if (!cap.isOpened()) {
        return std::nullopt;
    }
    const double fps = cap.get(cv::CAP_PROP_FPS);
    if (fps <= 0.0) {
        return std::nullopt;
    }
    // Frame k shows time k / fps; take the first one at or after `seconds`.
    const auto index = static_cast<int>(std::ceil(seconds * fps - 1e-9));
    cap.set(cv::CAP_PROP_POS_FRAMES, index);
    cv::Mat frame;
    if (!cap.read(frame) || frame.empty()) {
        return std::nullopt;
    }
    return mat_to_image(frame, 0);
}

ExtractResult extract_pairs(std::span<const SegmentAnnotation> annotations, FrameSource& frames,
                            const ExtractOptions& opts)
{
    ExtractResult result;
    for (std::size_t k = 0; k < annotations.size(); ++k) {
        const auto& a = annotations[k];
        if (!(a.start_time >= 0.0 && a.start_time < a.end_time)) {
            throw std::invalid_argument("annotation " + std::to_string(k) + ": need 0 <= start_time < end_time");
        }
    }
    for (std::size_t k = 0; k < annotations.size(); ++k) {
        const auto& a = annotations[k];
        const auto length = frames.duration(a.video_id);
        if (!length) {
            result.skipped.push_back({k, "unreadable video " + a.video_id});
            continue;
        }
        if (a.end_time > *length) {
            result.skipped.push_back({k, "segment ends after the video (" + std::to_string(*length) + " s)"});
            continue;
        }
        auto first = frames.frame_at(a.video_id, a.start_time);
        auto last = frames.frame_at(a.video_id, a.end_time);
        if (!first || !last) {
            result.skipped.push_back({k, "no decodable frame in segment of " + a.video_id});
            continue;
        }
        char name[32];
        std::snprintf(name, sizeof(name), "%06zu", k);
        EditSample s;
        s.input_path = std::string("images/") + name + "_in.png";
        s.edited_path = std::string("images/") + name + "_out.png";
        write_image(opts.out_dir / s.input_path, resize_image(*first, opts.resolution));
        write_image(opts.out_dir / s.edited_path, resize_image(*last, opts.resolution));
        s.instruction = instruction_from_annotation(a);
        s.action_id = a.verb + ":" + a.object;
        s.regime = opts.regime;
        s.source = SampleSource::video;
        result.samples.push_back(std::move(s));
    }
    return result;
}

DatasetStats dataset_stats(std::span<const EditSample> samples)
{
    DatasetStats st;
    std::set<std::string> actions;
    for (const auto& s : samples) {
        ++st.pairs;
        const bool start = s.instruction.start_point.has_value();
        const bool end = s.instruction.end_point.has_value();
        st.with_start += start ? 1 : 0;
        st.with_end += end ? 1 : 0;
        st.verb_object_only += (!start && !end) ? 1 : 0;
        st.long_distance += s.long_distance ? 1 : 0;
        actions.insert(s.action_id);
    }
    st.distinct_actions = actions.size();
    return st;
}

nlohmann::json stats_to_json(const DatasetStats& s)
{
    return {{"pairs", s.pairs},
            {"distinct_actions", s.distinct_actions},
            {"with_start", s.with_start},
            {"with_end", s.with_end},
            {"verb_object_only", s.verb_object_only},
            {"long_distance", s.long_distance},
            {"start_fraction", s.fraction(s.with_start)},
            {"end_fraction", s.fraction(s.with_end)},
            {"verb_object_only_fraction", s.fraction(s.verb_object_only)}};
}

Split split(std::span<const EditSample> samples, std::size_t n_test, std::size_t n_long_distance, std::uint64_t seed)
{
    Rng rng(seed);
    std::vector<std::size_t> flagged;
    for (std::size_t k = 0; k < samples.size(); ++k) {
        if (samples[k].long_distance) {
            flagged.push_back(k);
        }
    }
    if (flagged.size() < n_long_distance) {
        throw std::invalid_argument("split: " + std::to_string(flagged.size()) + " long-distance candidates, need " +
                                    std::to_string(n_long_distance));
    }
    std::shuffle(flagged.begin(), flagged.end(), rng);
    std::vector<bool> taken(samples.size(), false);
    Split out;
    for (std::size_t k = 0; k < n_long_distance; ++k) {
        taken[flagged[k]] = true;
        out.test_long_distance.push_back(samples[flagged[k]]);
    }
    std::vector<std::size_t> rest;
    for (std::size_t k = 0; k < samples.size(); ++k) {
        if (!taken[k]) {
            rest.push_back(k);
        }
    }
    if (rest.size() < n_test) {
        throw std::invalid_argument("split: " + std::to_string(rest.size()) + " samples left for " +
                                    std::to_string(n_test) + " random test items");
    }
    std::shuffle(rest.begin(), rest.end(), rng);
    for (std::size_t k = 0; k < n_test; ++k) {
        taken[rest[k]] = true;
        out.test_random.push_back(samples[rest[k]]);
    }
    for (std::size_t k = 0; k < samples.size(); ++k) {
        if (!taken[k]) {
            out.train.push_back(samples[k]);
        }
    }
    return out;
}

std::vector<Verb> default_verbs(Regime regime)
{
    std::vector<Verb> verbs(kVerbs.begin(), kVerbs.end());
    if (regime == Regime::lc) {
        std::erase(verbs, Verb::move_to);
    }
    return verbs;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index)
{
    // splitmix64 finalizer over the combined value
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

namespace {

/// Fraction of sampled actions that are move_to under this world and verb
/// list, from a fixed-seed Monte-Carlo run cached per configuration.
double move_to_share(const WorldConfig& wc, const std::vector<Verb>& verbs)
{
    if (std::find(verbs.begin(), verbs.end(), Verb::move_to) == verbs.end()) {
        return 0.0;
    }
    std::ostringstream key;
    key << wc.min_objects << '/' << wc.max_objects << '/' << wc.arena.x0 << ',' << wc.arena.y0 << ','
        << wc.arena.x1 << ',' << wc.arena.y1 << '/' << wc.move_distance << '/';
    for (double sc : wc.scales) {
        key << sc << ',';
    }
    for (Verb v : verbs) {
        key << to_string(v) << ',';
    }
    static std::mutex mu;
    static std::map<std::string, double> cache;
    const std::lock_guard lock(mu);
    if (const auto it = cache.find(key.str()); it != cache.end()) {
        return it->second;
    }
    Rng rng(0x6d6f7665);
    int hits = 0;
    int total = 0;
    while (total < 20000) {
        const auto scene = sample_scene(rng, wc);
        if (const auto a = sample_action(scene, verbs, wc, rng)) {
            hits += a->verb == Verb::move_to ? 1 : 0;
            ++total;
        }
    }
    return cache[key.str()] = static_cast<double>(hits) / total;
}

/// The style for the optional phrases of every verb but move_to, which
/// always names its destination. Lowering the end rate by the move_to share
/// keeps the overall end-point frequency at the requested value.
InstructionStyle style_without_move_to(InstructionStyle style, double share)
{
    if (share <= 0.0) {
        return style;
    }
    style.p_end = std::max(0.0, (style.p_end - share) / (1.0 - share));
    style.p_verb_object_only = std::min(1.0, style.p_verb_object_only / (1.0 - share));
    return style;
}

} // namespace

SyntheticPair synthesize_pair(const GenerateConfig& cfg, const std::vector<Verb>& verbs, Rng& rng)
{
    WorldConfig wc;
    wc.min_objects = cfg.min_objects;
    wc.max_objects = cfg.max_objects;
    wc.scales = cfg.scales;
    wc.backgrounds = cfg.backgrounds;
    wc.arena = arena_for(cfg.regime);
    const InstructionStyle style = cfg.style.value_or(InstructionStyle::for_regime(cfg.regime));
    const InstructionStyle other_style = style_without_move_to(style, move_to_share(wc, verbs));
    for (int attempt = 0; attempt < 10000; ++attempt) {
        SceneSpec before = sample_scene(rng, wc);
        const auto action = sample_action(before, verbs, wc, rng);
        if (!action) {
            continue;
        }
        SyntheticPair p;
        if (cfg.regime == Regime::hc) {
            // The input view is centered on the target before the action.
            const ObjectState& t = *before.find(action->target);
            const double half = before.camera.half_extent();
            before.camera.cx = std::clamp(std::floor(t.x + t.scale / 2.0 + 0.5), half, kWorldCells - half);
            before.camera.cy = std::clamp(std::floor(t.y + t.scale / 2.0 + 0.5), half, kWorldCells - half);
        }
        p.after = apply_action(before, *action, wc.arena);
        if (cfg.regime == Regime::hc) {
            const auto r = recenter_camera(before, *action, wc.arena);
            p.after.camera = r.camera;
            p.long_distance = r.long_distance;
        }
        p.before = before;
        p.action = *action;
        p.instruction = make_instruction(p.action, p.before, p.after, wc.arena, rng,
                                         p.action.verb == Verb::move_to ? style : other_style);
        return p;
    }
    throw std::runtime_error("synthesize_pair: no valid action found; check the verb list and object counts");
}

GeneratedDataset generate_dataset(const GenerateConfig& cfg, std::uint64_t seed, const std::filesystem::path& out_dir,
                                  int workers)
{
    if (cfg.count < 0 || cfg.held_out_count < 0) {
        throw std::invalid_argument("generate_dataset: negative sample count");
    }
    std::vector<Verb> all = cfg.verbs.empty() ? default_verbs(cfg.regime) : cfg.verbs;
    std::vector<Verb> train_verbs;
    for (Verb v : all) {
        if (std::find(cfg.held_out_verbs.begin(), cfg.held_out_verbs.end(), v) == cfg.held_out_verbs.end()) {
            train_verbs.push_back(v);
        }
    }
    if (train_verbs.empty()) {
        throw std::invalid_argument("generate_dataset: every verb is held out");
    }

    const auto total = static_cast<std::size_t>(cfg.count + (cfg.held_out_verbs.empty() ? 0 : cfg.held_out_count));
    std::vector<EditSample> samples(total);
    const auto make = [&](std::size_t k) {
        const bool held = k >= static_cast<std::size_t>(cfg.count);
        Rng rng(derive_seed(seed, k));
        const auto p = synthesize_pair(cfg, held ? cfg.held_out_verbs : train_verbs, rng);
        char name[32];
        std::snprintf(name, sizeof(name), "%06zu", k);
        EditSample s;
        s.input_path = std::string("images/") + name + "_in.png";
        s.edited_path = std::string("images/") + name + "_out.png";
        write_image(out_dir / s.input_path, render(p.before, cfg.resolution));
        write_image(out_dir / s.edited_path, render(p.after, cfg.resolution));
        s.instruction = p.instruction;
        s.action_id = action_label(p.action);
        s.regime = cfg.regime;
        s.long_distance = p.long_distance;
        s.source = SampleSource::synthetic;
        s.action = p.action;
        s.camera_before = p.before.camera;
        s.camera_after = p.after.camera;
        samples[k] = std::move(s);
    };

    std::filesystem::create_directories(out_dir / "images");
    const auto n_workers = static_cast<std::size_t>(std::max(1, workers));
    if (n_workers == 1 || total < 2) {
        for (std::size_t k = 0; k < total; ++k) {
            make(k);
        }
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(n_workers);
        for (std::size_t w = 0; w < n_workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t k = w; k < total; k += n_workers) {
                        make(k);
                    }
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) {
            t.join();
        }
        for (const auto& e : errors) {
            if (e) {
                std::rethrow_exception(e);
            }
        }
    }

    GeneratedDataset out;
    out.samples.assign(samples.begin(), samples.begin() + cfg.count);
    out.held_out.assign(samples.begin() + cfg.count, samples.end());
    out.manifest = out_dir / "manifest.jsonl";
    write_manifest(out.manifest, out.samples);
    if (!cfg.held_out_verbs.empty()) {
        out.held_out_manifest = out_dir / "heldout.jsonl";
        write_manifest(out.held_out_manifest, out.held_out);
    }
    return out;
}

torch::Tensor image_to_tensor(const Image& img)
{
    auto t = torch::empty({img.height(), img.width(), 3}, torch::kFloat32);
    std::copy(img.data().begin(), img.data().end(), t.data_ptr<float>());
    return t.permute({2, 0, 1}).contiguous();
}

Image tensor_to_image(const torch::Tensor& t)
{
    TORCH_CHECK(t.dim() == 3 && t.size(0) == 3, "tensor_to_image: expected [3, H, W]");
    const auto hwc = t.detach().to(torch::kFloat32).permute({1, 2, 0}).contiguous();
    Image img(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)));
    std::copy(hwc.data_ptr<float>(), hwc.data_ptr<float>() + hwc.numel(), img.data().begin());
    return img;
}

PairTensors load_pairs(const std::filesystem::path& manifest, std::span<const EditSample> samples)
{
    PairTensors out;
    std::vector<torch::Tensor> inputs;
    std::vector<torch::Tensor> edited;
    for (const auto& s : samples) {
        inputs.push_back(image_to_tensor(read_image(resolve_path(manifest, s.input_path))));
        edited.push_back(image_to_tensor(read_image(resolve_path(manifest, s.edited_path))));
        TORCH_CHECK(inputs.back().sizes() == edited.back().sizes(), "pair with unequal resolutions: ", s.input_path);
        out.instructions.push_back(s.instruction);
    }
    if (!samples.empty()) {
        out.inputs = torch::stack(inputs);
        out.edited = torch::stack(edited);
    }
    return out;
}

} // namespace editaction

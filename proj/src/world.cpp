// SPDX-License-Identifier: Apache-2.0
#include "editaction/world.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace editaction {

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<E, N>& all, const char* what)
{
    for (E e : all) {
        if (to_string(e) == s) {
            return e;
        }
    }
    throw std::invalid_argument(std::string("unknown ") + what + ": " + std::string(s));
}

struct Rgb {
    float r, g, b;
};

Rgb color_rgb(Color c)
{
    switch (c) {
    case Color::red: return {1, -1, -1};
    case Color::green: return {-1, 1, -1};
    case Color::blue: return {-1, -1, 1};
    case Color::yellow: return {1, 1, -1};
    case Color::magenta: return {1, -1, 1};
    case Color::cyan: return {-1, 1, 1};
    }
    return {0, 0, 0};
}

Rgb background_rgb(Background b)
{
    switch (b) {
    case Background::gray: return {0, 0, 0};
    case Background::black: return {-1, -1, -1};
    case Background::white: return {1, 1, 1};
    }
    return {0, 0, 0};
}

int footprint_pixels(double scale, double ppc)
{
    return static_cast<int>(std::lround(scale * ppc));
}

/// Membership test for pixel (col, row) of an n x n footprint.
bool shape_mask(Shape shape, int orientation, int n, int col, int row)
{
    for (int r = 0; r < ((orientation / 90) % 4 + 4) % 4; ++r) {
        const int c = row;
        row = n - 1 - col;
        col = c;
    }
    switch (shape) {
    case Shape::square: return true;
    case Shape::circle: {
        const int dx = 2 * col + 1 - n;
        const int dy = 2 * row + 1 - n;
        return dx * dx + dy * dy <= n * n;
    }
    case Shape::triangle: return col + row <= n - 1;
    case Shape::bar: return 4 * row >= n && 4 * row < 3 * n;
    }
    return false;
}

std::vector<int> orientations_of(Shape s)
{
    switch (s) {
    case Shape::triangle: return {0, 90, 180, 270};
    case Shape::bar: return {0, 90};
    default: return {0};
    }
}

int normalize_orientation(Shape s, int deg)
{
    deg = ((deg % 360) + 360) % 360;
    if (s == Shape::bar) {
        return deg % 180;
    }
    return is_orientable(s) ? deg : 0;
}

bool overlaps_with_gap(const ObjectState& a, const ObjectState& b)
{
    return a.x < b.x + b.scale + 1 && b.x < a.x + a.scale + 1 && a.y < b.y + b.scale + 1 &&
           b.y < a.y + a.scale + 1;
}

bool inside(const ObjectState& o, const Rect& r)
{
    return o.x >= r.x0 && o.y >= r.y0 && o.x + o.scale <= r.x1 && o.y + o.scale <= r.y1;
}

void sort_objects(std::vector<ObjectState>& objs)
{
    std::sort(objs.begin(), objs.end(), [](const ObjectState& a, const ObjectState& b) {
        return std::pair(a.shape, a.color) < std::pair(b.shape, b.color);
    });
}

double uniform01(Rng& rng)
{
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

template <typename T>
const T& pick(const std::vector<T>& v, Rng& rng)
{
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

} // namespace

std::string_view to_string(Shape s)
{
    switch (s) {
    case Shape::square: return "square";
    case Shape::circle: return "circle";
    case Shape::triangle: return "triangle";
    case Shape::bar: return "bar";
    }
    return "?";
}

std::string_view to_string(Color c)
{
    switch (c) {
    case Color::red: return "red";
    case Color::green: return "green";
    case Color::blue: return "blue";
    case Color::yellow: return "yellow";
    case Color::magenta: return "magenta";
    case Color::cyan: return "cyan";
    }
    return "?";
}

std::string_view to_string(Background b)
{
    switch (b) {
    case Background::gray: return "gray";
    case Background::black: return "black";
    case Background::white: return "white";
    }
    return "?";
}

std::string_view to_string(Verb v)
{
    switch (v) {
    case Verb::move_left: return "move_left";
    case Verb::move_right: return "move_right";
    case Verb::move_up: return "move_up";
    case Verb::move_down: return "move_down";
    case Verb::rotate: return "rotate";
    case Verb::flip: return "flip";
    case Verb::swap_with: return "swap_with";
    case Verb::move_to: return "move_to";
    }
    return "?";
}

std::string_view to_string(Regime r)
{
    return r == Regime::lc ? "lc" : "hc";
}

Shape shape_from_string(std::string_view s) { return parse_enum(s, kShapes, "shape"); }
Color color_from_string(std::string_view s) { return parse_enum(s, kColors, "color"); }
Background background_from_string(std::string_view s) { return parse_enum(s, kBackgrounds, "background"); }
Verb verb_from_string(std::string_view s) { return parse_enum(s, kVerbs, "verb"); }

Regime regime_from_string(std::string_view s)
{
    if (s == "lc" || s == "LC") {
        return Regime::lc;
    }
    if (s == "hc" || s == "HC") {
        return Regime::hc;
    }
    throw std::invalid_argument("unknown regime: " + std::string(s));
}

bool is_orientable(Shape s)
{
    return s == Shape::triangle || s == Shape::bar;
}

std::string object_phrase(ObjectId id)
{
    return std::string(to_string(id.color)) + " " + std::string(to_string(id.shape));
}

const ObjectState* SceneSpec::find(ObjectId id) const
{
    for (const auto& o : objects) {
        if (o.id() == id) {
            return &o;
        }
    }
    return nullptr;
}

ObjectState* SceneSpec::find(ObjectId id)
{
    return const_cast<ObjectState*>(std::as_const(*this).find(id));
}

Rect arena_for(Regime regime)
{
    if (regime == Regime::hc) {
        return {0, 0, kWorldCells, kWorldCells};
    }
    return viewport_rect(Camera{});
}

Rect viewport_rect(const Camera& cam)
{
    return {cam.left(), cam.top(), cam.cx + cam.half_extent(), cam.cy + cam.half_extent()};
}

int location_of(const ObjectState& obj, const Rect& arena)
{
    const double cx = obj.x + obj.scale / 2.0;
    const double cy = obj.y + obj.scale / 2.0;
    const auto band = [](double v, double lo, double hi) {
        const double f = (v - lo) / (hi - lo);
        return std::clamp(static_cast<int>(std::floor(f * 3.0)), 0, 2);
    };
    return band(cy, arena.y0, arena.y1) * 3 + band(cx, arena.x0, arena.x1);
}

int location_from_string(std::string_view name)
{
    for (std::size_t i = 0; i < kLocationNames.size(); ++i) {
        if (kLocationNames[i] == name) {
            return static_cast<int>(i);
        }
    }
    throw std::invalid_argument("unknown location: " + std::string(name));
}

std::string action_label(const ActionSpec& a)
{
    const auto id = [](ObjectId o) { return std::string(to_string(o.color)) + "_" + std::string(to_string(o.shape)); };
    std::string label(to_string(a.verb));
    if (a.verb == Verb::rotate) {
        label += "_" + std::to_string(a.magnitude);
    }
    label += ":" + id(a.target);
    if (a.partner) {
        label += "+" + id(*a.partner);
    }
    if (a.location) {
        std::string where(kLocationNames.at(*a.location));
        std::replace(where.begin(), where.end(), ' ', '_');
        label += "@" + where;
    }
    return label;
}

bool scene_is_valid(const SceneSpec& scene, const Rect& arena)
{
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
        const auto& a = scene.objects[i];
        if (!inside(a, arena)) {
            return false;
        }
        for (std::size_t j = i + 1; j < scene.objects.size(); ++j) {
            const auto& b = scene.objects[j];
            if (a.id() == b.id() || overlaps_with_gap(a, b)) {
                return false;
            }
        }
    }
    return true;
}

SceneSpec sample_scene(Rng& rng, const WorldConfig& cfg)
{
    if (cfg.min_objects < 0 || cfg.max_objects < cfg.min_objects || cfg.scales.empty() || cfg.backgrounds.empty()) {
        throw std::invalid_argument("sample_scene: invalid world config");
    }
    std::vector<ObjectId> ids;
    for (Shape s : kShapes) {
        for (Color c : kColors) {
            ids.push_back({s, c});
        }
    }
    for (;;) {
        SceneSpec scene;
        scene.background = pick(cfg.backgrounds, rng);
        const int n = std::uniform_int_distribution<int>(cfg.min_objects, cfg.max_objects)(rng);
        std::shuffle(ids.begin(), ids.end(), rng);
        bool ok = true;
        for (int k = 0; k < n && ok; ++k) {
            ObjectState obj;
            obj.shape = ids[k].shape;
            obj.color = ids[k].color;
            obj.scale = pick(cfg.scales, rng);
            const auto orients = orientations_of(obj.shape);
            obj.orientation = pick(orients, rng);
            const int xlo = static_cast<int>(std::ceil(cfg.arena.x0));
            const int xhi = static_cast<int>(std::floor(cfg.arena.x1 - obj.scale));
            const int ylo = static_cast<int>(std::ceil(cfg.arena.y0));
            const int yhi = static_cast<int>(std::floor(cfg.arena.y1 - obj.scale));
            if (xhi < xlo || yhi < ylo) {
                throw std::invalid_argument("sample_scene: arena too small for object scale");
            }
            ok = false;
            for (int attempt = 0; attempt < 64; ++attempt) {
                obj.x = std::uniform_int_distribution<int>(xlo, xhi)(rng);
                obj.y = std::uniform_int_distribution<int>(ylo, yhi)(rng);
                if (std::none_of(scene.objects.begin(), scene.objects.end(),
                                 [&](const ObjectState& o) { return overlaps_with_gap(o, obj); })) {
                    ok = true;
                    break;
                }
            }
            if (ok) {
                scene.objects.push_back(obj);
            }
        }
        if (ok) {
            sort_objects(scene.objects);
            return scene;
        }
    }
}

std::pair<int, int> location_anchor(int location, double scale, const Rect& arena)
{
    if (location < 0 || location >= static_cast<int>(kLocationNames.size())) {
        throw std::invalid_argument("location index out of range");
    }
    const double w = (arena.x1 - arena.x0) / 3.0;
    const double h = (arena.y1 - arena.y0) / 3.0;
    const double cx = arena.x0 + w * (location % 3 + 0.5);
    const double cy = arena.y0 + h * (location / 3 + 0.5);
    return {static_cast<int>(std::floor(cx - scale / 2.0)), static_cast<int>(std::floor(cy - scale / 2.0))};
}

SceneSpec apply_action(const SceneSpec& scene, const ActionSpec& action, const Rect& arena)
{
    SceneSpec out = scene;
    ObjectState* target = out.find(action.target);
    if (target == nullptr) {
        throw std::invalid_argument("apply_action: target " + object_phrase(action.target) + " not in scene");
    }
    switch (action.verb) {
    case Verb::move_left: target->x -= action.magnitude; break;
    case Verb::move_right: target->x += action.magnitude; break;
    case Verb::move_up: target->y -= action.magnitude; break;
    case Verb::move_down: target->y += action.magnitude; break;
    case Verb::rotate:
        if (action.magnitude % 90 != 0) {
            throw std::invalid_argument("apply_action: rotation must be a multiple of 90 degrees");
        }
        target->orientation = normalize_orientation(target->shape, target->orientation + action.magnitude);
        break;
    case Verb::flip:
        if (target->shape == Shape::triangle) {
            static const std::map<int, int> mirror{{0, 90}, {90, 0}, {180, 270}, {270, 180}};
            target->orientation = mirror.at(target->orientation);
        } else if (target->shape == Shape::bar) {
            target->orientation = normalize_orientation(Shape::bar, 360 - target->orientation);
        }
        break;
    case Verb::swap_with: {
        if (!action.partner) {
            throw std::invalid_argument("apply_action: swap_with requires a partner");
        }
        ObjectState* partner = out.find(*action.partner);
        if (partner == nullptr || partner == target) {
            throw std::invalid_argument("apply_action: swap partner not in scene");
        }
        std::swap(target->x, partner->x);
        std::swap(target->y, partner->y);
        break;
    }
    case Verb::move_to: {
        if (!action.location) {
            throw std::invalid_argument("apply_action: move_to requires a location");
        }
        const auto [x, y] = location_anchor(*action.location, target->scale, arena);
        target->x = x;
        target->y = y;
        break;
    }
    }
    for (const auto& o : out.objects) {
        if (!inside(o, arena)) {
            throw std::invalid_argument("apply_action: " + object_phrase(o.id()) + " leaves the arena");
        }
    }
    if (!scene_is_valid(out, arena)) {
        throw std::invalid_argument("apply_action: result overlaps another object");
    }
    return out;
}

Recentering recenter_camera(const SceneSpec& before, const ActionSpec& action, const Rect& arena)
{
    const SceneSpec after = apply_action(before, action, arena);
    const ObjectState& t = *after.find(action.target);
    const double ex = t.x + t.scale / 2.0;
    const double ey = t.y + t.scale / 2.0;
    Recentering r;
    r.camera = before.camera;
    const double half = before.camera.half_extent();
    r.camera.cx = std::clamp(std::floor(ex + 0.5), half, kWorldCells - half);
    r.camera.cy = std::clamp(std::floor(ey + 0.5), half, kWorldCells - half);
    r.long_distance = !viewport_rect(before.camera).contains(ex, ey);
    return r;
}

Image render(const SceneSpec& scene, int resolution)
{
    if (resolution <= 0) {
        throw std::invalid_argument("render: resolution must be positive");
    }
    Image img(resolution, resolution);
    const Rgb bg = background_rgb(scene.background);
    img.fill_rgb(bg.r, bg.g, bg.b);
    const Camera& cam = scene.camera;
    const double ppc = resolution * cam.zoom / kViewportCells;
    for (const auto& o : scene.objects) {
        const int n = footprint_pixels(o.scale, ppc);
        const int ax = static_cast<int>(std::lround((o.x - cam.left()) * ppc));
        const int ay = static_cast<int>(std::lround((o.y - cam.top()) * ppc));
        const Rgb rgb = color_rgb(o.color);
        for (int row = 0; row < n; ++row) {
            const int py = ay + row;
            if (py < 0 || py >= resolution) {
                continue;
            }
            for (int col = 0; col < n; ++col) {
                const int px = ax + col;
                if (px < 0 || px >= resolution || !shape_mask(o.shape, o.orientation, n, col, row)) {
                    continue;
                }
                img.at(py, px, 0) = rgb.r;
                img.at(py, px, 1) = rgb.g;
                img.at(py, px, 2) = rgb.b;
            }
        }
    }
    return img;
}

ParseResult parse_scene(const Image& img, const Camera& camera, const ParseOptions& opts)
{
    ParseResult result;
    const int h = img.height();
    const int w = img.width();
    if (h == 0 || w == 0 || h != w) {
        result.failure = "image must be square and non-empty";
        return result;
    }
    const double ppc = w * camera.zoom / kViewportCells;

    // Palette labels: 0..5 object colors, 6..8 backgrounds, -1 unresolved.
    constexpr int kNumLabels = static_cast<int>(kColors.size() + kBackgrounds.size());
    std::array<Rgb, kNumLabels> palette{};
    for (std::size_t i = 0; i < kColors.size(); ++i) {
        palette[i] = color_rgb(kColors[i]);
    }
    for (std::size_t i = 0; i < kBackgrounds.size(); ++i) {
        palette[kColors.size() + i] = background_rgb(kBackgrounds[i]);
    }
    const double thr2 = opts.color_threshold * opts.color_threshold;
    std::vector<int> labels(static_cast<std::size_t>(h) * w, -1);
    std::array<int, kNumLabels> counts{};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            int best = -1;
            double best_d = thr2;
            for (int k = 0; k < kNumLabels; ++k) {
                const double dr = img.at(y, x, 0) - palette[k].r;
                const double dg = img.at(y, x, 1) - palette[k].g;
                const double db = img.at(y, x, 2) - palette[k].b;
                const double d = dr * dr + dg * dg + db * db;
                if (d <= best_d) {
                    best_d = d;
                    best = k;
                }
            }
            labels[static_cast<std::size_t>(y) * w + x] = best;
            if (best >= 0) {
                ++counts[best];
            }
        }
    }
    const auto bg_begin = counts.begin() + kColors.size();
    const auto bg_it = std::max_element(bg_begin, counts.end());
    if (*bg_it == 0) {
        result.failure = "no background pixels";
        return result;
    }
    SceneSpec scene;
    scene.background = kBackgrounds[static_cast<std::size_t>(bg_it - bg_begin)];
    scene.camera = camera;

    const int min_pixels = std::max(1, static_cast<int>(std::ceil(opts.speckle_fraction * ppc * ppc)));
    std::vector<char> seen(labels.size(), 0);
    std::vector<int> stack;
    for (int start = 0; start < h * w; ++start) {
        const int label = labels[start];
        if (label < 0 || label >= static_cast<int>(kColors.size()) || seen[start]) {
            continue;
        }
        // 4-connected component of one object color.
        std::vector<int> comp;
        stack.assign(1, start);
        seen[start] = 1;
        while (!stack.empty()) {
            const int p = stack.back();
            stack.pop_back();
            comp.push_back(p);
            const int py = p / w;
            const int px = p % w;
            const std::array<std::pair<int, int>, 4> nbrs{{{px - 1, py}, {px + 1, py}, {px, py - 1}, {px, py + 1}}};
            for (auto [nx, ny] : nbrs) {
                if (nx < 0 || ny < 0 || nx >= w || ny >= h) {
                    continue;
                }
                const int q = ny * w + nx;
                if (!seen[q] && labels[q] == label) {
                    seen[q] = 1;
                    stack.push_back(q);
                }
            }
        }
        if (static_cast<int>(comp.size()) < min_pixels) {
            continue;
        }
        int bx0 = w, by0 = h, bx1 = -1, by1 = -1;
        std::vector<char> in_comp(labels.size(), 0);
        for (int p : comp) {
            in_comp[p] = 1;
            bx0 = std::min(bx0, p % w);
            bx1 = std::max(bx1, p % w);
            by0 = std::min(by0, p / w);
            by1 = std::max(by1, p / w);
        }
        const bool touches_border = bx0 == 0 || by0 == 0 || bx1 == w - 1 || by1 == h - 1;

        double best_iou = -1.0;
        ObjectState best_obj;
        for (Shape shape : kShapes) {
            for (int orient : orientations_of(shape)) {
                for (double scale : kScaleLevels) {
                    const int n = footprint_pixels(scale, ppc);
                    // Template bounding box inside its footprint.
                    int tx0 = n, ty0 = n, tx1 = -1, ty1 = -1, area = 0;
                    for (int r = 0; r < n; ++r) {
                        for (int c = 0; c < n; ++c) {
                            if (shape_mask(shape, orient, n, c, r)) {
                                tx0 = std::min(tx0, c);
                                tx1 = std::max(tx1, c);
                                ty0 = std::min(ty0, r);
                                ty1 = std::max(ty1, r);
                                ++area;
                            }
                        }
                    }
                    if (area == 0) {
                        continue;
                    }
                    // Candidate anchors: cell-aligned positions near the bbox-implied anchor.
                    const double ax_guess = bx0 - tx0;
                    const double ay_guess = by0 - ty0;
                    const int reach = touches_border ? n : 1;
                    const int gx0 = static_cast<int>(std::floor((ax_guess - reach) / ppc + camera.left()));
                    const int gx1 = static_cast<int>(std::ceil((ax_guess + reach) / ppc + camera.left()));
                    const int gy0 = static_cast<int>(std::floor((ay_guess - reach) / ppc + camera.top()));
                    const int gy1 = static_cast<int>(std::ceil((ay_guess + reach) / ppc + camera.top()));
                    for (int gy = gy0; gy <= gy1; ++gy) {
                        for (int gx = gx0; gx <= gx1; ++gx) {
                            const int ax = static_cast<int>(std::lround((gx - camera.left()) * ppc));
                            const int ay = static_cast<int>(std::lround((gy - camera.top()) * ppc));
                            int inter = 0;
                            int tmpl = 0;
                            for (int r = 0; r < n; ++r) {
                                const int py = ay + r;
                                if (py < 0 || py >= h) {
                                    continue;
                                }
                                for (int c = 0; c < n; ++c) {
                                    const int px = ax + c;
                                    if (px < 0 || px >= w || !shape_mask(shape, orient, n, c, r)) {
                                        continue;
                                    }
                                    ++tmpl;
                                    inter += in_comp[py * w + px];
                                }
                            }
                            if (tmpl == 0) {
                                continue;
                            }
                            const double iou =
                                static_cast<double>(inter) / static_cast<double>(tmpl + comp.size() - inter);
                            if (iou > best_iou) {
                                best_iou = iou;
                                best_obj = ObjectState{shape, kColors[label], gx, gy, orient, scale};
                            }
                        }
                    }
                }
            }
        }
        if (best_iou < opts.min_match) {
            if (touches_border) {
                continue;
            }
            std::ostringstream msg;
            msg << "unresolved " << to_string(kColors[label]) << " region at (" << bx0 << "," << by0
                << "), best match " << best_iou;
            result.failure = msg.str();
            return result;
        }
        if (scene.find(best_obj.id()) != nullptr) {
            result.failure = "duplicate object " + object_phrase(best_obj.id());
            return result;
        }
        scene.objects.push_back(best_obj);
    }
    sort_objects(scene.objects);
    result.scene = std::move(scene);
    return result;
}

std::vector<std::string> tokenize(std::string_view raw)
{
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : raw) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!cur.empty()) {
                tokens.push_back(std::move(cur));
                cur.clear();
            }
        } else {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        }
    }
    if (!cur.empty()) {
        tokens.push_back(std::move(cur));
    }
    return tokens;
}

InstructionText make_instruction_text(std::string raw, std::string verb, std::string object,
                                      std::optional<std::string> start_point, std::optional<std::string> end_point)
{
    InstructionText t;
    t.tokens = tokenize(raw);
    t.raw = std::move(raw);
    t.verb = std::move(verb);
    t.object = std::move(object);
    t.start_point = std::move(start_point);
    t.end_point = std::move(end_point);
    return t;
}

InstructionStyle InstructionStyle::lc()
{
    return {0.6649, 0.3411, 0.2908};
}

InstructionStyle InstructionStyle::hc()
{
    return {0.0, 0.1890, 0.8110};
}

InstructionText make_instruction(const ActionSpec& action, const SceneSpec& before, const SceneSpec& after,
                                 const Rect& arena, Rng& rng, const InstructionStyle& style)
{
    const double p_both = std::max(0.0, style.p_start + style.p_end + style.p_verb_object_only - 1.0);
    const double p_start_only = std::max(0.0, style.p_start - p_both);
    const double p_end_only = std::max(0.0, style.p_end - p_both);
    const double u = uniform01(rng);
    bool with_start = u < p_both + p_start_only;
    bool with_end = u < p_both || (u >= p_both + p_start_only && u < p_both + p_start_only + p_end_only);
    if (action.verb == Verb::move_to && !with_end) {
        // The destination is the action's only argument; draw start from P(start | end).
        with_end = true;
        with_start = style.p_end > 0.0 && uniform01(rng) < p_both / style.p_end;
    }

    const std::string obj = object_phrase(action.target);
    const std::string mag = std::to_string(action.magnitude);
    std::vector<std::pair<std::string, std::string>> variants; // (verb word, phrase)
    switch (action.verb) {
    case Verb::move_left:
        variants = {{"move", "move " + obj + " left"}, {"shift", "shift the " + obj + " left"},
                    {"slide", "slide " + obj + " to the left"}};
        break;
    case Verb::move_right:
        variants = {{"move", "move " + obj + " right"}, {"shift", "shift the " + obj + " right"},
                    {"slide", "slide " + obj + " to the right"}};
        break;
    case Verb::move_up:
        variants = {{"move", "move " + obj + " up"}, {"shift", "shift the " + obj + " up"},
                    {"raise", "raise " + obj}};
        break;
    case Verb::move_down:
        variants = {{"move", "move " + obj + " down"}, {"shift", "shift the " + obj + " down"},
                    {"lower", "lower " + obj}};
        break;
    case Verb::rotate:
        variants = {{"rotate", "rotate " + obj + " " + mag + " degrees"},
                    {"turn", "turn the " + obj + " " + mag + " degrees"}};
        break;
    case Verb::flip:
        variants = {{"flip", "flip " + obj}, {"flip", "flip the " + obj + " over"}, {"mirror", "mirror the " + obj}};
        break;
    case Verb::swap_with: {
        const std::string other = action.partner ? object_phrase(*action.partner) : std::string("?");
        variants = {{"swap", "swap " + obj + " with " + other}, {"exchange", "exchange the " + obj + " and the " + other}};
        break;
    }
    case Verb::move_to:
        variants = {{"move", "move " + obj}, {"put", "put the " + obj}, {"carry", "carry " + obj}};
        break;
    }
    const auto& [verb_word, phrase] = pick(variants, rng);
    std::string raw = phrase;

    const bool moves = action.verb != Verb::rotate && action.verb != Verb::flip;
    std::optional<std::string> start;
    std::optional<std::string> end;
    if (with_start) {
        const ObjectState* t = before.find(action.target);
        start = std::string(kLocationNames[t != nullptr ? location_of(*t, arena) : 4]);
        raw += (moves ? " from the " : " at the ") + *start;
    }
    if (with_end) {
        const ObjectState* t = after.find(action.target);
        end = action.location ? std::string(kLocationNames[*action.location])
                              : std::string(kLocationNames[t != nullptr ? location_of(*t, arena) : 4]);
        raw += (moves ? " to the " : " ending at the ") + *end;
    }
    return make_instruction_text(std::move(raw), verb_word, obj, std::move(start), std::move(end));
}

std::optional<ActionSpec> sample_action(const SceneSpec& scene, const std::vector<Verb>& verbs,
                                        const WorldConfig& cfg, Rng& rng)
{
    if (verbs.empty() || scene.objects.empty()) {
        return std::nullopt;
    }
    for (int attempt = 0; attempt < 256; ++attempt) {
        ActionSpec a;
        a.verb = pick(verbs, rng);
        const ObjectState& target = pick(scene.objects, rng);
        a.target = target.id();
        switch (a.verb) {
        case Verb::move_left:
        case Verb::move_right:
        case Verb::move_up:
        case Verb::move_down: a.magnitude = cfg.move_distance; break;
        case Verb::rotate: {
            if (!is_orientable(target.shape)) {
                continue;
            }
            const std::vector<int> mags = target.shape == Shape::bar ? std::vector<int>{90, 270}
                                                                     : std::vector<int>{90, 180, 270};
            a.magnitude = pick(mags, rng);
            break;
        }
        case Verb::flip:
            if (target.shape != Shape::triangle) {
                continue;
            }
            break;
        case Verb::swap_with: {
            if (scene.objects.size() < 2) {
                continue;
            }
            const ObjectState* other = &pick(scene.objects, rng);
            if (other->id() == a.target) {
                continue;
            }
            a.partner = other->id();
            break;
        }
        case Verb::move_to:
            a.location = std::uniform_int_distribution<int>(0, static_cast<int>(kLocationNames.size()) - 1)(rng);
            break;
        }
        try {
            if (apply_action(scene, a, cfg.arena) != scene) {
                return a;
            }
        } catch (const std::invalid_argument&) {
        }
    }
    return std::nullopt;
}

} // namespace editaction

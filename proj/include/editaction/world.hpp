// SPDX-License-Identifier: Apache-2.0
//
// Procedural before/after action scenes: scene sampling, actions, camera
// handling, rasterization, the analytic scene parser and instruction
// templates.
#pragma once

#include <array>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "editaction/image.hpp"

namespace editaction {

using Rng = std::mt19937_64;

enum class Shape { square, circle, triangle, bar };
enum class Color { red, green, blue, yellow, magenta, cyan };
enum class Background { gray, black, white };
enum class Verb { move_left, move_right, move_up, move_down, rotate, flip, swap_with, move_to };
enum class Regime { lc, hc };

inline constexpr std::array kShapes{Shape::square, Shape::circle, Shape::triangle, Shape::bar};
inline constexpr std::array kColors{Color::red, Color::green, Color::blue,
                                    Color::yellow, Color::magenta, Color::cyan};
inline constexpr std::array kBackgrounds{Background::gray, Background::black, Background::white};
inline constexpr std::array kVerbs{Verb::move_left, Verb::move_right, Verb::move_up, Verb::move_down,
                                   Verb::rotate, Verb::flip, Verb::swap_with, Verb::move_to};
/// Scale levels the renderer and parser agree on.
inline constexpr std::array kScaleLevels{1.0, 1.5, 2.0};

/// Cells spanned by the viewport at zoom 1.
inline constexpr int kViewportCells = 8;
/// The world canvas is twice the viewport along each axis.
inline constexpr int kWorldCells = 16;

std::string_view to_string(Shape s);
std::string_view to_string(Color c);
std::string_view to_string(Background b);
std::string_view to_string(Verb v);
std::string_view to_string(Regime r);
Shape shape_from_string(std::string_view s);
Color color_from_string(std::string_view s);
Background background_from_string(std::string_view s);
Verb verb_from_string(std::string_view s);
Regime regime_from_string(std::string_view s);

/// Square and circle look the same under every rotation.
bool is_orientable(Shape s);

struct ObjectId {
    Shape shape = Shape::square;
    Color color = Color::red;
    friend bool operator==(const ObjectId&, const ObjectId&) = default;
};

/// "red square"
std::string object_phrase(ObjectId id);

struct ObjectState {
    Shape shape = Shape::square;
    Color color = Color::red;
    int x = 0; ///< anchor (top-left cell) in world units
    int y = 0;
    int orientation = 0; ///< degrees, clockwise, one of {0, 90, 180, 270}
    double scale = 1.0;  ///< footprint side in cells, one of kScaleLevels

    ObjectId id() const { return {shape, color}; }
    friend bool operator==(const ObjectState&, const ObjectState&) = default;
};

struct Camera {
    double cx = kWorldCells / 2.0;
    double cy = kWorldCells / 2.0;
    double zoom = 1.0;

    double half_extent() const { return kViewportCells / (2.0 * zoom); }
    double left() const { return cx - half_extent(); }
    double top() const { return cy - half_extent(); }
    friend bool operator==(const Camera&, const Camera&) = default;
};

struct SceneSpec {
    std::vector<ObjectState> objects;
    Background background = Background::gray;
    Camera camera;

    const ObjectState* find(ObjectId id) const;
    ObjectState* find(ObjectId id);
    friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

/// Axis-aligned rectangle in world units, half-open.
struct Rect {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    bool contains(double x, double y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
    friend bool operator==(const Rect&, const Rect&) = default;
};

/// Area objects are placed in: the fixed viewport for LC, the whole world for HC.
Rect arena_for(Regime regime);
Rect viewport_rect(const Camera& cam);

/// 3x3 partition of an arena: "top left", "top", ..., "bottom right".
inline constexpr std::array<std::string_view, 9> kLocationNames{
    "top left", "top", "top right", "left", "center", "right", "bottom left", "bottom", "bottom right"};
int location_of(const ObjectState& obj, const Rect& arena);
int location_from_string(std::string_view name);

struct ActionSpec {
    Verb verb = Verb::move_left;
    ObjectId target;
    std::optional<ObjectId> partner; ///< swap_with
    std::optional<int> location;     ///< move_to, index into kLocationNames
    int magnitude = 0;               ///< cells for moves, degrees for rotate

    friend bool operator==(const ActionSpec&, const ActionSpec&) = default;
};

/// Canonical label naming verb, target and arguments, e.g. "move_left:red_square",
/// "rotate_90:blue_bar", "swap_with:red_square+green_circle", "move_to:cyan_bar@top_left".
std::string action_label(const ActionSpec& a);

struct WorldConfig {
    int min_objects = 3;
    int max_objects = 6;
    std::vector<double> scales{1.0, 2.0};
    std::vector<Background> backgrounds{kBackgrounds.begin(), kBackgrounds.end()};
    Rect arena = arena_for(Regime::lc);
    int move_distance = 2;
};

SceneSpec sample_scene(Rng& rng, const WorldConfig& cfg);

/// Checks that every object is inside `arena`, identities are unique and
/// footprints keep at least one free cell between them.
bool scene_is_valid(const SceneSpec& scene, const Rect& arena);

/// Target position of a move_to action.
std::pair<int, int> location_anchor(int location, double scale, const Rect& arena);

/// Applies the action, touching only the target (and the partner for swaps).
/// Throws std::invalid_argument on a missing target or an out-of-arena result.
SceneSpec apply_action(const SceneSpec& scene, const ActionSpec& action, const Rect& arena);

struct Recentering {
    Camera camera;
    bool long_distance = false;
};

/// Viewport centered on the target's post-action position, clamped to the world.
Recentering recenter_camera(const SceneSpec& before, const ActionSpec& action, const Rect& arena);

Image render(const SceneSpec& scene, int resolution);

struct ParseResult {
    std::optional<SceneSpec> scene;
    std::string failure;
    explicit operator bool() const { return scene.has_value(); }
};

struct ParseOptions {
    /// Max RGB distance (in [-1,1] units) to snap a pixel to a palette color.
    double color_threshold = 0.6;
    double min_match = 0.8;
    /// Components smaller than this fraction of a unit cell's area are ignored as speckle.
    double speckle_fraction = 0.25;
};

/// Inverts render(): connected color regions are matched against every
/// (shape, orientation, scale) template. Objects truncated by the image border
/// are dropped when they cannot be resolved; any other unresolved region is a failure.
ParseResult parse_scene(const Image& img, const Camera& camera = {}, const ParseOptions& opts = {});

struct InstructionText {
    std::string raw;
    std::vector<std::string> tokens;
    std::string verb;
    std::string object;
    std::optional<std::string> start_point;
    std::optional<std::string> end_point;

    friend bool operator==(const InstructionText&, const InstructionText&) = default;
};

/// Lowercase whitespace tokenization.
std::vector<std::string> tokenize(std::string_view raw);
InstructionText make_instruction_text(std::string raw, std::string verb, std::string object,
                                      std::optional<std::string> start_point = {},
                                      std::optional<std::string> end_point = {});

/// Marginal frequencies of the optional spatial phrases.
struct InstructionStyle {
    double p_start = 0.0;
    double p_end = 0.0;
    double p_verb_object_only = 1.0;

    static InstructionStyle lc();
    static InstructionStyle hc();
    static InstructionStyle for_regime(Regime r) { return r == Regime::lc ? lc() : hc(); }
};

/// Phrases an action. Start/end phrases are drawn from the joint distribution
/// implied by the style's marginals; move_to always names its destination.
InstructionText make_instruction(const ActionSpec& action, const SceneSpec& before, const SceneSpec& after,
                                 const Rect& arena, Rng& rng, const InstructionStyle& style);

/// Verbs that can act on some object of the scene without leaving the arena.
std::optional<ActionSpec> sample_action(const SceneSpec& scene, const std::vector<Verb>& verbs,
                                        const WorldConfig& cfg, Rng& rng);

} // namespace editaction

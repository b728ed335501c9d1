// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <set>

#include "editaction/dataset.hpp"
#include "editaction/world.hpp"

using namespace editaction;

TEST(Scene, IdentitiesUniqueAndValid)
{
    Rng rng(1);
    const WorldConfig cfg;
    for (int k = 0; k < 1000; ++k) {
        const auto s = sample_scene(rng, cfg);
        std::set<std::pair<int, int>> ids;
        for (const auto& o : s.objects) {
            ids.insert({static_cast<int>(o.shape), static_cast<int>(o.color)});
        }
        ASSERT_EQ(ids.size(), s.objects.size());
        ASSERT_TRUE(scene_is_valid(s, cfg.arena));
        ASSERT_GE(static_cast<int>(s.objects.size()), cfg.min_objects);
        ASSERT_LE(static_cast<int>(s.objects.size()), cfg.max_objects);
    }
}

TEST(Scene, RenderParseRoundTrip)
{
    Rng rng(2);
    const WorldConfig cfg;
    for (int k = 0; k < 1000; ++k) {
        const auto s = sample_scene(rng, cfg);
        const auto parsed = parse_scene(render(s, 32), s.camera);
        ASSERT_TRUE(parsed) << parsed.failure;
        ASSERT_EQ(parsed.scene->objects, s.objects) << "scene " << k;
        ASSERT_EQ(parsed.scene->background, s.background);
    }
}

TEST(Scene, ParseSurvivesMildNoise)
{
    Rng rng(3);
    std::uniform_real_distribution<float> noise(-0.05F, 0.05F);
    const WorldConfig cfg;
    int ok = 0;
    for (int k = 0; k < 1000; ++k) {
        const auto s = sample_scene(rng, cfg);
        auto img = render(s, 32);
        for (auto& v : img.data()) {
            v += noise(rng);
        }
        img.clip();
        const auto parsed = parse_scene(img, s.camera);
        ok += parsed && parsed.scene->objects == s.objects ? 1 : 0;
    }
    EXPECT_GE(ok, 990);
}

TEST(Actions, SwapTwiceRestores)
{
    Rng rng(4);
    WorldConfig cfg;
    cfg.min_objects = 2;
    int checked = 0;
    for (int k = 0; k < 200; ++k) {
        const auto s = sample_scene(rng, cfg);
        const auto a = sample_action(s, {Verb::swap_with}, cfg, rng);
        if (!a) {
            continue;
        }
        const auto once = apply_action(s, *a, cfg.arena);
        EXPECT_NE(once, s);
        EXPECT_EQ(apply_action(once, *a, cfg.arena), s);
        ++checked;
    }
    EXPECT_GT(checked, 100);
}

TEST(Actions, TouchOnlyTargetAndPartner)
{
    Rng rng(5);
    const WorldConfig cfg;
    const std::vector<Verb> verbs(kVerbs.begin(), kVerbs.end());
    for (int k = 0; k < 500; ++k) {
        const auto s = sample_scene(rng, cfg);
        const auto a = sample_action(s, verbs, cfg, rng);
        ASSERT_TRUE(a);
        const auto after = apply_action(s, *a, cfg.arena);
        ASSERT_TRUE(scene_is_valid(after, cfg.arena));
        for (const auto& o : s.objects) {
            if (o.id() == a->target || (a->partner && o.id() == *a->partner)) {
                continue;
            }
            EXPECT_EQ(*after.find(o.id()), o);
        }
    }
}

TEST(Actions, LabelsCarryArguments)
{
    ActionSpec a;
    a.verb = Verb::rotate;
    a.target = {Shape::bar, Color::blue};
    a.magnitude = 90;
    EXPECT_EQ(action_label(a), "rotate_90:blue_bar");
    a = {};
    a.verb = Verb::swap_with;
    a.target = {Shape::square, Color::red};
    a.partner = ObjectId{Shape::circle, Color::green};
    EXPECT_EQ(action_label(a), "swap_with:red_square+green_circle");
    a = {};
    a.verb = Verb::move_to;
    a.target = {Shape::bar, Color::cyan};
    a.location = 0;
    EXPECT_EQ(action_label(a), "move_to:cyan_bar@top_left");
    a = {};
    a.target = {Shape::square, Color::red};
    a.magnitude = 2;
    EXPECT_EQ(action_label(a), "move_left:red_square");
}

namespace {

struct PhraseCounts {
    int start = 0;
    int end = 0;
    int verb_object_only = 0;
};

PhraseCounts count_phrases(Regime regime, int n)
{
    GenerateConfig cfg;
    cfg.regime = regime;
    const auto verbs = default_verbs(regime);
    Rng rng(6);
    PhraseCounts c;
    for (int k = 0; k < n; ++k) {
        const auto p = synthesize_pair(cfg, verbs, rng);
        c.start += p.instruction.start_point ? 1 : 0;
        c.end += p.instruction.end_point ? 1 : 0;
        c.verb_object_only += !p.instruction.start_point && !p.instruction.end_point ? 1 : 0;
    }
    return c;
}

} // namespace

TEST(Instructions, LowComplexityPhraseFrequencies)
{
    const auto c = count_phrases(Regime::lc, 10000);
    EXPECT_NEAR(c.start / 100.0, 66.49, 1.5);
    EXPECT_NEAR(c.end / 100.0, 34.11, 1.5);
    EXPECT_NEAR(c.verb_object_only / 100.0, 29.08, 1.5);
}

TEST(Instructions, HighComplexityNeverNamesStart)
{
    const auto c = count_phrases(Regime::hc, 3000);
    EXPECT_EQ(c.start, 0);
    EXPECT_NEAR(c.end / 30.0, 18.90, 2.5);
}

TEST(Instructions, TokenizeLowercasesAndSplits)
{
    EXPECT_EQ(tokenize("  Move the RED\tsquare\nleft "),
              (std::vector<std::string>{"move", "the", "red", "square", "left"}));
}

TEST(Camera, HighComplexityLongDistanceMatchesRecentering)
{
    GenerateConfig cfg;
    cfg.regime = Regime::hc;
    const auto verbs = default_verbs(Regime::hc);
    Rng rng(8);
    int flagged = 0;
    for (int k = 0; k < 1000; ++k) {
        const auto p = synthesize_pair(cfg, verbs, rng);
        const auto rc = recenter_camera(p.before, p.action, arena_for(Regime::hc));
        ASSERT_EQ(rc.long_distance, p.long_distance);
        flagged += p.long_distance ? 1 : 0;
    }
    EXPECT_GT(flagged, 0);
}

// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <fstream>
#include <opencv2/imgproc.hpp>
#include <opencv2/videoio.hpp>
#include <set>

#include "editaction/dataset.hpp"
#include "helpers.hpp"

using namespace editaction;

namespace {

// Frames are flat images whose value encodes the requested timestamp.
class ClockFrames : public FrameSource {
public:
    std::optional<double> duration(const std::string& id) override
    {
        if (id == "broken") {
            return std::nullopt;
        }
        return 10.0;
    }
    std::optional<Image> frame_at(const std::string&, double seconds) override
    {
        return Image(4, 4, static_cast<float>(seconds / 10.0));
    }
};

std::vector<EditSample> fake_samples(std::size_t n, std::size_t n_long)
{
    std::vector<EditSample> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        out[k].input_path = "in" + std::to_string(k);
        out[k].action_id = "a" + std::to_string(k % 61);
        out[k].long_distance = k < n_long;
    }
    return out;
}

} // namespace

TEST(Manifest, RoundTripAndStrictValidation)
{
    const auto dir = testutil::temp_dir("manifest");
    GenerateConfig cfg;
    cfg.count = 12;
    const auto gen = generate_dataset(cfg, 3, dir);
    const auto back = read_manifest(gen.manifest, true);
    EXPECT_EQ(back, gen.samples);
    std::filesystem::remove(resolve_path(gen.manifest, back[5].edited_path));
    EXPECT_NO_THROW(read_manifest(gen.manifest, false));
    try {
        read_manifest(gen.manifest, true);
        FAIL() << "strict read accepted a missing image";
    } catch (const ManifestError& e) {
        EXPECT_NE(std::string(e.what()).find(back[5].edited_path), std::string::npos);
    }
    std::ofstream(dir / "bad.jsonl") << "{\"schema\":\"other\",\"version\":1}\n";
    EXPECT_THROW(read_manifest(dir / "bad.jsonl"), ManifestError);
}

TEST(Generate, CountContractAndDeterminism)
{
    const auto a = testutil::temp_dir("gen_a");
    const auto b = testutil::temp_dir("gen_b");
    GenerateConfig cfg;
    cfg.count = 25;
    const auto ga = generate_dataset(cfg, 9, a, 1);
    const auto gb = generate_dataset(cfg, 9, b, 3);
    std::size_t images = 0;
    for (const auto& e : std::filesystem::directory_iterator(a / "images")) {
        images += e.path().extension() == ".png" ? 1 : 0;
    }
    EXPECT_EQ(images, 50U);
    ASSERT_EQ(ga.samples, gb.samples);
    for (std::size_t k = 0; k < ga.samples.size(); ++k) {
        EXPECT_EQ(read_image(resolve_path(ga.manifest, ga.samples[k].edited_path)),
                  read_image(resolve_path(gb.manifest, gb.samples[k].edited_path)));
    }
}

TEST(Generate, HeldOutVerbsStayOut)
{
    const auto dir = testutil::temp_dir("gen_held");
    GenerateConfig cfg;
    cfg.count = 40;
    cfg.held_out_verbs = {Verb::flip};
    cfg.held_out_count = 10;
    const auto g = generate_dataset(cfg, 1, dir);
    for (const auto& s : g.samples) {
        EXPECT_NE(s.action->verb, Verb::flip);
    }
    ASSERT_EQ(g.held_out.size(), 10U);
    for (const auto& s : g.held_out) {
        EXPECT_EQ(s.action->verb, Verb::flip);
    }
}

TEST(Split, PublishedTrainSizes)
{
    const auto lc = split(fake_samples(13766, 0), 500, 0, 1);
    EXPECT_EQ(lc.train.size(), 13266U);
    EXPECT_EQ(lc.test_random.size(), 500U);
    const auto hc = split(fake_samples(37454, 3000), 500, 100, 1);
    EXPECT_EQ(hc.train.size(), 36854U);
    EXPECT_EQ(hc.test_long_distance.size(), 100U);
    for (const auto& s : hc.test_long_distance) {
        EXPECT_TRUE(s.long_distance);
    }
}

TEST(Split, DisjointCoverAndDeterministic)
{
    const auto samples = fake_samples(300, 40);
    const auto a = split(samples, 50, 20, 5);
    const auto b = split(samples, 50, 20, 5);
    EXPECT_EQ(a.test_random, b.test_random);
    std::multiset<std::string> seen;
    for (const auto* part : {&a.train, &a.test_random, &a.test_long_distance}) {
        for (const auto& s : *part) {
            seen.insert(s.input_path);
        }
    }
    EXPECT_EQ(seen.size(), 300U);
    EXPECT_EQ(std::set<std::string>(seen.begin(), seen.end()).size(), 300U);
    EXPECT_THROW(split(samples, 50, 41, 5), std::invalid_argument);
    EXPECT_THROW(split(samples, 290, 20, 5), std::invalid_argument);
}

TEST(Stats, MatchesBruteForceRecount)
{
    GenerateConfig cfg;
    Rng rng(12);
    const auto verbs = default_verbs(Regime::lc);
    std::vector<EditSample> samples;
    for (int k = 0; k < 200; ++k) {
        const auto p = synthesize_pair(cfg, verbs, rng);
        EditSample s;
        s.instruction = p.instruction;
        s.action_id = action_label(p.action);
        s.long_distance = k % 7 == 0;
        samples.push_back(s);
    }
    const auto st = dataset_stats(samples);
    std::size_t start = 0, end = 0, only = 0, ld = 0;
    std::set<std::string> ids;
    // Independent pass over the serialized records.
    for (const auto& s : samples) {
        const nlohmann::json j = s;
        const auto& in = j.at("instruction");
        const bool has_start = in.contains("start_point") && !in["start_point"].is_null();
        const bool has_end = in.contains("end_point") && !in["end_point"].is_null();
        start += has_start ? 1 : 0;
        end += has_end ? 1 : 0;
        only += !has_start && !has_end ? 1 : 0;
        ld += j.at("long_distance").get<bool>() ? 1 : 0;
        ids.insert(j.at("action_id").get<std::string>());
    }
    EXPECT_EQ(st.pairs, 200U);
    EXPECT_EQ(st.with_start, start);
    EXPECT_EQ(st.with_end, end);
    EXPECT_EQ(st.verb_object_only, only);
    EXPECT_EQ(st.long_distance, ld);
    EXPECT_EQ(st.distinct_actions, ids.size());
    EXPECT_EQ(st.fraction(st.with_start), static_cast<double>(start) / 200.0);
}

TEST(Annotations, ParseAndPhrase)
{
    const auto dir = testutil::temp_dir("ann");
    std::ofstream(dir / "a.csv") << "video_id,start,end,verb,object,start_point,end_point\n"
                                 << "# comment\n"
                                 << "v1,2.0,5.0,cut,onion,,\n"
                                 << "v2,1.5,3.0,put,plate,counter,sink\n";
    const auto ann = read_annotations(dir / "a.csv");
    ASSERT_EQ(ann.size(), 2U);
    EXPECT_FALSE(ann[0].start_point);
    EXPECT_EQ(instruction_from_annotation(ann[0]).raw, "cut onion");
    EXPECT_EQ(instruction_from_annotation(ann[1]).raw, "put plate from counter to sink");
}

TEST(Extract, FramesAtSegmentBoundaries)
{
    const auto dir = testutil::temp_dir("extract");
    std::vector<SegmentAnnotation> ann{{"v", 2.0, 5.0, "cut", "onion", {}, {}},
                                       {"broken", 1.0, 2.0, "wash", "cup", {}, {}},
                                       {"v", 8.0, 12.0, "put", "pan", {}, {}}};
    ClockFrames frames;
    const auto res = extract_pairs(ann, frames, {dir, 0, Regime::lc});
    ASSERT_EQ(res.samples.size(), 1U);
    ASSERT_EQ(res.skipped.size(), 2U);
    const auto in = read_image(dir / res.samples[0].input_path);
    const auto out = read_image(dir / res.samples[0].edited_path);
    EXPECT_NEAR(in.at(0, 0, 0), 0.2F, 1.0F / 127.5F);
    EXPECT_NEAR(out.at(0, 0, 0), 0.5F, 1.0F / 127.5F);
    ann[0].end_time = 1.0;
    EXPECT_THROW(extract_pairs(ann, frames, {dir, 0, Regime::lc}), std::invalid_argument);
}

TEST(Extract, VideoFileFrameIndexing)
{
    const auto dir = testutil::temp_dir("video");
    const double fps = 10.0;
    cv::VideoWriter w((dir / "clip.avi").string(), cv::VideoWriter::fourcc('M', 'J', 'P', 'G'), fps, {16, 16});
    ASSERT_TRUE(w.isOpened());
    for (int k = 0; k < 60; ++k) {
        w.write(cv::Mat(16, 16, CV_8UC3, cv::Scalar::all(k * 4)));
    }
    w.release();
    VideoFileSource src(dir, ".avi");
    ASSERT_TRUE(src.duration("clip"));
    EXPECT_NEAR(*src.duration("clip"), 6.0, 0.11);
    const auto f = src.frame_at("clip", 2.0);
    ASSERT_TRUE(f);
    EXPECT_NEAR((f->at(8, 8, 0) + 1.0F) * 127.5F, 80.0F, 3.0F);
    EXPECT_FALSE(src.duration("missing"));
}

TEST(Tensors, ImageRoundTrip)
{
    Image img(4, 4);
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 4; ++x) {
            img.at(y, x, 0) = (y * 4 + x) / 16.0F - 0.5F;
        }
    }
    EXPECT_EQ(tensor_to_image(image_to_tensor(img)), img);
    EXPECT_EQ(image_to_tensor(img).sizes(), (std::vector<std::int64_t>{3, 4, 4}));
}

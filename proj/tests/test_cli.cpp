// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "editaction/run_config.hpp"
#include "helpers.hpp"

using namespace editaction;

namespace {

int run(const std::string& args, const std::filesystem::path& log = "/dev/null")
{
    const std::string cmd = std::string(EDITACTION_CLI) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST(RunConfig, SetAndRoundTrip)
{
    RunConfig c;
    c.set("lambda1", "0.001");
    c.set("widths", "16,32");
    c.set("freeze_cross_attention", "false");
    EXPECT_DOUBLE_EQ(c.train.lambda1, 0.001);
    EXPECT_EQ(c.arch.widths, (std::vector<int>{16, 32}));
    EXPECT_FALSE(c.train.freeze_cross_attention);
    const auto dir = testutil::temp_dir("runconfig");
    std::ofstream(dir / "c.txt") << c.to_text();
    RunConfig d;
    d.load_file(dir / "c.txt");
    EXPECT_EQ(d.to_text(), c.to_text());
}

TEST(RunConfig, RejectsUnknownKeysAndBadValues)
{
    RunConfig c;
    EXPECT_THROW(c.set("lamda1", "1"), std::invalid_argument);
    EXPECT_THROW(c.set("steps", "ten"), std::invalid_argument);
    EXPECT_THROW(c.set("freeze_cross_attention", "maybe"), std::invalid_argument);
    const auto dir = testutil::temp_dir("runconfig_bad");
    std::ofstream(dir / "c.txt") << "# comment\nsteps = 10\nbogus = 1\n";
    EXPECT_THROW(c.load_file(dir / "c.txt"), std::invalid_argument);
}

TEST(RunConfig, Profiles)
{
    RunConfig c;
    EXPECT_EQ(c.train.batch_size, 16);
    EXPECT_EQ(c.train.train_resolution, 32);
    EXPECT_DOUBLE_EQ(c.train.lambda1, 5e-4);
    EXPECT_DOUBLE_EQ(c.train.lambda2, 3e-2);
    EXPECT_DOUBLE_EQ(c.train.guidance_defaults.image_scale, 1.0);
    EXPECT_DOUBLE_EQ(c.train.guidance_defaults.text_scale, 7.5);
    EXPECT_EQ(c.inference_steps, 100);
    EXPECT_EQ(c.eval_seeds, 3);
    c.apply_profile("paper");
    EXPECT_EQ(c.train.batch_size, 64);
    EXPECT_EQ(c.train.steps, 10000);
    EXPECT_EQ(c.train.train_resolution, 256);
    EXPECT_DOUBLE_EQ(c.train.lr, 1e-4);
    EXPECT_THROW(c.apply_profile("huge"), std::invalid_argument);
}

TEST(Cli, HelpForEverySubcommand)
{
    for (const auto* sub : {"gen-data", "extract-pairs", "stats", "split", "train", "edit", "evaluate", "sweep",
                            "ablate", "time"}) {
        const auto dir = testutil::temp_dir("help");
        EXPECT_EQ(run(std::string(sub) + " --help", dir / "out.txt"), 0) << sub;
        EXPECT_NE(slurp(dir / "out.txt").find("--"), std::string::npos) << sub;
    }
    EXPECT_EQ(run("--help"), 0);
}

TEST(Cli, UsageErrors)
{
    const auto dir = testutil::temp_dir("usage");
    EXPECT_EQ(run("frobnicate", dir / "out.txt"), 1);
    EXPECT_FALSE(slurp(dir / "out.txt").empty());
    EXPECT_EQ(run(""), 1);
    EXPECT_EQ(run("gen-data --count 3"), 1);
    std::ofstream(dir / "bad.txt") << "nonsense_key = 1\n";
    EXPECT_EQ(run("train --manifest x --config " + (dir / "bad.txt").string()), 1);
}

TEST(Cli, RuntimeFailureExitsTwo)
{
    EXPECT_EQ(run("stats --manifest /nonexistent/manifest.jsonl"), 2);
}

TEST(Cli, GenDataStatsSplit)
{
    const auto dir = testutil::temp_dir("cli_gen");
    ASSERT_EQ(run("gen-data --regime lc --count 40 --seed 3 --out " + (dir / "lc").string()), 0);
    std::size_t images = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir / "lc" / "images")) {
        images += e.path().extension() == ".png" ? 1 : 0;
    }
    EXPECT_EQ(images, 80U);
    ASSERT_EQ(run("stats --manifest " + (dir / "lc" / "manifest.jsonl").string() + " --out " +
                  (dir / "stats.json").string()),
              0);
    EXPECT_EQ(nlohmann::json::parse(slurp(dir / "stats.json")).at("pairs").get<int>(), 40);
    ASSERT_EQ(run("split --manifest " + (dir / "lc" / "manifest.jsonl").string() + " --test 10 --out " +
                  (dir / "split").string()),
              0);
    EXPECT_EQ(read_manifest(dir / "split" / "train.jsonl", true).size(), 30U);
    EXPECT_EQ(read_manifest(dir / "split" / "test.jsonl", true).size(), 10U);
}

TEST(Cli, LoggedConfigReproducesTrainingBitwise)
{
    const auto dir = testutil::temp_dir("cli_repro");
    ASSERT_EQ(run("gen-data --count 24 --resolution 16 --seed 1 --out " + (dir / "data").string()), 0);
    const auto manifest = (dir / "data" / "manifest.jsonl").string();
    const std::string common = " --steps 3 --batch 4 --resolution 16 --widths 8,16 --patch 2 --seed 5";
    ASSERT_EQ(run("train --manifest " + manifest + common + " --out " + (dir / "a").string()), 0);
    ASSERT_EQ(run("train --config " + (dir / "a" / "config.txt").string() + " --out " + (dir / "b").string()), 0);
    EXPECT_EQ(slurp(dir / "a" / "metrics.jsonl"), slurp(dir / "b" / "metrics.jsonl"));
    EXPECT_FALSE(slurp(dir / "a" / "metrics.jsonl").empty());

    // edit and time on the trained checkpoint.
    const auto sample = read_manifest(manifest).front();
    const auto input = resolve_path(manifest, sample.input_path).string();
    ASSERT_EQ(run("edit --checkpoint " + (dir / "a" / "model.pt").string() + " --input " + input +
                  " --instruction \"" + sample.instruction.raw + "\" --steps 5 --out " + (dir / "e.png").string()),
              0);
    EXPECT_EQ(read_image(dir / "e.png").height(), 16);
    EXPECT_EQ(run("time --checkpoint " + (dir / "a" / "model.pt").string() + " --input " + input +
                  " --instruction \"" + sample.instruction.raw + "\" --steps 2 --repeats 2"),
              0);
}

TEST(Cli, DefaultOutputDirFromEnvironment)
{
    ::setenv("EDITACTION_OUT", "/tmp/somewhere", 1);
    EXPECT_EQ(default_output_dir(), std::filesystem::path("/tmp/somewhere"));
    ::unsetenv("EDITACTION_OUT");
    EXPECT_EQ(default_output_dir(), std::filesystem::path("runs"));
}

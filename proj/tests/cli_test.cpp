#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "mdn/checkpoint.hpp"
#include "mdn/dataset.hpp"
#include "mdn/image_io.hpp"
#include "mdn/kspace.hpp"
#include "mdn/mask.hpp"
#include "mdn/phantom.hpp"

namespace fs = std::filesystem;

namespace {

struct CommandResult {
    int exit_code;
    std::string output;
};

CommandResult run_cli(const std::string& args,
                      const std::string& extra_env = "") {
    const std::string out_file =
        (fs::temp_directory_path() / "mdn_cli_out.txt").string();
    const std::string cmd =
        extra_env + " " + std::string(MDN_CLI_PATH) + " " + args + " > " +
        out_file + " 2>&1";
    const int status = std::system(cmd.c_str());
    std::ifstream in(out_file);
    std::stringstream ss;
    ss << in.rdbuf();
    return {WEXITSTATUS(status), ss.str()};
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("mdn_cli_" + std::string(
                                 ::testing::UnitTest::GetInstance()
                                     ->current_test_info()
                                     ->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const {
        return (dir_ / name).string();
    }

    void make_data(int count, int size, const std::string& name = "data") {
        fs::create_directories(dir_ / name);
        for (int i = 0; i < count; ++i) {
            auto img = mdn::random_phantom(size, size, 500 + i);
            char file[32];
            std::snprintf(file, sizeof(file), "p%02d.pgm", i);
            mdn::write_pgm((dir_ / name / file).string(), size, size, img.data(),
                           65535);
        }
    }

    fs::path dir_;
};

}  // namespace

TEST_F(CliTest, GenmaskHitsRequestedRate) {
    auto r = run_cli("genmask --family radial --size 378x378 --rate 0.30 "
                     "--seed 7 --out " + path("mask.txt"));
    ASSERT_EQ(r.exit_code, 0) << r.output;
    mdn::SamplingMask mask = mdn::load_mask(path("mask.txt"));
    EXPECT_GE(mask.achieved_rate(), 0.29);
    EXPECT_LE(mask.achieved_rate(), 0.31);
    EXPECT_NE(r.output.find("achieved"), std::string::npos);
    EXPECT_TRUE(fs::exists(path("mask.txt") + ".manifest.json"));
}

TEST_F(CliTest, GenmaskFullRateIsAllOnes) {
    auto r = run_cli("genmask --family cartesian --size 32x32 --rate 1.0 "
                     "--seed 1 --out " + path("full.txt"));
    ASSERT_EQ(r.exit_code, 0) << r.output;
    mdn::SamplingMask mask = mdn::load_mask(path("full.txt"));
    EXPECT_EQ(mask.ones(), mask.bits.size());
}

TEST_F(CliTest, GenmaskIsByteDeterministic) {
    auto flags = std::string("genmask --family variable_density --size 64x64 "
                             "--rate 0.25 --seed 11 --out ");
    ASSERT_EQ(run_cli(flags + path("a.txt")).exit_code, 0);
    ASSERT_EQ(run_cli(flags + path("b.txt")).exit_code, 0);
    EXPECT_EQ(slurp(path("a.txt")), slurp(path("b.txt")));
}

TEST_F(CliTest, GenmaskHonorsSeedEnvFallback) {
    auto flags = std::string("genmask --family variable_density --size 32x32 "
                             "--rate 0.3 --out ");
    ASSERT_EQ(run_cli(flags + path("a.txt"), "MDN_SEED=5").exit_code, 0);
    ASSERT_EQ(run_cli(flags + path("b.txt"), "MDN_SEED=5").exit_code, 0);
    ASSERT_EQ(run_cli(flags + path("c.txt"), "MDN_SEED=6").exit_code, 0);
    EXPECT_EQ(slurp(path("a.txt")), slurp(path("b.txt")));
    EXPECT_NE(slurp(path("a.txt")), slurp(path("c.txt")));
}

TEST_F(CliTest, TrainZeroInitNoGrlIsTheZeroMap) {
    make_data(1, 32);
    ASSERT_EQ(run_cli("genmask --family cartesian --size 32x32 --rate 0.5 "
                      "--seed 2 --out " + path("mask.txt")).exit_code, 0);
    auto r = run_cli("train --data " + path("data") + " --task csmri --mask " +
                     path("mask.txt") +
                     " --variant no-grl --iters 0 --zero-init --seed 3 --out " +
                     path("m.mdnc"));
    ASSERT_EQ(r.exit_code, 0) << r.output;

    auto loaded = mdn::load_checkpoint(path("m.mdnc"));
    EXPECT_EQ(loaded.config.variant, mdn::Variant::no_grl);
    mdn::Tensor<float> x(1, 1, 32, 32, 0.7f);
    auto y = loaded.model.forward(x, mdn::Mode::infer);
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_EQ(y[i], 0.0f);
}

TEST_F(CliTest, TrainingLowersTheLoss) {
    make_data(1, 32);
    ASSERT_EQ(run_cli("genmask --family cartesian --size 32x32 --rate 1.0 "
                      "--seed 2 --out " + path("mask.txt")).exit_code, 0);
    auto r = run_cli("train --data " + path("data") + " --task csmri --mask " +
                     path("mask.txt") +
                     " --iters 200 --batch 1 --seed 4 --out " + path("m.mdnc"));
    ASSERT_EQ(r.exit_code, 0) << r.output;

    std::ifstream curve(path("m.mdnc") + ".loss.csv");
    std::string header, first_row, last_row, line;
    std::getline(curve, header);
    std::getline(curve, first_row);
    last_row = first_row;
    while (std::getline(curve, line))
        if (!line.empty()) last_row = line;
    auto loss_of = [](const std::string& row) {
        const auto second_comma = row.find(',', row.find(',') + 1);
        return std::stod(row.substr(second_comma + 1));
    };
    EXPECT_LT(loss_of(last_row), loss_of(first_row));
}

TEST_F(CliTest, TrainingIsDeterministicAcrossInvocations) {
    make_data(2, 24);
    ASSERT_EQ(run_cli("genmask --family variable_density --size 24x24 "
                      "--rate 0.4 --seed 2 --out " + path("mask.txt")).exit_code,
              0);
    const std::string flags = "train --data " + path("data") +
                              " --task csmri --mask " + path("mask.txt") +
                              " --iters 120 --batch 2 --seed 9 --out ";
    ASSERT_EQ(run_cli(flags + path("a.mdnc")).exit_code, 0);
    ASSERT_EQ(run_cli(flags + path("b.mdnc")).exit_code, 0);
    EXPECT_EQ(slurp(path("a.mdnc") + ".loss.csv"),
              slurp(path("b.mdnc") + ".loss.csv"));
    EXPECT_EQ(slurp(path("a.mdnc")), slurp(path("b.mdnc")));
}

TEST_F(CliTest, TrainManifestRecordsTheRun) {
    make_data(1, 24);
    ASSERT_EQ(run_cli("genmask --family cartesian --size 24x24 --rate 0.5 "
                      "--seed 2 --out " + path("mask.txt")).exit_code, 0);
    ASSERT_EQ(run_cli("train --data " + path("data") + " --task csmri --mask " +
                      path("mask.txt") + " --iters 10 --seed 5 --out " +
                      path("m.mdnc")).exit_code, 0);
    const auto manifest =
        nlohmann::json::parse(slurp(path("m.mdnc") + ".manifest.json"));
    EXPECT_EQ(manifest["seed"], 5);
    EXPECT_EQ(manifest["config"]["iterations"], 10);
    EXPECT_FALSE(manifest["dataset_hash"].get<std::string>().empty());
    EXPECT_NE(manifest["command_line"].get<std::string>().find("train"),
              std::string::npos);
    EXPECT_FALSE(manifest["tool_version"].get<std::string>().empty());
}

TEST_F(CliTest, RejectsIncompatibleFlagCombinations) {
    make_data(1, 24);
    auto r1 = run_cli("train --data " + path("data") +
                      " --task csmri --scale 2 --out " + path("m.mdnc"));
    EXPECT_NE(r1.exit_code, 0);
    EXPECT_NE(r1.output.find("--scale"), std::string::npos);

    auto r2 = run_cli("train --data " + path("data") + " --task csmri --out " +
                      path("m.mdnc"));
    EXPECT_NE(r2.exit_code, 0);
    EXPECT_NE(r2.output.find("--mask"), std::string::npos);

    auto r3 = run_cli("train --data " + path("data") +
                      " --task superres --noise 0.01 --out " + path("m.mdnc"));
    EXPECT_NE(r3.exit_code, 0);
}

TEST_F(CliTest, ReconstructIdentityModelEqualsZeroFilled) {
    make_data(1, 32);
    ASSERT_EQ(run_cli("genmask --family variable_density --size 32x32 "
                      "--rate 0.4 --seed 6 --out " + path("mask.txt")).exit_code,
              0);
    ASSERT_EQ(run_cli("train --data " + path("data") + " --task csmri --mask " +
                      path("mask.txt") + " --iters 0 --zero-init --seed 1 "
                      "--out " + path("id.mdnc")).exit_code, 0);
    auto r = run_cli("reconstruct --ckpt " + path("id.mdnc") + " --input " +
                     path("data/p00.pgm") + " --mask " + path("mask.txt") +
                     " --out " + path("recon.cimg"));
    ASSERT_EQ(r.exit_code, 0) << r.output;

    // The identity model reproduces its zero-filled input.
    mdn::GrayImage raw = mdn::read_pgm(path("data/p00.pgm"));
    mdn::Tensor<float> img(1, 1, raw.height, raw.width);
    std::uint16_t max_raw = 0;
    for (auto v : raw.pixels) max_raw = std::max(max_raw, v);
    for (std::size_t i = 0; i < img.size(); ++i)
        img[i] = float(raw.pixels[i]) / max_raw;
    mdn::SamplingMask mask = mdn::load_mask(path("mask.txt"));
    mdn::ComplexImage x_u =
        mdn::zero_fill(mdn::undersample(mdn::image_from_real(img), mask));
    auto expected = mdn::magnitude_tensor(x_u);

    mdn::ComplexImage got = mdn::read_cimg(path("recon.cimg"));
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            EXPECT_NEAR(got.at(y, x).real(), expected.at(0, 0, y, x), 1e-6);
}

TEST_F(CliTest, ReconstructHardDataConsistencyMatchesMeasurements) {
    // Complex-valued pipeline: the output keeps its phase, so the projected
    // spectrum can be compared against the measurements coefficient-wise.
    fs::create_directories(dir_ / "data");
    auto phantom = mdn::random_phantom(32, 32, 321);
    mdn::write_cimg(path("data/p00.cimg"), mdn::image_from_real(phantom));

    ASSERT_EQ(run_cli("genmask --family variable_density --size 32x32 "
                      "--rate 0.4 --seed 6 --out " + path("mask.txt")).exit_code,
              0);
    ASSERT_EQ(run_cli("train --data " + path("data") + " --task csmri --mask " +
                      path("mask.txt") + " --iters 20 --seed 1 --out " +
                      path("m.mdnc")).exit_code, 0);
    auto r = run_cli("reconstruct --ckpt " + path("m.mdnc") + " --input " +
                     path("data/p00.cimg") + " --mask " + path("mask.txt") +
                     " --dc-lambda 0 --truth " + path("data/p00.cimg") +
                     " --out " + path("recon.cimg"));
    ASSERT_EQ(r.exit_code, 0) << r.output;
    EXPECT_NE(r.output.find("psnr"), std::string::npos);
    EXPECT_TRUE(fs::exists(path("recon.cimg") + ".error.pgm"));
    EXPECT_TRUE(fs::exists(path("recon.cimg") + ".error.pgm.scale.txt"));

    // Rebuild the measurements the tool saw (it max-normalizes its input).
    mdn::ComplexImage normalized = mdn::channels_to_complex(
        mdn::detail::normalize_complex(mdn::read_cimg(path("data/p00.cimg"))));
    mdn::SamplingMask mask = mdn::load_mask(path("mask.txt"));
    mdn::KSpaceGrid y = mdn::undersample(normalized, mask);

    mdn::KSpaceGrid k = mdn::fft2_centered(mdn::read_cimg(path("recon.cimg")));
    int checked = 0;
    for (int yy = 0; yy < 32; ++yy)
        for (int xx = 0; xx < 32; ++xx) {
            if (!mask.at(yy, xx)) continue;
            EXPECT_LE(std::abs(k.at(yy, xx) - y.at(yy, xx)), 5e-6)
                << yy << "," << xx;
            ++checked;
        }
    EXPECT_GT(checked, 0);
}

TEST_F(CliTest, EvalPerfectReconstructionsHitTheSentinel) {
    make_data(2, 24);
    ASSERT_EQ(run_cli("genmask --family cartesian --size 24x24 --rate 1.0 "
                      "--seed 2 --out " + path("full.txt")).exit_code, 0);
    ASSERT_EQ(run_cli("train --data " + path("data") + " --task csmri --mask " +
                      path("full.txt") + " --iters 0 --zero-init --seed 1 "
                      "--out " + path("id.mdnc")).exit_code, 0);
    auto r = run_cli("eval --ckpt " + path("id.mdnc") + " --data " +
                     path("data") + " --mask " + path("full.txt") + " --out " +
                     path("report.csv"));
    ASSERT_EQ(r.exit_code, 0) << r.output;

    const std::string report = slurp(path("report.csv"));
    EXPECT_NE(report.find("inf"), std::string::npos);
    EXPECT_NE(report.find("# psnr_inf_excluded,2"), std::string::npos);
    // identical images score ssim 1 exactly
    EXPECT_NE(report.find(",1\n"), std::string::npos);
}

TEST_F(CliTest, AblateRunsTheGridAndWritesSummary) {
    make_data(2, 24);
    {
        std::ofstream grid(path("grid.txt"));
        grid << "# variant family rate lr seed\n";
        grid << "full cartesian 0.5 0.001 3\n";
        grid << "no-grl cartesian 0.5 0.001 3\n";
    }
    auto r = run_cli("ablate --data " + path("data") + " --grid " +
                     path("grid.txt") + " --iters 8 --batch 2 --out " +
                     path("cells"));
    ASSERT_EQ(r.exit_code, 0) << r.output;

    const std::string summary = slurp(path("cells/summary.csv"));
    EXPECT_NE(summary.find("full,cartesian"), std::string::npos);
    EXPECT_NE(summary.find("no-grl,cartesian"), std::string::npos);
    int manifests = 0, reports = 0;
    for (const auto& entry : fs::recursive_directory_iterator(path("cells"))) {
        manifests += entry.path().filename() == "manifest.json";
        reports += entry.path().filename() == "report.csv";
    }
    EXPECT_EQ(manifests, 2);
    EXPECT_EQ(reports, 2);
}

TEST_F(CliTest, AblateFlagsPartialFailuresAndExitsNonzero) {
    make_data(2, 24);
    {
        std::ofstream grid(path("grid.txt"));
        grid << "full cartesian 0.5 0.001 3\n";
        grid << "bogus-variant cartesian 0.5 0.001 3\n";
    }
    auto r = run_cli("ablate --data " + path("data") + " --grid " +
                     path("grid.txt") + " --iters 4 --batch 2 --out " +
                     path("cells"));
    EXPECT_NE(r.exit_code, 0);
    EXPECT_NE(r.output.find("FAILED"), std::string::npos);
    const std::string summary = slurp(path("cells/summary.csv"));
    EXPECT_NE(summary.find(",ok,"), std::string::npos);
    EXPECT_NE(summary.find(",failed,"), std::string::npos);
}

TEST_F(CliTest, SuperresTrainingRuns) {
    make_data(2, 24);
    auto r = run_cli("train --data " + path("data") +
                     " --task superres --scale 2 --iters 10 --batch 2 --seed 2 "
                     "--out " + path("sr.mdnc"));
    ASSERT_EQ(r.exit_code, 0) << r.output;
    const auto manifest =
        nlohmann::json::parse(slurp(path("sr.mdnc") + ".manifest.json"));
    EXPECT_EQ(manifest["config"]["scale"], 2);
}

TEST_F(CliTest, FailsCleanlyOnMissingData) {
    auto r = run_cli("train --data " + path("nonexistent") +
                     " --task superres --out " + path("m.mdnc"));
    EXPECT_NE(r.exit_code, 0);
    EXPECT_NE(r.output.find("error"), std::string::npos);
}

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mdn/dataset.hpp"
#include "mdn/pairs.hpp"
#include "mdn/phantom.hpp"
#include "mdn/resize.hpp"
#include "mdn/train.hpp"

namespace fs = std::filesystem;
using mdn::Dataset;
using mdn::Tensor;

namespace {

/// Fresh directory of seeded phantom graymaps.
struct PhantomDir {
    fs::path dir;

    PhantomDir(const std::string& name, int count, int size, int maxval = 65535) {
        dir = fs::temp_directory_path() / name;
        fs::remove_all(dir);
        fs::create_directories(dir);
        for (int i = 0; i < count; ++i) {
            auto img = mdn::random_phantom(size, size, 9000 + i);
            char file[32];
            std::snprintf(file, sizeof(file), "phantom_%02d.pgm", i);
            mdn::write_pgm((dir / file).string(), size, size, img.data(), maxval);
        }
    }
    ~PhantomDir() { fs::remove_all(dir); }
};

mdn::SamplingMask full_mask(int size) {
    return mdn::gen_mask(mdn::MaskFamily::cartesian, size, size, 1.0, 0);
}

}  // namespace

TEST(LoadDataset, EmptyDirectoryIsAnError) {
    const fs::path dir = fs::temp_directory_path() / "mdn_empty_ds";
    fs::remove_all(dir);
    fs::create_directories(dir);
    EXPECT_THROW(mdn::load_dataset(dir.string()), mdn::IoError);
    fs::remove_all(dir);
}

TEST(LoadDataset, NormalizesSixteenBitToUnitMax) {
    const fs::path dir = fs::temp_directory_path() / "mdn_norm_ds";
    fs::remove_all(dir);
    fs::create_directories(dir);
    {
        // 16-bit image whose largest sample is 12000 out of 65535.
        std::ofstream out(dir / "a.pgm", std::ios::binary);
        out << "P2\n4 4\n65535\n";
        for (int i = 0; i < 16; ++i) out << (i == 5 ? 12000 : 750 * i % 12000) << " ";
    }
    Dataset ds = mdn::load_dataset(dir.string());
    float max_v = 0.0f;
    for (std::size_t i = 0; i < ds.items[0].size(); ++i)
        max_v = std::max(max_v, ds.items[0][i]);
    EXPECT_FLOAT_EQ(max_v, 1.0f);
    fs::remove_all(dir);
}

TEST(LoadDataset, DeterministicOrderingAndHash) {
    PhantomDir corpus("mdn_order_ds", 5, 24);
    Dataset a = mdn::load_dataset(corpus.dir.string());
    Dataset b = mdn::load_dataset(corpus.dir.string());
    ASSERT_EQ(a.size(), b.size());
    EXPECT_EQ(a.sources, b.sources);
    EXPECT_TRUE(std::is_sorted(a.sources.begin(), a.sources.end()));
    EXPECT_EQ(mdn::dataset_hash(a), mdn::dataset_hash(b));
}

TEST(LoadDataset, RejectsInconsistentDimensionsNamingTheFile) {
    const fs::path dir = fs::temp_directory_path() / "mdn_mixed_ds";
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto a = mdn::random_phantom(16, 16, 1);
    auto b = mdn::random_phantom(12, 16, 2);
    mdn::write_pgm((dir / "a.pgm").string(), 16, 16, a.data());
    mdn::write_pgm((dir / "b.pgm").string(), 12, 16, b.data());
    try {
        mdn::load_dataset(dir.string());
        FAIL() << "expected an error";
    } catch (const mdn::IoError& e) {
        EXPECT_NE(std::string(e.what()).find("b.pgm"), std::string::npos);
    }
    fs::remove_all(dir);
}

TEST(LoadDataset, GlobPatternFilters) {
    PhantomDir corpus("mdn_glob_ds", 4, 16);
    Dataset all = mdn::load_dataset(corpus.dir.string(), "*");
    Dataset some = mdn::load_dataset(corpus.dir.string(), "phantom_0[01].pgm");
    EXPECT_EQ(all.size(), 4u);
    EXPECT_EQ(some.size(), 2u);
}

TEST(AugmentRotations, EmptyAnglesKeepDatasetIdentical) {
    PhantomDir corpus("mdn_rot0_ds", 3, 16);
    Dataset ds = mdn::load_dataset(corpus.dir.string());
    Dataset same = mdn::augment_rotations(ds, {});
    EXPECT_EQ(same.size(), ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i)
        for (std::size_t j = 0; j < ds.items[i].size(); ++j)
            EXPECT_EQ(same.items[i][j], ds.items[i][j]);
}

TEST(AugmentRotations, CountGrowsByAngles) {
    PhantomDir corpus("mdn_rot3_ds", 3, 16);
    Dataset ds = mdn::load_dataset(corpus.dir.string());
    Dataset grown = mdn::augment_rotations(ds, {90, 180, 270});
    EXPECT_EQ(grown.size(), ds.size() * 4);
}

TEST(AugmentRotations, FourQuarterTurnsComposeToIdentity) {
    auto img = mdn::random_phantom(16, 16, 7);
    Tensor<float> once = mdn::detail::rotate_quarter_turns(img, 4);
    for (std::size_t i = 0; i < img.size(); ++i) EXPECT_EQ(once[i], img[i]);

    // 90 then 270 also composes to the identity.
    Tensor<float> a = mdn::detail::rotate_quarter_turns(img, 1);
    Tensor<float> b = mdn::detail::rotate_quarter_turns(a, 3);
    for (std::size_t i = 0; i < img.size(); ++i) EXPECT_EQ(b[i], img[i]);
}

TEST(AugmentRotations, RejectsQuarterTurnOnNonSquare) {
    const fs::path dir = fs::temp_directory_path() / "mdn_rect_ds";
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto img = mdn::random_phantom(12, 16, 3);
    mdn::write_pgm((dir / "a.pgm").string(), 12, 16, img.data());
    Dataset ds = mdn::load_dataset(dir.string());
    EXPECT_THROW(mdn::augment_rotations(ds, {90}), mdn::ConfigError);
    EXPECT_NO_THROW(mdn::augment_rotations(ds, {180}));
    fs::remove_all(dir);
}

TEST(CropDataset, DeterministicAndInBounds) {
    PhantomDir corpus("mdn_crop_ds", 3, 32);
    Dataset ds = mdn::load_dataset(corpus.dir.string());
    Dataset a = mdn::crop_dataset(ds, 16, 5);
    Dataset b = mdn::crop_dataset(ds, 16, 5);
    EXPECT_EQ(a.height, 16);
    EXPECT_EQ(a.width, 16);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a.items[i].size(); ++j)
            EXPECT_EQ(a.items[i][j], b.items[i][j]);
    EXPECT_THROW(mdn::crop_dataset(ds, 64, 5), mdn::ConfigError);
}

TEST(Resize, ConstantImageSurvivesScaleTwoExactly) {
    Tensor<float> img(1, 1, 16, 16, 0.5f);
    Tensor<float> low = mdn::resize_bicubic(img, 8, 8);
    Tensor<float> back = mdn::resize_bicubic(low, 16, 16);
    for (std::size_t i = 0; i < img.size(); ++i) EXPECT_EQ(back[i], 0.5f);
}

TEST(Resize, DownUpRoundTripStaysClose) {
    auto img = mdn::shepp_logan_phantom(48, 48);
    Tensor<float> low = mdn::resize_bicubic(img, 24, 24);
    Tensor<float> back = mdn::resize_bicubic(low, 48, 48);
    // The phantom is piecewise constant with hard edges, so halving loses
    // genuine detail; this guards against gross misalignment, not blur.
    double err = 0.0;
    for (std::size_t i = 0; i < img.size(); ++i)
        err += std::fabs(double(back[i]) - img[i]);
    EXPECT_LE(err / img.size(), 0.08);
}

TEST(MakePair, FullMaskIsIdentity) {
    auto img = mdn::random_phantom(32, 32, 4);
    mdn::TaskSpec task;
    task.kind = mdn::TaskKind::csmri;
    task.mask = full_mask(32);
    auto pair = mdn::make_pair(img, task, 1);
    for (std::size_t i = 0; i < img.size(); ++i) {
        EXPECT_EQ(pair.input[i], img[i]);
        EXPECT_EQ(pair.target[i], img[i]);
    }
}

TEST(MakePair, SuperresConstantImageIsExact) {
    Tensor<float> img(1, 1, 24, 24, 0.5f);
    mdn::TaskSpec task;
    task.kind = mdn::TaskKind::superres;
    task.scale = 2;
    auto pair = mdn::make_pair(img, task, 1);
    for (std::size_t i = 0; i < img.size(); ++i) EXPECT_EQ(pair.input[i], 0.5f);
}

TEST(MakePair, SuperresScalesProduceDistinctDegradations) {
    auto img = mdn::shepp_logan_phantom(48, 48);
    double prev_psnr = 1e9;
    for (int scale : {2, 3, 4}) {
        mdn::TaskSpec task;
        task.kind = mdn::TaskKind::superres;
        task.scale = scale;
        auto pair = mdn::make_pair(img, task, 1);
        ASSERT_EQ(pair.input.shape(), img.shape());
        const double v = mdn::psnr(pair.input, pair.target, 1.0);
        EXPECT_LT(v, prev_psnr);  // coarser scale, worse input
        prev_psnr = v;
    }
}

TEST(MakePair, UndersampledInputDegradesButStaysRegistered) {
    auto img = mdn::random_phantom(64, 64, 8);
    mdn::TaskSpec task;
    task.kind = mdn::TaskKind::csmri;
    task.mask = mdn::gen_mask(mdn::MaskFamily::radial, 64, 64, 0.2, 3);
    auto pair = mdn::make_pair(img, task, 1);
    const double v = mdn::psnr(pair.input, pair.target, 1.0);
    EXPECT_TRUE(std::isfinite(v));
    // Regression value frozen from the first verified run.
    EXPECT_NEAR(v, 24.318546, 1e-3);
    // Deterministic: the same call yields the same pair.
    auto again = mdn::make_pair(img, task, 1);
    for (std::size_t i = 0; i < pair.input.size(); ++i)
        EXPECT_EQ(pair.input[i], again.input[i]);
}

TEST(MakePair, NoisyPairsDifferPerSeedAndMatchPerSeed) {
    auto img = mdn::random_phantom(32, 32, 9);
    mdn::TaskSpec task;
    task.kind = mdn::TaskKind::csmri_noisy;
    task.noise_v = 0.02;
    task.mask = mdn::gen_mask(mdn::MaskFamily::variable_density, 32, 32, 0.4, 3);
    auto a = mdn::make_pair(img, task, 5);
    auto b = mdn::make_pair(img, task, 5);
    auto c = mdn::make_pair(img, task, 6);
    bool differs = false;
    for (std::size_t i = 0; i < a.input.size(); ++i) {
        EXPECT_EQ(a.input[i], b.input[i]);
        differs |= a.input[i] != c.input[i];
    }
    EXPECT_TRUE(differs);
}

TEST(MakePair, RejectsMismatchedMask) {
    auto img = mdn::random_phantom(32, 32, 4);
    mdn::TaskSpec task;
    task.kind = mdn::TaskKind::csmri;
    task.mask = full_mask(16);
    EXPECT_THROW(mdn::make_pair(img, task, 1), mdn::ShapeError);
}

TEST(Train, ZeroIterationsKeepInitialization) {
    PhantomDir corpus("mdn_train0_ds", 2, 16);
    Dataset ds = mdn::load_dataset(corpus.dir.string());
    mdn::Model<float> model(mdn::default_model_config(1, 1));
    model.init_params(3);
    std::vector<float> before;
    model.for_each_parameter([&](const std::string&, mdn::Parameter<float>& p) {
        for (std::size_t i = 0; i < p.value.size(); ++i)
            before.push_back(p.value[i]);
    });

    mdn::TaskSpec task;
    task.kind = mdn::TaskKind::csmri;
    task.mask = full_mask(16);
    mdn::TrainConfig config;
    config.max_iterations = 0;
    auto result = mdn::train(model, ds, task, config);
    EXPECT_TRUE(result.curve.empty());

    std::size_t at = 0;
    model.for_each_parameter([&](const std::string&, mdn::Parameter<float>& p) {
        for (std::size_t i = 0; i < p.value.size(); ++i)
            EXPECT_EQ(p.value[i], before[at++]);
    });
}

TEST(Train, IdentityTaskFromZeroWeightsHasZeroInitialLoss) {
    PhantomDir corpus("mdn_id_ds", 2, 16);
    Dataset ds = mdn::load_dataset(corpus.dir.string());
    mdn::Model<float> model(mdn::default_model_config(1, 1));
    model.zero_weights();

    mdn::TaskSpec task;
    task.kind = mdn::TaskKind::csmri;
    task.mask = full_mask(16);
    mdn::TrainConfig config;
    config.max_iterations = 1;
    config.batch_size = 2;
    auto result = mdn::train(model, ds, task, config);
    ASSERT_EQ(result.curve.size(), 1u);
    EXPECT_EQ(result.curve[0].train_loss, 0.0);
}

TEST(Train, OverfitsTheIdentityTask) {
    PhantomDir corpus("mdn_overfit_ds", 1, 64);
    Dataset ds = mdn::load_dataset(corpus.dir.string());
    mdn::Model<float> model(mdn::default_model_config(1, 1));
    model.init_params(7);

    mdn::TaskSpec task;
    task.kind = mdn::TaskKind::csmri;
    task.mask = full_mask(64);
    mdn::TrainConfig config;
    config.max_iterations = 200;
    config.batch_size = 1;
    config.seed = 11;
    auto result = mdn::train(model, ds, task, config);
    ASSERT_GE(result.curve.size(), 2u);
    EXPECT_LT(result.curve.back().train_loss, result.curve.front().train_loss);
}

TEST(Train, LossCurveIsSeedDeterministic) {
    PhantomDir corpus("mdn_det_ds", 3, 24);
    Dataset ds = mdn::load_dataset(corpus.dir.string());
    mdn::TaskSpec task;
    task.kind = mdn::TaskKind::csmri;
    task.mask = mdn::gen_mask(mdn::MaskFamily::variable_density, 24, 24, 0.4, 5);

    auto run = [&] {
        mdn::Model<float> model(mdn::default_model_config(1, 1));
        model.init_params(13);
        mdn::TrainConfig config;
        config.max_iterations = 120;
        config.batch_size = 2;
        config.seed = 21;
        return mdn::train(model, ds, task, config);
    };
    auto a = run();
    auto b = run();
    ASSERT_EQ(a.curve.size(), b.curve.size());
    for (std::size_t i = 0; i < a.curve.size(); ++i) {
        EXPECT_EQ(a.curve[i].iteration, b.curve[i].iteration);
        EXPECT_NEAR(a.curve[i].train_loss, b.curve[i].train_loss, 1e-6);
    }
}

TEST(Train, DivergenceAbortsNamingTheIteration) {
    PhantomDir corpus("mdn_diverge_ds", 2, 16);
    Dataset ds = mdn::load_dataset(corpus.dir.string());
    mdn::Model<float> model(mdn::default_model_config(1, 1));
    model.init_params(3);
    mdn::TaskSpec task;
    task.kind = mdn::TaskKind::csmri;
    task.mask = full_mask(16);
    mdn::TrainConfig config;
    config.max_iterations = 500;
    config.batch_size = 2;
    config.optimizer.base_lr = 1e8;  // guaranteed blow-up
    try {
        mdn::train(model, ds, task, config);
        FAIL() << "expected divergence";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("iteration"), std::string::npos)
            << e.what();
    }
}

TEST(Train, AbortsOnChannelMismatch) {
    PhantomDir corpus("mdn_chan_ds", 2, 16);
    Dataset ds = mdn::load_dataset(corpus.dir.string());
    mdn::Model<float> model(mdn::default_model_config(2, 1));
    model.init_params(1);
    mdn::TaskSpec task;
    task.kind = mdn::TaskKind::csmri;
    task.mask = full_mask(16);
    mdn::TrainConfig config;
    EXPECT_THROW(mdn::train(model, ds, task, config), mdn::ShapeError);
}

TEST(Train, WritesLossCurveCsv) {
    std::vector<mdn::LossPoint> curve = {
        {100, 0.001, 0.5, std::numeric_limits<double>::quiet_NaN()},
        {200, 0.001, 0.25, 31.5},
    };
    const std::string path =
        (fs::temp_directory_path() / "curve.csv").string();
    mdn::write_loss_curve(path, curve);
    std::ifstream in(path);
    std::string header, row1, row2;
    std::getline(in, header);
    std::getline(in, row1);
    std::getline(in, row2);
    EXPECT_EQ(header, "iteration,lr,train_loss,test_psnr");
    EXPECT_EQ(row1.substr(0, 4), "100,");
    EXPECT_NE(row2.find("31.5"), std::string::npos);
    std::remove(path.c_str());
}

TEST(TrainedModel, CheckpointReproducesForwardBitExactly) {
    PhantomDir corpus("mdn_ckpt_ds", 2, 24);
    Dataset ds = mdn::load_dataset(corpus.dir.string());
    mdn::Model<float> model(mdn::default_model_config(1, 1));
    model.init_params(17);
    mdn::TaskSpec task;
    task.kind = mdn::TaskKind::csmri;
    task.mask = mdn::gen_mask(mdn::MaskFamily::cartesian, 24, 24, 0.5, 2);
    mdn::TrainConfig config;
    config.max_iterations = 30;
    config.batch_size = 2;
    mdn::train(model, ds, task, config);

    const std::string path =
        (fs::temp_directory_path() / "trained.mdnc").string();
    mdn::save_checkpoint(path, model);
    auto loaded = mdn::load_checkpoint(path);

    auto pair = mdn::make_pair(ds.items[0], task, 0);
    auto a = model.forward(pair.input, mdn::Mode::infer);
    auto b = loaded.model.forward(pair.input, mdn::Mode::infer);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
    std::remove(path.c_str());
}

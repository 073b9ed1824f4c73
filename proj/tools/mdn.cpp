// Command-line front end: mask generation, phantom generation, training,
// reconstruction, evaluation and ablation sweeps over one shared library.

#include <CLI11.hpp>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "mdn/blas.hpp"
#include "mdn/checkpoint.hpp"
#include "mdn/dataset.hpp"
#include "mdn/kspace.hpp"
#include "mdn/manifest.hpp"
#include "mdn/mask.hpp"
#include "mdn/metrics.hpp"
#include "mdn/model.hpp"
#include "mdn/pairs.hpp"
#include "mdn/phantom.hpp"
#include "mdn/train.hpp"

namespace fs = std::filesystem;

namespace {

std::string g_command_line;

std::uint64_t default_seed() {
    // MDN_SEED acts as the global fallback when --seed is not given.
    if (const char* env = std::getenv("MDN_SEED")) {
        try {
            return std::stoull(env);
        } catch (...) {
            throw mdn::ConfigError(
                mdn::msg("MDN_SEED must be an unsigned integer, got '", env, "'"));
        }
    }
    return 0;
}

std::pair<int, int> parse_size(const std::string& hxw) {
    const auto x = hxw.find('x');
    if (x == std::string::npos)
        throw mdn::ConfigError(
            mdn::msg("--size must look like 64x64, got '", hxw, "'"));
    try {
        return {std::stoi(hxw.substr(0, x)), std::stoi(hxw.substr(x + 1))};
    } catch (...) {
        throw mdn::ConfigError(
            mdn::msg("--size must look like 64x64, got '", hxw, "'"));
    }
}

bool has_suffix(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

mdn::RunManifest begin_manifest(std::uint64_t seed) {
    mdn::RunManifest m;
    m.command_line = g_command_line;
    m.seed = seed;
    m.started_at = mdn::now_iso8601();
    return m;
}

void finish_manifest(mdn::RunManifest& m, const std::string& out_path) {
    m.finished_at = mdn::now_iso8601();
    mdn::write_manifest(out_path, m);
}

/// Loads an input image as a (tensor, complex?) pair using the dataset
/// normalization policy.
mdn::Tensor<float> load_input_image(const std::string& path) {
    if (has_suffix(path, ".cimg"))
        return mdn::detail::normalize_complex(mdn::read_cimg(path));
    return mdn::detail::normalize_gray(mdn::read_pgm(path));
}

void write_output_image(const std::string& path, const mdn::Tensor<float>& image) {
    if (has_suffix(path, ".cimg")) {
        if (image.c() == 2) {
            mdn::write_cimg(path, mdn::channels_to_complex(image));
        } else {
            mdn::write_cimg(path, mdn::image_from_real(image));
        }
        return;
    }
    if (image.c() == 2) {
        auto mag = mdn::magnitude_tensor(mdn::channels_to_complex(image));
        mdn::write_pgm(path, mag.h(), mag.w(), mag.data(), 255);
        return;
    }
    mdn::write_pgm(path, image.h(), image.w(), image.data(), 255);
}

mdn::Tensor<float> as_magnitude(const mdn::Tensor<float>& t) {
    if (t.c() == 1) return t;
    return mdn::magnitude_tensor(mdn::channels_to_complex(t));
}

// ---------------------------------------------------------------- genmask --

struct GenmaskArgs {
    std::string family = "radial";
    std::string size = "378x378";
    double rate = 0.3;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string out;
    mdn::MaskParams params;
};

int run_genmask(const GenmaskArgs& args) {
    const std::uint64_t seed = args.seed_given ? args.seed : default_seed();
    auto [h, w] = parse_size(args.size);
    mdn::RunManifest manifest = begin_manifest(seed);

    mdn::SamplingMask mask = mdn::gen_mask(mdn::family_from_name(args.family), h,
                                           w, args.rate, seed, args.params);
    mdn::save_mask(args.out, mask);
    std::cout << "wrote " << args.out << " (" << args.family << " " << h << "x"
              << w << ", requested " << args.rate << ", achieved "
              << mask.achieved_rate() << ")\n";

    manifest.config = {{"family", args.family},
                       {"height", h},
                       {"width", w},
                       {"requested_rate", args.rate},
                       {"achieved_rate", mask.achieved_rate()},
                       {"center_fraction", args.params.cartesian_center_fraction},
                       {"vd_exponent", args.params.vd_exponent},
                       {"vd_center_disc", args.params.vd_center_disc_fraction}};
    finish_manifest(manifest, args.out + ".manifest.json");
    return 0;
}

// ------------------------------------------------------------- genphantom --

struct GenphantomArgs {
    int count = 4;
    std::string size = "64x64";
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string kind = "random";
    std::string out;
};

int run_genphantom(const GenphantomArgs& args) {
    const std::uint64_t seed = args.seed_given ? args.seed : default_seed();
    auto [h, w] = parse_size(args.size);
    mdn::RunManifest manifest = begin_manifest(seed);

    fs::create_directories(args.out);
    for (int i = 0; i < args.count; ++i) {
        mdn::Tensor<float> img =
            args.kind == "shepp-logan"
                ? mdn::shepp_logan_phantom(h, w)
                : mdn::random_phantom(h, w, mdn::mix_seed(seed, i));
        char name[32];
        std::snprintf(name, sizeof(name), "phantom_%03d.pgm", i);
        mdn::write_pgm((fs::path(args.out) / name).string(), h, w, img.data(),
                       65535);
    }
    std::cout << "wrote " << args.count << " " << h << "x" << w
              << " phantoms to " << args.out << "\n";

    manifest.config = {{"count", args.count},
                       {"height", h},
                       {"width", w},
                       {"kind", args.kind}};
    finish_manifest(manifest,
                    (fs::path(args.out) / "manifest.json").string());
    return 0;
}

// ---------------------------------------------------------------- train ----

struct TrainArgs {
    std::string data;
    std::string task = "csmri";
    std::string mask_file;
    int scale = 0;
    double noise_v = -1.0;
    std::string variant = "full";
    int blocks = 2;
    std::int64_t iters = 2000;
    int batch = 4;
    std::uint64_t seed = 0;
    bool seed_given = false;
    double lr = 0.001;
    double weight_decay = 0.0001;
    std::int64_t lr_step = 50000;
    double lr_gamma = 0.1;
    int crop = 0;
    std::vector<int> rotations;
    std::string test_data;
    bool fresh_mask = false;
    bool zero_init = false;
    std::int64_t checkpoint_every = 0;
    std::string out;
};

mdn::TaskSpec build_task(const std::string& task_name,
                         const std::string& mask_file, int scale, double noise_v,
                         bool fresh_mask) {
    mdn::TaskSpec task;
    if (task_name == "csmri")
        task.kind = mdn::TaskKind::csmri;
    else if (task_name == "csmri-noisy")
        task.kind = mdn::TaskKind::csmri_noisy;
    else if (task_name == "superres")
        task.kind = mdn::TaskKind::superres;
    else
        throw mdn::ConfigError(mdn::msg("unknown task '", task_name,
                                        "' (csmri, csmri-noisy, superres)"));

    const bool needs_mask = task.kind != mdn::TaskKind::superres;
    if (task.kind == mdn::TaskKind::superres) {
        task.scale = scale > 0 ? scale : 2;
    } else if (scale > 0) {
        throw mdn::ConfigError(mdn::msg("--scale does not apply to ", task_name));
    }
    if (task.kind == mdn::TaskKind::csmri_noisy) {
        task.noise_v = noise_v >= 0 ? noise_v : 0.01;
    } else if (noise_v >= 0) {
        throw mdn::ConfigError(mdn::msg("--noise does not apply to ", task_name));
    }
    if (needs_mask && mask_file.empty())
        throw mdn::ConfigError(mdn::msg("task ", task_name, " needs --mask"));
    if (!needs_mask && !mask_file.empty())
        throw mdn::ConfigError("--mask does not apply to superres");
    if (needs_mask) task.mask = mdn::load_mask(mask_file);
    task.fresh_mask_per_sample = fresh_mask;
    return task;
}

int run_train(const TrainArgs& args) {
    const std::uint64_t seed = args.seed_given ? args.seed : default_seed();
    mdn::RunManifest manifest = begin_manifest(seed);

    mdn::Dataset ds = mdn::load_dataset(args.data);
    if (!args.rotations.empty()) ds = mdn::augment_rotations(ds, args.rotations);
    if (args.crop > 0) ds = mdn::crop_dataset(ds, args.crop, seed);

    mdn::TaskSpec task = build_task(args.task, args.mask_file, args.scale,
                                    args.noise_v, args.fresh_mask);
    if (task.kind != mdn::TaskKind::superres &&
        (task.mask.height != ds.height || task.mask.width != ds.width))
        throw mdn::ConfigError(mdn::msg("mask is ", task.mask.height, "x",
                                        task.mask.width, " but dataset items are ",
                                        ds.height, "x", ds.width));

    mdn::ModelConfig config = mdn::make_variant(
        mdn::default_model_config(ds.channels, args.blocks),
        mdn::variant_from_name(args.variant));
    mdn::Model<float> model(config);
    model.init_params(seed);
    if (args.zero_init) model.zero_weights();

    mdn::TrainConfig train_config;
    train_config.optimizer.base_lr = args.lr;
    train_config.optimizer.weight_decay = args.weight_decay;
    train_config.optimizer.lr_step = args.lr_step;
    train_config.optimizer.lr_gamma = args.lr_gamma;
    train_config.batch_size = args.batch;
    train_config.max_iterations = args.iters;
    train_config.seed = seed;
    train_config.checkpoint_every = args.checkpoint_every;

    mdn::Dataset test_ds;
    const bool have_test = !args.test_data.empty();
    if (have_test) {
        test_ds = mdn::load_dataset(args.test_data);
        if (args.crop > 0) test_ds = mdn::crop_dataset(test_ds, args.crop, seed);
    }

    mdn::TrainResult result =
        mdn::train(model, ds, task, train_config,
                   have_test ? &test_ds : nullptr, args.out);
    mdn::save_checkpoint(args.out, model);
    mdn::write_loss_curve(args.out + ".loss.csv", result.curve);

    if (!result.curve.empty())
        std::cout << "final loss " << result.curve.back().train_loss << " after "
                  << result.iterations_run << " iterations\n";
    std::cout << "wrote " << args.out << "\n";

    manifest.dataset_hash = mdn::hex_u64(mdn::dataset_hash(ds));
    manifest.config = {{"task", args.task},
                       {"variant", args.variant},
                       {"blocks", args.blocks},
                       {"channels", ds.channels},
                       {"iterations", args.iters},
                       {"batch_size", args.batch},
                       {"base_lr", args.lr},
                       {"weight_decay", args.weight_decay},
                       {"lr_step", args.lr_step},
                       {"lr_gamma", args.lr_gamma},
                       {"crop", args.crop},
                       {"rotations", args.rotations},
                       {"zero_init", args.zero_init},
                       {"fresh_mask_per_sample", args.fresh_mask},
                       {"dataset_items", ds.size()},
                       {"dataset_size", mdn::msg(ds.height, "x", ds.width)}};
    if (!args.mask_file.empty()) {
        manifest.config["mask_file"] = args.mask_file;
        manifest.config["mask_family"] = mdn::family_name(task.mask.family);
        manifest.config["mask_rate"] = task.mask.requested_rate;
    }
    if (task.kind == mdn::TaskKind::superres)
        manifest.config["scale"] = task.scale;
    if (task.kind == mdn::TaskKind::csmri_noisy)
        manifest.config["noise_v"] = task.noise_v;
    finish_manifest(manifest, args.out + ".manifest.json");
    return 0;
}

// ------------------------------------------------------------ reconstruct --

struct ReconstructArgs {
    std::string ckpt;
    std::string input;
    std::string mask_file;
    double dc_lambda = -1.0;
    std::string truth;
    std::string out;
};

int run_reconstruct(const ReconstructArgs& args) {
    mdn::RunManifest manifest = begin_manifest(0);

    mdn::LoadedCheckpoint loaded = mdn::load_checkpoint(args.ckpt);
    mdn::Tensor<float> image = load_input_image(args.input);
    if (image.c() != loaded.config.input_channels)
        throw mdn::ConfigError(mdn::msg(
            "checkpoint expects ", loaded.config.input_channels,
            "-channel input but '", args.input, "' has ", image.c()));

    mdn::SamplingMask mask = mdn::load_mask(args.mask_file);
    if (mask.height != image.h() || mask.width != image.w())
        throw mdn::ConfigError(mdn::msg("mask is ", mask.height, "x", mask.width,
                                        " but the image is ", image.h(), "x",
                                        image.w()));

    mdn::ComplexImage img_c = image.c() == 2 ? mdn::channels_to_complex(image)
                                             : mdn::image_from_real(image);
    mdn::KSpaceGrid y = mdn::undersample(img_c, mask);
    mdn::ComplexImage x_u = mdn::zero_fill(y);
    mdn::Tensor<float> input = image.c() == 2 ? mdn::complex_to_channels(x_u)
                                              : mdn::magnitude_tensor(x_u);

    mdn::Tensor<float> output = loaded.model.forward(input, mdn::Mode::infer);

    if (args.dc_lambda >= 0.0) {
        mdn::ComplexImage out_c = output.c() == 2
                                      ? mdn::channels_to_complex(output)
                                      : mdn::image_from_real(output);
        mdn::ComplexImage projected =
            mdn::data_consistency(out_c, y, mask, args.dc_lambda);
        output = output.c() == 2 ? mdn::complex_to_channels(projected)
                                 : mdn::magnitude_tensor(projected);
    }
    write_output_image(args.out, output);
    std::cout << "wrote " << args.out << "\n";

    if (!args.truth.empty()) {
        mdn::Tensor<float> truth = load_input_image(args.truth);
        mdn::Tensor<float> out_mag = as_magnitude(output);
        mdn::Tensor<float> truth_mag = as_magnitude(truth);
        mdn::Tensor<float> zf_mag = as_magnitude(input);
        const double out_psnr = mdn::psnr(out_mag, truth_mag, 1.0);
        const double zf_psnr = mdn::psnr(zf_mag, truth_mag, 1.0);
        std::cout << "psnr " << out_psnr << " dB (zero-filled " << zf_psnr
                  << " dB)\n";
        mdn::write_error_map(args.out + ".error.pgm",
                             mdn::error_map(out_mag, truth_mag));
    }

    manifest.config = {{"checkpoint", args.ckpt},
                       {"input", args.input},
                       {"mask_file", args.mask_file},
                       {"variant", mdn::variant_name(loaded.config.variant)},
                       {"dc_lambda", args.dc_lambda}};
    finish_manifest(manifest, args.out + ".manifest.json");
    return 0;
}

// ----------------------------------------------------------------- eval ----

struct EvalArgs {
    std::string ckpt;
    std::string data;
    std::string mask_file;
    double noise_v = -1.0;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string out;
};

mdn::QualityReport evaluate_dataset(mdn::Model<float>& model,
                                    const mdn::Dataset& ds,
                                    const mdn::TaskSpec& task,
                                    std::uint64_t seed) {
    mdn::QualityReport report;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        mdn::TrainingPair<float> pair =
            mdn::make_pair(ds.items[i], task, mdn::mix_seed(seed, 0xE7A1 + i));
        mdn::Tensor<float> out = model.forward(pair.input, mdn::Mode::infer);
        mdn::Tensor<float> out_mag = as_magnitude(out);
        mdn::Tensor<float> target_mag = as_magnitude(pair.target);
        mdn::QualityEntry entry;
        entry.image_id = fs::path(ds.sources[i]).filename().string();
        entry.psnr_db = mdn::psnr(out_mag, target_mag, 1.0);
        entry.ssim = mdn::ssim(out_mag, target_mag, 1.0);
        report.entries.push_back(entry);
    }
    return report;
}

int run_eval(const EvalArgs& args) {
    const std::uint64_t seed = args.seed_given ? args.seed : default_seed();
    mdn::RunManifest manifest = begin_manifest(seed);

    mdn::LoadedCheckpoint loaded = mdn::load_checkpoint(args.ckpt);
    mdn::Dataset ds = mdn::load_dataset(args.data);
    if (ds.channels != loaded.config.input_channels)
        throw mdn::ConfigError(mdn::msg("checkpoint expects ",
                                        loaded.config.input_channels,
                                        "-channel input but the dataset has ",
                                        ds.channels));

    mdn::TaskSpec task;
    task.kind = args.noise_v >= 0 ? mdn::TaskKind::csmri_noisy
                                  : mdn::TaskKind::csmri;
    task.noise_v = std::max(args.noise_v, 0.0);
    task.mask = mdn::load_mask(args.mask_file);
    if (task.mask.height != ds.height || task.mask.width != ds.width)
        throw mdn::ConfigError(mdn::msg("mask is ", task.mask.height, "x",
                                        task.mask.width, " but dataset items are ",
                                        ds.height, "x", ds.width));

    mdn::QualityReport report = evaluate_dataset(loaded.model, ds, task, seed);
    report.variant = mdn::variant_name(loaded.config.variant);
    report.mask = mdn::family_name(task.mask.family);
    report.rate = task.mask.requested_rate;
    report.seed = seed;
    mdn::write_report_csv(args.out, report);

    std::cout << "mean psnr " << report.mean_psnr() << " dB, mean ssim "
              << report.mean_ssim() << ", psnr std " << report.psnr_std_db()
              << " over " << report.entries.size() << " images\n";
    std::cout << "wrote " << args.out << "\n";

    manifest.dataset_hash = mdn::hex_u64(mdn::dataset_hash(ds));
    manifest.config = {{"checkpoint", args.ckpt},
                       {"mask_file", args.mask_file},
                       {"noise_v", task.noise_v},
                       {"variant", report.variant}};
    finish_manifest(manifest, args.out + ".manifest.json");
    return 0;
}

// --------------------------------------------------------------- ablate ----

struct AblateArgs {
    std::string data;
    std::string grid;
    std::string out;
    std::int64_t iters = 500;
    int batch = 4;
    int jobs = 1;
};

struct AblateCell {
    int index = 0;
    std::string variant;
    std::string family;
    double rate = 0.0;
    double lr = 0.0;
    std::uint64_t seed = 0;
    // results
    bool ok = false;
    std::string error;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
};

std::vector<AblateCell> parse_grid(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw mdn::IoError(mdn::msg("cannot read grid file '", path, "'"));
    std::vector<AblateCell> cells;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream row(line);
        AblateCell cell;
        cell.index = static_cast<int>(cells.size());
        if (!(row >> cell.variant >> cell.family >> cell.rate >> cell.lr >>
              cell.seed))
            throw mdn::ConfigError(
                mdn::msg("grid line ", line_no,
                         ": expected 'variant family rate lr seed', got '", line,
                         "'"));
        cells.push_back(cell);
    }
    if (cells.empty())
        throw mdn::ConfigError(mdn::msg("grid file '", path, "' has no cells"));
    return cells;
}

void run_ablate_cell(const AblateArgs& args, const mdn::Dataset& ds,
                     AblateCell& cell) {
    const fs::path cell_dir =
        fs::path(args.out) / mdn::msg("cell", cell.index, "_", cell.variant, "_",
                                      cell.family, "_", cell.rate, "_lr", cell.lr,
                                      "_s", cell.seed);
    fs::create_directories(cell_dir);
    mdn::RunManifest manifest = begin_manifest(cell.seed);

    mdn::TaskSpec task;
    task.kind = mdn::TaskKind::csmri;
    task.mask = mdn::gen_mask(mdn::family_from_name(cell.family), ds.height,
                              ds.width, cell.rate, cell.seed);

    mdn::ModelConfig config =
        mdn::make_variant(mdn::default_model_config(ds.channels, 2),
                          mdn::variant_from_name(cell.variant));
    mdn::Model<float> model(config);
    model.init_params(cell.seed);

    mdn::TrainConfig train_config;
    train_config.optimizer.base_lr = cell.lr;
    train_config.batch_size = args.batch;
    train_config.max_iterations = args.iters;
    train_config.seed = cell.seed;

    mdn::TrainResult result = mdn::train(model, ds, task, train_config);
    mdn::save_checkpoint((cell_dir / "model.mdnc").string(), model);
    mdn::write_loss_curve((cell_dir / "loss.csv").string(), result.curve);

    mdn::QualityReport report = evaluate_dataset(model, ds, task, cell.seed);
    report.variant = cell.variant;
    report.mask = cell.family;
    report.rate = cell.rate;
    report.seed = cell.seed;
    mdn::write_report_csv((cell_dir / "report.csv").string(), report);

    cell.mean_psnr = report.mean_psnr();
    cell.mean_ssim = report.mean_ssim();
    cell.ok = true;

    manifest.dataset_hash = mdn::hex_u64(mdn::dataset_hash(ds));
    manifest.config = {{"variant", cell.variant}, {"family", cell.family},
                       {"rate", cell.rate},       {"lr", cell.lr},
                       {"iterations", args.iters}, {"batch_size", args.batch}};
    finish_manifest(manifest, (cell_dir / "manifest.json").string());
}

int run_ablate(const AblateArgs& args) {
    mdn::Dataset ds = mdn::load_dataset(args.data);
    std::vector<AblateCell> cells = parse_grid(args.grid);
    fs::create_directories(args.out);

    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            try {
                run_ablate_cell(args, ds, cells[i]);
            } catch (const std::exception& e) {
                cells[i].ok = false;
                cells[i].error = e.what();
            }
            std::lock_guard<std::mutex> lock(log_mutex);
            std::cout << "cell " << cells[i].index << " (" << cells[i].variant
                      << " " << cells[i].family << " " << cells[i].rate << ")";
            if (cells[i].ok)
                std::cout << ": psnr " << cells[i].mean_psnr << " dB\n";
            else
                std::cout << ": FAILED: " << cells[i].error << "\n";
        }
    };
    std::vector<std::thread> pool;
    const int jobs = std::max(1, args.jobs);
    for (int j = 0; j < jobs - 1; ++j) pool.emplace_back(worker);
    worker();
    for (std::thread& t : pool) t.join();

    std::ofstream summary(fs::path(args.out) / "summary.csv");
    summary << "cell,variant,mask,rate,lr,seed,status,mean_psnr_db,mean_ssim\n";
    summary.precision(9);
    int failures = 0;
    for (const AblateCell& cell : cells) {
        summary << cell.index << "," << cell.variant << "," << cell.family << ","
                << cell.rate << "," << cell.lr << "," << cell.seed << ","
                << (cell.ok ? "ok" : "failed") << ",";
        if (cell.ok)
            summary << cell.mean_psnr << "," << cell.mean_ssim;
        else
            summary << ",";
        summary << "\n";
        failures += !cell.ok;
    }
    if (failures > 0) {
        std::cout << failures << " of " << cells.size()
                  << " cells failed; partial results in " << args.out << "\n";
        return 1;
    }
    std::cout << "completed " << cells.size() << " cells, summary in "
              << (fs::path(args.out) / "summary.csv").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    mdn::fix_blas_core_detection(argv);
    for (int i = 0; i < argc; ++i) {
        if (i > 0) g_command_line += " ";
        g_command_line += argv[i];
    }

    CLI::App app{
        "Compressed-sensing MRI reconstruction with a multi-scale dilated "
        "residual network.\n"
        "Defaults are desk-scale; full-scale training settings are 250000 "
        "iterations, 378x378 images,\nbase lr 0.001 with step 50000 and gamma "
        "0.1, weight decay 0.0001."};
    app.require_subcommand(1);

    GenmaskArgs genmask;
    auto* cmd_genmask =
        app.add_subcommand("genmask", "Generate a k-space sampling mask");
    cmd_genmask->add_option("--family", genmask.family,
                            "cartesian | radial | variable_density");
    cmd_genmask->add_option("--size", genmask.size, "Grid size, HxW");
    cmd_genmask->add_option("--rate", genmask.rate, "Sampling rate in (0,1]");
    cmd_genmask->add_option("--seed", genmask.seed)->each([&](const std::string&) {
        genmask.seed_given = true;
    });
    cmd_genmask->add_option("--out", genmask.out, "Output mask file")->required();
    cmd_genmask->add_option("--center-fraction",
                            genmask.params.cartesian_center_fraction,
                            "Cartesian rows always kept around DC");
    cmd_genmask->add_option("--vd-exponent", genmask.params.vd_exponent,
                            "Variable-density falloff power");
    cmd_genmask->add_option("--vd-center-disc",
                            genmask.params.vd_center_disc_fraction,
                            "Variable-density fully-kept disc radius fraction");

    GenphantomArgs genphantom;
    auto* cmd_genphantom = app.add_subcommand(
        "genphantom", "Generate synthetic phantom images (16-bit graymaps)");
    cmd_genphantom->add_option("--count", genphantom.count);
    cmd_genphantom->add_option("--size", genphantom.size, "HxW");
    cmd_genphantom->add_option("--seed", genphantom.seed)
        ->each([&](const std::string&) { genphantom.seed_given = true; });
    cmd_genphantom->add_option("--kind", genphantom.kind,
                               "random | shepp-logan");
    cmd_genphantom->add_option("--out", genphantom.out, "Output directory")
        ->required();

    TrainArgs train;
    auto* cmd_train = app.add_subcommand("train", "Train a reconstruction model");
    cmd_train->add_option("--data", train.data, "Directory of .pgm/.cimg images")
        ->required();
    cmd_train->add_option("--task", train.task, "csmri | csmri-noisy | superres");
    cmd_train->add_option("--mask", train.mask_file, "Mask file (csmri tasks)");
    cmd_train->add_option("--scale", train.scale, "Super-resolution factor 2|3|4");
    cmd_train->add_option("--noise", train.noise_v,
                          "k-space noise stddev (csmri-noisy)");
    cmd_train->add_option("--variant", train.variant,
                          "full | no-grl | no-lrls | no-residual | non-dilated | "
                          "no-concat");
    cmd_train->add_option("--blocks", train.blocks, "Cascaded blocks (default 2)");
    cmd_train->add_option("--iters", train.iters,
                          "Training iterations (desk default 2000; full scale "
                          "250000)");
    cmd_train->add_option("--batch", train.batch, "Batch size");
    cmd_train->add_option("--seed", train.seed)->each([&](const std::string&) {
        train.seed_given = true;
    });
    cmd_train->add_option("--lr", train.lr, "Base learning rate");
    cmd_train->add_option("--weight-decay", train.weight_decay);
    cmd_train->add_option("--lr-step", train.lr_step,
                          "Iterations per learning-rate decade");
    cmd_train->add_option("--lr-gamma", train.lr_gamma);
    cmd_train->add_option("--crop", train.crop,
                          "Random-crop items to this size first");
    cmd_train->add_option("--rotations", train.rotations,
                          "Augmentation quarter turns, e.g. 90 180 270");
    cmd_train->add_option("--test-data", train.test_data,
                          "Test set for per-epoch PSNR");
    cmd_train->add_flag("--fresh-mask", train.fresh_mask,
                        "Redraw the mask per sample");
    cmd_train->add_flag("--zero-init", train.zero_init,
                        "Start from all-zero weights (identity network)");
    cmd_train->add_option("--checkpoint-every", train.checkpoint_every,
                          "Also write intermediate checkpoints");
    cmd_train->add_option("--out", train.out, "Checkpoint path")->required();

    ReconstructArgs reconstruct;
    auto* cmd_reconstruct = app.add_subcommand(
        "reconstruct", "Undersample an image and reconstruct it");
    cmd_reconstruct->add_option("--ckpt", reconstruct.ckpt)->required();
    cmd_reconstruct->add_option("--input", reconstruct.input, ".pgm or .cimg")
        ->required();
    cmd_reconstruct->add_option("--mask", reconstruct.mask_file)->required();
    cmd_reconstruct->add_option("--dc-lambda", reconstruct.dc_lambda,
                                "Blend with measurements in k-space (0 = hard "
                                "replacement)");
    cmd_reconstruct->add_option("--truth", reconstruct.truth,
                                "Ground truth; prints PSNR, writes error map");
    cmd_reconstruct->add_option("--out", reconstruct.out)->required();

    EvalArgs eval;
    auto* cmd_eval =
        app.add_subcommand("eval", "Evaluate a checkpoint over a dataset");
    cmd_eval->add_option("--ckpt", eval.ckpt)->required();
    cmd_eval->add_option("--data", eval.data)->required();
    cmd_eval->add_option("--mask", eval.mask_file)->required();
    cmd_eval->add_option("--noise", eval.noise_v,
                         "Evaluate in the noisy setting at this stddev");
    cmd_eval->add_option("--seed", eval.seed)->each([&](const std::string&) {
        eval.seed_given = true;
    });
    cmd_eval->add_option("--out", eval.out, "Report CSV")->required();

    AblateArgs ablate;
    auto* cmd_ablate = app.add_subcommand(
        "ablate", "Run a grid of (variant, mask family, rate, lr, seed) cells");
    cmd_ablate->add_option("--data", ablate.data)->required();
    cmd_ablate->add_option("--grid", ablate.grid,
                           "Text file, one 'variant family rate lr seed' per "
                           "line")
        ->required();
    cmd_ablate->add_option("--out", ablate.out, "Output directory")->required();
    cmd_ablate->add_option("--iters", ablate.iters, "Iterations per cell");
    cmd_ablate->add_option("--batch", ablate.batch);
    cmd_ablate->add_option("--jobs", ablate.jobs, "Parallel cell workers");

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_genmask->parsed()) return run_genmask(genmask);
        if (cmd_genphantom->parsed()) return run_genphantom(genphantom);
        if (cmd_train->parsed()) return run_train(train);
        if (cmd_reconstruct->parsed()) return run_reconstruct(reconstruct);
        if (cmd_eval->parsed()) return run_eval(eval);
        if (cmd_ablate->parsed()) return run_ablate(ablate);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "mdn/checkpoint.hpp"
#include "mdn/dataset.hpp"
#include "mdn/errors.hpp"
#include "mdn/metrics.hpp"
#include "mdn/model.hpp"
#include "mdn/optim.hpp"
#include "mdn/pairs.hpp"

namespace mdn {

struct TrainConfig {
    OptimizerConfig optimizer;
    int batch_size = 4;
    std::int64_t max_iterations = 2000;
    std::uint64_t seed = 0;
    std::int64_t checkpoint_every = 0;  // 0: only the final write
    std::int64_t eval_every = 0;        // 0: once per epoch (needs a test set)

    void validate() const {
        if (batch_size < 1)
            throw ConfigError(msg("train: batch size must be >= 1, got ",
                                  batch_size));
        if (max_iterations < 0)
            throw ConfigError(msg("train: iterations must be >= 0, got ",
                                  max_iterations));
    }
};

struct LossPoint {
    std::int64_t iteration;
    double lr;
    double train_loss;
    double test_psnr = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
    std::vector<LossPoint> curve;
    std::int64_t iterations_run = 0;
};

/// Mean PSNR of the model's reconstructions over a dataset, in infer mode.
inline double evaluate_mean_psnr(Model<float>& model, const Dataset& ds,
                                 const TaskSpec& task, std::uint64_t seed) {
    double total = 0.0;
    std::size_t counted = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        TrainingPair<float> pair =
            make_pair(ds.items[i], task, mix_seed(seed, 0xE7A1 + i));
        Tensor<float> out = model.forward(pair.input, Mode::infer);
        const double v = psnr(out, pair.target, 1.0);
        if (std::isinf(v)) continue;
        total += v;
        ++counted;
    }
    return counted > 0 ? total / counted
                       : std::numeric_limits<double>::infinity();
}

/// Seeded-shuffle epoch training with the step learning-rate policy. The
/// loss is logged every 100 iterations (and at the last one); the test PSNR,
/// when a test set is given, at every epoch end. Fully deterministic per
/// (dataset, task, config).
inline TrainResult train(Model<float>& model, const Dataset& ds,
                         const TaskSpec& task, const TrainConfig& config,
                         const Dataset* test_ds = nullptr,
                         const std::string& checkpoint_path = "") {
    config.validate();
    task.validate();
    if (ds.size() == 0) throw ConfigError("train: empty dataset");
    if (ds.channels != model.config().input_channels)
        throw ShapeError(msg("train: dataset items have ", ds.channels,
                             " channels but the model takes ",
                             model.config().input_channels));

    auto shuffle_rng = make_engine(config.seed, 0x5F0FF1E);
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), std::size_t(0));
    std::size_t cursor = order.size();  // forces a shuffle on first use

    TrainResult result;
    std::uint64_t sample_counter = 0;

    for (std::int64_t it = 1; it <= config.max_iterations; ++it) {
        if (cursor >= order.size()) {
            std::shuffle(order.begin(), order.end(), shuffle_rng);
            cursor = 0;
        }
        const std::size_t take =
            std::min<std::size_t>(config.batch_size, order.size() - cursor);

        // Assemble the batch. Fresh-mask mode redraws the sampling pattern
        // per sample with a derived seed; the default keeps one fixed mask.
        Tensor<float> input, target;
        for (std::size_t k = 0; k < take; ++k) {
            const std::size_t idx = order[cursor + k];
            const std::uint64_t pair_seed = mix_seed(config.seed, ++sample_counter);
            TaskSpec sample_task = task;
            if (task.fresh_mask_per_sample &&
                (task.kind == TaskKind::csmri || task.kind == TaskKind::csmri_noisy))
                sample_task.mask =
                    gen_mask(task.mask.family, task.mask.height, task.mask.width,
                             task.mask.requested_rate, pair_seed);
            TrainingPair<float> pair = make_pair(ds.items[idx], sample_task,
                                                 pair_seed);
            if (k == 0) {
                input = Tensor<float>(static_cast<int>(take), pair.input.c(),
                                      pair.input.h(), pair.input.w());
                target = Tensor<float>(static_cast<int>(take), pair.target.c(),
                                       pair.target.h(), pair.target.w());
            }
            std::copy_n(pair.input.plane(0, 0), pair.input.sample_size(),
                        input.plane(static_cast<int>(k), 0));
            std::copy_n(pair.target.plane(0, 0), pair.target.sample_size(),
                        target.plane(static_cast<int>(k), 0));
        }
        cursor += take;
        const bool epoch_end = cursor >= order.size();

        model.zero_grad();
        LossResult<float> loss;
        try {
            Tensor<float> out = model.forward(input, Mode::train);
            loss = mse_loss<float>({&out}, {&target});
        } catch (const std::runtime_error& e) {
            throw std::runtime_error(msg("train: aborted at iteration ", it, ": ",
                                         e.what()));
        }
        if (!std::isfinite(loss.value))
            throw std::runtime_error(msg("train: non-finite loss at iteration ",
                                         it));
        model.backward(loss.grads[0]);

        const double lr = step_lr(it - 1, config.optimizer);
        model.for_each_parameter([&](const std::string&, Parameter<float>& p) {
            adam_step(p, config.optimizer, lr);
        });

        const bool eval_now =
            test_ds != nullptr && (config.eval_every > 0
                                       ? it % config.eval_every == 0
                                       : epoch_end);
        if (it % 100 == 0 || it == config.max_iterations || eval_now) {
            LossPoint point{it, lr, loss.value};
            if (eval_now)
                point.test_psnr =
                    evaluate_mean_psnr(model, *test_ds, task, config.seed);
            result.curve.push_back(point);
        }
        if (config.checkpoint_every > 0 && !checkpoint_path.empty() &&
            it % config.checkpoint_every == 0 && it != config.max_iterations)
            save_checkpoint(msg(checkpoint_path, ".iter", it), model);
        result.iterations_run = it;
    }
    return result;
}

/// CSV: iteration,lr,train_loss[,test_psnr]
inline void write_loss_curve(const std::string& path,
                             const std::vector<LossPoint>& curve) {
    std::ofstream out(path);
    if (!out) throw IoError(msg("cannot write loss curve '", path, "'"));
    bool any_test = false;
    for (const LossPoint& p : curve) any_test |= !std::isnan(p.test_psnr);
    out << "iteration,lr,train_loss" << (any_test ? ",test_psnr" : "") << "\n";
    out.precision(12);
    for (const LossPoint& p : curve) {
        out << p.iteration << "," << p.lr << "," << p.train_loss;
        if (any_test) {
            out << ",";
            if (!std::isnan(p.test_psnr)) out << p.test_psnr;
        }
        out << "\n";
    }
    if (!out) throw IoError(msg("failed while writing loss curve '", path, "'"));
}

}  // namespace mdn

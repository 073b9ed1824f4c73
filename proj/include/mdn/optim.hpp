#pragma once

#include <cmath>
#include <cstdint>

#include "mdn/errors.hpp"
#include "mdn/tensor.hpp"

namespace mdn {

/// Adam with coupled L2 weight decay and a step learning-rate policy.
struct OptimizerConfig {
    double base_lr = 0.001;
    double weight_decay = 0.0001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double lr_gamma = 0.1;
    std::int64_t lr_step = 50000;
    std::int64_t max_iterations = 250000;
};

/// A trainable tensor together with its gradient and Adam state.
template <typename T = float>
struct Parameter {
    Tensor<T> value;
    Tensor<T> gradient;
    Tensor<T> adam_m;
    Tensor<T> adam_v;
    std::int64_t step_count = 0;

    Parameter() = default;
    explicit Parameter(Tensor<T> v)
        : value(std::move(v)),
          gradient(value.shape()),
          adam_m(value.shape()),
          adam_v(value.shape()) {}

    void zero_grad() { gradient.fill(T(0)); }

    void reset_state() {
        gradient.fill(T(0));
        adam_m.fill(T(0));
        adam_v.fill(T(0));
        step_count = 0;
    }
};

/// lr = base_lr * gamma^floor(iteration / lr_step)
inline double step_lr(std::int64_t iteration, const OptimizerConfig& config) {
    if (iteration < 0) throw ConfigError("step_lr: negative iteration");
    const auto stage = iteration / config.lr_step;
    return config.base_lr * std::pow(config.lr_gamma, static_cast<double>(stage));
}

/// One Adam update. Weight decay enters as an L2 term added to the gradient
/// (the solver convention), then the usual bias-corrected moment update.
template <typename T>
void adam_step(Parameter<T>& param, const OptimizerConfig& config, double lr) {
    if (lr <= 0) throw ConfigError(msg("adam: learning rate must be > 0, got ", lr));
    param.step_count += 1;
    const double b1 = config.beta1;
    const double b2 = config.beta2;
    const double correction1 = 1.0 - std::pow(b1, static_cast<double>(param.step_count));
    const double correction2 = 1.0 - std::pow(b2, static_cast<double>(param.step_count));
    const T wd = static_cast<T>(config.weight_decay);
    for (std::size_t i = 0; i < param.value.size(); ++i) {
        const T g = param.gradient[i] + wd * param.value[i];
        param.adam_m[i] = static_cast<T>(b1 * param.adam_m[i] + (1.0 - b1) * g);
        param.adam_v[i] = static_cast<T>(b2 * param.adam_v[i] + (1.0 - b2) * g * g);
        const double m_hat = param.adam_m[i] / correction1;
        const double v_hat = param.adam_v[i] / correction2;
        param.value[i] -=
            static_cast<T>(lr * m_hat / (std::sqrt(v_hat) + config.epsilon));
    }
}

}  // namespace mdn

#pragma once

#include <cmath>
#include <vector>

#include "mdn/errors.hpp"
#include "mdn/tensor.hpp"

namespace mdn {

enum class Mode { train, infer };

template <typename T>
struct RunningStats {
    std::vector<T> mean;      // one entry per channel
    std::vector<T> variance;  // biased, matching the batch statistic

    explicit RunningStats(int channels = 0)
        : mean(channels, T(0)), variance(channels, T(1)) {}
};

/// What the backward pass needs from a training-mode forward.
template <typename T>
struct BatchNormSaved {
    std::vector<T> inv_std;   // per channel, 1/sqrt(var + eps)
    Tensor<T> normalized;     // x-hat
};

template <typename T>
struct BatchNormGrads {
    Tensor<T> input;
    Tensor<T> gamma;
    Tensor<T> beta;
};

template <typename T>
void check_bn_args(const Tensor<T>& input, const Tensor<T>& gamma,
                   const Tensor<T>& beta) {
    TensorShape want{1, input.c(), 1, 1};
    if (!(gamma.shape() == want) || !(beta.shape() == want))
        throw ShapeError(msg("batchnorm: gamma/beta must be 1x", input.c(),
                             "x1x1, got ", gamma.shape().str(), " and ",
                             beta.shape().str()));
}

/// Per-channel normalization over (batch, rows, cols). Training mode uses the
/// batch statistics and folds them into the running averages; inference mode
/// reads the running averages only. eps keeps zero-variance channels finite.
template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& input, const Tensor<T>& gamma,
                            const Tensor<T>& beta, Mode mode,
                            RunningStats<T>& running, T momentum, T eps,
                            BatchNormSaved<T>* saved = nullptr) {
    check_bn_args(input, gamma, beta);
    if (static_cast<int>(running.mean.size()) != input.c())
        throw ShapeError(msg("batchnorm: running stats track ",
                             running.mean.size(), " channels, input has ",
                             input.c()));

    const std::size_t plane = input.plane_size();
    const double count = static_cast<double>(input.n()) * plane;
    Tensor<T> out = Tensor<T>::uninitialized(input.shape());
    if (saved != nullptr) {
        saved->inv_std.assign(input.c(), T(0));
        saved->normalized = Tensor<T>::uninitialized(input.shape());
    }

    // Channels are independent; each one is reduced sequentially by a single
    // thread, so the parallel schedule cannot perturb the statistics.
#pragma omp parallel for schedule(static) if (input.size() > 1u << 15)
    for (int c = 0; c < input.c(); ++c) {
        T mean, var;
        if (mode == Mode::train) {
            double sum = 0.0, sq = 0.0;
            for (int n = 0; n < input.n(); ++n) {
                const T* p = input.plane(n, c);
                for (std::size_t i = 0; i < plane; ++i) {
                    sum += p[i];
                    sq += static_cast<double>(p[i]) * p[i];
                }
            }
            const double m = sum / count;
            mean = static_cast<T>(m);
            var = static_cast<T>(std::max(0.0, sq / count - m * m));
            running.mean[c] = (T(1) - momentum) * running.mean[c] + momentum * mean;
            running.variance[c] =
                (T(1) - momentum) * running.variance[c] + momentum * var;
        } else {
            mean = running.mean[c];
            var = running.variance[c];
        }
        const T inv_std = T(1) / std::sqrt(var + eps);
        const T g = gamma[static_cast<std::size_t>(c)];
        const T b = beta[static_cast<std::size_t>(c)];
        if (saved != nullptr) saved->inv_std[c] = inv_std;
        for (int n = 0; n < input.n(); ++n) {
            const T* p = input.plane(n, c);
            T* o = out.plane(n, c);
            T* xh = saved != nullptr ? saved->normalized.plane(n, c) : nullptr;
            for (std::size_t i = 0; i < plane; ++i) {
                const T norm = (p[i] - mean) * inv_std;
                if (xh != nullptr) xh[i] = norm;
                o[i] = g * norm + b;
            }
        }
    }
    return out;
}

/// Training-mode backward through the batch statistics.
template <typename T>
BatchNormGrads<T> batchnorm_backward(const Tensor<T>& upstream,
                                     const Tensor<T>& gamma,
                                     const BatchNormSaved<T>& saved) {
    const Tensor<T>& xhat = saved.normalized;
    require_same_shape(upstream, xhat, "batchnorm backward");
    const std::size_t plane = upstream.plane_size();
    const double count = static_cast<double>(upstream.n()) * plane;

    BatchNormGrads<T> g{Tensor<T>::uninitialized(upstream.shape()),
                        Tensor<T>(1, upstream.c(), 1, 1),
                        Tensor<T>(1, upstream.c(), 1, 1)};
#pragma omp parallel for schedule(static) if (upstream.size() > 1u << 15)
    for (int c = 0; c < upstream.c(); ++c) {
        double dbeta = 0.0, dgamma = 0.0;
        for (int n = 0; n < upstream.n(); ++n) {
            const T* up = upstream.plane(n, c);
            const T* xh = xhat.plane(n, c);
            for (std::size_t i = 0; i < plane; ++i) {
                dbeta += up[i];
                dgamma += static_cast<double>(up[i]) * xh[i];
            }
        }
        g.beta[static_cast<std::size_t>(c)] = static_cast<T>(dbeta);
        g.gamma[static_cast<std::size_t>(c)] = static_cast<T>(dgamma);

        const double scale =
            static_cast<double>(gamma[static_cast<std::size_t>(c)]) *
            saved.inv_std[c] / count;
        for (int n = 0; n < upstream.n(); ++n) {
            const T* up = upstream.plane(n, c);
            const T* xh = xhat.plane(n, c);
            T* gi = g.input.plane(n, c);
            for (std::size_t i = 0; i < plane; ++i) {
                gi[i] = static_cast<T>(scale * (count * up[i] - dbeta - xh[i] * dgamma));
            }
        }
    }
    return g;
}

}  // namespace mdn

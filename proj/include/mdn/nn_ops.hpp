#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "mdn/errors.hpp"
#include "mdn/tensor.hpp"

namespace mdn {

// Elementwise kernels go parallel above this size; they carry no cross-entry
// reductions, so threading cannot change results.
inline constexpr std::size_t kParallelCutoff = 1 << 15;

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& input) {
    Tensor<T> out = Tensor<T>::uninitialized(input.shape());
    const std::int64_t count = static_cast<std::int64_t>(input.size());
#pragma omp parallel for simd schedule(static) if (input.size() > kParallelCutoff)
    for (std::int64_t i = 0; i < count; ++i)
        out[i] = input[i] > T(0) ? input[i] : T(0);
    return out;
}

/// Passes upstream where the forward input was strictly positive. The gate
/// works equally on the layer's output, which is positive exactly where the
/// input was.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& input, const Tensor<T>& upstream) {
    require_same_shape(input, upstream, "relu backward");
    Tensor<T> out = Tensor<T>::uninitialized(input.shape());
    const std::int64_t count = static_cast<std::int64_t>(input.size());
#pragma omp parallel for simd schedule(static) if (input.size() > kParallelCutoff)
    for (std::int64_t i = 0; i < count; ++i)
        out[i] = input[i] > T(0) ? upstream[i] : T(0);
    return out;
}

template <typename T>
Tensor<T> residual_add(const Tensor<T>& a, const Tensor<T>& b) {
    require_same_shape(a, b, "residual add");
    Tensor<T> out = Tensor<T>::uninitialized(a.shape());
    const std::int64_t count = static_cast<std::int64_t>(a.size());
#pragma omp parallel for simd schedule(static) if (a.size() > kParallelCutoff)
    for (std::int64_t i = 0; i < count; ++i) out[i] = a[i] + b[i];
    return out;
}

/// Stacks feature maps along the channel dimension, in argument order.
template <typename T>
Tensor<T> concat_channels(const std::vector<const Tensor<T>*>& parts) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const Tensor<T>& first = *parts.front();
    int channels = 0;
    for (const Tensor<T>* p : parts) {
        if (p->n() != first.n() || p->h() != first.h() || p->w() != first.w())
            throw ShapeError(msg("concat: part ", p->shape().str(),
                                 " incompatible with ", first.shape().str()));
        channels += p->c();
    }
    Tensor<T> out =
        Tensor<T>::uninitialized({first.n(), channels, first.h(), first.w()});
    for (int n = 0; n < first.n(); ++n) {
        int at = 0;
        for (const Tensor<T>* p : parts) {
            std::copy_n(p->plane(n, 0), p->sample_size(), out.plane(n, at));
            at += p->c();
        }
    }
    return out;
}

/// Splits upstream back at the same channel boundaries.
template <typename T>
std::vector<Tensor<T>> concat_backward(const Tensor<T>& upstream,
                                       const std::vector<int>& part_channels) {
    int total = 0;
    for (int c : part_channels) total += c;
    if (total != upstream.c())
        throw ShapeError(msg("concat backward: parts sum to ", total,
                             " channels, upstream has ", upstream.c()));
    std::vector<Tensor<T>> grads;
    grads.reserve(part_channels.size());
    int at = 0;
    for (int c : part_channels) {
        Tensor<T> g =
            Tensor<T>::uninitialized({upstream.n(), c, upstream.h(), upstream.w()});
        for (int n = 0; n < upstream.n(); ++n)
            std::copy_n(upstream.plane(n, at), g.sample_size(), g.plane(n, 0));
        grads.push_back(std::move(g));
        at += c;
    }
    return grads;
}

template <typename T>
struct LossResult {
    double value = 0.0;
    std::vector<Tensor<T>> grads;
};

/// Mean-squared-error objective: half the per-image pixel-mean squared error,
/// averaged over all images in the list. The per-image pixel mean keeps the
/// magnitude independent of resolution.
template <typename T>
LossResult<T> mse_loss(const std::vector<const Tensor<T>*>& predictions,
                       const std::vector<const Tensor<T>*>& targets) {
    if (predictions.empty()) throw ShapeError("mse: empty prediction list");
    if (predictions.size() != targets.size())
        throw ShapeError(msg("mse: ", predictions.size(), " predictions vs ",
                             targets.size(), " targets"));
    std::size_t image_count = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        require_same_shape(*predictions[i], *targets[i], "mse");
        image_count += static_cast<std::size_t>(predictions[i]->n());
    }
    if (image_count == 0) throw ShapeError("mse: zero images");

    LossResult<T> result;
    double total = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const Tensor<T>& p = *predictions[i];
        const Tensor<T>& t = *targets[i];
        Tensor<T> grad = Tensor<T>::uninitialized(p.shape());
        const double pixels = static_cast<double>(p.sample_size());
        const T grad_scale = static_cast<T>(1.0 / (pixels * image_count));
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double diff = static_cast<double>(p[j]) - static_cast<double>(t[j]);
            total += diff * diff / pixels;
            grad[j] = static_cast<T>(diff) * grad_scale;
        }
        result.grads.push_back(std::move(grad));
    }
    result.value = total / (2.0 * image_count);
    return result;
}

}  // namespace mdn

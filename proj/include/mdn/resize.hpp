#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mdn/errors.hpp"
#include "mdn/tensor.hpp"

namespace mdn {

namespace detail {

// Catmull-Rom cubic (a = -0.5), the usual bicubic interpolation kernel.
inline double cubic_kernel(double x) {
    constexpr double a = -0.5;
    x = std::fabs(x);
    if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0) return (((x - 5.0) * x + 8.0) * x - 4.0) * a;
    return 0.0;
}

// One separable pass. When shrinking, the kernel is stretched by the scale
// factor so it acts as an antialiasing filter. Weights are renormalized,
// which also handles the clamped borders.
inline void resize_axis(const std::vector<double>& src, int count, int n_in,
                        int stride_in, std::vector<double>& dst, int n_out,
                        int stride_out, int line_stride_in, int line_stride_out) {
    const double scale = static_cast<double>(n_in) / n_out;
    const double support = std::max(1.0, scale);
    const double radius = 2.0 * support;
    for (int i = 0; i < n_out; ++i) {
        const double center = (i + 0.5) * scale - 0.5;
        const int lo = static_cast<int>(std::ceil(center - radius));
        const int hi = static_cast<int>(std::floor(center + radius));
        double wsum = 0.0;
        std::vector<double> w(hi - lo + 1);
        for (int j = lo; j <= hi; ++j) {
            w[j - lo] = cubic_kernel((j - center) / support);
            wsum += w[j - lo];
        }
        for (int line = 0; line < count; ++line) {
            double acc = 0.0;
            for (int j = lo; j <= hi; ++j) {
                const int jj = std::clamp(j, 0, n_in - 1);
                acc += w[j - lo] * src[line * line_stride_in + jj * stride_in];
            }
            dst[line * line_stride_out + i * stride_out] = acc / wsum;
        }
    }
}

}  // namespace detail

/// Scale-aware bicubic resampling of one image plane. Same-size requests are
/// the identity.
inline void resize_bicubic(const float* src, int h, int w, float* dst, int oh,
                           int ow) {
    if (h <= 0 || w <= 0 || oh <= 0 || ow <= 0)
        throw ShapeError(msg("resize: invalid sizes ", h, "x", w, " -> ", oh, "x",
                             ow));
    if (h == oh && w == ow) {
        std::copy_n(src, std::size_t(h) * w, dst);
        return;
    }
    std::vector<double> work(std::size_t(h) * w);
    for (std::size_t i = 0; i < work.size(); ++i) work[i] = src[i];

    // Horizontal pass, then vertical.
    std::vector<double> mid(std::size_t(h) * ow);
    detail::resize_axis(work, h, w, 1, mid, ow, 1, w, ow);
    std::vector<double> full(std::size_t(oh) * ow);
    detail::resize_axis(mid, ow, h, ow, full, oh, ow, 1, 1);

    for (std::size_t i = 0; i < full.size(); ++i)
        dst[i] = static_cast<float>(full[i]);
}

inline Tensor<float> resize_bicubic(const Tensor<float>& image, int oh, int ow) {
    Tensor<float> out(image.n(), image.c(), oh, ow);
    for (int n = 0; n < image.n(); ++n)
        for (int c = 0; c < image.c(); ++c)
            resize_bicubic(image.plane(n, c), image.h(), image.w(),
                           out.plane(n, c), oh, ow);
    return out;
}

}  // namespace mdn

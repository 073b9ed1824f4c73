#pragma once

#include <algorithm>
#include <cstring>
#include <vector>

#include "mdn/blas.hpp"
#include "mdn/errors.hpp"
#include "mdn/tensor.hpp"

namespace mdn {

/// Geometry of one convolution layer. Stride is fixed at 1 and padding is
/// tied to dilation*(kernel-1)/2 so the spatial size never changes; every
/// layer in the network relies on that to keep residual sums shape-compatible.
struct ConvSpec {
    int in_channels = 0;
    int out_channels = 0;
    int kernel_size = 3;
    int dilation = 1;
    int padding = 1;

    static ConvSpec same(int in_ch, int out_ch, int kernel, int dilation = 1) {
        ConvSpec s;
        s.in_channels = in_ch;
        s.out_channels = out_ch;
        s.kernel_size = kernel;
        s.dilation = dilation;
        s.padding = dilation * (kernel - 1) / 2;
        return s;
    }

    /// Pixel span one kernel application covers.
    int extent() const { return dilation * (kernel_size - 1) + 1; }

    int weight_count() const {
        return out_channels * in_channels * kernel_size * kernel_size;
    }

    void validate() const {
        if (in_channels <= 0 || out_channels <= 0)
            throw ConfigError(msg("conv: channel counts must be positive, got ",
                                  in_channels, " -> ", out_channels));
        if (kernel_size <= 0 || kernel_size % 2 == 0)
            throw ConfigError(msg("conv: kernel size must be odd and positive, got ",
                                  kernel_size));
        if (dilation < 1)
            throw ConfigError(msg("conv: dilation must be >= 1, got ", dilation));
        if (padding != dilation * (kernel_size - 1) / 2)
            throw ConfigError(msg("conv: padding ", padding,
                                  " does not preserve spatial size for kernel ",
                                  kernel_size, " dilation ", dilation));
    }
};

template <typename T>
struct ConvGrads {
    Tensor<T> input;
    Tensor<T> weights;
    Tensor<T> bias;
};

namespace detail {

// Layout: row (c, i, j) of the patch matrix holds input[c, y + d*i - p, x + d*j - p]
// for every output pixel (y, x), zero where the tap falls outside the image.
// Rows are built with contiguous copies over the valid x-run per output row.
template <typename T>
void im2col(const T* image, int channels, int height, int width,
            const ConvSpec& s, T* col) {
    const int k = s.kernel_size;
    const int d = s.dilation;
    const int p = s.padding;
    const std::size_t plane = static_cast<std::size_t>(height) * width;
    T* row = col;
    for (int c = 0; c < channels; ++c) {
        const T* src = image + c * plane;
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) {
                const int x_shift = d * j - p;
                const int x_begin = std::max(0, -x_shift);
                const int x_end = std::min(width, width - x_shift);
                for (int y = 0; y < height; ++y, row += width) {
                    const int y_src = y + d * i - p;
                    if (y_src < 0 || y_src >= height || x_begin >= x_end) {
                        std::memset(row, 0, sizeof(T) * width);
                        continue;
                    }
                    if (x_begin > 0) std::memset(row, 0, sizeof(T) * x_begin);
                    std::memcpy(row + x_begin, src + y_src * width + x_begin + x_shift,
                                sizeof(T) * (x_end - x_begin));
                    if (x_end < width)
                        std::memset(row + x_end, 0, sizeof(T) * (width - x_end));
                }
            }
        }
    }
}

// Adjoint of im2col: scatter-add patch-matrix rows back into the image.
template <typename T>
void col2im(const T* col, int channels, int height, int width,
            const ConvSpec& s, T* image) {
    const int k = s.kernel_size;
    const int d = s.dilation;
    const int p = s.padding;
    const std::size_t plane = static_cast<std::size_t>(height) * width;
    const T* row = col;
    for (int c = 0; c < channels; ++c) {
        T* dst = image + c * plane;
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < k; ++j) {
                const int x_shift = d * j - p;
                const int x_begin = std::max(0, -x_shift);
                const int x_end = std::min(width, width - x_shift);
                for (int y = 0; y < height; ++y, row += width) {
                    const int y_src = y + d * i - p;
                    if (y_src < 0 || y_src >= height) continue;
                    T* out = dst + y_src * width + x_shift;
                    for (int x = x_begin; x < x_end; ++x) out[x] += row[x];
                }
            }
        }
    }
}

}  // namespace detail

template <typename T>
void check_conv_args(const Tensor<T>& input, const ConvSpec& spec,
                     const Tensor<T>& weights, const Tensor<T>* bias) {
    spec.validate();
    if (input.c() != spec.in_channels)
        throw ShapeError(msg("conv: input has ", input.c(), " channels, spec wants ",
                             spec.in_channels));
    TensorShape want{spec.out_channels, spec.in_channels, spec.kernel_size,
                     spec.kernel_size};
    if (!(weights.shape() == want))
        throw ShapeError(msg("conv: weights are ", weights.shape().str(),
                             ", expected ", want.str()));
    if (bias != nullptr && !(bias->shape() == TensorShape{1, spec.out_channels, 1, 1}))
        throw ShapeError(msg("conv: bias is ", bias->shape().str(), ", expected 1x",
                             spec.out_channels, "x1x1"));
}

/// Spatial-size-preserving 2-D convolution (stride 1, zero padding, arbitrary
/// dilation). Computed per image as weights[KxCkk] * patches[Ckk x HW] so the
/// inner product runs through GEMM; batch entries are independent and run in
/// parallel.
namespace detail {

// Reused per-thread im2col scratch; every call overwrites it in full.
template <typename T>
T* col_scratch(std::size_t count) {
    thread_local std::vector<T, default_init_allocator<T>> scratch;
    if (scratch.size() < count) scratch.resize(count);
    return scratch.data();
}

// Few-output-channel layers (the fusion convolution in particular) spend far
// more on building the patch matrix than on the tiny GEMM it feeds; below
// this width the direct shifted-row loops win.
inline constexpr int kDirectConvMaxOut = 4;

struct TapRange {
    int x_begin, x_end;  // valid output columns for this kernel tap
    int y_begin, y_end;  // valid output rows
    int x_shift, y_shift;
};

inline TapRange tap_range(const ConvSpec& s, int i, int j, int h, int w) {
    TapRange r;
    r.y_shift = s.dilation * i - s.padding;
    r.x_shift = s.dilation * j - s.padding;
    r.y_begin = std::max(0, -r.y_shift);
    r.y_end = std::min(h, h - r.y_shift);
    r.x_begin = std::max(0, -r.x_shift);
    r.x_end = std::min(w, w - r.x_shift);
    return r;
}

template <typename T>
void direct_forward_image(const T* in, const ConvSpec& s, const T* weights,
                          const T* bias, int h, int w, T* out) {
    const std::size_t plane = std::size_t(h) * w;
    const int k = s.kernel_size;
    for (int o = 0; o < s.out_channels; ++o) {
        T* dst = out + o * plane;
        std::fill_n(dst, plane, bias[o]);
        for (int c = 0; c < s.in_channels; ++c) {
            const T* src = in + c * plane;
            for (int i = 0; i < k; ++i)
                for (int j = 0; j < k; ++j) {
                    const TapRange r = tap_range(s, i, j, h, w);
                    const T wv = weights[((o * s.in_channels + c) * k + i) * k + j];
                    for (int y = r.y_begin; y < r.y_end; ++y) {
                        T* __restrict orow = dst + std::size_t(y) * w;
                        const T* __restrict irow =
                            src + std::size_t(y + r.y_shift) * w + r.x_shift;
#pragma omp simd
                        for (int x = r.x_begin; x < r.x_end; ++x)
                            orow[x] += wv * irow[x];
                    }
                }
        }
    }
}

template <typename T>
void direct_grad_input_image(const T* up, const ConvSpec& s, const T* weights,
                             int h, int w, T* gin) {
    const std::size_t plane = std::size_t(h) * w;
    const int k = s.kernel_size;
    for (int o = 0; o < s.out_channels; ++o) {
        const T* urow_base = up + o * plane;
        for (int c = 0; c < s.in_channels; ++c) {
            T* grow_base = gin + c * plane;
            for (int i = 0; i < k; ++i)
                for (int j = 0; j < k; ++j) {
                    const TapRange r = tap_range(s, i, j, h, w);
                    const T wv = weights[((o * s.in_channels + c) * k + i) * k + j];
                    for (int y = r.y_begin; y < r.y_end; ++y) {
                        const T* __restrict urow = urow_base + std::size_t(y) * w;
                        T* __restrict grow =
                            grow_base + std::size_t(y + r.y_shift) * w + r.x_shift;
#pragma omp simd
                        for (int x = r.x_begin; x < r.x_end; ++x)
                            grow[x] += wv * urow[x];
                    }
                }
        }
    }
}

template <typename T>
void direct_grad_weights_image(const T* in, const ConvSpec& s, const T* up,
                               int h, int w, T* dw) {
    const std::size_t plane = std::size_t(h) * w;
    const int k = s.kernel_size;
    for (int o = 0; o < s.out_channels; ++o) {
        const T* urow_base = up + o * plane;
        for (int c = 0; c < s.in_channels; ++c) {
            const T* src = in + c * plane;
            for (int i = 0; i < k; ++i)
                for (int j = 0; j < k; ++j) {
                    const TapRange r = tap_range(s, i, j, h, w);
                    T acc = T(0);
                    for (int y = r.y_begin; y < r.y_end; ++y) {
                        const T* __restrict urow = urow_base + std::size_t(y) * w;
                        const T* __restrict irow =
                            src + std::size_t(y + r.y_shift) * w + r.x_shift;
#pragma omp simd reduction(+ : acc)
                        for (int x = r.x_begin; x < r.x_end; ++x)
                            acc += urow[x] * irow[x];
                    }
                    dw[((o * s.in_channels + c) * k + i) * k + j] = acc;
                }
        }
    }
}

}  // namespace detail

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const ConvSpec& spec,
                         const Tensor<T>& weights, const Tensor<T>& bias) {
    check_conv_args(input, spec, weights, &bias);
    const int rows = spec.in_channels * spec.kernel_size * spec.kernel_size;
    const int cols = input.h() * input.w();
    Tensor<T> out = Tensor<T>::uninitialized(
        {input.n(), spec.out_channels, input.h(), input.w()});

    if (spec.out_channels <= detail::kDirectConvMaxOut) {
#pragma omp parallel for schedule(static)
        for (int n = 0; n < input.n(); ++n)
            detail::direct_forward_image(input.plane(n, 0), spec, weights.data(),
                                         bias.data(), input.h(), input.w(),
                                         out.plane(n, 0));
        return out;
    }

#pragma omp parallel
    {
        T* col = detail::col_scratch<T>(static_cast<std::size_t>(rows) * cols);
#pragma omp for schedule(static)
        for (int n = 0; n < input.n(); ++n) {
            detail::im2col(input.plane(n, 0), input.c(), input.h(), input.w(), spec,
                           col);
            T* dst = out.plane(n, 0);
            for (int o = 0; o < spec.out_channels; ++o)
                std::fill_n(dst + o * static_cast<std::size_t>(cols), cols,
                            bias[static_cast<std::size_t>(o)]);
            gemm(false, false, spec.out_channels, cols, rows, T(1), weights.data(),
                 rows, col, cols, T(1), dst, cols);
        }
    }
    return out;
}

/// Exact gradients of conv2d_forward for input, weights and bias.
template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const ConvSpec& spec,
                             const Tensor<T>& weights, const Tensor<T>& upstream) {
    check_conv_args<T>(input, spec, weights, nullptr);
    TensorShape want{input.n(), spec.out_channels, input.h(), input.w()};
    if (!(upstream.shape() == want))
        throw ShapeError(msg("conv backward: upstream is ", upstream.shape().str(),
                             ", expected ", want.str()));

    const int rows = spec.in_channels * spec.kernel_size * spec.kernel_size;
    const int cols = input.h() * input.w();
    const bool direct = spec.out_channels <= detail::kDirectConvMaxOut;
    ConvGrads<T> g{direct ? Tensor<T>(input.shape())
                          : Tensor<T>::uninitialized(input.shape()),
                   Tensor<T>(), Tensor<T>(1, spec.out_channels, 1, 1)};

    // Per-image weight gradients land in scratch slabs and are reduced in
    // batch order afterwards, so thread scheduling cannot change the result.
    std::vector<Tensor<T>> dw_per_image;
    dw_per_image.reserve(input.n());
    for (int n = 0; n < input.n(); ++n)
        dw_per_image.push_back(Tensor<T>::uninitialized(weights.shape()));

    if (direct) {
#pragma omp parallel for schedule(static)
        for (int n = 0; n < input.n(); ++n) {
            const T* up = upstream.plane(n, 0);
            detail::direct_grad_input_image(up, spec, weights.data(), input.h(),
                                            input.w(), g.input.plane(n, 0));
            detail::direct_grad_weights_image(input.plane(n, 0), spec, up,
                                              input.h(), input.w(),
                                              dw_per_image[n].data());
        }
    } else {
        // d(input) two ways. It is itself a convolution of the upstream with
        // the weights transposed across channels and flipped spatially (the
        // same-padding geometry is symmetric), which pays off when the
        // upstream patch matrix is the smaller one; otherwise the transposed
        // GEMM plus scatter works on less data.
        const int k = spec.kernel_size;
        const int up_rows = spec.out_channels * k * k;
        const bool use_flipped = up_rows < rows;
        ConvSpec flipped = ConvSpec::same(spec.out_channels, spec.in_channels, k,
                                          spec.dilation);
        Tensor<T> wflip;
        if (use_flipped) {
            wflip = Tensor<T>::uninitialized(
                {spec.in_channels, spec.out_channels, k, k});
            for (int o = 0; o < spec.out_channels; ++o)
                for (int c = 0; c < spec.in_channels; ++c)
                    for (int i = 0; i < k; ++i)
                        for (int j = 0; j < k; ++j)
                            wflip.at(c, o, k - 1 - i, k - 1 - j) =
                                weights.at(o, c, i, j);
        } else {
            g.input.fill(T(0));  // col2im accumulates
        }

#pragma omp parallel
        {
            T* col = detail::col_scratch<T>(
                static_cast<std::size_t>(std::max(rows, up_rows)) * cols);
#pragma omp for schedule(static)
            for (int n = 0; n < input.n(); ++n) {
                const T* up = upstream.plane(n, 0);
                if (use_flipped) {
                    detail::im2col(up, spec.out_channels, input.h(), input.w(),
                                   flipped, col);
                    gemm(false, false, spec.in_channels, cols, up_rows, T(1),
                         wflip.data(), up_rows, col, cols, T(0),
                         g.input.plane(n, 0), cols);
                } else {
                    gemm(true, false, rows, cols, spec.out_channels, T(1),
                         weights.data(), rows, up, cols, T(0), col, cols);
                    detail::col2im(col, spec.in_channels, input.h(), input.w(),
                                   spec, g.input.plane(n, 0));
                }
                // d(weights): upstream * patchesᵀ.
                detail::im2col(input.plane(n, 0), input.c(), input.h(), input.w(),
                               spec, col);
                gemm(false, true, spec.out_channels, rows, cols, T(1), up, cols,
                     col, cols, T(0), dw_per_image[n].data(), rows);
            }
        }
    }

    g.weights = std::move(dw_per_image[0]);
    for (int n = 1; n < input.n(); ++n) {
        const Tensor<T>& dw = dw_per_image[n];
        for (std::size_t i = 0; i < dw.size(); ++i) g.weights[i] += dw[i];
    }
    for (int n = 0; n < input.n(); ++n) {
        for (int o = 0; o < spec.out_channels; ++o) {
            const T* up = upstream.plane(n, o);
            T sum = T(0);
            for (int i = 0; i < cols; ++i) sum += up[i];
            g.bias[static_cast<std::size_t>(o)] += sum;
        }
    }
    return g;
}

}  // namespace mdn

#pragma once

#include <cmath>
#include <complex>

#include "mdn/errors.hpp"
#include "mdn/fft.hpp"
#include "mdn/mask.hpp"
#include "mdn/rng.hpp"
#include "mdn/tensor.hpp"

namespace mdn {

namespace detail {
inline void require_dims(int ah, int aw, int bh, int bw, const char* op) {
    if (ah != bh || aw != bw)
        throw ShapeError(msg(op, ": dimension mismatch, ", ah, "x", aw, " vs ", bh,
                             "x", bw));
}
}  // namespace detail

/// Measured k-space: the masked spectrum of the image, zero where unsampled.
inline KSpaceGrid undersample(const ComplexImage& image, const SamplingMask& mask) {
    detail::require_dims(image.height, image.width, mask.height, mask.width,
                         "undersample");
    KSpaceGrid y = fft2_centered(image);
    for (std::size_t i = 0; i < y.size(); ++i)
        if (!mask.bits[i]) y.data[i] = std::complex<float>(0.0f, 0.0f);
    return y;
}

/// Direct inverse transform of undersampled data; the aliased baseline every
/// reconstruction starts from.
inline ComplexImage zero_fill(const KSpaceGrid& y) { return ifft2_centered(y); }

/// Adds iid Gaussian noise of standard deviation v to the real and imaginary
/// parts of the sampled coefficients. The draws are unit normals scaled by v,
/// so a fixed seed yields the same noise pattern at every level.
inline KSpaceGrid add_measurement_noise(const KSpaceGrid& y,
                                        const SamplingMask& mask, double v,
                                        std::uint64_t seed) {
    detail::require_dims(y.height, y.width, mask.height, mask.width,
                         "add_measurement_noise");
    if (v < 0.0) throw ConfigError(msg("noise stddev must be >= 0, got ", v));
    KSpaceGrid noisy = y;
    if (v == 0.0) return noisy;
    auto rng = make_engine(seed, 0x4015E);
    std::normal_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!mask.bits[i]) continue;
        const double re = unit(rng), im = unit(rng);
        noisy.data[i] += std::complex<float>(float(v * re), float(v * im));
    }
    return noisy;
}

/// Blends the network output with the measurements in k-space. At sampled
/// positions the coefficient becomes (y + lambda*X)/(1 + lambda); lambda = 0
/// replaces them with the measurements outright. Unsampled positions keep the
/// network's spectrum.
inline ComplexImage data_consistency(const ComplexImage& x_cnn, const KSpaceGrid& y,
                                     const SamplingMask& mask, double lambda) {
    detail::require_dims(x_cnn.height, x_cnn.width, y.height, y.width,
                         "data_consistency");
    detail::require_dims(x_cnn.height, x_cnn.width, mask.height, mask.width,
                         "data_consistency");
    if (lambda < 0.0)
        throw ConfigError(msg("data_consistency: lambda must be >= 0, got ", lambda));
    KSpaceGrid k = fft2_centered(x_cnn);
    const float l = static_cast<float>(lambda);
    const float inv = 1.0f / (1.0f + l);
    for (std::size_t i = 0; i < k.size(); ++i)
        if (mask.bits[i]) k.data[i] = (y.data[i] + l * k.data[i]) * inv;
    return ifft2_centered(k);
}

/// Real and imaginary parts as the two channels of a 1x2xHxW tensor.
inline Tensor<float> complex_to_channels(const ComplexImage& image) {
    Tensor<float> t(1, 2, image.height, image.width);
    float* re = t.plane(0, 0);
    float* im = t.plane(0, 1);
    for (std::size_t i = 0; i < image.size(); ++i) {
        re[i] = image.data[i].real();
        im[i] = image.data[i].imag();
    }
    return t;
}

inline ComplexImage channels_to_complex(const Tensor<float>& t) {
    if (t.n() != 1 || t.c() != 2)
        throw ShapeError(msg("channels_to_complex: expected 1x2xHxW, got ",
                             t.shape().str()));
    ComplexImage image(t.h(), t.w());
    const float* re = t.plane(0, 0);
    const float* im = t.plane(0, 1);
    for (std::size_t i = 0; i < image.size(); ++i)
        image.data[i] = std::complex<float>(re[i], im[i]);
    return image;
}

inline Tensor<float> magnitude_tensor(const ComplexImage& image) {
    Tensor<float> t(1, 1, image.height, image.width);
    for (std::size_t i = 0; i < image.size(); ++i) t[i] = std::abs(image.data[i]);
    return t;
}

inline ComplexImage image_from_real(const Tensor<float>& t, int n = 0, int c = 0) {
    ComplexImage image(t.h(), t.w());
    const float* p = t.plane(n, c);
    for (std::size_t i = 0; i < image.size(); ++i)
        image.data[i] = std::complex<float>(p[i], 0.0f);
    return image;
}

}  // namespace mdn

#pragma once

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <tuple>
#include <vector>

#include "mdn/errors.hpp"

namespace mdn {

namespace detail {
struct ImageDomainTag;
struct FrequencyDomainTag;

template <typename Tag>
struct ComplexGrid {
    int height = 0;
    int width = 0;
    std::vector<std::complex<float>> data;

    ComplexGrid() = default;
    ComplexGrid(int h, int w) : height(h), width(w), data(std::size_t(h) * w) {}

    std::complex<float>& at(int y, int x) {
        return data[std::size_t(y) * width + x];
    }
    const std::complex<float>& at(int y, int x) const {
        return data[std::size_t(y) * width + x];
    }
    std::size_t size() const { return data.size(); }
};
}  // namespace detail

using ComplexImage = detail::ComplexGrid<detail::ImageDomainTag>;

/// Fourier coefficients stored with DC at (height/2, width/2).
using KSpaceGrid = detail::ComplexGrid<detail::FrequencyDomainTag>;

namespace detail {

// FFTW planning is not thread-safe; executing distinct plans on caller-owned
// buffers is. Plans are cached per (height, width, direction).
inline fftw_plan fft_plan(int h, int w, int sign) {
    static std::mutex mutex;
    static std::map<std::tuple<int, int, int>, fftw_plan> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto key = std::make_tuple(h, w, sign);
    auto found = cache.find(key);
    if (found != cache.end()) return found->second;
    std::vector<std::complex<double>> scratch(std::size_t(h) * w);
    fftw_plan plan = fftw_plan_dft_2d(
        h, w, reinterpret_cast<fftw_complex*>(scratch.data()),
        reinterpret_cast<fftw_complex*>(scratch.data()), sign,
        FFTW_ESTIMATE | FFTW_UNALIGNED);
    cache.emplace(key, plan);
    return plan;
}

template <typename InTag, typename OutTag>
ComplexGrid<OutTag> fft2_impl(const ComplexGrid<InTag>& in, int sign,
                              bool shift_input) {
    const int h = in.height;
    const int w = in.width;
    std::vector<std::complex<double>> buf_in(in.size());
    std::vector<std::complex<double>> buf_out(in.size());
    if (shift_input) {
        // Undo the centered layout before transforming.
        const int hs = h / 2, ws = w / 2;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                buf_in[std::size_t(y) * w + x] =
                    in.data[std::size_t((y + hs) % h) * w + (x + ws) % w];
    } else {
        for (std::size_t i = 0; i < in.size(); ++i) buf_in[i] = in.data[i];
    }

    fftw_execute_dft(fft_plan(h, w, sign),
                     reinterpret_cast<fftw_complex*>(buf_in.data()),
                     reinterpret_cast<fftw_complex*>(buf_out.data()));

    const double scale = 1.0 / std::sqrt(double(h) * w);
    ComplexGrid<OutTag> out(h, w);
    if (!shift_input) {
        // Forward direction: move DC to the grid center on the way out.
        const int hs = (h + 1) / 2, ws = (w + 1) / 2;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const auto v = buf_out[std::size_t((y + hs) % h) * w + (x + ws) % w];
                out.data[std::size_t(y) * w + x] = std::complex<float>(
                    float(v.real() * scale), float(v.imag() * scale));
            }
    } else {
        for (std::size_t i = 0; i < in.size(); ++i)
            out.data[i] = std::complex<float>(float(buf_out[i].real() * scale),
                                              float(buf_out[i].imag() * scale));
    }
    return out;
}

}  // namespace detail

/// Unitary 2-D DFT with a DC-centered spectrum.
inline KSpaceGrid fft2_centered(const ComplexImage& image) {
    return detail::fft2_impl<detail::ImageDomainTag, detail::FrequencyDomainTag>(
        image, FFTW_FORWARD, false);
}

/// Inverse of fft2_centered; the two compose to the identity.
inline ComplexImage ifft2_centered(const KSpaceGrid& k) {
    return detail::fft2_impl<detail::FrequencyDomainTag, detail::ImageDomainTag>(
        k, FFTW_BACKWARD, true);
}

}  // namespace mdn

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "mdn/rng.hpp"
#include "mdn/tensor.hpp"

namespace mdn {

namespace detail {

struct Ellipse {
    double intensity;  // added inside the ellipse
    double a, b;       // semi-axes in [-1, 1] coordinates
    double x0, y0;     // center
    double phi;        // rotation, radians
};

inline void render_ellipses(Tensor<float>& img, const std::vector<Ellipse>& shapes) {
    const int h = img.h(), w = img.w();
    for (int y = 0; y < h; ++y) {
        const double v = 2.0 * (y + 0.5) / h - 1.0;
        for (int x = 0; x < w; ++x) {
            const double u = 2.0 * (x + 0.5) / w - 1.0;
            double acc = 0.0;
            for (const Ellipse& e : shapes) {
                const double du = u - e.x0, dv = v - e.y0;
                const double c = std::cos(e.phi), s = std::sin(e.phi);
                const double p = (du * c + dv * s) / e.a;
                const double q = (-du * s + dv * c) / e.b;
                if (p * p + q * q <= 1.0) acc += e.intensity;
            }
            img.at(0, 0, y, x) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
        }
    }
}

}  // namespace detail

/// The classic ten-ellipse head phantom (high-contrast intensity variant),
/// rendered into [0,1]. Useful as a fixed, structured golden image.
inline Tensor<float> shepp_logan_phantom(int height, int width) {
    using detail::Ellipse;
    static const std::vector<Ellipse> shapes = {
        {1.00, 0.69, 0.92, 0.0, 0.0, 0.0},
        {-0.80, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
        {-0.20, 0.1100, 0.3100, 0.22, 0.0, -0.3141592653589793},
        {-0.20, 0.1600, 0.4100, -0.22, 0.0, 0.3141592653589793},
        {0.10, 0.2100, 0.2500, 0.0, 0.35, 0.0},
        {0.10, 0.0460, 0.0460, 0.0, 0.1, 0.0},
        {0.10, 0.0460, 0.0460, 0.0, -0.1, 0.0},
        {0.10, 0.0460, 0.0230, -0.08, -0.605, 0.0},
        {0.10, 0.0230, 0.0230, 0.0, -0.606, 0.0},
        {0.10, 0.0230, 0.0460, 0.06, -0.605, 0.0},
    };
    Tensor<float> img(1, 1, height, width);
    detail::render_ellipses(img, shapes);
    return img;
}

/// Piecewise-smooth synthetic image: one big base ellipse plus a few seeded
/// random ellipses. Structured enough for undersampling artifacts to matter.
inline Tensor<float> random_phantom(int height, int width, std::uint64_t seed) {
    auto rng = make_engine(seed, 0xFA47);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<detail::Ellipse> shapes;
    shapes.push_back({0.35 + 0.3 * unit(rng), 0.75 + 0.15 * unit(rng),
                      0.75 + 0.15 * unit(rng), 0.0, 0.0, unit(rng) * M_PI});
    const int extra = 4 + static_cast<int>(unit(rng) * 4);
    for (int i = 0; i < extra; ++i) {
        detail::Ellipse e;
        e.intensity = (unit(rng) < 0.3 ? -1.0 : 1.0) * (0.1 + 0.35 * unit(rng));
        e.a = 0.08 + 0.35 * unit(rng);
        e.b = 0.08 + 0.35 * unit(rng);
        e.x0 = -0.5 + unit(rng);
        e.y0 = -0.5 + unit(rng);
        e.phi = unit(rng) * M_PI;
        shapes.push_back(e);
    }
    Tensor<float> img(1, 1, height, width);
    detail::render_ellipses(img, shapes);
    return img;
}

}  // namespace mdn

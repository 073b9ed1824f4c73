#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "mdn/errors.hpp"
#include "mdn/rng.hpp"

namespace mdn {

enum class MaskFamily { cartesian, radial, variable_density };

inline const char* family_name(MaskFamily f) {
    switch (f) {
        case MaskFamily::cartesian: return "cartesian";
        case MaskFamily::radial: return "radial";
        case MaskFamily::variable_density: return "variable_density";
    }
    return "?";
}

inline MaskFamily family_from_name(const std::string& name) {
    if (name == "cartesian") return MaskFamily::cartesian;
    if (name == "radial") return MaskFamily::radial;
    if (name == "variable_density" || name == "random")
        return MaskFamily::variable_density;
    throw ConfigError(msg("unknown mask family '", name, "'"));
}

/// Binary k-space selection pattern in the DC-centered layout.
struct SamplingMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> bits;  // 1 = sampled
    MaskFamily family = MaskFamily::cartesian;
    double requested_rate = 0.0;
    std::uint64_t seed = 0;

    SamplingMask() = default;
    SamplingMask(int h, int w) : height(h), width(w), bits(std::size_t(h) * w, 0) {}

    std::uint8_t& at(int y, int x) { return bits[std::size_t(y) * width + x]; }
    std::uint8_t at(int y, int x) const { return bits[std::size_t(y) * width + x]; }

    std::size_t ones() const {
        return static_cast<std::size_t>(
            std::count(bits.begin(), bits.end(), std::uint8_t(1)));
    }

    double achieved_rate() const {
        return static_cast<double>(ones()) / (double(height) * width);
    }
};

/// Tunables the mask families leave open; defaults follow common practice.
struct MaskParams {
    double cartesian_center_fraction = 0.04;  // rows always kept around DC
    double vd_exponent = 3.0;                 // radial density falloff power
    double vd_center_disc_fraction = 0.03;    // fully kept disc radius
};

inline constexpr double kMaskRateTolerance = 0.01;

namespace detail {

inline SamplingMask gen_cartesian(int h, int w, double rate, std::uint64_t seed,
                                  const MaskParams& p) {
    const long target = std::lround(rate * h);
    if (target < 1 || std::fabs(double(target) / h - rate) > kMaskRateTolerance)
        throw ConfigError(msg("cartesian mask cannot hit rate ", rate, " with ", h,
                              " rows (closest is ", double(target) / h, ")"));
    long n_center = std::max(1l, std::lround(p.cartesian_center_fraction * h));
    n_center = std::min(n_center, target);

    SamplingMask mask(h, w);
    const int dc = h / 2;
    const int band_start = dc - static_cast<int>(n_center) / 2;
    std::vector<int> remaining;
    for (int y = 0; y < h; ++y) {
        if (y >= band_start && y < band_start + n_center)
            std::fill_n(&mask.at(y, 0), w, std::uint8_t(1));
        else
            remaining.push_back(y);
    }
    auto rng = make_engine(seed, 0xCA57);
    std::shuffle(remaining.begin(), remaining.end(), rng);
    for (long i = 0; i < target - n_center; ++i)
        std::fill_n(&mask.at(remaining[i], 0), w, std::uint8_t(1));
    return mask;
}

inline void rasterize_spoke(SamplingMask& mask, double angle) {
    const int cy = mask.height / 2, cx = mask.width / 2;
    const double c = std::cos(angle), s = std::sin(angle);
    if (std::fabs(c) >= std::fabs(s)) {
        const double slope = s / c;
        for (int x = 0; x < mask.width; ++x) {
            const int y = static_cast<int>(std::lround(cy + (x - cx) * slope));
            if (y >= 0 && y < mask.height) mask.at(y, x) = 1;
        }
    } else {
        const double slope = c / s;
        for (int y = 0; y < mask.height; ++y) {
            const int x = static_cast<int>(std::lround(cx + (y - cy) * slope));
            if (x >= 0 && x < mask.width) mask.at(y, x) = 1;
        }
    }
}

inline SamplingMask radial_candidate(int h, int w, int spokes, double offset) {
    SamplingMask mask(h, w);
    for (int l = 0; l < spokes; ++l)
        rasterize_spoke(mask, offset + l * M_PI / spokes);
    return mask;
}

inline SamplingMask gen_radial(int h, int w, double rate, std::uint64_t seed) {
    auto rng = make_engine(seed, 0x7AD1);
    const double offset = std::uniform_real_distribution<double>(0.0, M_PI)(rng);

    // Evenly spaced center-through spokes; grow the count until the achieved
    // rate reaches the request, keeping the closest candidate seen.
    const int max_spokes = 4 * (h + w);
    SamplingMask best;
    double best_err = 1e9;
    for (int spokes = 1; spokes <= max_spokes; ++spokes) {
        SamplingMask candidate = radial_candidate(h, w, spokes, offset);
        const double achieved = candidate.achieved_rate();
        const double err = std::fabs(achieved - rate);
        if (err < best_err) {
            best_err = err;
            best = std::move(candidate);
        }
        if (achieved >= rate) break;
    }
    if (best_err > kMaskRateTolerance)
        throw ConfigError(msg("radial mask cannot hit rate ", rate, " on ", h, "x",
                              w, " (closest err ", best_err, ")"));
    return best;
}

inline SamplingMask gen_variable_density(int h, int w, double rate,
                                         std::uint64_t seed, const MaskParams& p) {
    const std::size_t total = std::size_t(h) * w;
    const long target = std::lround(rate * double(total));
    const int cy = h / 2, cx = w / 2;
    const double r_max = std::hypot(std::max(cy, h - 1 - cy),
                                    std::max(cx, w - 1 - cx));
    const double disc = p.vd_center_disc_fraction * std::min(h, w);

    auto rng = make_engine(seed, 0xDE45);
    SamplingMask mask(h, w);
    // Acceptance threshold per pixel: uniform draw over the radial density.
    // Selecting the k smallest thresholds is the exact-rate version of
    // rescaling the density until the expected count matches the request.
    std::vector<double> threshold(total);
    std::vector<std::uint32_t> order;
    order.reserve(total);
    std::size_t forced = 0;
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = std::size_t(y) * w + x;
            const double r = std::hypot(y - cy, x - cx);
            const double u = uniform(rng);
            if (r <= disc) {
                mask.bits[i] = 1;
                ++forced;
                continue;
            }
            const double density = std::pow(std::max(0.0, 1.0 - r / r_max),
                                            p.vd_exponent);
            threshold[i] = density > 0.0 ? u / density : 1e30 + u;
            order.push_back(static_cast<std::uint32_t>(i));
        }
    }
    if (static_cast<long>(forced) > target)
        throw ConfigError(msg("variable-density mask: fully-kept center disc (",
                              forced, " px) already exceeds rate ", rate));
    const std::size_t extra = static_cast<std::size_t>(target) - forced;
    std::nth_element(order.begin(), order.begin() + extra, order.end(),
                     [&](std::uint32_t a, std::uint32_t b) {
                         if (threshold[a] != threshold[b])
                             return threshold[a] < threshold[b];
                         return a < b;
                     });
    for (std::size_t i = 0; i < extra; ++i) mask.bits[order[i]] = 1;
    return mask;
}

}  // namespace detail

/// Generates a deterministic sampling mask; the achieved rate is always
/// within +/-1% (absolute) of the request or the call fails.
inline SamplingMask gen_mask(MaskFamily family, int height, int width, double rate,
                             std::uint64_t seed, const MaskParams& params = {}) {
    if (height <= 0 || width <= 0)
        throw ConfigError(msg("mask: size must be positive, got ", height, "x",
                              width));
    if (!(rate > 0.0 && rate <= 1.0))
        throw ConfigError(msg("mask: rate must be in (0, 1], got ", rate));

    SamplingMask mask;
    if (rate == 1.0) {
        mask = SamplingMask(height, width);
        std::fill(mask.bits.begin(), mask.bits.end(), std::uint8_t(1));
    } else {
        switch (family) {
            case MaskFamily::cartesian:
                mask = detail::gen_cartesian(height, width, rate, seed, params);
                break;
            case MaskFamily::radial:
                mask = detail::gen_radial(height, width, rate, seed);
                break;
            case MaskFamily::variable_density:
                mask = detail::gen_variable_density(height, width, rate, seed,
                                                    params);
                break;
        }
    }
    mask.family = family;
    mask.requested_rate = rate;
    mask.seed = seed;
    return mask;
}

/// Text format: one header line, then H rows of W '0'/'1' characters.
inline void save_mask(const std::string& path, const SamplingMask& mask) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(msg("cannot write mask file '", path, "'"));
    out << "MASK " << family_name(mask.family) << " " << mask.height << " "
        << mask.width << " " << mask.requested_rate << " " << mask.seed << "\n";
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x)
            out.put(mask.at(y, x) ? '1' : '0');
        out.put('\n');
    }
    if (!out) throw IoError(msg("failed while writing mask file '", path, "'"));
}

inline SamplingMask load_mask(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(msg("cannot read mask file '", path, "'"));
    std::string magic, family;
    int h = 0, w = 0;
    double rate = 0.0;
    std::uint64_t seed = 0;
    in >> magic >> family >> h >> w >> rate >> seed;
    if (!in || magic != "MASK")
        throw IoError(msg("'", path, "' is not a mask file (bad header)"));
    if (h <= 0 || w <= 0)
        throw IoError(msg("mask file '", path, "' has invalid size ", h, "x", w));
    SamplingMask mask(h, w);
    mask.family = family_from_name(family);
    mask.requested_rate = rate;
    mask.seed = seed;
    std::string row;
    for (int y = 0; y < h; ++y) {
        if (!(in >> row) || static_cast<int>(row.size()) != w)
            throw IoError(msg("mask file '", path, "' truncated at row ", y));
        for (int x = 0; x < w; ++x) {
            if (row[x] != '0' && row[x] != '1')
                throw IoError(msg("mask file '", path, "' has invalid character '",
                                  row[x], "' at row ", y));
            mask.at(y, x) = row[x] == '1' ? 1 : 0;
        }
    }
    return mask;
}

}  // namespace mdn

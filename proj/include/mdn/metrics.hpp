#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "mdn/errors.hpp"
#include "mdn/image_io.hpp"
#include "mdn/tensor.hpp"

namespace mdn {

inline double psnr_from_mse(double mse, double max_val) {
    if (mse <= 0.0) return std::numeric_limits<double>::infinity();
    return -10.0 * std::log10(mse / (max_val * max_val));
}

/// Peak signal-to-noise ratio in dB; +inf sentinel for identical inputs.
inline double psnr(const float* x, const float* ref, std::size_t count,
                   double max_val) {
    if (max_val <= 0.0)
        throw ConfigError(msg("psnr: max_val must be > 0, got ", max_val));
    double se = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        const double d = static_cast<double>(x[i]) - ref[i];
        se += d * d;
    }
    return psnr_from_mse(se / static_cast<double>(count), max_val);
}

template <typename T>
double psnr(const Tensor<T>& x, const Tensor<T>& ref, double max_val) {
    require_same_shape(x, ref, "psnr");
    double se = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = static_cast<double>(x[i]) - ref[i];
        se += d * d;
    }
    return psnr_from_mse(se / static_cast<double>(x.size()), max_val);
}

namespace detail {

inline std::vector<double> gaussian_window(int size, double sigma) {
    std::vector<double> k(size);
    const int half = size / 2;
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        const double d = i - half;
        k[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Separable valid-region filtering: output is (h - size + 1) x (w - size + 1).
inline std::vector<double> filter_valid(const std::vector<double>& img, int h,
                                        int w, const std::vector<double>& k) {
    const int size = static_cast<int>(k.size());
    const int mh = h, mw = w - size + 1;
    std::vector<double> mid(std::size_t(mh) * mw);
    for (int y = 0; y < mh; ++y)
        for (int x = 0; x < mw; ++x) {
            double acc = 0.0;
            for (int j = 0; j < size; ++j) acc += k[j] * img[std::size_t(y) * w + x + j];
            mid[std::size_t(y) * mw + x] = acc;
        }
    const int oh = h - size + 1;
    std::vector<double> out(std::size_t(oh) * mw);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < mw; ++x) {
            double acc = 0.0;
            for (int j = 0; j < size; ++j)
                acc += k[j] * mid[std::size_t(y + j) * mw + x];
            out[std::size_t(y) * mw + x] = acc;
        }
    return out;
}

}  // namespace detail

/// Mean local structural similarity with the canonical 11x11 Gaussian window
/// (sigma 1.5) and stabilizers C1=(0.01 max)^2, C2=(0.03 max)^2, evaluated
/// over windows that fit entirely inside the images.
inline double ssim(const float* x, const float* y, int h, int w, double max_val,
                   int window = 11, double sigma = 1.5) {
    if (h < window || w < window)
        throw ShapeError(msg("ssim: image ", h, "x", w,
                             " is smaller than the ", window, "x", window,
                             " window"));
    const std::size_t count = std::size_t(h) * w;
    std::vector<double> xd(count), yd(count), xx(count), yy(count), xy(count);
    for (std::size_t i = 0; i < count; ++i) {
        xd[i] = x[i];
        yd[i] = y[i];
        xx[i] = xd[i] * xd[i];
        yy[i] = yd[i] * yd[i];
        xy[i] = xd[i] * yd[i];
    }
    const auto kernel = detail::gaussian_window(window, sigma);
    const auto mu_x = detail::filter_valid(xd, h, w, kernel);
    const auto mu_y = detail::filter_valid(yd, h, w, kernel);
    const auto m_xx = detail::filter_valid(xx, h, w, kernel);
    const auto m_yy = detail::filter_valid(yy, h, w, kernel);
    const auto m_xy = detail::filter_valid(xy, h, w, kernel);

    const double c1 = (0.01 * max_val) * (0.01 * max_val);
    const double c2 = (0.03 * max_val) * (0.03 * max_val);
    double total = 0.0;
    for (std::size_t i = 0; i < mu_x.size(); ++i) {
        const double var_x = m_xx[i] - mu_x[i] * mu_x[i];
        const double var_y = m_yy[i] - mu_y[i] * mu_y[i];
        const double cov = m_xy[i] - mu_x[i] * mu_y[i];
        total += ((2.0 * mu_x[i] * mu_y[i] + c1) * (2.0 * cov + c2)) /
                 ((mu_x[i] * mu_x[i] + mu_y[i] * mu_y[i] + c1) *
                  (var_x + var_y + c2));
    }
    return total / static_cast<double>(mu_x.size());
}

template <typename T>
double ssim(const Tensor<T>& x, const Tensor<T>& ref, double max_val) {
    require_same_shape(x, ref, "ssim");
    if (x.n() != 1 || x.c() != 1)
        throw ShapeError(msg("ssim: expected a single-plane image, got ",
                             x.shape().str()));
    std::vector<float> a(x.size()), b(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        a[i] = static_cast<float>(x[i]);
        b[i] = static_cast<float>(ref[i]);
    }
    return ssim(a.data(), b.data(), x.h(), x.w(), max_val);
}

/// Population standard deviation of per-image PSNR values.
inline double psnr_std(const std::vector<double>& psnrs) {
    if (psnrs.size() < 2)
        throw ConfigError(msg("psnr_std: need at least 2 entries, got ",
                              psnrs.size()));
    for (double v : psnrs)
        if (std::isinf(v))
            throw ConfigError("psnr_std: infinite PSNR entry present");
    double mean = 0.0;
    for (double v : psnrs) mean += v;
    mean /= static_cast<double>(psnrs.size());
    double var = 0.0;
    for (double v : psnrs) var += (v - mean) * (v - mean);
    return std::sqrt(var / static_cast<double>(psnrs.size()));
}

struct ErrorMap {
    Tensor<float> map;     // |x - ref| / norm_constant
    double norm_constant;  // max absolute residual
};

/// Absolute residual image, normalized to [0,1] by its own maximum; the
/// maximum is reported so the map stays interpretable.
template <typename T>
ErrorMap error_map(const Tensor<T>& x, const Tensor<T>& ref) {
    require_same_shape(x, ref, "error_map");
    ErrorMap result{Tensor<float>(x.shape()), 0.0};
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d =
            std::fabs(static_cast<double>(x[i]) - static_cast<double>(ref[i]));
        result.map[i] = static_cast<float>(d);
        result.norm_constant = std::max(result.norm_constant, d);
    }
    if (result.norm_constant > 0.0) {
        const float inv = static_cast<float>(1.0 / result.norm_constant);
        for (std::size_t i = 0; i < result.map.size(); ++i) result.map[i] *= inv;
    }
    return result;
}

/// Writes the error map as an 8-bit graymap plus a sidecar text file holding
/// the normalization constant.
inline void write_error_map(const std::string& path, const ErrorMap& em) {
    write_pgm(path, em.map.h(), em.map.w(), em.map.data(), 255);
    std::ofstream side(path + ".scale.txt");
    if (!side) throw IoError(msg("cannot write '", path, ".scale.txt'"));
    side << "max_abs_residual " << em.norm_constant << "\n";
}

struct QualityEntry {
    std::string image_id;
    double psnr_db = 0.0;
    double ssim = 0.0;
};

/// Per-image metrics plus recomputable aggregates. Infinite PSNR entries are
/// excluded from the mean and the standard deviation, with the count kept.
struct QualityReport {
    std::vector<QualityEntry> entries;
    std::string variant = "-";
    std::string mask = "-";
    double rate = 0.0;
    std::uint64_t seed = 0;

    std::size_t infinite_psnr_count() const {
        std::size_t n = 0;
        for (const auto& e : entries) n += std::isinf(e.psnr_db);
        return n;
    }

    double mean_psnr() const {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& e : entries) {
            if (std::isinf(e.psnr_db)) continue;
            sum += e.psnr_db;
            ++n;
        }
        return n > 0 ? sum / n : std::numeric_limits<double>::infinity();
    }

    double mean_ssim() const {
        double sum = 0.0;
        for (const auto& e : entries) sum += e.ssim;
        return entries.empty() ? 0.0 : sum / entries.size();
    }

    double psnr_std_db() const {
        std::vector<double> finite;
        for (const auto& e : entries)
            if (!std::isinf(e.psnr_db)) finite.push_back(e.psnr_db);
        return finite.size() >= 2 ? psnr_std(finite) : 0.0;
    }
};

inline void write_report_csv(const std::string& path, const QualityReport& r) {
    std::ofstream out(path);
    if (!out) throw IoError(msg("cannot write report '", path, "'"));
    out << "image_id,variant,mask,rate,psnr_db,ssim\n";
    out.precision(9);
    for (const auto& e : r.entries) {
        out << e.image_id << "," << r.variant << "," << r.mask << "," << r.rate
            << ",";
        if (std::isinf(e.psnr_db))
            out << "inf";
        else
            out << e.psnr_db;
        out << "," << e.ssim << "\n";
    }
    out << "# mean_psnr_db," << r.mean_psnr() << "\n";
    out << "# mean_ssim," << r.mean_ssim() << "\n";
    out << "# psnr_std_db," << r.psnr_std_db() << "\n";
    out << "# psnr_inf_excluded," << r.infinite_psnr_count() << "\n";
    if (!out) throw IoError(msg("failed while writing report '", path, "'"));
}

}  // namespace mdn

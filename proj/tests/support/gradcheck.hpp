#pragma once

// Central-finite-difference gradient checking. Everything here runs on double
// instantiations of the ops: the float and double paths share one template
// body, so validating the double gradients validates the formulas, while the
// 64-bit arithmetic keeps the difference quotients far above rounding noise.

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "mdn/tensor.hpp"

namespace gradcheck {

inline constexpr double kEps = 1e-4;
inline constexpr double kTol = 1e-3;

/// Weighted sum of a tensor; random weights turn a tensor-valued op into the
/// scalar loss finite differences need.
inline double project(const mdn::Tensor<double>& t,
                      const mdn::Tensor<double>& weights) {
    double acc = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) acc += t[i] * weights[i];
    return acc;
}

inline mdn::Tensor<double> random_tensor(mdn::TensorShape shape, std::mt19937& rng,
                                         double lo = -1.0, double hi = 1.0) {
    mdn::Tensor<double> t(shape);
    t.fill_uniform(rng, lo, hi);
    return t;
}

/// Compares an analytic gradient for `arg` against central differences of
/// `loss(arg)`. `skip` can mask entries where the op is not differentiable.
inline void expect_matches_fd(
    mdn::Tensor<double>& arg, const mdn::Tensor<double>& analytic,
    const std::function<double()>& loss, const char* label,
    const std::function<bool(double)>& skip = nullptr, double tol = kTol) {
    ASSERT_EQ(arg.size(), analytic.size()) << label;
    for (std::size_t i = 0; i < arg.size(); ++i) {
        const double saved = arg[i];
        if (skip && skip(saved)) continue;
        arg[i] = saved + kEps;
        const double up = loss();
        arg[i] = saved - kEps;
        const double down = loss();
        arg[i] = saved;
        const double fd = (up - down) / (2.0 * kEps);
        const double an = analytic[i];
        const double denom = std::max({std::fabs(fd), std::fabs(an), 1e-8});
        EXPECT_LE(std::fabs(fd - an) / denom, tol)
            << label << " entry " << i << ": fd=" << fd << " analytic=" << an;
    }
}

}  // namespace gradcheck

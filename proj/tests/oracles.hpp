// Copyright (c) 2026 the rvs contributors.
// SPDX-License-Identifier: Apache-2.0

// Test-side oracles, kept independent of the library paths they check.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "rvs/fields.hpp"
#include "rvs/random.hpp"

namespace rvs::test {

// Extended-precision reference for the depth-space inversion target
// y = -log(1 - (1 - e^{-d}) u), evaluated through expm1l/log1pl so every
// step is cancellation-free; good to ~1e-18 relative.
inline long double stable_target_oracle(long double d, long double u) {
    const long double yf = -std::expm1l(-d);
    return -std::log1pl(-yf * u);
}

// ULP distance between two finite doubles of the same sign region.
inline std::uint64_t ulp_distance(double a, double b) {
    auto ordered = [](double x) {
        const auto bits = std::bit_cast<std::int64_t>(x);
        return bits >= 0 ? static_cast<std::uint64_t>(bits) + (1ull << 63)
                         : (1ull << 63) - static_cast<std::uint64_t>(-bits);
    };
    const std::uint64_t ua = ordered(a), ub = ordered(b);
    return ua > ub ? ua - ub : ub - ua;
}

// Depth integral of a grid at t, re-derived bin by bin (no prefix array).
inline double depth_oracle(const RayDensityGrid &grid, double t) {
    long double acc = 0.0L;
    for (std::size_t i = 0; i < grid.bin_count(); ++i) {
        const double lo = grid.knot(i), hi = grid.knot(i + 1);
        const double upper = std::min(t, hi);
        if (upper <= lo) break;
        const double dt = upper - lo;
        if (grid.mode() == ApproxMode::Constant) {
            acc += static_cast<long double>(grid.value(i)) * dt;
        } else {
            const double s0 = grid.value(i);
            const double slope = (grid.value(i + 1) - s0) / (hi - lo);
            acc += dt * (static_cast<long double>(s0) + 0.5L * slope * dt);
        }
    }
    return static_cast<double>(acc);
}

// Expected radiance of the piecewise field: sub-bin slivers with exact
// transmittance differences at sliver edges, so the only error is the
// radiance variation inside a sliver. Long-double prefix sums re-derived
// locally.
inline Rgb expected_radiance_oracle(const RayDensityGrid &grid,
                                    const RayRadiance &radiance,
                                    std::size_t total_slivers = 200000) {
    const std::size_t m = grid.bin_count();
    const std::size_t per_bin = std::max<std::size_t>(1, total_slivers / m);
    std::vector<long double> prefix(m + 1, 0.0L);
    for (std::size_t i = 0; i < m; ++i) {
        const long double d = grid.knot(i + 1) - grid.knot(i);
        prefix[i + 1] =
            prefix[i] + (grid.mode() == ApproxMode::Constant
                             ? grid.value(i) * d
                             : 0.5L * (grid.value(i) + grid.value(i + 1)) * d);
    }
    Rgb acc{};
    long double op_lo = 0.0L;
    for (std::size_t i = 0; i < m; ++i) {
        const double lo = grid.knot(i), hi = grid.knot(i + 1);
        const double s0 = grid.value(i);
        const double slope = grid.mode() == ApproxMode::Constant
                                 ? 0.0
                                 : (grid.value(i + 1) - s0) / (hi - lo);
        for (std::size_t s = 0; s < per_bin; ++s) {
            const double a = lo + (hi - lo) * static_cast<double>(s) /
                                      static_cast<double>(per_bin);
            const double b = s + 1 == per_bin
                                 ? hi
                                 : lo + (hi - lo) *
                                            static_cast<double>(s + 1) /
                                            static_cast<double>(per_bin);
            const long double dt = b - lo;
            const long double depth_b =
                prefix[i] + dt * (s0 + 0.5L * slope * dt);
            const long double op_hi = -std::expm1l(-depth_b);
            acc += radiance.eval(0.5 * (a + b)) *
                   static_cast<double>(op_hi - op_lo);
            op_lo = op_hi;
        }
    }
    return acc;
}

// Two-sided Kolmogorov-Smirnov statistic of samples against a CDF.
inline double ks_statistic(std::vector<double> samples,
                           const std::function<double(double)> &cdf) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double c = cdf(samples[i]);
        worst = std::max(worst, std::abs(static_cast<double>(i + 1) / n - c));
        worst = std::max(worst, std::abs(c - static_cast<double>(i) / n));
    }
    return worst;
}

// Random strictly positive grid for property tests.
inline RayDensityGrid random_grid_range(std::uint64_t seed, ApproxMode mode,
                                        std::size_t min_bins,
                                        std::size_t max_bins, double sigma_lo,
                                        double sigma_hi) {
    Rng rng(seed);
    const std::size_t m =
        min_bins + rng.below(max_bins - min_bins + 1);
    const double len = rng.uniform(0.5, 2.0);
    std::vector<double> knots(m + 1);
    knots[0] = 0.0;
    knots[m] = len;
    for (std::size_t i = 1; i < m; ++i)
        knots[i] = (static_cast<double>(i) + rng.uniform(-0.3, 0.3)) * len /
                   static_cast<double>(m);
    std::vector<double> values(mode == ApproxMode::Constant ? m : m + 1);
    for (double &v : values) v = rng.uniform(sigma_lo, sigma_hi);
    return RayDensityGrid(std::move(knots), std::move(values), mode);
}

inline RayDensityGrid random_grid(std::uint64_t seed, ApproxMode mode,
                                  std::size_t max_bins = 16,
                                  double sigma_lo = 0.1,
                                  double sigma_hi = 4.0) {
    return random_grid_range(seed, mode, 1, max_bins, sigma_lo, sigma_hi);
}

// Central finite difference of a scalar function of one grid value.
inline double fd_wrt_value(const RayDensityGrid &grid, std::size_t j,
                           const std::function<double(const RayDensityGrid &)> &f,
                           double rel_step = 1e-6) {
    const double h = rel_step * std::max(grid.value(j), 1.0);
    std::vector<double> values = grid.values();
    values[j] += h;
    RayDensityGrid up(grid.knots(), values, grid.mode());
    values[j] -= 2.0 * h;
    RayDensityGrid dn(grid.knots(), values, grid.mode());
    return (f(up) - f(dn)) / (2.0 * h);
}

// Relative error with the absolute floor used across the gradient suites:
// entries matching to 1e-9 absolute pass regardless of scale.
inline double grad_rel_err(double analytic, double reference) {
    const double abs_err = std::abs(analytic - reference);
    if (abs_err < 1e-9) return 0.0;
    return abs_err / std::max(std::abs(reference), 1e-9);
}

// Scale-floored variant used by the acceptance gradient suite (matches the
// gradcheck command): denominators below 1e-4 are clamped, so small entries
// are judged absolutely but the measured error stays nonzero.
inline double grad_rel_err_scaled(double analytic, double reference) {
    return std::abs(analytic - reference) /
           std::max(std::abs(reference), 1e-4);
}

struct MeanVar {
    double mean = 0.0;
    double var = 0.0;
    double stderr_mean = 0.0;
};

inline MeanVar mean_var(const std::vector<double> &xs) {
    MeanVar mv;
    for (double x : xs) mv.mean += x;
    mv.mean /= static_cast<double>(xs.size());
    for (double x : xs) mv.var += (x - mv.mean) * (x - mv.mean);
    mv.var /= static_cast<double>(xs.size() - 1);
    mv.stderr_mean = std::sqrt(mv.var / static_cast<double>(xs.size()));
    return mv;
}

}  // namespace rvs::test

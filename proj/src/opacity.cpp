// Copyright (c) 2026 the rvs contributors.
// SPDX-License-Identifier: Apache-2.0

#include "rvs/opacity.hpp"

#include <algorithm>
#include <cmath>

namespace rvs {

OpacityProfile build_profile(const RayDensityGrid &grid) {
    const std::size_t m = grid.bin_count();
    std::vector<double> prefix(m + 1, 0.0);
    if (grid.mode() == ApproxMode::Constant) {
        for (std::size_t i = 0; i < m; ++i)
            prefix[i + 1] = prefix[i] + grid.value(i) * grid.delta(i);
    } else {
        for (std::size_t i = 0; i < m; ++i)
            prefix[i + 1] =
                prefix[i] +
                0.5 * (grid.value(i) + grid.value(i + 1)) * grid.delta(i);
    }
    OpacityProfile p{grid, std::move(prefix), 0.0, 0.0};
    p.total_depth = p.prefix_depth.back();
    p.total_opacity = opacity_from_depth(p.total_depth);
    return p;
}

double opacity_from_depth(double depth) {
    return -std::expm1(-std::min(depth, kDepthCap));
}

double dopacity_ddepth(double depth) {
    return std::exp(-std::min(depth, kDepthCap));
}

double eval_depth(const OpacityProfile &profile, double t) {
    const RayInterval iv = profile.interval();
    if (!(t >= iv.t_near && t <= iv.t_far))
        throw std::invalid_argument("eval_depth: t outside ray interval");
    const RayDensityGrid &g = profile.grid;
    const std::size_t i = g.bin_of(t);
    const double dt = t - g.knot(i);
    if (g.mode() == ApproxMode::Constant)
        return profile.prefix_depth[i] + g.value(i) * dt;
    const double slope = (g.value(i + 1) - g.value(i)) / g.delta(i);
    return profile.prefix_depth[i] + dt * (g.value(i) + 0.5 * slope * dt);
}

double eval_opacity(const OpacityProfile &profile, double t) {
    return -std::expm1(-eval_depth(profile, t));
}

double density_at(const OpacityProfile &profile, double t) {
    return profile.grid.density_at(t);
}

void depth_gradient(const OpacityProfile &profile, double t,
                    std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    const RayDensityGrid &g = profile.grid;
    const std::size_t i = g.bin_of(t);
    const double dt = t - g.knot(i);
    if (g.mode() == ApproxMode::Constant) {
        for (std::size_t j = 0; j < i; ++j) out[j] = g.delta(j);
        out[i] = dt;
    } else {
        // Trapezoid weights for full bins, plus the partial bin where the
        // in-bin integral is dt*(sigma_i + 0.5*slope*dt) with
        // slope = (sigma_{i+1} - sigma_i)/delta.
        for (std::size_t j = 0; j < i; ++j) {
            out[j] += 0.5 * g.delta(j);
            out[j + 1] += 0.5 * g.delta(j);
        }
        const double frac = dt / g.delta(i);
        out[i] += dt * (1.0 - 0.5 * frac);
        out[i + 1] += 0.5 * dt * frac;
    }
}

void total_depth_gradient(const OpacityProfile &profile,
                          std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    const RayDensityGrid &g = profile.grid;
    const std::size_t m = g.bin_count();
    if (g.mode() == ApproxMode::Constant) {
        for (std::size_t j = 0; j < m; ++j) out[j] = g.delta(j);
    } else {
        for (std::size_t j = 0; j < m; ++j) {
            out[j] += 0.5 * g.delta(j);
            out[j + 1] += 0.5 * g.delta(j);
        }
    }
}

double stable_target(double total_depth, double u) {
    if (!(u >= 0.0 && u <= 1.0))
        throw std::invalid_argument("stable_target: u must lie in [0,1]");
    if (!(total_depth >= 0.0))
        throw std::invalid_argument("stable_target: negative total depth");
    if (total_depth < kDepthSwitch) return u * total_depth;
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return total_depth;
    // y = -log(exp(log(1-u)) + exp(log(u) - d)), evaluated as a logsumexp.
    const double a = std::log1p(-u);
    const double b = std::log(u) - total_depth;
    const double y = a >= b ? -(a + std::log1p(std::exp(b - a)))
                            : -(b + std::log1p(std::exp(a - b)));
    return std::clamp(y, 0.0, total_depth);
}

double stable_target_ddepth(double total_depth, double u) {
    if (total_depth < kDepthSwitch) return u;
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    // dy/dd = u e^{-d} / (1 - y_f u) = u e^{y - d}.
    const double y = stable_target(total_depth, u);
    return u * std::exp(y - total_depth);
}

std::size_t depth_bin(std::span<const double> prefix, double y) {
    auto it = std::lower_bound(prefix.begin(), prefix.end(), y);
    std::size_t idx = static_cast<std::size_t>(it - prefix.begin());
    if (idx > 0) --idx;  // ties at a knot resolve to the left bin
    return std::min(idx, prefix.size() - 2);
}

}  // namespace rvs

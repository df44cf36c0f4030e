// Copyright (c) 2026 the rvs contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "rvs/fields.hpp"

namespace rvs {

// Prefix optical-depth integrals of a density grid. prefix_depth[i] is the
// depth accumulated from t_near to knot i, so the opacity at knot i is
// -expm1(-prefix_depth[i]) and total_opacity is the overall pixel opaqueness.
struct OpacityProfile {
    RayDensityGrid grid;
    std::vector<double> prefix_depth;  // size bin_count()+1, [0] == 0
    double total_depth = 0.0;
    double total_opacity = 0.0;

    ApproxMode mode() const { return grid.mode(); }
    std::size_t param_count() const { return grid.param_count(); }
    RayInterval interval() const { return grid.interval(); }
};

// Rectangular (Constant) or trapezoidal (Linear) prefix sums of the grid.
OpacityProfile build_profile(const RayDensityGrid &grid);

// Optical depth accumulated to t: linear within a bin in Constant mode,
// quadratic in Linear mode. t must lie inside the ray interval.
double eval_depth(const OpacityProfile &profile, double t);

// Opacity 1 - exp(-depth(t)); monotone nondecreasing in t, 0 at t_near.
double eval_opacity(const OpacityProfile &profile, double t);

// Density of the approximation at t.
double density_at(const OpacityProfile &profile, double t);

// d(depth at t)/d(sigma_j) for all grid parameters, t held fixed.
void depth_gradient(const OpacityProfile &profile, double t,
                    std::span<double> out);

// d(total_depth)/d(sigma_j): bin widths in Constant mode, trapezoid weights
// in Linear mode.
void total_depth_gradient(const OpacityProfile &profile,
                          std::span<double> out);

// Opacity from depth with the cap documented in common.hpp, and its
// derivative (exp(-cap) in the capped region, not 0).
double opacity_from_depth(double depth);
double dopacity_ddepth(double depth);

// Depth-space inversion target y = -log(1 - y_f u) for y_f = 1 - exp(-d),
// computed through logsumexp with a first-order fallback u*d below
// kDepthSwitch. Result clamped to [0, d]. u must lie in [0, 1].
double stable_target(double total_depth, double u);

// dy/dd of stable_target at fixed u; uses the same branch as the value.
double stable_target_ddepth(double total_depth, double u);

// Bin index for a depth target: largest i with prefix[i] < y (ties resolve
// to the left bin), clamped to a valid bin.
std::size_t depth_bin(std::span<const double> prefix, double y);

}  // namespace rvs

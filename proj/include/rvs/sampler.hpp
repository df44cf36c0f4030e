// Copyright (c) 2026 the rvs contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "rvs/opacity.hpp"

namespace rvs {

enum class SamplingMethod { Rvs, NerfCdf, Bisect };

const char *to_string(SamplingMethod method);

enum class StrataDenominator {
    KPlus1,  // v_i ~ U[(i-1)/(k+1), i/(k+1)]; leaves [k/(k+1), 1] uncovered
    K        // v_i ~ U[(i-1)/k, i/k]; conventional full-cover strata
};

// How the k uniforms that drive inverse-transform sampling are drawn.
struct UniformScheme {
    enum class Kind { Iid, Stratified };
    Kind kind = Kind::Iid;
    std::size_t k = 1;
    std::uint64_t rng_seed = 0;
    StrataDenominator strata_denominator = StrataDenominator::KPlus1;

    static UniformScheme iid(std::size_t k, std::uint64_t seed) {
        return {Kind::Iid, k, seed, StrataDenominator::KPlus1};
    }
    static UniformScheme stratified(
        std::size_t k, std::uint64_t seed,
        StrataDenominator denom = StrataDenominator::KPlus1) {
        return {Kind::Stratified, k, seed, denom};
    }
};

// Deterministic given rng_seed; stratified draws are independent per bin.
std::vector<double> draw_uniforms(const UniformScheme &scheme);

// Result of one opacity inversion. grad_sigma holds dt/dsigma_j with the
// target held fixed; dt_dy chains the target's own density dependence.
// For NerfCdf the target is the opacity-space rhs, otherwise depth-space y.
struct InverseResult {
    double t = 0.0;
    double dt_dy = 0.0;
    std::vector<double> grad_sigma;
    // Set by invert_bisect when the density at the solution is below the
    // degeneracy threshold; gradients are zeroed in that case.
    bool degenerate_gradient = false;
};

// Closed-form inverse of the piecewise-linear depth integral (Constant-mode
// profile): bin search over prefix depths, then a linear solve with an
// epsilon-guarded denominator.
InverseResult invert_constant(const OpacityProfile &profile, double y,
                              bool with_grad = true);

// Closed-form inverse of the piecewise-quadratic depth integral (Linear-mode
// profile) via the numerically stable quadratic root 2|c|/(b + sqrt(disc)).
InverseResult invert_linear(const OpacityProfile &profile, double y,
                            bool with_grad = true);

// NeRF-style inverse: linear interpolation of t against knot opacities
// -expm1(-prefix). rhs lives in opacity space, rhs in [0, total_opacity].
// Kept for the ablation comparison against depth-space inversion.
InverseResult invert_nerf_cdf(const OpacityProfile &profile, double rhs,
                              bool with_grad = true);

// Bisection on depth(t) = y with gradients from the implicit-function rule
// dt/dsigma_j = -d(depth at t)/dsigma_j / density(t); works for both modes.
// tol < 0 selects the default 1e-12 * interval length; at most 60 iterations.
InverseResult invert_bisect(const OpacityProfile &profile, double y,
                            double tol = -1.0, bool with_grad = true);

// Positions produced by inverse-transform sampling plus everything needed to
// differentiate through them: the driving uniforms and the k x P jacobian
// d t_i / d sigma_p (full chain, including the density dependence of the
// per-sample target).
struct SampleBatch {
    std::vector<double> positions;  // size k
    std::vector<double> uniforms;   // size k
    std::vector<double> jacobian;   // k * P row-major; empty if not requested
    std::size_t param_count = 0;
    SamplingMethod mode_used = SamplingMethod::Rvs;

    double jac(std::size_t i, std::size_t p) const {
        return jacobian[i * param_count + p];
    }
};

// Inverts the opacity at externally supplied uniforms. Fully transparent
// rays (total depth 0) fall back to uniform positions with a zero jacobian.
SampleBatch sample_with_uniforms(const OpacityProfile &profile,
                                 std::span<const double> uniforms,
                                 SamplingMethod method = SamplingMethod::Rvs,
                                 bool with_jacobian = true);

// Draws uniforms per the scheme, then inverts as above.
SampleBatch sample_ray(const OpacityProfile &profile,
                       const UniformScheme &scheme,
                       SamplingMethod method = SamplingMethod::Rvs,
                       bool with_jacobian = true);

inline SampleBatch rvs_sample(const OpacityProfile &profile,
                              const UniformScheme &scheme) {
    return sample_ray(profile, scheme, SamplingMethod::Rvs);
}

}  // namespace rvs

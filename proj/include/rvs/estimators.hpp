// Copyright (c) 2026 the rvs contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "rvs/sampler.hpp"

namespace rvs {

enum class EstimatorKind { Quadrature, PlainMC, ReparamMC, StratifiedIW };

const char *to_string(EstimatorKind kind);

// Expected-radiance estimate with its gradient w.r.t. every density
// parameter on the ray. grad_density[p] carries the three channel partials.
struct RadianceEstimate {
    Rgb value{};
    std::vector<Rgb> grad_density;
    long radiance_queries = 0;
    EstimatorKind kind = EstimatorKind::Quadrature;
};

// Transmittance-weighted quadrature on a Constant-mode grid: the standard
// rendering sum with weights w_i = (1 - exp(-sigma_i d_i)) * T_i. Weights
// are formed as differences of knot opacities so they telescope to the
// total opacity exactly.
RadianceEstimate quadrature(const RayDensityGrid &grid,
                            const RayRadiance &radiance,
                            bool with_grad = true);

// The per-bin weights of the quadrature sum (exposed for the telescoping
// identity and for rendering on externally supplied partitions).
std::vector<double> quadrature_weights(const RayDensityGrid &grid);

// Step used for the central-difference fallback when the radiance has no
// analytic derivative, as a fraction of the interval length. Enters only
// gradient paths, never estimate values.
inline constexpr double kRadianceDiffStep = 1e-5;

// dc/dt at t: analytic when available, otherwise a central difference with
// the stencil clamped to the interval.
Rgb radiance_slope(const RayRadiance &radiance, double t,
                   const RayInterval &iv);

// Monte Carlo estimate (y_f / k) * sum c(t_i) over an existing batch of
// ray-distribution samples. The gradient chains the batch jacobian and the
// density dependence of y_f.
RadianceEstimate plain_mc(const OpacityProfile &profile,
                          const RayRadiance &radiance,
                          const SampleBatch &samples, bool with_grad = true);

// Reparameterized Monte Carlo estimate: draws uniforms, maps them through
// the inverse opacity and averages radiance there. Unbiased for the grid's
// expected radiance, with a fully analytic density gradient.
RadianceEstimate reparam_mc(const OpacityProfile &profile,
                            const RayRadiance &radiance,
                            const UniformScheme &scheme,
                            SamplingMethod method = SamplingMethod::Rvs,
                            bool with_grad = true);

// Importance-weighted stratified baseline: one uniform draw per bin of a
// regular k-grid, weighted by the ray PDF dF/dt = (1 - F) * sigma evaluated
// from the piecewise approximation.
RadianceEstimate stratified_iw(const OpacityProfile &profile,
                               const RayRadiance &radiance, std::size_t k,
                               std::uint64_t seed, bool with_grad = true);

// Same integrand with k i.i.d. uniform positions over the whole interval:
// the plain uniform Monte Carlo baseline.
RadianceEstimate uniform_mc(const OpacityProfile &profile,
                            const RayRadiance &radiance, std::size_t k,
                            std::uint64_t seed, bool with_grad = true);

struct LossGrad {
    double loss = 0.0;
    std::vector<double> grad;  // d loss / d sigma_p
};

// Product-form loss sum_ch (C1 - target)(C2 - target) over two estimates
// drawn with independent seeds; unbiased for the squared error of the
// expected color, unlike the plain MSE of a noisy estimate.
LossGrad two_sample_loss(const RadianceEstimate &est1,
                         const RadianceEstimate &est2, const Rgb &target);

}  // namespace rvs

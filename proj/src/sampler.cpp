// Copyright (c) 2026 the rvs contributors.
// SPDX-License-Identifier: Apache-2.0

#include "rvs/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "rvs/random.hpp"

namespace rvs {

namespace {

// Guard added to near-zero denominators in the Constant-mode inverse.
constexpr double kDenomEps = 1e-10;
// Guard under the square root of the Linear-mode inverse; the discriminant
// is delta^2 * density(t)^2 >= 0 in exact arithmetic but can round negative.
constexpr double kSqrtEps = 1e-24;
// Density below which the implicit bisection gradient is flagged degenerate.
constexpr double kDegenerateSigma = 1e-10;
constexpr int kMaxBisectIters = 60;

void check_target(const OpacityProfile &profile, double y) {
    if (!(y >= 0.0) || y > profile.total_depth)
        throw std::invalid_argument(
            "inverse target outside [0, total_depth]");
}

// d prefix_depth[i] / d sigma_j for all j (zero beyond the bin).
void prefix_grad(const OpacityProfile &profile, std::size_t i,
                 std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    const RayDensityGrid &g = profile.grid;
    if (g.mode() == ApproxMode::Constant) {
        for (std::size_t j = 0; j < i; ++j) out[j] = g.delta(j);
    } else {
        for (std::size_t j = 0; j < i; ++j) {
            out[j] += 0.5 * g.delta(j);
            out[j + 1] += 0.5 * g.delta(j);
        }
    }
}

}  // namespace

const char *to_string(SamplingMethod method) {
    switch (method) {
        case SamplingMethod::Rvs:
            return "rvs";
        case SamplingMethod::NerfCdf:
            return "nerf";
        case SamplingMethod::Bisect:
            return "bisect";
    }
    return "?";
}

std::vector<double> draw_uniforms(const UniformScheme &scheme) {
    if (scheme.k < 1)
        throw std::invalid_argument("draw_uniforms: k must be >= 1");
    Rng rng(scheme.rng_seed);
    std::vector<double> u(scheme.k);
    if (scheme.kind == UniformScheme::Kind::Iid) {
        for (double &v : u) v = rng.uniform();
    } else {
        const double denom =
            scheme.strata_denominator == StrataDenominator::KPlus1
                ? static_cast<double>(scheme.k + 1)
                : static_cast<double>(scheme.k);
        for (std::size_t i = 0; i < scheme.k; ++i)
            u[i] = (static_cast<double>(i) + rng.uniform()) / denom;
    }
    return u;
}

InverseResult invert_constant(const OpacityProfile &profile, double y,
                              bool with_grad) {
    if (profile.mode() != ApproxMode::Constant)
        throw std::invalid_argument("invert_constant: profile not Constant");
    check_target(profile, y);

    const RayDensityGrid &g = profile.grid;
    const std::size_t i = depth_bin(profile.prefix_depth, y);
    const double rem = y - profile.prefix_depth[i];
    const double denom = g.value(i) + kDenomEps;

    InverseResult res;
    res.t = g.knot(i) + rem / denom;
    res.dt_dy = 1.0 / denom;
    if (with_grad) {
        res.grad_sigma.assign(g.param_count(), 0.0);
        for (std::size_t j = 0; j < i; ++j)
            res.grad_sigma[j] = -g.delta(j) / denom;
        res.grad_sigma[i] = -rem / (denom * denom);
    }
    return res;
}

InverseResult invert_linear(const OpacityProfile &profile, double y,
                            bool with_grad) {
    if (profile.mode() != ApproxMode::Linear)
        throw std::invalid_argument("invert_linear: profile not Linear");
    check_target(profile, y);

    const RayDensityGrid &g = profile.grid;
    const std::size_t i = depth_bin(profile.prefix_depth, y);
    const double delta = g.delta(i);
    const double a = 0.5 * (g.value(i + 1) - g.value(i));
    const double b = g.value(i) * delta;
    const double c = (profile.prefix_depth[i] - y) * delta;  // <= 0

    const double s = std::sqrt(std::max(b * b - 4.0 * a * c, 0.0) + kSqrtEps);
    const double q = b + s;
    const double dt = -2.0 * c / q;

    InverseResult res;
    res.t = g.knot(i) + dt;

    // d dt/dx for a coefficient perturbation (da, db, dc):
    //   ds = (b db - 2(da c + a dc)) / s
    //   d dt = (-2 dc q + 2 c (db + ds)) / q^2
    auto root_diff = [&](double da, double db, double dc) {
        const double ds = (b * db - 2.0 * (da * c + a * dc)) / s;
        return (-2.0 * dc * q + 2.0 * c * (db + ds)) / (q * q);
    };

    res.dt_dy = root_diff(0.0, 0.0, -delta);
    if (with_grad) {
        res.grad_sigma.assign(g.param_count(), 0.0);
        std::vector<double> pg(g.param_count());
        prefix_grad(profile, i, pg);
        // Parameters entering only through the prefix depth.
        for (std::size_t j = 0; j < i; ++j)
            if (pg[j] != 0.0)
                res.grad_sigma[j] = root_diff(0.0, 0.0, pg[j] * delta);
        res.grad_sigma[i] = root_diff(-0.5, delta, pg[i] * delta);
        res.grad_sigma[i + 1] = root_diff(0.5, 0.0, 0.0);
    }
    return res;
}

InverseResult invert_nerf_cdf(const OpacityProfile &profile, double rhs,
                              bool with_grad) {
    if (profile.mode() != ApproxMode::Constant)
        throw std::invalid_argument("invert_nerf_cdf: profile not Constant");
    if (!(rhs >= 0.0) || rhs > profile.total_opacity)
        throw std::invalid_argument(
            "invert_nerf_cdf: rhs outside [0, total_opacity]");

    const RayDensityGrid &g = profile.grid;
    const std::size_t m = g.bin_count();
    std::vector<double> knot_opacity(m + 1);
    for (std::size_t i = 0; i <= m; ++i)
        knot_opacity[i] = -std::expm1(-profile.prefix_depth[i]);

    const std::size_t i = depth_bin(knot_opacity, rhs);
    const double delta = g.delta(i);
    const double gap = knot_opacity[i + 1] - knot_opacity[i];

    InverseResult res;
    if (with_grad) res.grad_sigma.assign(g.param_count(), 0.0);
    if (gap <= 0.0) {  // massless bin: nothing to interpolate
        res.t = g.knot(i);
        res.dt_dy = 0.0;
        return res;
    }

    const double lam = (rhs - knot_opacity[i]) / gap;
    res.t = g.knot(i) + lam * delta;
    res.dt_dy = delta / gap;
    if (with_grad) {
        // t depends on sigma_j through the two knot opacities
        // F_k = -expm1(-prefix_k), dF_k/dsigma_j = exp(-prefix_k) delta_j
        // for j < k.
        const double e_lo = std::exp(-profile.prefix_depth[i]);
        const double e_hi = std::exp(-profile.prefix_depth[i + 1]);
        const double dlam_dFlo = (lam - 1.0) / gap;
        const double dlam_dFhi = -lam / gap;
        for (std::size_t j = 0; j < i; ++j)
            res.grad_sigma[j] = delta * g.delta(j) *
                                (dlam_dFlo * e_lo + dlam_dFhi * e_hi);
        res.grad_sigma[i] = delta * g.delta(i) * dlam_dFhi * e_hi;
    }
    return res;
}

InverseResult invert_bisect(const OpacityProfile &profile, double y,
                            double tol, bool with_grad) {
    check_target(profile, y);
    const RayInterval iv = profile.interval();
    if (tol < 0.0) tol = 1e-12 * iv.length();
    if (!(tol > 0.0))
        throw std::invalid_argument("invert_bisect: tol must be positive");

    double lo = iv.t_near, hi = iv.t_far;
    for (int it = 0; it < kMaxBisectIters && (hi - lo) > tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (eval_depth(profile, mid) < y)
            lo = mid;
        else
            hi = mid;
    }

    InverseResult res;
    res.t = 0.5 * (lo + hi);

    const double sigma = density_at(profile, res.t);
    if (sigma <= kDegenerateSigma) {
        res.degenerate_gradient = true;
        res.dt_dy = 0.0;
        if (with_grad) res.grad_sigma.assign(profile.param_count(), 0.0);
        return res;
    }
    // Implicit-function rule in depth space: depth(t, sigma) = y fixed gives
    // dt/dsigma_j = -d depth/d sigma_j / sigma(t), dt/dy = 1/sigma(t).
    res.dt_dy = 1.0 / sigma;
    if (with_grad) {
        res.grad_sigma.assign(profile.param_count(), 0.0);
        depth_gradient(profile, res.t, res.grad_sigma);
        for (double &v : res.grad_sigma) v = -v / sigma;
    }
    return res;
}

SampleBatch sample_with_uniforms(const OpacityProfile &profile,
                                 std::span<const double> uniforms,
                                 SamplingMethod method, bool with_jacobian) {
    const std::size_t k = uniforms.size();
    const std::size_t P = profile.param_count();
    SampleBatch batch;
    batch.uniforms.assign(uniforms.begin(), uniforms.end());
    batch.positions.resize(k);
    batch.param_count = P;
    batch.mode_used = method;
    if (with_jacobian) batch.jacobian.assign(k * P, 0.0);

    const RayInterval iv = profile.interval();
    if (profile.total_depth <= 0.0) {
        // Fully transparent ray: the inverse CDF is undefined, fall back to
        // uniform positions with no density dependence.
        for (std::size_t i = 0; i < k; ++i)
            batch.positions[i] = iv.t_near + uniforms[i] * iv.length();
        return batch;
    }

    std::vector<double> depth_grad;
    if (with_jacobian) {
        depth_grad.resize(P);
        total_depth_gradient(profile, depth_grad);
    }
    const double d = profile.total_depth;
    const double yf = profile.total_opacity;
    const double dyf_dd = dopacity_ddepth(d);

    for (std::size_t i = 0; i < k; ++i) {
        const double u = uniforms[i];
        InverseResult inv;
        double chain = 0.0;  // dt/d(total_depth) through the target
        switch (method) {
            case SamplingMethod::Rvs: {
                const double y = stable_target(d, u);
                inv = profile.mode() == ApproxMode::Constant
                          ? invert_constant(profile, y, with_jacobian)
                          : invert_linear(profile, y, with_jacobian);
                chain = inv.dt_dy * stable_target_ddepth(d, u);
                break;
            }
            case SamplingMethod::Bisect: {
                const double y = stable_target(d, u);
                inv = invert_bisect(profile, y, -1.0, with_jacobian);
                chain = inv.dt_dy * stable_target_ddepth(d, u);
                break;
            }
            case SamplingMethod::NerfCdf: {
                const double rhs = std::min(yf * u, yf);
                inv = invert_nerf_cdf(profile, rhs, with_jacobian);
                chain = inv.dt_dy * u * dyf_dd;
                break;
            }
        }
        batch.positions[i] = inv.t;
        if (with_jacobian) {
            double *row = &batch.jacobian[i * P];
            for (std::size_t p = 0; p < P; ++p)
                row[p] = inv.grad_sigma[p] + chain * depth_grad[p];
        }
    }
    return batch;
}

SampleBatch sample_ray(const OpacityProfile &profile,
                       const UniformScheme &scheme, SamplingMethod method,
                       bool with_jacobian) {
    const std::vector<double> u = draw_uniforms(scheme);
    return sample_with_uniforms(profile, u, method, with_jacobian);
}

}  // namespace rvs

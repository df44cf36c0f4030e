// Copyright (c) 2026 the rvs contributors.
// SPDX-License-Identifier: Apache-2.0

#include "rvs/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "rvs/random.hpp"

namespace rvs {

const char *to_string(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::Quadrature:
            return "quadrature";
        case EstimatorKind::PlainMC:
            return "plain_mc";
        case EstimatorKind::ReparamMC:
            return "reparam_mc";
        case EstimatorKind::StratifiedIW:
            return "stratified_iw";
    }
    return "?";
}

std::vector<double> quadrature_weights(const RayDensityGrid &grid) {
    if (grid.mode() != ApproxMode::Constant)
        throw std::invalid_argument("quadrature: grid must be Constant mode");
    const std::size_t m = grid.bin_count();
    std::vector<double> w(m);
    // w_i = T_i - T_{i+1} via knot opacities, so the shared terms cancel and
    // the sum telescopes to -expm1(-total_depth) up to one rounding per bin.
    double prefix = 0.0;
    double op_lo = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        prefix += grid.value(i) * grid.delta(i);
        const double op_hi = -std::expm1(-prefix);
        w[i] = op_hi - op_lo;
        op_lo = op_hi;
    }
    return w;
}

Rgb radiance_slope(const RayRadiance &radiance, double t,
                   const RayInterval &iv) {
    if (radiance.has_analytic_derivative()) return radiance.derivative(t);
    const double h = kRadianceDiffStep * iv.length();
    const double hi = std::min(t + h, iv.t_far);
    const double lo = std::max(t - h, iv.t_near);
    if (!(hi > lo)) return {0, 0, 0};
    return (radiance.eval(hi) - radiance.eval(lo)) * (1.0 / (hi - lo));
}

RadianceEstimate quadrature(const RayDensityGrid &grid,
                            const RayRadiance &radiance, bool with_grad) {
    const std::size_t m = grid.bin_count();
    const std::vector<double> w = quadrature_weights(grid);

    RadianceEstimate est;
    est.kind = EstimatorKind::Quadrature;
    est.radiance_queries = static_cast<long>(m);

    std::vector<Rgb> colors(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double mid = 0.5 * (grid.knot(i) + grid.knot(i + 1));
        colors[i] = radiance.eval(mid);
        radiance.accumulate_param_grad(mid, Rgb::splat(w[i]));
        est.value += colors[i] * w[i];
    }

    if (with_grad) {
        // d value / d sigma_j = delta_j (exp(-prefix_{j+1}) c_j - S_{j+1})
        // where S_j is the suffix sum of w_i c_i; the bin's own weight grows
        // with sigma_j while every later weight loses transmittance.
        est.grad_density.assign(m, Rgb{});
        std::vector<double> prefix(m + 1, 0.0);
        for (std::size_t i = 0; i < m; ++i)
            prefix[i + 1] = prefix[i] + grid.value(i) * grid.delta(i);
        Rgb suffix{};
        for (std::size_t j = m; j-- > 0;) {
            est.grad_density[j] =
                grid.delta(j) *
                (std::exp(-prefix[j + 1]) * colors[j] - suffix);
            suffix += colors[j] * w[j];
        }
    }
    return est;
}

namespace {

RadianceEstimate combine_mc(const OpacityProfile &profile,
                            const RayRadiance &radiance,
                            const SampleBatch &samples, EstimatorKind kind,
                            bool with_grad) {
    const std::size_t k = samples.positions.size();
    if (k == 0) throw std::invalid_argument("MC estimate: empty sample batch");
    if (with_grad && samples.jacobian.empty())
        throw std::invalid_argument("MC estimate: batch lacks a jacobian");

    const std::size_t P = profile.param_count();
    const double yf = profile.total_opacity;
    const double scale = yf / static_cast<double>(k);

    RadianceEstimate est;
    est.kind = kind;
    est.radiance_queries = static_cast<long>(k);

    Rgb mean_c{};
    std::vector<Rgb> slopes(with_grad ? k : 0);
    for (std::size_t i = 0; i < k; ++i) {
        const double t = samples.positions[i];
        mean_c += radiance.eval(t) * (1.0 / static_cast<double>(k));
        radiance.accumulate_param_grad(t, Rgb::splat(scale));
        if (with_grad)
            slopes[i] = radiance_slope(radiance, t, profile.interval());
    }
    est.value = mean_c * yf;

    if (with_grad) {
        est.grad_density.assign(P, Rgb{});
        std::vector<double> dd(P);
        total_depth_gradient(profile, dd);
        const double dyf_dd = dopacity_ddepth(profile.total_depth);
        for (std::size_t p = 0; p < P; ++p) {
            Rgb g = mean_c * (dyf_dd * dd[p]);
            for (std::size_t i = 0; i < k; ++i)
                g += slopes[i] * (scale * samples.jac(i, p));
            est.grad_density[p] = g;
        }
    }
    return est;
}

}  // namespace

RadianceEstimate plain_mc(const OpacityProfile &profile,
                          const RayRadiance &radiance,
                          const SampleBatch &samples, bool with_grad) {
    return combine_mc(profile, radiance, samples, EstimatorKind::PlainMC,
                      with_grad);
}

RadianceEstimate reparam_mc(const OpacityProfile &profile,
                            const RayRadiance &radiance,
                            const UniformScheme &scheme, SamplingMethod method,
                            bool with_grad) {
    const SampleBatch batch = sample_ray(profile, scheme, method, with_grad);
    return combine_mc(profile, radiance, batch, EstimatorKind::ReparamMC,
                      with_grad);
}

namespace {

// Shared body of the density-weighted baselines: positions tau_i with bin
// widths width_i, estimate sum_i width_i c(tau_i) (1 - F(tau_i)) sigma(tau_i).
RadianceEstimate density_weighted(const OpacityProfile &profile,
                                  const RayRadiance &radiance,
                                  std::span<const double> taus,
                                  double bin_width, bool with_grad) {
    const std::size_t k = taus.size();
    const std::size_t P = profile.param_count();

    RadianceEstimate est;
    est.kind = EstimatorKind::StratifiedIW;
    est.radiance_queries = static_cast<long>(k);
    if (with_grad) est.grad_density.assign(P, Rgb{});

    std::vector<double> depth_g(with_grad ? P : 0);
    std::vector<double> dens_g(with_grad ? P : 0);
    for (std::size_t i = 0; i < k; ++i) {
        const double tau = taus[i];
        const double trans = std::exp(-eval_depth(profile, tau));
        const double sigma = density_at(profile, tau);
        const double weight = bin_width * trans * sigma;
        const Rgb c = radiance.eval(tau);
        radiance.accumulate_param_grad(tau, Rgb::splat(weight));
        est.value += c * weight;
        if (with_grad) {
            depth_gradient(profile, tau, depth_g);
            profile.grid.density_grad(tau, dens_g);
            for (std::size_t p = 0; p < P; ++p) {
                const double dw = bin_width * trans *
                                  (dens_g[p] - sigma * depth_g[p]);
                if (dw != 0.0) est.grad_density[p] += c * dw;
            }
        }
    }
    return est;
}

}  // namespace

RadianceEstimate stratified_iw(const OpacityProfile &profile,
                               const RayRadiance &radiance, std::size_t k,
                               std::uint64_t seed, bool with_grad) {
    if (k < 1) throw std::invalid_argument("stratified_iw: k must be >= 1");
    const RayInterval iv = profile.interval();
    const double width = iv.length() / static_cast<double>(k);
    Rng rng(seed);
    std::vector<double> taus(k);
    for (std::size_t i = 0; i < k; ++i)
        taus[i] = iv.t_near + (static_cast<double>(i) + rng.uniform()) * width;
    return density_weighted(profile, radiance, taus, width, with_grad);
}

RadianceEstimate uniform_mc(const OpacityProfile &profile,
                            const RayRadiance &radiance, std::size_t k,
                            std::uint64_t seed, bool with_grad) {
    if (k < 1) throw std::invalid_argument("uniform_mc: k must be >= 1");
    const RayInterval iv = profile.interval();
    Rng rng(seed);
    std::vector<double> taus(k);
    for (double &t : taus) t = iv.t_near + rng.uniform() * iv.length();
    return density_weighted(profile, radiance, taus,
                            iv.length() / static_cast<double>(k), with_grad);
}

LossGrad two_sample_loss(const RadianceEstimate &est1,
                         const RadianceEstimate &est2, const Rgb &target) {
    if (est1.grad_density.size() != est2.grad_density.size())
        throw std::invalid_argument("two_sample_loss: mismatched gradients");
    const Rgb d1 = est1.value - target;
    const Rgb d2 = est2.value - target;

    LossGrad out;
    out.loss = d1.r * d2.r + d1.g * d2.g + d1.b * d2.b;
    out.grad.assign(est1.grad_density.size(), 0.0);
    for (std::size_t p = 0; p < out.grad.size(); ++p) {
        const Rgb &g1 = est1.grad_density[p];
        const Rgb &g2 = est2.grad_density[p];
        out.grad[p] = d2.r * g1.r + d1.r * g2.r + d2.g * g1.g + d1.g * g2.g +
                      d2.b * g1.b + d1.b * g2.b;
    }
    return out;
}

}  // namespace rvs

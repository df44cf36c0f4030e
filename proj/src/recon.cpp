// Copyright (c) 2026 the rvs contributors.
// SPDX-License-Identifier: Apache-2.0

#include "rvs/recon.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rvs/random.hpp"

namespace rvs {

namespace {

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

std::vector<double> uniform_knots(const RayInterval &iv, std::size_t count) {
    std::vector<double> knots(count);
    knots.front() = iv.t_near;
    knots.back() = iv.t_far;
    for (std::size_t i = 1; i + 1 < count; ++i)
        knots[i] = iv.t_near + (iv.length() * static_cast<double>(i)) /
                                   static_cast<double>(count - 1);
    return knots;
}

}  // namespace

double softplus_inverse(double density) {
    if (!(density > 0.0))
        throw std::invalid_argument("softplus_inverse: density must be > 0");
    return density > 30.0 ? density : std::log(std::expm1(density));
}

void AdamState::init(std::size_t n) {
    m.assign(n, 0.0);
    v.assign(n, 0.0);
    t = 0;
}

void AdamState::step(std::span<double> params, std::span<const double> grad,
                     double lr) {
    if (m.size() != params.size()) init(params.size());
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
        params[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
}

TrainableRayModel::TrainableRayModel(const RayInterval &domain,
                                     std::size_t knot_count,
                                     double density_preact_init,
                                     const Rgb &radiance_init)
    : domain_(domain),
      knots_(uniform_knots(domain, knot_count)),
      radiance_(knots_, std::vector<Rgb>(knot_count, radiance_init)) {
    if (knot_count < 2)
        throw std::invalid_argument("TrainableRayModel: need >= 2 knots");
    density_params.assign(knot_count, density_preact_init);
    opt_density.init(knot_count);
    opt_radiance.init(3 * knot_count);
}

double TrainableRayModel::preact_at(double t, std::size_t *seg_out,
                                    double *w_out) const {
    std::size_t seg;
    double w;
    if (t <= knots_.front()) {
        seg = 0;
        w = 0.0;
    } else if (t >= knots_.back()) {
        seg = knots_.size() - 2;
        w = 1.0;
    } else {
        auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
        seg = static_cast<std::size_t>(it - knots_.begin()) - 1;
        w = (t - knots_[seg]) / (knots_[seg + 1] - knots_[seg]);
    }
    if (seg_out) *seg_out = seg;
    if (w_out) *w_out = w;
    return density_params[seg] * (1.0 - w) + density_params[seg + 1] * w;
}

double TrainableRayModel::density(double t) const {
    return softplus(preact_at(t));
}

void TrainableRayModel::density_param_grad(double t,
                                           std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    std::size_t seg;
    double w;
    const double pre = preact_at(t, &seg, &w);
    const double s = sigmoid(pre);
    out[seg] = s * (1.0 - w);
    out[seg + 1] = s * w;
}

double TrainableRayModel::density_slope(double t) const {
    std::size_t seg;
    double w;
    const double pre = preact_at(t, &seg, &w);
    const double slope_pre = (density_params[seg + 1] - density_params[seg]) /
                             (knots_[seg + 1] - knots_[seg]);
    return sigmoid(pre) * slope_pre;
}

RayDensityGrid TrainableRayModel::discretize_density(
    const RayInterval &ray, std::size_t m, ApproxMode mode,
    std::vector<double> *hats) const {
    std::vector<double> grid_knots = uniform_knots(ray, m + 1);
    const std::size_t n_values = mode == ApproxMode::Constant ? m : m + 1;
    std::vector<double> values(n_values);
    if (hats) hats->assign(n_values * param_count(), 0.0);
    for (std::size_t i = 0; i < n_values; ++i) {
        const double t = mode == ApproxMode::Constant
                             ? 0.5 * (grid_knots[i] + grid_knots[i + 1])
                             : grid_knots[i];
        values[i] = density(t);
        if (hats)
            density_param_grad(
                t, std::span<double>(&(*hats)[i * param_count()],
                                     param_count()));
    }
    return RayDensityGrid(std::move(grid_knots), std::move(values), mode);
}

const char *to_string(LossKind kind) {
    return kind == LossKind::Mse ? "mse" : "two_sample";
}

namespace {

// Chain d loss/d grid_value into d loss/d preact_param through the hat rows.
void chain_hats(std::span<const double> grad_values,
                std::span<const double> hats, std::size_t param_count,
                std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t v = 0; v < grad_values.size(); ++v) {
        if (grad_values[v] == 0.0) continue;
        const double *row = &hats[v * param_count];
        for (std::size_t p = 0; p < param_count; ++p)
            out[p] += grad_values[v] * row[p];
    }
}

void check_divergence(double loss, double initial, std::size_t step) {
    if (std::abs(loss) > 1e3 * std::max(std::abs(initial), 1e-9) &&
        std::abs(loss) > 1e-6)
        throw DivergenceError("loss diverged at step " + std::to_string(step) +
                              ": " + std::to_string(loss) + " vs initial " +
                              std::to_string(initial));
}

}  // namespace

std::vector<double> fit_ray(const Rgb &target, TrainableRayModel &model,
                            const FitConfig &config) {
    if (config.steps < 1)
        throw std::invalid_argument("fit_ray: steps must be >= 1");
    const RayInterval ray = model.domain();
    const std::size_t P = model.param_count();
    const std::size_t m =
        config.mode == ApproxMode::Linear ? P - 1 : P;

    std::vector<double> trace;
    trace.reserve(config.steps);
    std::vector<double> hats;
    std::vector<double> grad_values;
    std::vector<double> grad_pre(P);
    std::vector<double> grad_radiance(3 * P);
    double initial = 0.0;

    for (std::size_t step = 0; step < config.steps; ++step) {
        const RayDensityGrid grid =
            model.discretize_density(ray, m, config.mode, &hats);
        const OpacityProfile profile = build_profile(grid);
        const TableRadiance &radiance = model.radiance();

        const std::uint64_t step_seed = derive_seed(config.seed, step);
        double loss = 0.0;
        grad_values.assign(grid.param_count(), 0.0);
        std::fill(grad_radiance.begin(), grad_radiance.end(), 0.0);

        auto add_radiance_grad = [&](const Rgb &dl_dc,
                                     const std::vector<Rgb> &pg) {
            for (std::size_t p = 0; p < P; ++p)
                for (int c = 0; c < 3; ++c)
                    grad_radiance[3 * p + c] += dl_dc[c] * pg[p][c];
        };

        if (config.loss == LossKind::Mse) {
            UniformScheme scheme{config.scheme, config.k, step_seed,
                                 StrataDenominator::KPlus1};
            radiance.reset_param_grad();
            const RadianceEstimate est =
                reparam_mc(profile, radiance, scheme);
            const Rgb diff = est.value - target;
            loss = (diff.r * diff.r + diff.g * diff.g + diff.b * diff.b) / 3.0;
            const Rgb dl_dc = diff * (2.0 / 3.0);
            for (std::size_t v = 0; v < grad_values.size(); ++v)
                grad_values[v] = dl_dc.r * est.grad_density[v].r +
                                 dl_dc.g * est.grad_density[v].g +
                                 dl_dc.b * est.grad_density[v].b;
            add_radiance_grad(dl_dc, radiance.param_grad());
        } else {
            // Two independent estimates make the product form unbiased for
            // the squared error of the expected color.
            UniformScheme s1{config.scheme, config.k,
                             derive_seed(step_seed, 1),
                             StrataDenominator::KPlus1};
            UniformScheme s2{config.scheme, config.k,
                             derive_seed(step_seed, 2),
                             StrataDenominator::KPlus1};
            radiance.reset_param_grad();
            const RadianceEstimate est1 = reparam_mc(profile, radiance, s1);
            const std::vector<Rgb> pg1 = radiance.param_grad();
            radiance.reset_param_grad();
            const RadianceEstimate est2 = reparam_mc(profile, radiance, s2);
            const std::vector<Rgb> pg2 = radiance.param_grad();

            const LossGrad lg = two_sample_loss(est1, est2, target);
            loss = lg.loss / 3.0;
            for (std::size_t v = 0; v < grad_values.size(); ++v)
                grad_values[v] = lg.grad[v] / 3.0;
            add_radiance_grad((est2.value - target) * (1.0 / 3.0), pg1);
            add_radiance_grad((est1.value - target) * (1.0 / 3.0), pg2);
        }

        if (step == 0) initial = loss;
        check_divergence(loss, initial, step);
        trace.push_back(loss);

        chain_hats(grad_values, hats, P, grad_pre);
        model.opt_density.step(model.density_params, grad_pre, config.lr);

        auto &table = model.radiance().mutable_table();
        model.opt_radiance.step(
            std::span<double>(&table[0].r, 3 * P), grad_radiance, config.lr);
        ++model.step_count;
    }
    return trace;
}

namespace {

struct Partition {
    std::vector<double> edges;
    // edge index -> row in the sample jacobian, or -1 for fixed edges.
    std::vector<int> sample_row;
};

// Bin edges: t_near, the sorted sample positions (deduplicated), t_far.
// Optionally merged with the proposal grid knots (union policy), which are
// fixed edges with no gradient path.
Partition build_partition(const RayInterval &ray,
                          std::span<const double> samples,
                          std::span<const double> fixed_points) {
    struct Edge {
        double t;
        int row;
    };
    std::vector<Edge> edges;
    edges.reserve(samples.size() + fixed_points.size() + 2);
    for (std::size_t i = 0; i < samples.size(); ++i)
        edges.push_back({samples[i], static_cast<int>(i)});
    for (double t : fixed_points)
        if (t > ray.t_near && t < ray.t_far) edges.push_back({t, -1});
    std::stable_sort(edges.begin(), edges.end(),
                     [](const Edge &a, const Edge &b) { return a.t < b.t; });

    const double min_gap = 1e-12 * ray.length();
    Partition part;
    part.edges.push_back(ray.t_near);
    part.sample_row.push_back(-1);
    for (const Edge &e : edges) {
        if (e.t - part.edges.back() > min_gap && ray.t_far - e.t > min_gap) {
            part.edges.push_back(e.t);
            part.sample_row.push_back(e.row);
        }
    }
    part.edges.push_back(ray.t_far);
    part.sample_row.push_back(-1);
    return part;
}

}  // namespace

HierarchicalRayResult hierarchical_render_ray(const HierarchicalToy &toy,
                                              const RayTarget &target,
                                              std::span<const double> uniforms,
                                              const HierarchicalOptions &opts) {
    const RayInterval &ray = target.ray;
    const std::size_t Pp = toy.proposal.param_count();
    const std::size_t Pf = toy.fine.param_count();

    // The proposal approximation matches its sampler: depth-space inversion
    // works on the piecewise-linear density, the NeRF-style inverse
    // interpolates a piecewise-constant CDF. Both spend n_proposal density
    // evaluations per ray.
    const bool nerf = opts.sampling == SamplingMethod::NerfCdf;
    const ApproxMode prop_mode =
        nerf ? ApproxMode::Constant : ApproxMode::Linear;
    const std::size_t prop_bins = nerf ? toy.n_proposal : toy.n_proposal - 1;

    std::vector<double> prop_hats;
    const RayDensityGrid prop_grid = toy.proposal.discretize_density(
        ray, prop_bins, prop_mode, &prop_hats);
    const OpacityProfile profile = build_profile(prop_grid);

    const SampleBatch batch =
        sample_with_uniforms(profile, uniforms, opts.sampling, true);

    std::vector<double> fixed;
    if (toy.fine_point_policy == FinePointPolicy::UnionWithGrid)
        fixed.assign(prop_grid.knots().begin(), prop_grid.knots().end());
    const Partition part = build_partition(ray, batch.positions, fixed);
    const std::size_t bins = part.edges.size() - 1;

    // Fine forward pass: quadrature on the induced partition with midpoint
    // density and radiance.
    const TableRadiance &fine_radiance = toy.fine.radiance();
    fine_radiance.reset_param_grad();
    std::vector<double> mids(bins), deltas(bins), sigma_f(bins);
    std::vector<Rgb> colors(bins);
    std::vector<double> weights(bins), trans(bins + 1);
    {
        double prefix = 0.0;
        double op_lo = 0.0;
        trans[0] = 1.0;
        for (std::size_t i = 0; i < bins; ++i) {
            mids[i] = 0.5 * (part.edges[i] + part.edges[i + 1]);
            deltas[i] = part.edges[i + 1] - part.edges[i];
            sigma_f[i] = toy.fine.density(mids[i]);
            colors[i] = fine_radiance.eval(mids[i]);
            prefix += sigma_f[i] * deltas[i];
            trans[i + 1] = std::exp(-prefix);
            const double op_hi = -std::expm1(-prefix);
            weights[i] = op_hi - op_lo;
            op_lo = op_hi;
        }
    }
    Rgb color{};
    for (std::size_t i = 0; i < bins; ++i) {
        color += colors[i] * weights[i];
        fine_radiance.accumulate_param_grad(mids[i], Rgb::splat(weights[i]));
    }

    const Rgb diff = color - target.color;
    const Rgb dl_dc = diff * (2.0 / 3.0);

    // d color / d beta_i (per-bin optical depth), projected onto dl_dc.
    std::vector<double> g_beta(bins);
    {
        Rgb suffix{};
        for (std::size_t i = bins; i-- > 0;) {
            const Rgb d = trans[i + 1] * colors[i] - suffix;
            g_beta[i] = dl_dc.r * d.r + dl_dc.g * d.g + dl_dc.b * d.b;
            suffix += colors[i] * weights[i];
        }
    }

    HierarchicalRayResult out;
    out.color = color;
    out.positions = batch.positions;
    out.grad_proposal.assign(Pp, 0.0);
    out.grad_fine_density.assign(Pf, 0.0);
    out.grad_fine_radiance.assign(Pf, Rgb{});

    // Fine model gradients.
    {
        std::vector<double> grad_sigma_f(bins);
        for (std::size_t i = 0; i < bins; ++i)
            grad_sigma_f[i] = g_beta[i] * deltas[i];
        std::vector<double> hat(Pf);
        for (std::size_t i = 0; i < bins; ++i) {
            if (grad_sigma_f[i] == 0.0) continue;
            toy.fine.density_param_grad(mids[i], hat);
            for (std::size_t p = 0; p < Pf; ++p)
                out.grad_fine_density[p] += grad_sigma_f[i] * hat[p];
        }
        const std::vector<Rgb> &pg = fine_radiance.param_grad();
        for (std::size_t p = 0; p < Pf; ++p)
            out.grad_fine_radiance[p] = hadamard(dl_dc, pg[p]);
    }

    // Proposal gradient: only through the sample positions. Moving an edge
    // changes the widths and midpoints of its two bins; everything
    // downstream is already inside g_beta through the transmittance.
    if (!opts.zero_sample_jacobian) {
        std::vector<double> dl_de(part.edges.size(), 0.0);
        for (std::size_t e = 1; e + 1 < part.edges.size(); ++e) {
            double acc = 0.0;
            for (int side = 0; side < 2; ++side) {
                const std::size_t bin = e - 1 + side;
                const double ddelta = side == 0 ? 1.0 : -1.0;
                const double dbeta =
                    sigma_f[bin] * ddelta +
                    0.5 * deltas[bin] * toy.fine.density_slope(mids[bin]);
                acc += g_beta[bin] * dbeta;
                const Rgb cslope = fine_radiance.derivative(mids[bin]);
                acc += 0.5 * weights[bin] *
                       (dl_dc.r * cslope.r + dl_dc.g * cslope.g +
                        dl_dc.b * cslope.b);
            }
            dl_de[e] = acc;
        }
        std::vector<double> grad_grid(prop_grid.param_count(), 0.0);
        for (std::size_t e = 1; e + 1 < part.edges.size(); ++e) {
            const int row = part.sample_row[e];
            if (row < 0 || dl_de[e] == 0.0) continue;
            for (std::size_t v = 0; v < prop_grid.param_count(); ++v)
                grad_grid[v] +=
                    dl_de[e] * batch.jac(static_cast<std::size_t>(row), v);
        }
        chain_hats(grad_grid, prop_hats, Pp, out.grad_proposal);
    }
    return out;
}

std::vector<double> hierarchical_step(HierarchicalToy &toy,
                                      std::span<const RayTarget> targets,
                                      std::uint64_t step_seed,
                                      const HierarchicalOptions &opts) {
    if (targets.empty())
        throw std::invalid_argument("hierarchical_step: empty batch");
    const std::size_t Pp = toy.proposal.param_count();
    const std::size_t Pf = toy.fine.param_count();
    const std::size_t n_samples =
        toy.fine_point_policy == FinePointPolicy::UnionWithGrid
            ? std::max<std::size_t>(1, toy.n_fine - toy.n_proposal)
            : toy.n_fine;

    std::vector<double> losses;
    losses.reserve(targets.size());
    std::vector<double> g_prop(Pp, 0.0), g_fine(Pf, 0.0);
    std::vector<double> g_rad(3 * Pf, 0.0);

    for (std::size_t r = 0; r < targets.size(); ++r) {
        const UniformScheme scheme = UniformScheme::stratified(
            n_samples, derive_seed(step_seed, r));
        const std::vector<double> uniforms = draw_uniforms(scheme);
        const HierarchicalRayResult res =
            hierarchical_render_ray(toy, targets[r], uniforms, opts);
        const Rgb diff = res.color - targets[r].color;
        losses.push_back(
            (diff.r * diff.r + diff.g * diff.g + diff.b * diff.b) / 3.0);
        for (std::size_t p = 0; p < Pp; ++p) g_prop[p] += res.grad_proposal[p];
        for (std::size_t p = 0; p < Pf; ++p) {
            g_fine[p] += res.grad_fine_density[p];
            for (int c = 0; c < 3; ++c)
                g_rad[3 * p + c] += res.grad_fine_radiance[p][c];
        }
    }

    const double inv_n = 1.0 / static_cast<double>(targets.size());
    for (double &g : g_prop) g *= inv_n;
    for (double &g : g_fine) g *= inv_n;
    for (double &g : g_rad) g *= inv_n;

    if (!opts.freeze_proposal)
        toy.proposal.opt_density.step(toy.proposal.density_params, g_prop,
                                      opts.lr_proposal);
    toy.fine.opt_density.step(toy.fine.density_params, g_fine, opts.lr_fine);
    auto &table = toy.fine.radiance().mutable_table();
    toy.fine.opt_radiance.step(std::span<double>(&table[0].r, 3 * Pf), g_rad,
                               opts.lr_fine);
    ++toy.proposal.step_count;
    ++toy.fine.step_count;
    return losses;
}

SceneKind scene_kind_from_name(const std::string &name) {
    if (name == "wall") return SceneKind::Wall;
    if (name == "foggy") return SceneKind::Foggy;
    if (name == "bump") return SceneKind::Bump;
    throw std::invalid_argument("unknown scene: " + name);
}

const char *to_string(SceneKind kind) {
    switch (kind) {
        case SceneKind::Wall:
            return "wall";
        case SceneKind::Foggy:
            return "foggy";
        case SceneKind::Bump:
            return "bump";
    }
    return "?";
}

SyntheticScene make_scene(SceneKind kind, std::uint64_t seed,
                          std::size_t n_rays) {
    const RayInterval domain(0.0, 1.0);
    SyntheticScene scene{ScalarField1D::constant_fog(0.0),
                         SinusoidRadiance::default_rgb(domain),
                         domain,
                         {},
                         0.0,
                         0.0};
    Rng rng(derive_seed(seed, 0xa11ce));

    switch (kind) {
        case SceneKind::Wall: {
            const double center = rng.uniform(0.35, 0.65);
            const double width = 0.02;
            // Depth ~ amplitude * width * sqrt(2 pi) ~ 6: a nearly opaque
            // wall that still leaves gradient signal in the tails.
            scene.density = ScalarField1D::gaussian_bump(center, width, 120.0);
            scene.feature_center = center;
            scene.feature_width = width;
            break;
        }
        case SceneKind::Foggy:
            scene.density = ScalarField1D::constant_fog(0.8);
            break;
        case SceneKind::Bump:
            scene.density = ScalarField1D::gaussian_bump(
                rng.uniform(0.3, 0.7), 0.15, 2.5);
            break;
    }

    scene.rays.reserve(n_rays);
    for (std::size_t r = 0; r < n_rays; ++r) {
        double a, b;
        if (kind == SceneKind::Wall) {
            // Every ray sees the wall so each target constrains it.
            a = rng.uniform(0.0, scene.feature_center - 6.0 * scene.feature_width);
            b = rng.uniform(scene.feature_center + 6.0 * scene.feature_width, 1.0);
        } else {
            a = rng.uniform(0.0, 0.6);
            b = rng.uniform(a + 0.3, 1.0);
        }
        const RayInterval ray(a, b);
        const RayDensityGrid dense =
            discretize(scene.density, ray, 10000, ApproxMode::Constant);
        const RadianceEstimate gt = quadrature(dense, scene.radiance, false);
        scene.rays.push_back({ray, gt.value});
    }
    return scene;
}

double proposal_sample_concentration(const HierarchicalToy &toy,
                                     const SyntheticScene &scene,
                                     double center, double radius,
                                     std::uint64_t seed,
                                     const HierarchicalOptions &opts) {
    const bool nerf = opts.sampling == SamplingMethod::NerfCdf;
    const ApproxMode mode = nerf ? ApproxMode::Constant : ApproxMode::Linear;
    const std::size_t bins = nerf ? toy.n_proposal : toy.n_proposal - 1;

    std::size_t inside = 0, total = 0;
    for (std::size_t r = 0; r < scene.rays.size(); ++r) {
        const RayDensityGrid grid = toy.proposal.discretize_density(
            scene.rays[r].ray, bins, mode, nullptr);
        const OpacityProfile profile = build_profile(grid);
        const SampleBatch batch = sample_ray(
            profile, UniformScheme::stratified(toy.n_fine, derive_seed(seed, r)),
            opts.sampling, false);
        for (double t : batch.positions) {
            total++;
            if (std::abs(t - center) <= radius) inside++;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(inside) /
                                  static_cast<double>(total);
}

}  // namespace rvs

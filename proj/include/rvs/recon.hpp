// Copyright (c) 2026 the rvs contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rvs/estimators.hpp"

namespace rvs {

// Pre-activation value that reads back as the given density under the
// softplus activation.
double softplus_inverse(double density);

// Adam-style first/second moment accumulator.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void init(std::size_t n);
    void step(std::span<double> params, std::span<const double> grad,
              double lr);
};

// Trainable 1D scene: density pre-activations and an RGB table on a uniform
// knot grid over a base interval. Density reads as
// softplus(interp(params, t)), so activated densities stay nonnegative;
// radiance reads clamped to [0,1].
class TrainableRayModel {
  public:
    TrainableRayModel(const RayInterval &domain, std::size_t knot_count,
                      double density_preact_init, const Rgb &radiance_init);

    const RayInterval &domain() const { return domain_; }
    const std::vector<double> &knots() const { return knots_; }
    std::size_t param_count() const { return knots_.size(); }

    double density(double t) const;
    // d density(t) / d density_param_p for all p (softplus' x hat weights).
    void density_param_grad(double t, std::span<double> out) const;
    // d density / dt at t (piecewise smooth).
    double density_slope(double t) const;

    const TableRadiance &radiance() const { return radiance_; }
    TableRadiance &radiance() { return radiance_; }

    std::vector<double> density_params;  // pre-activation
    AdamState opt_density;
    AdamState opt_radiance;
    long step_count = 0;

    // Density grid for a sub-ray: Linear mode evaluates the model at m+1
    // uniform knots, Constant mode at m bin midpoints. hats (optional,
    // (m or m+1) x param_count) receives d grid_value / d density_param.
    RayDensityGrid discretize_density(const RayInterval &ray, std::size_t m,
                                      ApproxMode mode,
                                      std::vector<double> *hats = nullptr) const;

  private:
    double preact_at(double t, std::size_t *seg = nullptr,
                     double *w = nullptr) const;

    RayInterval domain_;
    std::vector<double> knots_;
    TableRadiance radiance_;
};

enum class LossKind { Mse, TwoSample };

const char *to_string(LossKind kind);

struct FitConfig {
    std::size_t k = 8;
    std::size_t steps = 600;
    double lr = 5e-3;
    LossKind loss = LossKind::Mse;
    ApproxMode mode = ApproxMode::Linear;
    UniformScheme::Kind scheme = UniformScheme::Kind::Stratified;
    std::uint64_t seed = 1;
};

// Gradient-descent fit of one ray model to a target color through the
// reparameterized estimator. Returns the per-step loss trace; throws
// DivergenceError if the loss exceeds 1e3 x the initial loss.
std::vector<double> fit_ray(const Rgb &target, TrainableRayModel &model,
                            const FitConfig &config);

enum class FinePointPolicy { SamplesOnly, UnionWithGrid };

// Coarse proposal density whose only training signal is the gradient
// flowing through the sampler, plus a fine model rendered by quadrature on
// the partition induced by the proposal's samples.
struct HierarchicalToy {
    TrainableRayModel proposal;
    TrainableRayModel fine;
    std::size_t n_proposal;  // proposal evaluations per ray
    std::size_t n_fine;      // samples per ray
    FinePointPolicy fine_point_policy = FinePointPolicy::SamplesOnly;
};

struct HierarchicalOptions {
    SamplingMethod sampling = SamplingMethod::Rvs;
    bool zero_sample_jacobian = false;  // severs the proposal's only gradient
    bool freeze_proposal = false;
    double lr_fine = 5e-3;
    double lr_proposal = 5e-4;  // 10x smaller, mirrors the coarse/fine split
};

struct RayTarget {
    RayInterval ray;
    Rgb color;
};

// One ray of the hierarchical forward/backward pass, with externally
// supplied uniforms so tests can hold the randomness fixed. Gradients are
// of the per-ray MSE against the target color.
struct HierarchicalRayResult {
    Rgb color;
    std::vector<double> positions;
    std::vector<double> grad_proposal;
    std::vector<double> grad_fine_density;
    std::vector<Rgb> grad_fine_radiance;
};

// Renders one ray and returns d(mean-squared error vs target)/d(params) for
// proposal density, fine density and fine radiance parameters.
HierarchicalRayResult hierarchical_render_ray(const HierarchicalToy &toy,
                                              const RayTarget &target,
                                              std::span<const double> uniforms,
                                              const HierarchicalOptions &opts);

// One optimizer step over a batch of rays; returns per-ray MSE losses.
// Gradients reach the proposal only through the sample jacobian.
std::vector<double> hierarchical_step(HierarchicalToy &toy,
                                      std::span<const RayTarget> targets,
                                      std::uint64_t step_seed,
                                      const HierarchicalOptions &opts);

// Ground-truth 1D scene plus a fixed set of training rays with
// dense-quadrature target colors.
struct SyntheticScene {
    ScalarField1D density;
    SinusoidRadiance radiance;
    RayInterval domain;
    std::vector<RayTarget> rays;
    double feature_center = 0.0;  // wall center when applicable
    double feature_width = 0.0;   // wall width when applicable
};

enum class SceneKind { Wall, Foggy, Bump };

SceneKind scene_kind_from_name(const std::string &name);
const char *to_string(SceneKind kind);

SyntheticScene make_scene(SceneKind kind, std::uint64_t seed,
                          std::size_t n_rays = 64);

// Fraction of proposal-driven samples within `radius` of `center`,
// measured across all scene rays with fresh uniforms.
double proposal_sample_concentration(const HierarchicalToy &toy,
                                     const SyntheticScene &scene,
                                     double center, double radius,
                                     std::uint64_t seed,
                                     const HierarchicalOptions &opts);

}  // namespace rvs

// Copyright (c) 2026 the rvs contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rvs/common.hpp"

namespace rvs {

// [t_near, t_far] segment of a ray, in scene units.
struct RayInterval {
    double t_near = 0.0;
    double t_far = 1.0;

    RayInterval() = default;
    RayInterval(double near, double far);

    double length() const { return t_far - t_near; }
    bool contains(double t) const { return t >= t_near && t <= t_far; }
    double clamp(double t) const {
        return t < t_near ? t_near : (t > t_far ? t_far : t);
    }
};

enum class ApproxMode { Constant, Linear };

const char *to_string(ApproxMode mode);

// Density samples along one ray on a strictly increasing knot grid.
// Constant mode stores one value per bin (sampled at the bin midpoint);
// Linear mode stores one value per knot and interpolates between them.
class RayDensityGrid {
  public:
    RayDensityGrid(std::vector<double> knots, std::vector<double> values,
                   ApproxMode mode);

    std::size_t bin_count() const { return knots_.size() - 1; }
    std::size_t param_count() const { return values_.size(); }
    ApproxMode mode() const { return mode_; }
    const std::vector<double> &knots() const { return knots_; }
    const std::vector<double> &values() const { return values_; }
    double knot(std::size_t i) const { return knots_[i]; }
    double value(std::size_t i) const { return values_[i]; }
    double delta(std::size_t i) const { return knots_[i + 1] - knots_[i]; }
    RayInterval interval() const {
        return RayInterval(knots_.front(), knots_.back());
    }

    // Bin index containing t; knots map to the bin on their right except for
    // t_far, which maps to the last bin.
    std::size_t bin_of(double t) const;

    // Density of the approximation at t (bin value or interpolated).
    double density_at(double t) const;

    // d(density at t)/d(values[j]) for all j: an indicator in Constant mode,
    // interpolation hat weights in Linear mode.
    void density_grad(double t, std::span<double> out) const;

    // Mutable access for optimization loops; values must stay >= 0.
    std::vector<double> &mutable_values() { return values_; }

  private:
    std::vector<double> knots_;
    std::vector<double> values_;
    ApproxMode mode_;
};

// Analytic or tabulated nonnegative scalar field over a ray, used as ground
// truth density (and, where a scalar curve is needed, radiance).
struct ScalarField1D {
    enum class Kind { ConstantFog, StepWall, GaussianBump, Tabulated };

    Kind kind = Kind::ConstantFog;
    double level = 0.0;      // ConstantFog
    double center = 0.0;     // StepWall, GaussianBump
    double width = 0.0;      // StepWall, GaussianBump
    double amplitude = 0.0;  // StepWall, GaussianBump
    std::vector<double> knots;   // Tabulated
    std::vector<double> values;  // Tabulated

    double operator()(double t) const;

    static ScalarField1D constant_fog(double level);
    static ScalarField1D step_wall(double center, double width,
                                   double amplitude);
    static ScalarField1D gaussian_bump(double center, double width,
                                       double amplitude);
    static ScalarField1D tabulated(std::vector<double> knots,
                                   std::vector<double> values);

    // Calibrated presets for the single-ray benchmarks: "foggy" is a
    // semi-transparent constant fog, "wall" a narrow bump whose total
    // opacity exceeds 0.99 over the interval.
    static ScalarField1D foggy(const RayInterval &iv);
    static ScalarField1D wall(const RayInterval &iv);

    // {"kind": str, "params": {...}} form; see docs/field-schema.json.
    static ScalarField1D from_json_text(const std::string &text);
    static ScalarField1D from_json_file(const std::string &path);
    std::string to_json_text() const;
};

// Emitted radiance along a ray: t -> RGB in [0,1]^3. eval() bumps an atomic
// query counter so cost accounting stays valid under concurrent ray workers.
class RayRadiance {
  public:
    virtual ~RayRadiance() = default;

    Rgb eval(double t) const {
        queries_.fetch_add(1, std::memory_order_relaxed);
        return eval_impl(t);
    }

    virtual bool has_analytic_derivative() const { return false; }
    // dc/dt; only valid when has_analytic_derivative().
    virtual Rgb derivative(double t) const;

    // Hook for parameterized radiance models: called by estimators with the
    // weight each evaluation carries in the estimate, so d(estimate)/d(param)
    // can be accumulated without replaying the estimator. No-op by default.
    virtual void accumulate_param_grad(double t, const Rgb &weight) const {
        (void)t;
        (void)weight;
    }

    long queries() const { return queries_.load(std::memory_order_relaxed); }
    void reset_queries() const {
        queries_.store(0, std::memory_order_relaxed);
    }

  protected:
    RayRadiance() = default;
    RayRadiance(const RayRadiance &) : RayRadiance() {}
    RayRadiance &operator=(const RayRadiance &) { return *this; }

  private:
    virtual Rgb eval_impl(double t) const = 0;
    mutable std::atomic<long> queries_{0};
};

class ConstantRadiance final : public RayRadiance {
  public:
    explicit ConstantRadiance(const Rgb &c) : color_(c) {}
    bool has_analytic_derivative() const override { return true; }
    Rgb derivative(double) const override { return {0, 0, 0}; }

  private:
    Rgb eval_impl(double) const override { return color_; }
    Rgb color_;
};

// Smooth per-channel sinusoids kept strictly inside [0,1]; the default test
// radiance, with an analytic derivative for exercising both gradient paths.
class SinusoidRadiance final : public RayRadiance {
  public:
    struct Channel {
        double offset = 0.5;
        double amplitude = 0.4;
        double frequency = 1.0;  // cycles over the reference interval
        double phase = 0.0;
    };

    SinusoidRadiance(const RayInterval &reference, Channel r, Channel g,
                     Channel b);
    static SinusoidRadiance default_rgb(const RayInterval &reference);

    bool has_analytic_derivative() const override { return true; }
    Rgb derivative(double t) const override;

  private:
    Rgb eval_impl(double t) const override;
    RayInterval ref_;
    Channel ch_[3];
};

// Scalar field wrapped as a grey radiance curve.
class FieldRadiance final : public RayRadiance {
  public:
    explicit FieldRadiance(ScalarField1D field) : field_(std::move(field)) {}

  private:
    Rgb eval_impl(double t) const override { return Rgb::splat(field_(t)); }
    ScalarField1D field_;
};

// Per-knot RGB table with linear interpolation, clamped to [0,1] on read.
// Backs the trainable radiance component of reconstruction models: the
// accumulate_param_grad hook gathers d(estimate)/d(table entry).
class TableRadiance final : public RayRadiance {
  public:
    TableRadiance(std::vector<double> knots, std::vector<Rgb> table);

    bool has_analytic_derivative() const override { return true; }
    Rgb derivative(double t) const override;

    void accumulate_param_grad(double t, const Rgb &weight) const override;
    void reset_param_grad() const;
    const std::vector<Rgb> &param_grad() const { return param_grad_; }

    const std::vector<double> &knots() const { return knots_; }
    const std::vector<Rgb> &table() const { return table_; }
    std::vector<Rgb> &mutable_table() { return table_; }

  private:
    Rgb eval_impl(double t) const override;
    void locate(double t, std::size_t &seg, double &w) const;

    std::vector<double> knots_;
    std::vector<Rgb> table_;
    mutable std::vector<Rgb> param_grad_;
};

// Samples a field onto a uniform m-bin grid over the interval. Constant mode
// samples bin midpoints, Linear mode samples the knots. Non-finite or
// negative field values are rejected with the offending t in the message.
RayDensityGrid discretize(const ScalarField1D &field, const RayInterval &iv,
                          std::size_t m, ApproxMode mode);

}  // namespace rvs

// Copyright (c) 2026 the rvs contributors.
// SPDX-License-Identifier: Apache-2.0

#include "rvs/fields.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

namespace rvs {

RayInterval::RayInterval(double near, double far) : t_near(near), t_far(far) {
    if (!std::isfinite(near) || !std::isfinite(far) || !(near < far))
        throw std::invalid_argument("RayInterval: need finite t_near < t_far");
}

const char *to_string(ApproxMode mode) {
    return mode == ApproxMode::Constant ? "constant" : "linear";
}

RayDensityGrid::RayDensityGrid(std::vector<double> knots,
                               std::vector<double> values, ApproxMode mode)
    : knots_(std::move(knots)), values_(std::move(values)), mode_(mode) {
    if (knots_.size() < 2)
        throw std::invalid_argument("RayDensityGrid: need at least one bin");
    for (std::size_t i = 0; i + 1 < knots_.size(); ++i)
        if (!(knots_[i] < knots_[i + 1]))
            throw std::invalid_argument(
                "RayDensityGrid: knots must be strictly increasing");
    if (!std::isfinite(knots_.front()) || !std::isfinite(knots_.back()))
        throw std::invalid_argument("RayDensityGrid: non-finite knot");
    const std::size_t expected =
        mode_ == ApproxMode::Constant ? knots_.size() - 1 : knots_.size();
    if (values_.size() != expected)
        throw std::invalid_argument(
            "RayDensityGrid: value count does not match mode");
    for (double v : values_)
        if (!std::isfinite(v) || v < 0.0)
            throw std::invalid_argument(
                "RayDensityGrid: density values must be finite and >= 0");
}

std::size_t RayDensityGrid::bin_of(double t) const {
    auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
    std::size_t idx = static_cast<std::size_t>(it - knots_.begin());
    if (idx > 0) --idx;
    return std::min(idx, bin_count() - 1);
}

double RayDensityGrid::density_at(double t) const {
    const std::size_t i = bin_of(t);
    if (mode_ == ApproxMode::Constant) return values_[i];
    const double w = (t - knots_[i]) / delta(i);
    return values_[i] + (values_[i + 1] - values_[i]) * w;
}

void RayDensityGrid::density_grad(double t, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    const std::size_t i = bin_of(t);
    if (mode_ == ApproxMode::Constant) {
        out[i] = 1.0;
    } else {
        const double w = (t - knots_[i]) / delta(i);
        out[i] = 1.0 - w;
        out[i + 1] = w;
    }
}

double ScalarField1D::operator()(double t) const {
    switch (kind) {
        case Kind::ConstantFog:
            return level;
        case Kind::StepWall:
            return (std::abs(t - center) <= 0.5 * width) ? amplitude : 0.0;
        case Kind::GaussianBump: {
            const double z = (t - center) / width;
            return amplitude * std::exp(-0.5 * z * z);
        }
        case Kind::Tabulated: {
            if (t <= knots.front()) return values.front();
            if (t >= knots.back()) return values.back();
            auto it = std::upper_bound(knots.begin(), knots.end(), t);
            const std::size_t i =
                static_cast<std::size_t>(it - knots.begin()) - 1;
            const double w = (t - knots[i]) / (knots[i + 1] - knots[i]);
            return values[i] + (values[i + 1] - values[i]) * w;
        }
    }
    return 0.0;
}

ScalarField1D ScalarField1D::constant_fog(double level) {
    ScalarField1D f;
    f.kind = Kind::ConstantFog;
    f.level = level;
    return f;
}

ScalarField1D ScalarField1D::step_wall(double center, double width,
                                       double amplitude) {
    ScalarField1D f;
    f.kind = Kind::StepWall;
    f.center = center;
    f.width = width;
    f.amplitude = amplitude;
    return f;
}

ScalarField1D ScalarField1D::gaussian_bump(double center, double width,
                                           double amplitude) {
    ScalarField1D f;
    f.kind = Kind::GaussianBump;
    f.center = center;
    f.width = width;
    f.amplitude = amplitude;
    return f;
}

ScalarField1D ScalarField1D::tabulated(std::vector<double> knots,
                                       std::vector<double> values) {
    if (knots.size() != values.size() || knots.size() < 2)
        throw std::invalid_argument("tabulated field: need matching tables");
    for (std::size_t i = 0; i + 1 < knots.size(); ++i)
        if (!(knots[i] < knots[i + 1]))
            throw std::invalid_argument("tabulated field: knots must increase");
    ScalarField1D f;
    f.kind = Kind::Tabulated;
    f.knots = std::move(knots);
    f.values = std::move(values);
    return f;
}

ScalarField1D ScalarField1D::foggy(const RayInterval &iv) {
    // Semi-transparent fog (mean level 0.8, total opacity ~ 0.55) with
    // multi-scale ripples. The ripples keep the importance-weighted
    // baseline from resolving the integrand at benchmark sample counts
    // while the depth integral, and hence inverse-transform sampling,
    // stays smooth.
    const std::size_t n = 2048;
    const double cycles = 48.0;
    std::vector<double> knots(n + 1), values(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        const double x = static_cast<double>(i) / static_cast<double>(n);
        knots[i] = iv.t_near + x * iv.length();
        values[i] =
            0.8 * (1.0 + 0.6 * std::sin(2.0 * std::numbers::pi * cycles * x));
    }
    return tabulated(std::move(knots), std::move(values));
}

ScalarField1D ScalarField1D::wall(const RayInterval &iv) {
    // Width 1% of the interval; amplitude pushes total opacity above 0.99
    // (depth ~ amplitude * width * sqrt(2*pi) ~ 6.3).
    const double w = 0.01 * iv.length();
    const double mid = 0.5 * (iv.t_near + iv.t_far);
    return gaussian_bump(mid, w, 250.0 / iv.length());
}

namespace {

using nlohmann::json;

const char *kind_name(ScalarField1D::Kind k) {
    switch (k) {
        case ScalarField1D::Kind::ConstantFog:
            return "constant_fog";
        case ScalarField1D::Kind::StepWall:
            return "step_wall";
        case ScalarField1D::Kind::GaussianBump:
            return "gaussian_bump";
        case ScalarField1D::Kind::Tabulated:
            return "tabulated";
    }
    return "?";
}

}  // namespace

ScalarField1D ScalarField1D::from_json_text(const std::string &text) {
    json j = json::parse(text);
    const std::string kind = j.at("kind").get<std::string>();
    const json params = j.value("params", json::object());
    if (kind == "constant_fog")
        return constant_fog(params.at("level").get<double>());
    if (kind == "step_wall")
        return step_wall(params.at("center").get<double>(),
                         params.at("width").get<double>(),
                         params.at("amplitude").get<double>());
    if (kind == "gaussian_bump")
        return gaussian_bump(params.at("center").get<double>(),
                             params.at("width").get<double>(),
                             params.at("amplitude").get<double>());
    if (kind == "tabulated")
        return tabulated(params.at("knots").get<std::vector<double>>(),
                         params.at("values").get<std::vector<double>>());
    throw std::invalid_argument("unknown field kind: " + kind);
}

ScalarField1D ScalarField1D::from_json_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open field file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

std::string ScalarField1D::to_json_text() const {
    json params;
    switch (kind) {
        case Kind::ConstantFog:
            params["level"] = level;
            break;
        case Kind::StepWall:
        case Kind::GaussianBump:
            params["center"] = center;
            params["width"] = width;
            params["amplitude"] = amplitude;
            break;
        case Kind::Tabulated:
            params["knots"] = knots;
            params["values"] = values;
            break;
    }
    return json{{"kind", kind_name(kind)}, {"params", params}}.dump();
}

Rgb RayRadiance::derivative(double) const {
    throw std::logic_error("radiance has no analytic derivative");
}

SinusoidRadiance::SinusoidRadiance(const RayInterval &reference, Channel r,
                                   Channel g, Channel b)
    : ref_(reference), ch_{r, g, b} {
    for (const Channel &c : ch_)
        if (c.offset - std::abs(c.amplitude) < 0.0 ||
            c.offset + std::abs(c.amplitude) > 1.0)
            throw std::invalid_argument(
                "SinusoidRadiance: channel leaves [0,1]");
}

SinusoidRadiance SinusoidRadiance::default_rgb(const RayInterval &reference) {
    return SinusoidRadiance(reference, {0.5, 0.40, 1.0, 0.0},
                            {0.5, 0.35, 2.0, 0.7}, {0.5, 0.30, 3.0, 1.9});
}

Rgb SinusoidRadiance::eval_impl(double t) const {
    const double x = (t - ref_.t_near) / ref_.length();
    Rgb out;
    for (int c = 0; c < 3; ++c) {
        const Channel &ch = ch_[c];
        out[c] = ch.offset +
                 ch.amplitude *
                     std::sin(2.0 * std::numbers::pi * ch.frequency * x +
                              ch.phase);
    }
    return out;
}

Rgb SinusoidRadiance::derivative(double t) const {
    const double x = (t - ref_.t_near) / ref_.length();
    Rgb out;
    for (int c = 0; c < 3; ++c) {
        const Channel &ch = ch_[c];
        const double omega = 2.0 * std::numbers::pi * ch.frequency;
        out[c] = ch.amplitude * omega / ref_.length() *
                 std::cos(omega * x + ch.phase);
    }
    return out;
}

TableRadiance::TableRadiance(std::vector<double> knots, std::vector<Rgb> table)
    : knots_(std::move(knots)), table_(std::move(table)) {
    if (knots_.size() != table_.size() || knots_.size() < 2)
        throw std::invalid_argument("TableRadiance: need matching tables");
    param_grad_.assign(table_.size(), Rgb{});
}

void TableRadiance::locate(double t, std::size_t &seg, double &w) const {
    if (t <= knots_.front()) {
        seg = 0;
        w = 0.0;
        return;
    }
    if (t >= knots_.back()) {
        seg = knots_.size() - 2;
        w = 1.0;
        return;
    }
    auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
    seg = static_cast<std::size_t>(it - knots_.begin()) - 1;
    w = (t - knots_[seg]) / (knots_[seg + 1] - knots_[seg]);
}

Rgb TableRadiance::eval_impl(double t) const {
    std::size_t seg;
    double w;
    locate(t, seg, w);
    return clamp01(table_[seg] * (1.0 - w) + table_[seg + 1] * w);
}

Rgb TableRadiance::derivative(double t) const {
    std::size_t seg;
    double w;
    locate(t, seg, w);
    const Rgb raw = table_[seg] * (1.0 - w) + table_[seg + 1] * w;
    const double inv_dt = 1.0 / (knots_[seg + 1] - knots_[seg]);
    Rgb slope = (table_[seg + 1] - table_[seg]) * inv_dt;
    // Clamped channels have zero slope.
    for (int c = 0; c < 3; ++c)
        if (raw[c] < 0.0 || raw[c] > 1.0) slope[c] = 0.0;
    return slope;
}

void TableRadiance::accumulate_param_grad(double t, const Rgb &weight) const {
    std::size_t seg;
    double w;
    locate(t, seg, w);
    const Rgb raw = table_[seg] * (1.0 - w) + table_[seg + 1] * w;
    Rgb pass = weight;
    for (int c = 0; c < 3; ++c)
        if (raw[c] < 0.0 || raw[c] > 1.0) pass[c] = 0.0;
    param_grad_[seg] += pass * (1.0 - w);
    param_grad_[seg + 1] += pass * w;
}

void TableRadiance::reset_param_grad() const {
    std::fill(param_grad_.begin(), param_grad_.end(), Rgb{});
}

RayDensityGrid discretize(const ScalarField1D &field, const RayInterval &iv,
                          std::size_t m, ApproxMode mode) {
    if (m < 1) throw std::invalid_argument("discretize: m must be >= 1");
    std::vector<double> knots(m + 1);
    const double len = iv.length();
    knots[0] = iv.t_near;
    knots[m] = iv.t_far;
    // len*i/m (not t_near + i*step) so that grids at m and 2m share knot
    // values bitwise.
    for (std::size_t i = 1; i < m; ++i)
        knots[i] = iv.t_near + (len * static_cast<double>(i)) /
                                   static_cast<double>(m);

    auto sample = [&](double t) {
        const double v = field(t);
        if (!std::isfinite(v))
            throw std::invalid_argument("discretize: non-finite field value at t=" +
                                        std::to_string(t));
        if (v < 0.0)
            throw std::invalid_argument("discretize: negative density at t=" +
                                        std::to_string(t));
        return v;
    };

    std::vector<double> values;
    if (mode == ApproxMode::Constant) {
        values.reserve(m);
        for (std::size_t i = 0; i < m; ++i)
            values.push_back(sample(0.5 * (knots[i] + knots[i + 1])));
    } else {
        values.reserve(m + 1);
        for (std::size_t i = 0; i <= m; ++i) values.push_back(sample(knots[i]));
    }
    return RayDensityGrid(std::move(knots), std::move(values), mode);
}

}  // namespace rvs

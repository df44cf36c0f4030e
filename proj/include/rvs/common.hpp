// Copyright (c) 2026 the rvs contributors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace rvs {

// RGB triple with value semantics. Benchmarks that only need a scalar use
// channel r and replicate it.
struct Rgb {
    double r = 0.0;
    double g = 0.0;
    double b = 0.0;

    Rgb() = default;
    Rgb(double r_, double g_, double b_) : r(r_), g(g_), b(b_) {}
    static Rgb splat(double v) { return {v, v, v}; }

    Rgb &operator+=(const Rgb &o) {
        r += o.r;
        g += o.g;
        b += o.b;
        return *this;
    }
    Rgb &operator-=(const Rgb &o) {
        r -= o.r;
        g -= o.g;
        b -= o.b;
        return *this;
    }
    Rgb &operator*=(double s) {
        r *= s;
        g *= s;
        b *= s;
        return *this;
    }
    double &operator[](int c) { return c == 0 ? r : (c == 1 ? g : b); }
    double operator[](int c) const { return c == 0 ? r : (c == 1 ? g : b); }

    friend Rgb operator+(Rgb a, const Rgb &b) { return a += b; }
    friend Rgb operator-(Rgb a, const Rgb &b) { return a -= b; }
    friend Rgb operator*(Rgb a, double s) { return a *= s; }
    friend Rgb operator*(double s, Rgb a) { return a *= s; }

    bool finite() const {
        return std::isfinite(r) && std::isfinite(g) && std::isfinite(b);
    }
    double max_abs() const {
        return std::max({std::abs(r), std::abs(g), std::abs(b)});
    }
};

inline Rgb hadamard(const Rgb &a, const Rgb &b) {
    return {a.r * b.r, a.g * b.g, a.b * b.b};
}

inline Rgb clamp01(const Rgb &c) {
    auto cl = [](double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); };
    return {cl(c.r), cl(c.g), cl(c.b)};
}

// Optical depth is capped before exponentiation when converting to opacity;
// exp(-80) ~ 1.8e-35 underflows harmlessly in the opacity value, and the
// opacity derivative in the capped region is exp(-cap) rather than a hard 0.
inline constexpr double kDepthCap = 80.0;

// Below this total depth the logsumexp form of the inverse target loses all
// significant digits and the first-order value u*d is used instead.
inline constexpr double kDepthSwitch = 1e-8;

// Raised when an optimization loop blows up (loss > 1e3 x initial).
class DivergenceError : public std::runtime_error {
  public:
    explicit DivergenceError(const std::string &what)
        : std::runtime_error(what) {}
};

}  // namespace rvs

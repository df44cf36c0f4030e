// Copyright (c) 2026 the rvs contributors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "rvs/opacity.hpp"
#include "oracles.hpp"

using namespace rvs;

TEST_SUITE_BEGIN("opacity");

TEST_CASE("prefix integrals, constant single bin") {
    const auto p = build_profile(
        RayDensityGrid({0.0, 1.0}, {2.0}, ApproxMode::Constant));
    CHECK(p.prefix_depth == std::vector<double>{0.0, 2.0});
    CHECK(p.total_opacity == -std::expm1(-2.0));
}

TEST_CASE("prefix integrals, linear triangle") {
    const auto p =
        build_profile(RayDensityGrid({0.0, 1.0}, {0.0, 2.0}, ApproxMode::Linear));
    CHECK(p.prefix_depth == std::vector<double>{0.0, 1.0});
    CHECK(p.total_opacity == -std::expm1(-1.0));
}

TEST_CASE("prefix integrals, linear constant density") {
    const auto p = build_profile(
        RayDensityGrid({0.0, 0.5, 1.0}, {1.0, 1.0, 1.0}, ApproxMode::Linear));
    CHECK(p.prefix_depth == std::vector<double>{0.0, 0.5, 1.0});
}

TEST_CASE("eval_opacity basics") {
    const auto con = build_profile(
        RayDensityGrid({0.0, 1.0}, {2.0}, ApproxMode::Constant));
    CHECK(eval_opacity(con, 0.5) == doctest::Approx(-std::expm1(-1.0)).epsilon(1e-15));
    CHECK(eval_opacity(con, 0.0) == 0.0);

    const auto lin =
        build_profile(RayDensityGrid({0.0, 1.0}, {0.0, 2.0}, ApproxMode::Linear));
    CHECK(eval_opacity(lin, 0.5) ==
          doctest::Approx(-std::expm1(-0.25)).epsilon(1e-15));

    CHECK_THROWS_AS(eval_opacity(con, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(eval_opacity(con, 1.1), std::invalid_argument);
}

TEST_CASE("opacity is monotone over random grids") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        for (ApproxMode mode : {ApproxMode::Constant, ApproxMode::Linear}) {
            const auto grid =
                test::random_grid(derive_seed(77, seed * 2 + (mode == ApproxMode::Linear)), mode);
            const auto p = build_profile(grid);
            const RayInterval iv = p.interval();
            double prev = -1.0;
            for (int i = 0; i <= 500; ++i) {
                const double t = iv.t_near + iv.length() * i / 500.0;
                const double f = eval_opacity(p, t);
                CHECK(f >= prev);
                prev = f;
            }
        }
    }
}

TEST_CASE("knot consistency within 4 ulp") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        for (ApproxMode mode : {ApproxMode::Constant, ApproxMode::Linear}) {
            const auto grid = test::random_grid(derive_seed(78, seed), mode);
            const auto p = build_profile(grid);
            for (std::size_t i = 0; i < p.prefix_depth.size(); ++i) {
                const double via_eval = eval_opacity(p, grid.knot(i));
                const double direct = -std::expm1(-p.prefix_depth[i]);
                CHECK(test::ulp_distance(via_eval, direct) <= 4);
            }
        }
    }
}

TEST_CASE("eval_depth agrees with the bin-by-bin oracle") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        for (ApproxMode mode : {ApproxMode::Constant, ApproxMode::Linear}) {
            const auto grid = test::random_grid(derive_seed(79, seed), mode);
            const auto p = build_profile(grid);
            const RayInterval iv = p.interval();
            for (int i = 0; i <= 60; ++i) {
                const double t = iv.t_near + iv.length() * i / 60.0;
                CHECK(eval_depth(p, t) ==
                      doctest::Approx(test::depth_oracle(grid, t))
                          .epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("stable_target basics") {
    CHECK(stable_target(0.0, 0.3) == 0.0);
    CHECK(stable_target(1.0, 1.0) == 1.0);
    CHECK(stable_target(1.0, 0.0) == 0.0);
    const double y = stable_target(1e-12, 0.5);
    const long double ref = test::stable_target_oracle(1e-12L, 0.5L);
    CHECK(std::abs(y - static_cast<double>(ref)) / static_cast<double>(ref) <
          1e-6);
    CHECK_THROWS_AS(stable_target(1.0, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(stable_target(1.0, 1.1), std::invalid_argument);
    CHECK_THROWS_AS(stable_target(-1.0, 0.5), std::invalid_argument);
}

TEST_CASE("stable_target monotone, finite, in range") {
    Rng rng(123);
    for (int i = 0; i < 2000; ++i) {
        const double d = std::exp(rng.uniform(std::log(1e-14), std::log(1e6)));
        const double u = rng.uniform();
        const double y = stable_target(d, u);
        CHECK(std::isfinite(y));
        CHECK(y >= 0.0);
        CHECK(y <= d);
        // monotone in u and d
        const double u2 = std::min(1.0, u + 0.05);
        CHECK(stable_target(d, u2) >= y);
        CHECK(stable_target(d * 1.1, u) >= y * (1.0 - 1e-12));
    }
}

TEST_CASE("stable_target agrees with the naive form at moderate depth") {
    Rng rng(321);
    for (int i = 0; i < 2000; ++i) {
        const double d = std::exp(rng.uniform(std::log(1e-3), std::log(30.0)));
        const double u = rng.uniform();
        const double naive = -std::log(1.0 - (-std::expm1(-d)) * u);
        CHECK(std::abs(stable_target(d, u) - naive) < 1e-12);
    }
}

TEST_CASE("stable_target derivative matches FD") {
    Rng rng(555);
    for (int i = 0; i < 300; ++i) {
        const double d = std::exp(rng.uniform(std::log(1e-6), std::log(50.0)));
        const double u = rng.uniform(0.01, 0.99);
        const double h = 1e-6 * std::max(d, 1e-3);
        const double fd =
            (stable_target(d + h, u) - stable_target(std::max(0.0, d - h), u)) /
            (2.0 * h);
        CHECK(test::grad_rel_err(stable_target_ddepth(d, u), fd) < 1e-4);
    }
}

TEST_CASE("depth gradient matches FD") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        for (ApproxMode mode : {ApproxMode::Constant, ApproxMode::Linear}) {
            const auto grid = test::random_grid(derive_seed(80, seed), mode);
            const auto p = build_profile(grid);
            const RayInterval iv = p.interval();
            Rng rng(seed);
            const double t = iv.t_near + rng.uniform(0.05, 0.95) * iv.length();
            std::vector<double> g(grid.param_count());
            depth_gradient(p, t, g);
            for (std::size_t j = 0; j < grid.param_count(); ++j) {
                const double fd = test::fd_wrt_value(
                    grid, j, [&](const RayDensityGrid &gg) {
                        return eval_depth(build_profile(gg), t);
                    });
                CHECK(test::grad_rel_err(g[j], fd) < 1e-5);
            }
        }
    }
}

TEST_CASE("total opacity matches expm1 and the cap keeps a live gradient") {
    const auto p = build_profile(
        RayDensityGrid({0.0, 1.0}, {200.0}, ApproxMode::Constant));
    CHECK(p.total_opacity == 1.0);
    CHECK(dopacity_ddepth(p.total_depth) == std::exp(-kDepthCap));
    CHECK(dopacity_ddepth(10.0) == std::exp(-10.0));
}

TEST_SUITE_END();

// Copyright (c) 2026 the rvs contributors.
// SPDX-License-Identifier: Apache-2.0

#include "rvs/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rvs/estimators.hpp"
#include "rvs/random.hpp"
#include "rvs/recon.hpp"

namespace rvs::cli {

namespace {

using nlohmann::json;

std::string fmt(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

// Fixed-order worker pool over [0, n): results land by index, so output is
// independent of scheduling.
void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t)> &fn) {
    threads = std::max(1u, std::min<unsigned>(threads, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned w = 0; w < threads; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n;
                 i = next.fetch_add(1))
                fn(i);
        });
    for (auto &t : pool) t.join();
}

ScalarField1D resolve_field(const std::string &spec, const RayInterval &iv) {
    if (spec == "foggy") return ScalarField1D::foggy(iv);
    if (spec == "wall") return ScalarField1D::wall(iv);
    if (!spec.empty() && spec.front() == '{')
        return ScalarField1D::from_json_text(spec);
    return ScalarField1D::from_json_file(spec);
}

std::unique_ptr<RayRadiance> resolve_radiance(const std::string &name,
                                              const RayInterval &iv) {
    if (name == "sinusoid")
        return std::make_unique<SinusoidRadiance>(
            SinusoidRadiance::default_rgb(iv));
    if (name == "constant")
        return std::make_unique<ConstantRadiance>(Rgb{0.6, 0.6, 0.6});
    throw CLI::ValidationError("--radiance", "unknown radiance: " + name);
}

void print_config(std::ostream &out, const json &cfg) {
    out << "# config: " << cfg.dump() << "\n";
}

std::ofstream open_out(const std::string &path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open output file: " + path);
    return f;
}

// ---------------------------------------------------------------------------
// variance: single-ray estimator variance study
// ---------------------------------------------------------------------------

struct VarianceOpts {
    std::string field = "wall";
    std::string radiance = "sinusoid";
    std::vector<std::size_t> ks = {1, 2, 4, 8, 16, 32, 64, 128, 256};
    std::size_t trials = 10000;
    std::size_t m = 512;
    std::string mode = "constant";
    double t_near = 0.0, t_far = 1.0;
    std::uint64_t seed = 1;
    unsigned threads = std::thread::hardware_concurrency();
    std::string out_path;
    std::string strata = "k_plus_1";
};

int cmd_variance(const VarianceOpts &o, std::ostream &out) {
    const RayInterval iv(o.t_near, o.t_far);
    const ApproxMode mode =
        o.mode == "linear" ? ApproxMode::Linear : ApproxMode::Constant;
    const StrataDenominator denom = o.strata == "k"
                                        ? StrataDenominator::K
                                        : StrataDenominator::KPlus1;
    const ScalarField1D field = resolve_field(o.field, iv);
    const auto radiance = resolve_radiance(o.radiance, iv);
    const OpacityProfile profile =
        build_profile(discretize(field, iv, o.m, mode));

    json cfg{{"command", "variance"}, {"field", o.field},
             {"radiance", o.radiance}, {"k", o.ks},
             {"trials", o.trials},     {"m", o.m},
             {"mode", o.mode},         {"t_near", o.t_near},
             {"t_far", o.t_far},       {"seed", o.seed},
             {"strata", o.strata},     {"out", o.out_path}};
    print_config(out, cfg);

    std::ofstream file;
    std::ostream *sink = &out;
    if (!o.out_path.empty()) {
        file = open_out(o.out_path);
        print_config(file, cfg);
        sink = &file;
    }
    *sink << "# schema: rvs-variance-v1\n";
    *sink << "field,estimator,scheme,k,trials,mean,variance,stderr\n";

    struct Row {
        const char *estimator;
        const char *scheme;
    };
    const Row rows[] = {{"reparam_mc", "iid"},
                        {"reparam_mc", "stratified"},
                        {"stratified_iw", "stratified"},
                        {"uniform_mc", "iid"}};

    std::uint64_t row_index = 0;
    for (const Row &row : rows) {
        for (std::size_t k : o.ks) {
            const std::uint64_t row_seed = derive_seed(o.seed, row_index++);
            std::vector<double> vals(o.trials);
            parallel_for(o.trials, o.threads, [&](std::size_t trial) {
                const std::uint64_t s = derive_seed(row_seed, trial);
                RadianceEstimate est;
                if (row.estimator == std::string("reparam_mc")) {
                    UniformScheme scheme =
                        row.scheme == std::string("iid")
                            ? UniformScheme::iid(k, s)
                            : UniformScheme::stratified(k, s, denom);
                    est = reparam_mc(profile, *radiance, scheme,
                                     SamplingMethod::Rvs, false);
                } else if (row.estimator == std::string("stratified_iw")) {
                    est = stratified_iw(profile, *radiance, k, s, false);
                } else {
                    est = uniform_mc(profile, *radiance, k, s, false);
                }
                vals[trial] = est.value.r;  // scalar benches use channel r
            });
            double mean = 0.0;
            for (double v : vals) mean += v;
            mean /= static_cast<double>(o.trials);
            double var = 0.0;
            for (double v : vals) var += (v - mean) * (v - mean);
            var /= static_cast<double>(o.trials - 1);
            const double se = std::sqrt(var / static_cast<double>(o.trials));
            *sink << o.field << ',' << row.estimator << ',' << row.scheme
                  << ',' << k << ',' << o.trials << ',' << fmt(mean) << ','
                  << fmt(var) << ',' << fmt(se) << "\n";
        }
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// gradcheck: finite-difference validation of every analytic gradient
// ---------------------------------------------------------------------------

struct GradCase {
    RayDensityGrid grid;
    double u = 0.5;
};

GradCase make_grad_case(std::uint64_t case_seed, ApproxMode mode) {
    Rng rng(case_seed);
    const std::size_t m = 2 + rng.below(15);
    const double len = rng.uniform(0.5, 2.0);
    std::vector<double> knots(m + 1);
    knots[0] = 0.0;
    knots[m] = len;
    for (std::size_t i = 1; i < m; ++i) {
        const double base = len * static_cast<double>(i) /
                            static_cast<double>(m);
        knots[i] = base + rng.uniform(-0.3, 0.3) * len /
                              static_cast<double>(m);
    }
    std::vector<double> values(mode == ApproxMode::Constant ? m : m + 1);
    for (double &v : values) v = rng.uniform(0.1, 4.0);
    RayDensityGrid grid(std::move(knots), std::move(values), mode);

    // Keep the inversion target away from prefix-depth knots: central
    // differences straddling a bin-boundary kink of dt/dsigma would measure
    // the average of two one-sided slopes.
    const OpacityProfile p = build_profile(grid);
    double u = rng.uniform(0.01, 0.99);
    for (int tries = 0; tries < 64; ++tries) {
        const double y = stable_target(p.total_depth, u);
        double dist = p.total_depth;
        for (double pd : p.prefix_depth)
            dist = std::min(dist, std::abs(y - pd));
        if (dist > 1e-4) break;
        u = rng.uniform(0.01, 0.99);
    }
    return {std::move(grid), u};
}

// Relative error with the denominator floored at 1e-4: entries below that
// scale are judged absolutely (threshold x 1e-4), which keeps tiny
// gradients from blowing up the ratio while the report stays nonzero and
// informative.
double grad_error(double analytic, double reference) {
    return std::abs(analytic - reference) /
           std::max(std::abs(reference), 1e-4);
}

struct OpReport {
    std::string name;
    double max_rel_error = 0.0;
    std::int64_t worst_case = -1;
};

using CaseFn = std::function<double(std::uint64_t case_seed)>;

// One finite-difference sweep of an inverse: perturb each density value and
// re-invert with the target held fixed. Bisection runs at an unreachable
// tolerance (full iteration budget) so the root quantization stays far
// below the finite-difference step.
double fd_check_inverse(const GradCase &gc, SamplingMethod method) {
    const OpacityProfile profile = build_profile(gc.grid);
    const double y = stable_target(profile.total_depth, gc.u);
    auto invert = [&](const OpacityProfile &p) {
        switch (method) {
            case SamplingMethod::Rvs:
                return p.mode() == ApproxMode::Constant
                           ? invert_constant(p, y)
                           : invert_linear(p, y);
            case SamplingMethod::Bisect:
                return invert_bisect(p, y, 1e-18 * p.interval().length());
            case SamplingMethod::NerfCdf:
                return invert_nerf_cdf(p, gc.u * profile.total_opacity);
        }
        throw std::logic_error("unreachable");
    };
    const InverseResult base = invert(profile);

    double worst = 0.0;
    for (std::size_t j = 0; j < gc.grid.param_count(); ++j) {
        const double h = 1e-6 * std::max(gc.grid.value(j), 1.0);
        auto at = [&](double delta) {
            std::vector<double> values = gc.grid.values();
            values[j] += delta;
            const OpacityProfile p = build_profile(
                RayDensityGrid(gc.grid.knots(), values, gc.grid.mode()));
            return invert(p).t;
        };
        const double fd = (at(h) - at(-h)) / (2.0 * h);
        worst = std::max(worst, grad_error(base.grad_sigma[j], fd));
    }
    return worst;
}

double fd_check_estimator(const GradCase &gc, const std::string &which,
                          std::uint64_t seed) {
    const RayInterval iv = gc.grid.interval();
    const SinusoidRadiance radiance = SinusoidRadiance::default_rgb(iv);
    const std::size_t k = 8;
    auto value = [&](const RayDensityGrid &grid, bool with_grad,
                     RadianceEstimate &est) {
        const OpacityProfile p = build_profile(grid);
        if (which == "reparam_mc") {
            est = reparam_mc(p, radiance, UniformScheme::stratified(k, seed),
                             SamplingMethod::Rvs, with_grad);
        } else if (which == "quadrature") {
            est = quadrature(grid, radiance, with_grad);
        } else {
            est = stratified_iw(p, radiance, k, seed, with_grad);
        }
    };
    RadianceEstimate base;
    value(gc.grid, true, base);

    double worst = 0.0;
    for (std::size_t j = 0; j < gc.grid.param_count(); ++j) {
        const double h = 1e-6 * std::max(gc.grid.value(j), 1.0);
        auto at = [&](double delta) {
            std::vector<double> values = gc.grid.values();
            values[j] += delta;
            RadianceEstimate est;
            value(RayDensityGrid(gc.grid.knots(), values, gc.grid.mode()),
                  false, est);
            return est.value;
        };
        const Rgb fd = (at(h) - at(-h)) * (1.0 / (2.0 * h));
        for (int c = 0; c < 3; ++c)
            worst = std::max(worst,
                             grad_error(base.grad_density[j][c], fd[c]));
    }
    return worst;
}

double explicit_vs_implicit(const GradCase &gc) {
    const OpacityProfile profile = build_profile(gc.grid);
    const double y = stable_target(profile.total_depth, gc.u);
    const InverseResult expl = profile.mode() == ApproxMode::Constant
                                   ? invert_constant(profile, y)
                                   : invert_linear(profile, y);
    const InverseResult impl =
        invert_bisect(profile, y, 1e-14 * profile.interval().length());
    double worst = 0.0;
    for (std::size_t j = 0; j < expl.grad_sigma.size(); ++j)
        worst = std::max(worst,
                         grad_error(impl.grad_sigma[j], expl.grad_sigma[j]));
    return worst;
}

struct GradcheckOpts {
    std::size_t cases = 200;
    double threshold = 1e-4;
    std::uint64_t seed = 1;
    std::string out_path;
    std::string replay_path;
    unsigned threads = std::thread::hardware_concurrency();
};

std::vector<std::pair<std::string, CaseFn>> gradcheck_ops() {
    return {
        {"invert_constant",
         [](std::uint64_t s) {
             return fd_check_inverse(make_grad_case(s, ApproxMode::Constant),
                                     SamplingMethod::Rvs);
         }},
        {"invert_linear",
         [](std::uint64_t s) {
             return fd_check_inverse(make_grad_case(s, ApproxMode::Linear),
                                     SamplingMethod::Rvs);
         }},
        {"invert_bisect_constant",
         [](std::uint64_t s) {
             return fd_check_inverse(make_grad_case(s, ApproxMode::Constant),
                                     SamplingMethod::Bisect);
         }},
        {"invert_bisect_linear",
         [](std::uint64_t s) {
             return fd_check_inverse(make_grad_case(s, ApproxMode::Linear),
                                     SamplingMethod::Bisect);
         }},
        {"invert_nerf_cdf",
         [](std::uint64_t s) {
             return fd_check_inverse(make_grad_case(s, ApproxMode::Constant),
                                     SamplingMethod::NerfCdf);
         }},
        {"quadrature",
         [](std::uint64_t s) {
             return fd_check_estimator(
                 make_grad_case(s, ApproxMode::Constant), "quadrature", s);
         }},
        {"reparam_mc",
         [](std::uint64_t s) {
             return fd_check_estimator(
                 make_grad_case(s, ApproxMode::Linear), "reparam_mc", s);
         }},
        {"stratified_iw",
         [](std::uint64_t s) {
             return fd_check_estimator(
                 make_grad_case(s, ApproxMode::Linear), "stratified_iw", s);
         }},
        {"explicit_vs_implicit_constant",
         [](std::uint64_t s) {
             return explicit_vs_implicit(
                 make_grad_case(s, ApproxMode::Constant));
         }},
        {"explicit_vs_implicit_linear",
         [](std::uint64_t s) {
             return explicit_vs_implicit(
                 make_grad_case(s, ApproxMode::Linear));
         }},
    };
}

int cmd_gradcheck(const GradcheckOpts &o, std::ostream &out) {
    json cfg{{"command", "gradcheck"},   {"cases", o.cases},
             {"threshold", o.threshold}, {"seed", o.seed},
             {"out", o.out_path},        {"replay", o.replay_path}};
    print_config(out, cfg);

    const auto ops = gradcheck_ops();

    if (!o.replay_path.empty()) {
        std::ifstream in(o.replay_path);
        if (!in) throw std::runtime_error("cannot open " + o.replay_path);
        json f = json::parse(in);
        const std::string op = f.at("op").get<std::string>();
        const std::uint64_t case_seed = f.at("case_seed").get<std::uint64_t>();
        for (const auto &[name, fn] : ops) {
            if (name != op) continue;
            const double err = fn(case_seed);
            json rep{{"schema", "rvs-gradcheck-replay-v1"},
                     {"op", op},
                     {"case_seed", case_seed},
                     {"max_rel_error", err}};
            out << rep.dump(2) << "\n";
            return err <= o.threshold ? kExitOk : kExitNumericalCheck;
        }
        throw std::runtime_error("unknown op in replay file: " + op);
    }

    json report{{"schema", "rvs-gradcheck-v1"},
                {"seed", o.seed},
                {"cases_per_op", o.cases},
                {"threshold", o.threshold}};
    json op_reports = json::array();
    bool pass = true;
    json failure;

    // The explicit/implicit cross-check gets a tighter bar than the
    // finite-difference sweeps.
    for (std::size_t oi = 0; oi < ops.size(); ++oi) {
        const auto &[name, fn] = ops[oi];
        const bool cross = name.rfind("explicit_vs_implicit", 0) == 0;
        const double bar = cross ? 1e-6 : o.threshold;
        std::vector<double> errs(o.cases);
        parallel_for(o.cases, o.threads, [&](std::size_t c) {
            errs[c] = fn(derive_seed(derive_seed(o.seed, oi), c));
        });
        OpReport rep;
        rep.name = name;
        for (std::size_t c = 0; c < o.cases; ++c)
            if (errs[c] > rep.max_rel_error) {
                rep.max_rel_error = errs[c];
                rep.worst_case = static_cast<std::int64_t>(c);
            }
        if (rep.max_rel_error > bar && pass) {
            pass = false;
            failure = json{
                {"op", name},
                {"case_index", rep.worst_case},
                {"case_seed",
                 derive_seed(derive_seed(o.seed, oi),
                             static_cast<std::uint64_t>(rep.worst_case))},
                {"max_rel_error", rep.max_rel_error}};
        } else if (rep.max_rel_error > bar) {
            pass = false;
        }
        op_reports.push_back(json{{"op", name},
                                  {"max_rel_error", rep.max_rel_error},
                                  {"threshold", bar},
                                  {"cases", o.cases}});
    }
    report["ops"] = op_reports;
    report["pass"] = pass;
    if (!pass) report["failure"] = failure;

    if (!o.out_path.empty())
        open_out(o.out_path) << report.dump(2) << "\n";
    else
        out << report.dump(2) << "\n";
    return pass ? kExitOk : kExitNumericalCheck;
}

// ---------------------------------------------------------------------------
// recon: reconstruction demos
// ---------------------------------------------------------------------------

struct ReconOpts {
    std::string task = "hierarchical";
    std::string scene = "wall";
    std::size_t steps = 2000;
    std::size_t k = 8;
    std::size_t np = 32;
    std::size_t nf = 48;
    std::size_t proposal_knots = 48;
    std::size_t fine_knots = 96;
    std::size_t rays = 64;
    std::string sampling = "rvs";
    std::string loss = "mse";
    std::string mode = "linear";
    std::string scheme = "stratified";
    bool union_points = false;
    std::uint64_t seed = 1;
    std::string out_prefix = "recon_out";
};

SamplingMethod parse_sampling(const std::string &s) {
    if (s == "rvs") return SamplingMethod::Rvs;
    if (s == "nerf") return SamplingMethod::NerfCdf;
    if (s == "bisect") return SamplingMethod::Bisect;
    throw CLI::ValidationError("--sampling", "unknown sampling: " + s);
}

// Fog-like initial density (~0.31) for all trainable models.
double softplus_preact_init() { return -1.0; }

json model_to_json(const TrainableRayModel &model) {
    json j;
    j["knots"] = model.knots();
    std::vector<double> dens(model.param_count());
    for (std::size_t i = 0; i < dens.size(); ++i)
        dens[i] = model.density(model.knots()[i]);
    j["density"] = dens;
    j["density_preact"] = model.density_params;
    json table = json::array();
    for (const Rgb &c : model.radiance().table())
        table.push_back({c.r, c.g, c.b});
    j["radiance"] = table;
    return j;
}

int cmd_recon(const ReconOpts &o, std::ostream &out) {
    json cfg{{"command", "recon"},   {"task", o.task},
             {"scene", o.scene},     {"steps", o.steps},
             {"k", o.k},             {"np", o.np},
             {"nf", o.nf},           {"proposal_knots", o.proposal_knots},
             {"fine_knots", o.fine_knots},
             {"rays", o.rays},       {"sampling", o.sampling},
             {"loss", o.loss},       {"mode", o.mode},
             {"scheme", o.scheme},   {"union_points", o.union_points},
             {"seed", o.seed},       {"out", o.out_prefix}};
    print_config(out, cfg);

    const SyntheticScene scene =
        make_scene(scene_kind_from_name(o.scene), o.seed, o.rays);

    std::ofstream csv = open_out(o.out_prefix + ".csv");
    print_config(csv, cfg);
    csv << "# schema: rvs-recon-v1\n";
    csv << "step,loss\n";

    json final_model;
    double final_loss = 0.0;

    if (o.task == "fit") {
        const RayDensityGrid dense =
            discretize(scene.density, scene.domain, 10000,
                       ApproxMode::Constant);
        const Rgb target = quadrature(dense, scene.radiance, false).value;

        TrainableRayModel model(scene.domain, 33, softplus_preact_init(),
                                Rgb{0.5, 0.5, 0.5});
        FitConfig fc;
        fc.k = o.k;
        fc.steps = o.steps;
        fc.loss = o.loss == "two_sample" ? LossKind::TwoSample : LossKind::Mse;
        fc.mode = o.mode == "constant" ? ApproxMode::Constant
                                       : ApproxMode::Linear;
        fc.scheme = o.scheme == "iid" ? UniformScheme::Kind::Iid
                                      : UniformScheme::Kind::Stratified;
        fc.seed = o.seed;
        const std::vector<double> trace = fit_ray(target, model, fc);
        for (std::size_t s = 0; s < trace.size(); ++s)
            csv << s << ',' << fmt(trace[s]) << "\n";
        final_loss = trace.back();
        final_model["model"] = model_to_json(model);
        final_model["target"] = {target.r, target.g, target.b};
    } else if (o.task == "hierarchical") {
        HierarchicalToy toy{
            TrainableRayModel(scene.domain, o.proposal_knots,
                              softplus_preact_init(), Rgb{0.5, 0.5, 0.5}),
            TrainableRayModel(scene.domain, o.fine_knots,
                              softplus_preact_init(), Rgb{0.5, 0.5, 0.5}),
            o.np,
            o.nf,
            o.union_points ? FinePointPolicy::UnionWithGrid
                           : FinePointPolicy::SamplesOnly};
        HierarchicalOptions opts;
        opts.sampling = parse_sampling(o.sampling);

        double initial = 0.0;
        double tail_sum = 0.0;
        std::size_t tail_n = 0;
        for (std::size_t s = 0; s < o.steps; ++s) {
            const std::vector<double> losses = hierarchical_step(
                toy, scene.rays, derive_seed(o.seed, s), opts);
            double mean = 0.0;
            for (double l : losses) mean += l;
            mean /= static_cast<double>(losses.size());
            if (s == 0) initial = mean;
            if (std::abs(mean) > 1e3 * std::max(initial, 1e-9) && mean > 1e-6)
                throw DivergenceError("hierarchical loss diverged at step " +
                                      std::to_string(s));
            csv << s << ',' << fmt(mean) << "\n";
            if (s + 50 >= o.steps) {
                tail_sum += mean;
                ++tail_n;
            }
        }
        final_loss = tail_sum / static_cast<double>(std::max<std::size_t>(
                                    1, tail_n));
        final_model["proposal"] = model_to_json(toy.proposal);
        final_model["fine"] = model_to_json(toy.fine);
        if (o.scene == "wall") {
            final_model["wall_sample_fraction"] = proposal_sample_concentration(
                toy, scene, scene.feature_center, 3.0 * scene.feature_width,
                derive_seed(o.seed, 0xfeed), opts);
        }
    } else {
        throw CLI::ValidationError("--task", "unknown task: " + o.task);
    }

    json j{{"schema", "rvs-model-v1"},
           {"config", cfg},
           {"final_loss", final_loss}};
    j.update(final_model);
    open_out(o.out_prefix + ".json") << j.dump(2) << "\n";
    out << "final_loss: " << fmt(final_loss) << "\n";
    return kExitOk;
}

}  // namespace

int run(int argc, const char *const *argv, std::ostream &out,
        std::ostream &err) {
    CLI::App app{"Differentiable inverse-transform sampling along rays: "
                 "estimator benchmarks, gradient checks and reconstruction "
                 "demos"};
    app.require_subcommand(1);

    VarianceOpts vo;
    CLI::App *var = app.add_subcommand(
        "variance", "Estimator variance study over a single ray");
    var->add_option("--field", vo.field,
                    "Density field: foggy, wall, a JSON file or inline JSON");
    var->add_option("--radiance", vo.radiance, "Radiance: sinusoid|constant");
    var->add_option("--k", vo.ks, "Sample counts");
    var->add_option("--trials", vo.trials, "Trials per configuration");
    var->add_option("--m", vo.m, "Density grid resolution");
    var->add_option("--mode", vo.mode, "Approximation: constant|linear");
    var->add_option("--tnear", vo.t_near, "Ray start");
    var->add_option("--tfar", vo.t_far, "Ray end");
    var->add_option("--seed", vo.seed, "Base RNG seed");
    var->add_option("--threads", vo.threads, "Worker threads");
    var->add_option("--strata", vo.strata,
                    "Stratified bin denominator: k_plus_1|k");
    var->add_option("--out", vo.out_path, "CSV output file (default stdout)");

    GradcheckOpts go;
    CLI::App *grad = app.add_subcommand(
        "gradcheck", "Finite-difference check of all analytic gradients");
    grad->add_option("--cases", go.cases, "Random cases per operation");
    grad->add_option("--threshold", go.threshold, "Max relative error");
    grad->add_option("--seed", go.seed, "Base RNG seed");
    grad->add_option("--threads", go.threads, "Worker threads");
    grad->add_option("--out", go.out_path, "JSON report file");
    grad->add_option("--replay", go.replay_path,
                     "Replay a serialized failure case");

    ReconOpts ro;
    CLI::App *rec = app.add_subcommand("recon", "Reconstruction demos");
    rec->add_option("--task", ro.task, "fit|hierarchical");
    rec->add_option("--scene", ro.scene, "wall|foggy|bump");
    rec->add_option("--steps", ro.steps, "Optimization steps");
    rec->add_option("--k", ro.k, "Samples per estimate (fit)");
    rec->add_option("--np", ro.np, "Proposal evaluations per ray");
    rec->add_option("--nf", ro.nf, "Fine samples per ray");
    rec->add_option("--proposal-knots", ro.proposal_knots,
                    "Proposal model resolution");
    rec->add_option("--fine-knots", ro.fine_knots, "Fine model resolution");
    rec->add_option("--rays", ro.rays, "Training rays in the scene");
    rec->add_option("--sampling", ro.sampling, "rvs|nerf|bisect");
    rec->add_option("--loss", ro.loss, "mse|two_sample (fit)");
    rec->add_option("--mode", ro.mode, "constant|linear (fit)");
    rec->add_option("--scheme", ro.scheme, "iid|stratified (fit)");
    rec->add_flag("--union", ro.union_points,
                  "Union fine points with the proposal grid");
    rec->add_option("--seed", ro.seed, "Base RNG seed");
    rec->add_option("--out", ro.out_prefix, "Output prefix (.csv/.json)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError &e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (var->parsed()) return cmd_variance(vo, out);
        if (grad->parsed()) return cmd_gradcheck(go, out);
        if (rec->parsed()) return cmd_recon(ro, out);
    } catch (const DivergenceError &e) {
        err << "divergence: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const CLI::ValidationError &e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument &e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}

}  // namespace rvs::cli

/*
   Copyright 2026 The marcus-averaging Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "marcus/averaging.hpp"
#include "marcus/config.hpp"
#include "marcus/csv.hpp"
#include "marcus/cylinder.hpp"
#include "marcus/experiments.hpp"
#include "marcus/geometry.hpp"
#include "marcus/levy_driver.hpp"
#include "marcus/marcus_engine.hpp"
#include "marcus/parallel.hpp"
#include "marcus/rng.hpp"

namespace marcus::cli {

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kConfigError = 2, kRuntimeError = 3 };

inline constexpr const char* kOutputDirEnv = "MARCUS_OUTPUT_DIR";

struct Invocation {
    std::string subcommand;
    std::string config_path;
    std::vector<std::string> overrides;
    unsigned threads = 0;
    std::string output_dir;
    std::string run_name;
    std::optional<std::uint64_t> seed;
};

// Loads the file (if any), applies the overrides and validates the result.
inline ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides)
{
    nlohmann::json j = nlohmann::json::object();
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) {
            throw ConfigError("cannot open config file '" + path + "'");
        }
        std::stringstream buf;
        buf << in.rdbuf();
        j = parse_config_text(buf.str(), path);
    }
    for (const auto& o : overrides) {
        apply_override(j, o);
    }
    return config_from_json(j);
}

inline std::filesystem::path resolve_output_root(const Invocation& inv, const ExperimentConfig& cfg)
{
    if (!inv.output_dir.empty()) {
        return inv.output_dir;
    }
    if (cfg.output_dir) {
        return *cfg.output_dir;
    }
    if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') {
        return env;
    }
    return "runs";
}

// <root>/<name>, where name defaults to <subcommand>-<UTC stamp>-s<seed>; a numeric suffix
// avoids clobbering an existing run.
inline std::filesystem::path make_run_dir(const std::filesystem::path& root, const Invocation& inv,
                                          std::uint64_t seed)
{
    std::string name = inv.run_name;
    if (name.empty()) {
        const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&now, &tm);
        char stamp[32];
        std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &tm);
        name = inv.subcommand + "-" + stamp + "-s" + std::to_string(seed);
    }
    std::filesystem::path dir = root / name;
    for (int k = 1; std::filesystem::exists(dir); ++k) {
        dir = root / (name + "-" + std::to_string(k));
    }
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::ofstream open_output(const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write '" + path.string() + "'");
    }
    return out;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j)
{
    auto out = open_output(path);
    out << j.dump(2) << '\n';
}

struct Context {
    ExperimentConfig config;
    CylinderPreset preset;
    Point<3> x0;
    unsigned threads = 1;
    std::filesystem::path run_dir;
    std::ostream* log = &std::cout;
};

inline IntegratorConfig config_at(const Context& ctx, double eps)
{
    IntegratorConfig cfg = integrator_config(ctx.config);
    if (!ctx.config.integrator.step) {
        cfg.step = default_step(eps);
    }
    return cfg;
}

inline int cmd_simulate(const Context& ctx)
{
    const auto& s = ctx.config.simulate;
    const IntegratorConfig cfg = config_at(ctx, s.epsilon);
    RngStream rng(ctx.config.seed, s.path);
    const auto traj = integrate_perturbed(ctx.preset.fields, ctx.preset.chart, ctx.preset.driver, ctx.x0, s.T,
                                          s.epsilon, cfg, rng);
    auto out = open_output(ctx.run_dir / "trajectory.csv");
    write_trajectory_csv(out, traj);
    *ctx.log << "simulate: " << traj.times.size() << " samples" << (traj.exited ? ", exited U" : "") << '\n';
    return kOk;
}

inline int cmd_average(const Context& ctx)
{
    const auto& a = ctx.config.average;
    const auto quad = quadrature_average(ctx.preset.chart, ctx.preset.fields, a.n_nodes);
    auto out = open_output(ctx.run_dir / "average.csv");
    CsvWriter csv(out);
    csv << "r" << "z" << "Q_r" << "Q_z" << "Q_r_closed_form" << "Q_z_closed_form";
    csv.end_row();
    for (double r : a.r_values) {
        for (double z : a.z_values) {
            const Eigen::Vector2d v(r, z);
            if (!ctx.preset.chart.in_vertical(v)) {
                throw ConfigError("average: grid point (r=" + format_double(r) + ", z=" + format_double(z) +
                                  ") lies outside V");
            }
            const Eigen::Vector2d q = quad(v);
            const Eigen::Vector2d e = ctx.preset.average(v);
            csv << r << z << q(0) << q(1) << e(0) << e(1);
            csv.end_row();
        }
    }
    return kOk;
}

inline int cmd_eta(const Context& ctx)
{
    const auto& e = ctx.config.eta;
    // Psi is a component of dPi(K); its leaf average is the preset's closed-form averaged field
    const auto& fields = ctx.preset.fields;
    const auto& chart = ctx.preset.chart;
    const int comp = e.observable == "vertical" ? 1 : 0;
    const Observable<3> dpik = [&fields, &chart, comp](const Point<3>& x) { return dpi_k(chart, fields, x)(comp); };
    const double q = ctx.preset.average(chart.vertical_projection(ctx.x0))(comp);
    const auto est = estimate_eta(fields, chart, ctx.preset.driver, dpik, ctx.x0, e.horizons, e.p, config_at(ctx, 0.0),
                                  EnsembleOptions{e.paths, ctx.config.seed, ctx.threads}, q);
    auto out = open_output(ctx.run_dir / "rate.csv");
    write_rate_csv(out, est);
    *ctx.log << "eta: fitted exponent " << format_double(est.fitted_exponent) << '\n';
    return kOk;
}

inline int cmd_compare(const Context& ctx)
{
    const auto& c = ctx.config.compare;
    const auto& eps = *c.epsilons;
    const std::vector<double> horizons = c.horizons.empty() ? std::vector<double>{c.T} : c.horizons;
    const auto res = transversal_comparison(ctx.preset, ctx.x0, eps, c.T, horizons,
                                            experiment_settings(ctx.config, c.paths, c.p, ctx.threads));
    {
        auto out = open_output(ctx.run_dir / "comparison.csv");
        write_comparison_csv(out, res);
    }
    write_json(ctx.run_dir / "comparison.json", comparison_json(res));
    return kOk;
}

inline int cmd_exit_prob(const Context& ctx)
{
    const auto& x = ctx.config.exit_prob;
    const auto& eps = *x.epsilons;
    const auto stats = exit_probability(ctx.preset, ctx.x0, x.gamma, eps,
                                        experiment_settings(ctx.config, x.paths, 2.0, ctx.threads), x.w_horizon);
    {
        auto out = open_output(ctx.run_dir / "exit_prob.csv");
        write_exit_csv(out, stats);
    }
    write_json(ctx.run_dir / "exit_prob.json", exit_json(stats));
    return kOk;
}

inline NamedObservable<3> named_observable(const std::string& name)
{
    if (name == "r") {
        return {name, radial};
    }
    if (name == "z") {
        return {name, height};
    }
    if (name == "x") {
        return {name, [](const Point<3>& p) { return p(0); }};
    }
    return {name, [](const Point<3>& p) { return p(1); }};
}

inline int cmd_deviation(const Context& ctx)
{
    const auto& d = ctx.config.deviation;
    const auto& eps = *d.epsilons;
    std::vector<NamedObservable<3>> obs;
    for (const auto& name : d.observables) {
        obs.push_back(named_observable(name));
    }
    const auto res = deviation_scaling(ctx.preset, ctx.x0, obs, eps, d.T,
                                       experiment_settings(ctx.config, d.paths, d.p, ctx.threads));
    {
        auto out = open_output(ctx.run_dir / "deviation.csv");
        write_deviation_csv(out, res);
    }
    write_json(ctx.run_dir / "deviation.json", deviation_json(res));
    return kOk;
}

// Exact, quadrature and Monte Carlo values of E exp(i u Z_t). The Monte Carlo estimate passes
// when it lies within 3/sqrt(N) of the exact value.
inline int cmd_charfn(const Context& ctx)
{
    const auto& c = ctx.config.charfn;
    const auto& driver = ctx.preset.driver;
    std::vector<double> samples(c.samples);
    parallel_for(c.samples, ctx.threads, [&](std::size_t i) {
        RngStream rng(ctx.config.seed, i);
        samples[i] = sample_marginal(driver, c.t, rng);
    });
    const double tol = 3.0 / std::sqrt(static_cast<double>(c.samples));
    bool all_pass = true;
    auto out = open_output(ctx.run_dir / "charfn.csv");
    CsvWriter csv(out);
    csv << "u" << "t" << "re_exact" << "im_exact" << "re_quadrature" << "im_quadrature" << "re_mc" << "im_mc"
        << "abs_error" << "tolerance" << "pass";
    csv.end_row();
    std::vector<double> re(c.samples), im(c.samples);
    for (double u : c.u_values) {
        const auto exact = characteristic_function(driver, u, c.t);
        const auto quad = std::exp(c.t * driver.characteristic_exponent_quadrature(u));
        for (std::size_t i = 0; i < c.samples; ++i) {
            re[i] = std::cos(u * samples[i]);
            im[i] = std::sin(u * samples[i]);
        }
        const double n = static_cast<double>(c.samples);
        const std::complex<double> mc(pairwise_sum(re) / n, pairwise_sum(im) / n);
        const double err = std::abs(mc - exact);
        const bool pass = err <= tol;
        all_pass = all_pass && pass;
        csv << u << c.t << exact.real() << exact.imag() << quad.real() << quad.imag() << mc.real() << mc.imag()
            << err << tol << (pass ? 1 : 0);
        csv.end_row();
    }
    return all_pass ? kOk : kCheckFailed;
}

struct CheckEntry {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    bool pass() const { return std::isfinite(value) && value <= tolerance; }
};

inline std::vector<CheckEntry> invariant_checks(const Context& ctx)
{
    const auto& preset = ctx.preset;
    const auto& chart = preset.chart;
    const std::size_t n = ctx.config.check.samples;
    std::vector<CheckEntry> checks;

    {
        RngStream rng(ctx.config.seed, 0);
        const auto rep = tangency_check(preset.fields, chart, n, rng);
        checks.push_back({"tangency", rep.max_violation, 1e-10});
    }
    {
        RngStream rng(ctx.config.seed, 1);
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const Point<3> x = chart.sample_proposal(rng);
            if (!chart.in_domain(x)) {
                continue;
            }
            const auto cp = chart.to_chart(x);
            worst = std::max(worst, (chart.from_chart(cp.leaf, cp.vertical) - x).norm() / std::max(1.0, x.norm()));
        }
        checks.push_back({"chart_round_trip", worst, 1e-12});
    }
    const double T = ctx.config.check.leaf_T;
    const double r0 = radial(ctx.x0);
    auto leaf_drift = [&](const IntegratorConfig& cfg) {
        RngStream rng(ctx.config.seed, 2);
        const auto traj = integrate_unperturbed(preset.fields, chart, preset.driver, ctx.x0, T, cfg, rng);
        double worst = traj.exited ? std::numeric_limits<double>::infinity() : 0.0;
        for (const auto& x : traj.states) {
            worst = std::max(worst, std::abs(radial(x) - r0));
        }
        return worst;
    };
    {
        IntegratorConfig cfg;
        cfg.scheme = Scheme::ExactLeaf;
        checks.push_back({"leaf_invariance_exact_flow", leaf_drift(cfg), 1e-12});
    }
    {
        IntegratorConfig cfg;
        cfg.scheme = Scheme::GridIncrement;
        cfg.use_exact_jump_flow = false;
        cfg.driver_mode = DriverMode::Decomposition;
        cfg.cutoff = 1e-3;
        cfg.step = 1e-2;
        checks.push_back({"leaf_invariance_rk4_flow", leaf_drift(cfg), 1e-6});
    }
    {
        const auto quad = quadrature_average(chart, preset.fields, ctx.config.average.n_nodes);
        double worst = 0.0;
        for (double r : {0.5, 1.0, 2.0, 0.5 * (chart.to_chart(ctx.x0).vertical(0) + 1.0)}) {
            for (double z : {0.0, ctx.x0(2)}) {
                const Eigen::Vector2d v(r, z);
                if (chart.in_vertical(v)) {
                    worst = std::max(worst, (quad(v) - preset.average(v)).norm());
                }
            }
        }
        checks.push_back({"average_backend_agreement", worst, 1e-10});
    }
    {
        RngStream rng(ctx.config.seed, 3);
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const Point<3> x = chart.sample_proposal(rng);
            if (!chart.in_domain(x)) {
                continue;
            }
            const auto a = dpi_k(chart, preset.fields, x, DerivativeBackend::Analytic);
            const auto f = dpi_k(chart, preset.fields, x, DerivativeBackend::FiniteDifference);
            worst = std::max(worst, (a - f).norm() / std::max(1.0, a.norm()));
        }
        checks.push_back({"dpi_k_backend_agreement", worst, 1e-6});
    }
    {
        IntegratorConfig exact_cfg, rk_cfg;
        rk_cfg.use_exact_jump_flow = false;
        rk_cfg.jump_ode_substeps = 16;
        RngStream rng(ctx.config.seed, 4);
        double worst = 0.0;
        for (std::size_t i = 0; i < std::min<std::size_t>(n, 200); ++i) {
            const Point<3> x = chart.sample_proposal(rng);
            const JumpVector<1> a = JumpVector<1>::Constant(3.0 * rng.uniform());
            const JumpVector<1> b = JumpVector<1>::Constant(3.0 * rng.uniform());
            const Point<3> direct = jump_flow(preset.fields, x, JumpVector<1>(a + b), rk_cfg);
            const Point<3> composed = jump_flow(preset.fields, jump_flow(preset.fields, x, a, rk_cfg), b, rk_cfg);
            const Point<3> exact = jump_flow(preset.fields, x, JumpVector<1>(a + b), exact_cfg);
            worst = std::max({worst, (direct - composed).norm() / std::max(1.0, x.norm()),
                              (direct - exact).norm() / std::max(1.0, x.norm())});
        }
        checks.push_back({"jump_flow_composition", worst, 1e-8});
    }
    return checks;
}

inline int cmd_check(const Context& ctx)
{
    const auto checks = invariant_checks(ctx);
    nlohmann::json summary;
    bool all = true;
    for (const auto& c : checks) {
        summary["checks"][c.name] = {{"value", json_number(c.value)}, {"tolerance", c.tolerance}, {"pass", c.pass()}};
        *ctx.log << (c.pass() ? "PASS " : "FAIL ") << c.name << "  value=" << format_double(c.value)
                 << "  tol=" << format_double(c.tolerance) << '\n';
        all = all && c.pass();
    }
    summary["all_pass"] = all;
    write_json(ctx.run_dir / "summary.json", summary);
    return all ? kOk : kCheckFailed;
}

inline int dispatch(const Invocation& inv, std::ostream& log, std::ostream& err)
{
    ExperimentConfig config;
    try {
        config = load_config(inv.config_path, inv.overrides);
        if (inv.seed) {
            config.seed = *inv.seed;
        }
        require_for_subcommand(config, inv.subcommand);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    }

    Context ctx{config,
                make_cylinder_preset(cylinder_params(config), config.preset.kappa.value_or(-1.0)),
                Point<3>(config.preset.x0[0], config.preset.x0[1], config.preset.x0[2]),
                inv.threads > 0 ? inv.threads : default_threads(),
                {},
                &log};
    try {
        ctx.run_dir = make_run_dir(resolve_output_root(inv, config), inv, config.seed);
        write_json(ctx.run_dir / "config.json", config_to_json(config));
        log << "run directory: " << ctx.run_dir.string() << '\n';
        const std::string& s = inv.subcommand;
        if (s == "simulate") {
            return cmd_simulate(ctx);
        }
        if (s == "average") {
            return cmd_average(ctx);
        }
        if (s == "eta") {
            return cmd_eta(ctx);
        }
        if (s == "compare") {
            return cmd_compare(ctx);
        }
        if (s == "exit-prob") {
            return cmd_exit_prob(ctx);
        }
        if (s == "deviation") {
            return cmd_deviation(ctx);
        }
        if (s == "charfn") {
            return cmd_charfn(ctx);
        }
        return cmd_check(ctx);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::invalid_argument& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
}

// Entry point; args excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& log = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"Marcus SDE averaging experiments on the rotating-cylinder preset", "marcus"};
    app.require_subcommand(1);
    Invocation inv;
    app.add_option("-c,--config", inv.config_path, "JSON config file");
    app.add_option("-s,--set", inv.overrides, "override a config key: dotted.key=value (repeatable)");
    app.add_option("-j,--threads", inv.threads, "worker threads (0: available parallelism)");
    app.add_option("-o,--output-dir", inv.output_dir,
                   std::string("root of run directories (default: config, then $") + kOutputDirEnv + ", then runs)");
    app.add_option("--run-name", inv.run_name, "run directory name (default: stamped)");
    app.add_option("--seed", inv.seed, "master seed, overriding the config");

    const std::vector<std::pair<std::string, std::string>> subcommands{
        {"simulate", "single trajectory CSV"},
        {"average", "leaf-average table over a (r, z) grid"},
        {"eta", "ergodic rate estimate"},
        {"compare", "rescaled transversal component vs averaged solution"},
        {"exit-prob", "probability of leaving U before T_gamma"},
        {"deviation", "coupled deviation scaling in eps"},
        {"charfn", "characteristic function of the driver: exact, quadrature, Monte Carlo"},
        {"check", "invariant suite with pass/fail summary"}};
    for (const auto& [name, help] : subcommands) {
        app.add_subcommand(name, help)->fallthrough();
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, log, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, log, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, log, err);
        return kConfigError;
    }
    inv.subcommand = app.get_subcommands().front()->get_name();
    return dispatch(inv, log, err);
}

} // namespace marcus::cli

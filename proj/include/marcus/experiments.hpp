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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "marcus/averaging.hpp"
#include "marcus/csv.hpp"
#include "marcus/marcus_engine.hpp"
#include "marcus/numerics.hpp"
#include "marcus/parallel.hpp"

namespace marcus {

// Ensemble settings shared by the experiments. With `auto_step` the macro step for a given
// eps is default_step(eps); otherwise integrator.step is used as is.
struct ExperimentSettings {
    IntegratorConfig integrator;
    bool auto_step = true;
    std::size_t paths = 500;
    double p = 2.0;
    std::uint64_t seed = 0;
    unsigned threads = 1;

    IntegratorConfig config_for(double eps) const
    {
        IntegratorConfig cfg = integrator;
        if (auto_step) {
            cfg.step = default_step(eps);
        }
        return cfg;
    }
};

struct ComparisonResult {
    std::vector<double> epsilons;
    std::vector<double> horizons;
    double p = 2.0;
    // [eps][horizon]: (E sup_{s<=t} |Pi(X^eps_{s/eps ^ tau}) - w(s)|^p)^(1/p) and its standard error
    std::vector<std::vector<double>> sup_lp;
    std::vector<std::vector<double>> std_errors;
    // [eps][horizon][component]: the same with |.| taken per vertical coordinate
    std::vector<std::vector<std::vector<double>>> component_sup_lp;
    std::vector<std::vector<std::vector<double>>> component_std_errors;
    std::vector<double> exit_fractions;
    std::size_t n_paths = 0;
};

struct ExitStats {
    double gamma = 0.0;
    double T_gamma = 0.0;
    std::vector<double> epsilons;
    std::vector<double> exit_probs;
    std::vector<double> std_errors;
    std::size_t n_paths = 0;
};

template <int N>
struct NamedObservable {
    std::string name;
    std::function<double(const Point<N>&)> fn;
};

struct DeviationScaling {
    std::vector<std::string> observables;
    std::vector<double> epsilons;
    double T = 0.0;
    double p = 2.0;
    // [observable][eps]
    std::vector<std::vector<double>> sup_lp;
    std::vector<std::vector<double>> std_errors;
    std::vector<double> fitted_exponents;
    std::size_t n_paths = 0;
};

namespace detail {

inline void validate_ensemble(const ExperimentSettings& s, const char* who)
{
    if (!(s.p >= 2.0)) {
        throw std::invalid_argument(std::string(who) + ": moment order p must be at least 2");
    }
    if (s.paths < 100) {
        throw std::invalid_argument(std::string(who) + ": at least 100 paths are required");
    }
}

inline void validate_epsilons(const std::vector<double>& epsilons, const char* who, bool allow_zero)
{
    if (epsilons.empty()) {
        throw std::invalid_argument(std::string(who) + ": epsilon list is empty");
    }
    for (double e : epsilons) {
        if (!(allow_zero ? e >= 0.0 : e > 0.0) || !std::isfinite(e)) {
            throw std::invalid_argument(std::string(who) + ": invalid epsilon " + std::to_string(e));
        }
    }
}

} // namespace detail

/**
 * Sup-norm L^p distance between the rescaled transversal component Pi(X^eps_{s/eps ^ tau^eps})
 * and the averaged solution w(s), s in [0, t], for every (eps, t).
 *
 * The sup runs over macro-grid (and jump) times. After an exit the path is frozen at its exit
 * state and compared with w on the remaining rescaled times up to T.
 */
template <class Model>
ComparisonResult transversal_comparison(const Model& model, const Point<Model::Chart::ambient_dim>& x0,
                                        const std::vector<double>& epsilons, double T, std::vector<double> horizons,
                                        const ExperimentSettings& settings)
{
    constexpr int N = Model::Chart::ambient_dim;
    constexpr int D = Model::Chart::vertical_dim;
    using Vertical = Eigen::Matrix<double, D, 1>;

    detail::validate_ensemble(settings, "transversal_comparison");
    detail::validate_epsilons(epsilons, "transversal_comparison", false);
    if (!(T > 0.0)) {
        throw std::invalid_argument("transversal_comparison: T must be positive");
    }
    if (horizons.empty()) {
        horizons = {T};
    }
    std::sort(horizons.begin(), horizons.end());
    if (horizons.front() <= 0.0 || horizons.back() > T) {
        throw std::invalid_argument("transversal_comparison: horizons must lie in (0, T]");
    }
    const auto& chart = model.chart;
    const Vertical w0 = chart.vertical_projection(x0);
    const auto w = solve_averaged_ode(model.average, chart, w0, T);
    if (w.T0 && *w.T0 <= T) {
        throw std::invalid_argument("transversal_comparison: T must be below the time T0 at which w leaves V (T0 = " +
                                    std::to_string(*w.T0) + ")");
    }

    ComparisonResult res;
    res.epsilons = epsilons;
    res.horizons = horizons;
    res.p = settings.p;
    res.n_paths = settings.paths;
    const std::size_t H = horizons.size();

    for (double eps : epsilons) {
        const IntegratorConfig cfg = settings.config_for(eps);
        // per path: sup of the norm and of each component, per horizon
        std::vector<std::vector<double>> sup_norm(H, std::vector<double>(settings.paths, 0.0));
        std::vector<std::vector<std::vector<double>>> sup_comp(
            H, std::vector<std::vector<double>>(D, std::vector<double>(settings.paths, 0.0)));
        std::vector<double> exited(settings.paths, 0.0);

        parallel_for(settings.paths, settings.threads, [&](std::size_t i) {
            RngStream rng(settings.seed, i);
            const auto noise = sample_path_noise(model.driver, T / eps, cfg, rng);
            auto record = [&](double s, const Vertical& v) {
                s = std::min(s, T);
                const Vertical diff = v - w.at(s);
                const double norm = diff.norm();
                for (std::size_t h = H; h-- > 0;) {
                    if (s > horizons[h] * (1.0 + 1e-12)) {
                        break;
                    }
                    sup_norm[h][i] = std::max(sup_norm[h][i], norm);
                    for (int c = 0; c < D; ++c) {
                        sup_comp[h][c][i] = std::max(sup_comp[h][c][i], std::abs(diff(c)));
                    }
                }
            };
            Vertical last = w0;
            const auto outcome = integrate_path(model.fields, chart, x0, noise, eps, cfg,
                                                [&](double t, const Point<N>& x, bool) {
                                                    last = chart.vertical_projection(x);
                                                    record(eps * t, last);
                                                });
            if (outcome.exited) {
                exited[i] = 1.0;
                const double s_exit = eps * *outcome.exit_time;
                const double ds = eps * cfg.step;
                for (double s = s_exit + ds; s < T; s += ds) {
                    record(s, last);
                }
                for (double h : horizons) {
                    if (h > s_exit) {
                        record(h, last);
                    }
                }
            }
        });

        std::vector<double> row, row_se;
        std::vector<std::vector<double>> crow, crow_se;
        for (std::size_t h = 0; h < H; ++h) {
            const auto est = lp_norm_estimate(sup_norm[h], settings.p);
            row.push_back(est.value);
            row_se.push_back(est.std_error);
            std::vector<double> cv, cse;
            for (int c = 0; c < D; ++c) {
                const auto ce = lp_norm_estimate(sup_comp[h][c], settings.p);
                cv.push_back(ce.value);
                cse.push_back(ce.std_error);
            }
            crow.push_back(cv);
            crow_se.push_back(cse);
        }
        res.sup_lp.push_back(row);
        res.std_errors.push_back(row_se);
        res.component_sup_lp.push_back(crow);
        res.component_std_errors.push_back(crow_se);
        res.exit_fractions.push_back(pairwise_sum(exited) / static_cast<double>(settings.paths));
    }
    return res;
}

/**
 * Empirical P(eps tau^eps < T_gamma), where T_gamma is the first time the averaged solution
 * comes within gamma of the boundary of V. Averaged ODE is solved up to `w_horizon`.
 */
template <class Model>
ExitStats exit_probability(const Model& model, const Point<Model::Chart::ambient_dim>& x0, double gamma,
                           const std::vector<double>& epsilons, const ExperimentSettings& settings,
                           double w_horizon = 100.0)
{
    constexpr int N = Model::Chart::ambient_dim;
    detail::validate_ensemble(settings, "exit_probability");
    detail::validate_epsilons(epsilons, "exit_probability", false);
    if (!(gamma > 0.0)) {
        throw std::invalid_argument("exit_probability: gamma must be positive");
    }
    const auto w = solve_averaged_ode(model.average, model.chart, model.chart.vertical_projection(x0), w_horizon);
    const auto t_gamma = w.T_gamma(gamma);
    if (!t_gamma) {
        throw std::invalid_argument("exit_probability: the averaged solution never comes within gamma = " +
                                    std::to_string(gamma) + " of the boundary of V, so T_gamma does not exist");
    }
    ExitStats stats;
    stats.gamma = gamma;
    stats.T_gamma = *t_gamma;
    stats.epsilons = epsilons;
    stats.n_paths = settings.paths;
    for (double eps : epsilons) {
        if (stats.T_gamma == 0.0) {
            stats.exit_probs.push_back(0.0);
            stats.std_errors.push_back(0.0);
            continue;
        }
        const IntegratorConfig cfg = settings.config_for(eps);
        std::vector<double> hits(settings.paths, 0.0);
        parallel_for(settings.paths, settings.threads, [&](std::size_t i) {
            RngStream rng(settings.seed, i);
            const auto noise = sample_path_noise(model.driver, stats.T_gamma / eps, cfg, rng);
            const auto outcome =
                integrate_path(model.fields, model.chart, x0, noise, eps, cfg, [](double, const Point<N>&, bool) {});
            if (outcome.exited && eps * *outcome.exit_time < stats.T_gamma) {
                hits[i] = 1.0;
            }
        });
        const auto est = mean_estimate(hits);
        stats.exit_probs.push_back(est.mean);
        stats.std_errors.push_back(est.std_error);
    }
    return stats;
}

/**
 * (E sup_{t <= T ^ tau^eps} |Psi(X^eps_t) - Psi(X_t)|^p)^(1/p) in unscaled time, with the
 * perturbed and unperturbed paths driven by the same driver sample, and the fitted exponent of
 * its dependence on eps. Only coupled runs are meaningful: the bound is pathwise.
 */
template <class Model>
DeviationScaling deviation_scaling(const Model& model, const Point<Model::Chart::ambient_dim>& x0,
                                   const std::vector<NamedObservable<Model::Chart::ambient_dim>>& observables,
                                   const std::vector<double>& epsilons, double T, const ExperimentSettings& settings,
                                   bool coupled = true)
{
    if (!coupled) {
        throw std::invalid_argument("deviation_scaling: perturbed and unperturbed runs must share driver samples");
    }
    detail::validate_ensemble(settings, "deviation_scaling");
    detail::validate_epsilons(epsilons, "deviation_scaling", true);
    if (observables.empty() || !(T > 0.0)) {
        throw std::invalid_argument("deviation_scaling: need at least one observable and T > 0");
    }
    const std::size_t K = observables.size();
    DeviationScaling out;
    out.epsilons = epsilons;
    out.T = T;
    out.p = settings.p;
    out.n_paths = settings.paths;
    for (const auto& o : observables) {
        out.observables.push_back(o.name);
    }
    out.sup_lp.assign(K, {});
    out.std_errors.assign(K, {});

    for (double eps : epsilons) {
        const IntegratorConfig cfg = settings.config_for(eps);
        std::vector<std::vector<double>> sups(K, std::vector<double>(settings.paths, 0.0));
        parallel_for(settings.paths, settings.threads, [&](std::size_t i) {
            RngStream rng(settings.seed, i);
            const auto noise = sample_path_noise(model.driver, T, cfg, rng);
            const auto perturbed = integrate_with_noise(model.fields, model.chart, x0, noise, eps, cfg);
            const auto reference = integrate_with_noise(model.fields, model.chart, x0, noise, 0.0, cfg);
            const std::size_t n = std::min(perturbed.states.size(), reference.states.size());
            for (std::size_t k = 0; k < n; ++k) {
                for (std::size_t o = 0; o < K; ++o) {
                    const double d = std::abs(observables[o].fn(perturbed.states[k]) - observables[o].fn(reference.states[k]));
                    sups[o][i] = std::max(sups[o][i], d);
                }
            }
        });
        for (std::size_t o = 0; o < K; ++o) {
            const auto est = lp_norm_estimate(sups[o], settings.p);
            out.sup_lp[o].push_back(est.value);
            out.std_errors[o].push_back(est.std_error);
        }
    }
    for (std::size_t o = 0; o < K; ++o) {
        std::vector<double> xs, ys;
        for (std::size_t e = 0; e < epsilons.size(); ++e) {
            if (epsilons[e] > 0.0) {
                xs.push_back(epsilons[e]);
                ys.push_back(out.sup_lp[o][e]);
            }
        }
        out.fitted_exponents.push_back(xs.size() >= 2 ? fit_power_law(xs, ys).exponent
                                                      : std::numeric_limits<double>::quiet_NaN());
    }
    return out;
}

// ---- machine-readable outputs ---------------------------------------------------------

// CSV columns: epsilon, t, p, sup_lp, std_error, n_paths.
inline void write_comparison_csv(std::ostream& os, const ComparisonResult& r)
{
    CsvWriter csv(os);
    csv << "epsilon" << "t" << "p" << "sup_lp" << "std_error" << "n_paths";
    csv.end_row();
    for (std::size_t e = 0; e < r.epsilons.size(); ++e) {
        for (std::size_t h = 0; h < r.horizons.size(); ++h) {
            csv << r.epsilons[e] << r.horizons[h] << r.p << r.sup_lp[e][h] << r.std_errors[e][h]
                << static_cast<unsigned long>(r.n_paths);
            csv.end_row();
        }
    }
}

inline nlohmann::json json_number(double v)
{
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

inline nlohmann::json comparison_json(const ComparisonResult& r)
{
    nlohmann::json j;
    j["epsilons"] = r.epsilons;
    j["horizons"] = r.horizons;
    j["p"] = r.p;
    j["n_paths"] = r.n_paths;
    j["sup_lp"] = r.sup_lp;
    j["std_errors"] = r.std_errors;
    j["component_sup_lp"] = r.component_sup_lp;
    j["component_std_errors"] = r.component_std_errors;
    j["exit_fractions"] = r.exit_fractions;
    // decay in eps at the final horizon, as a fitted power
    std::vector<double> last;
    for (const auto& row : r.sup_lp) {
        last.push_back(row.back());
    }
    j["fitted_eps_exponent"] =
        r.epsilons.size() >= 2 ? json_number(fit_power_law(r.epsilons, last).exponent) : nlohmann::json(nullptr);
    bool decreasing = true;
    for (std::size_t e = 1; e < r.epsilons.size(); ++e) {
        // rows are compared in order of decreasing eps
        const bool smaller_eps = r.epsilons[e] < r.epsilons[e - 1];
        const double a = r.sup_lp[e - 1].back();
        const double b = r.sup_lp[e].back();
        const double se = r.std_errors[e - 1].back() + r.std_errors[e].back();
        decreasing = decreasing && (smaller_eps ? b <= a + se : a <= b + se);
    }
    j["pass"] = {{"decreasing_in_eps", decreasing}};
    return j;
}

// CSV columns: epsilon, gamma, T_gamma, exit_prob, std_error, n_paths.
inline void write_exit_csv(std::ostream& os, const ExitStats& s)
{
    CsvWriter csv(os);
    csv << "epsilon" << "gamma" << "T_gamma" << "exit_prob" << "std_error" << "n_paths";
    csv.end_row();
    for (std::size_t e = 0; e < s.epsilons.size(); ++e) {
        csv << s.epsilons[e] << s.gamma << s.T_gamma << s.exit_probs[e] << s.std_errors[e]
            << static_cast<unsigned long>(s.n_paths);
        csv.end_row();
    }
}

inline nlohmann::json exit_json(const ExitStats& s)
{
    nlohmann::json j;
    j["gamma"] = s.gamma;
    j["T_gamma"] = s.T_gamma;
    j["epsilons"] = s.epsilons;
    j["exit_probs"] = s.exit_probs;
    j["std_errors"] = s.std_errors;
    j["n_paths"] = s.n_paths;
    return j;
}

// CSV columns: observable, epsilon, T, p, sup_lp, std_error, n_paths.
inline void write_deviation_csv(std::ostream& os, const DeviationScaling& d)
{
    CsvWriter csv(os);
    csv << "observable" << "epsilon" << "T" << "p" << "sup_lp" << "std_error" << "n_paths";
    csv.end_row();
    for (std::size_t o = 0; o < d.observables.size(); ++o) {
        for (std::size_t e = 0; e < d.epsilons.size(); ++e) {
            csv << d.observables[o] << d.epsilons[e] << d.T << d.p << d.sup_lp[o][e] << d.std_errors[o][e]
                << static_cast<unsigned long>(d.n_paths);
            csv.end_row();
        }
    }
}

inline nlohmann::json deviation_json(const DeviationScaling& d)
{
    nlohmann::json j;
    j["observables"] = d.observables;
    j["epsilons"] = d.epsilons;
    j["T"] = d.T;
    j["p"] = d.p;
    j["n_paths"] = d.n_paths;
    j["sup_lp"] = d.sup_lp;
    j["std_errors"] = d.std_errors;
    nlohmann::json fits = nlohmann::json::array();
    for (double e : d.fitted_exponents) {
        fits.push_back(json_number(e));
    }
    j["fitted_exponents"] = fits;
    return j;
}

} // namespace marcus

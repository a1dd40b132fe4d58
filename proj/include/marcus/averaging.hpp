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

#include <Eigen/Core>

#include "marcus/csv.hpp"
#include "marcus/geometry.hpp"
#include "marcus/levy_driver.hpp"
#include "marcus/marcus_engine.hpp"
#include "marcus/numerics.hpp"
#include "marcus/parallel.hpp"

namespace marcus {

enum class AverageBackend { Analytic, Quadrature, ErgodicMC };

// v -> (Q^{dPi_1 K}, ..., Q^{dPi_D K})(v), the right-hand side of the averaged ODE.
template <int D>
struct AveragedField {
    using VerticalPoint = Eigen::Matrix<double, D, 1>;

    AverageBackend backend = AverageBackend::Analytic;
    std::function<VerticalPoint(const VerticalPoint&)> eval;
    std::optional<double> lipschitz_estimate;

    VerticalPoint operator()(const VerticalPoint& v) const { return eval(v); }
};

template <int N>
using Observable = std::function<double(const Point<N>&)>;

template <int D, class Fn>
AveragedField<D> analytic_average(Fn&& fn)
{
    AveragedField<D> avg;
    avg.backend = AverageBackend::Analytic;
    avg.eval = std::forward<Fn>(fn);
    return avg;
}

// Q^Psi(Pi(q)): integral of Psi over the leaf through q against its invariant measure.
// For the periodic trapezoid rule on a circle this is spectrally accurate in n_nodes.
template <int N, int L, int D>
double leaf_average_quadrature(const FoliatedChart<N, L, D>& chart, const Observable<N>& psi, const Point<N>& q,
                               int n_nodes)
{
    if (n_nodes < 8) {
        throw std::invalid_argument("leaf_average_quadrature: n_nodes must be at least 8");
    }
    if (!chart.in_domain(q)) {
        throw std::domain_error("leaf_average_quadrature: q lies outside U");
    }
    if (!chart.leaf_measure) {
        throw std::invalid_argument("leaf_average_quadrature: chart has no invariant leaf measure");
    }
    std::vector<double> terms;
    for (const auto& node : chart.leaf_measure(chart.vertical_projection(q), n_nodes)) {
        terms.push_back(node.weight * psi(node.point));
    }
    return pairwise_sum(terms);
}

template <int N, int L, int D, int R>
AveragedField<D> quadrature_average(const FoliatedChart<N, L, D>& chart, const VectorFieldSet<N, R>& fields,
                                    int n_nodes = 64)
{
    if (n_nodes < 8) {
        throw std::invalid_argument("quadrature_average: n_nodes must be at least 8");
    }
    AveragedField<D> avg;
    avg.backend = AverageBackend::Quadrature;
    avg.eval = [chart, fields, n_nodes](const Eigen::Matrix<double, D, 1>& v) {
        Eigen::Matrix<double, D, 1> q = Eigen::Matrix<double, D, 1>::Zero();
        for (const auto& node : chart.leaf_measure(v, n_nodes)) {
            q += node.weight * (chart.jacobian(node.point) * fields.eval_perturbation(node.point));
        }
        return q;
    };
    return avg;
}

namespace detail {

// Running integral (compensated sum) of a sampled path observable. Grid schemes place jumps inside the step, so
// the trapezoid rule is used; with exact jump times the path is piecewise smooth between
// observations and the left-point rule follows the cadlag path.
class PathIntegral {
public:
    explicit PathIntegral(bool left_point) : left_point_(left_point) {}

    void add(double t, double value)
    {
        if (started_) {
            const double dt = t - last_t_;
            const double y = (left_point_ ? dt * last_value_ : 0.5 * dt * (last_value_ + value)) - carry_;
            const double sum = integral_ + y;
            carry_ = (sum - integral_) - y;
            integral_ = sum;
        }
        started_ = true;
        last_t_ = t;
        last_value_ = value;
    }

    double integral() const { return integral_; }
    double last_time() const { return last_t_; }

private:
    bool left_point_;
    bool started_ = false;
    double last_t_ = 0.0;
    double last_value_ = 0.0;
    double integral_ = 0.0;
    double carry_ = 0.0;
};

inline std::vector<double> grid_through(const std::vector<double>& breakpoints, double step)
{
    std::vector<double> grid{0.0};
    double start = 0.0;
    for (double b : breakpoints) {
        if (!(b > start)) {
            throw std::invalid_argument("horizons must be positive and strictly increasing");
        }
        const auto piece = uniform_grid(b - start, step);
        for (std::size_t k = 1; k < piece.size(); ++k) {
            grid.push_back(start + piece[k]);
        }
        grid.back() = b;
        start = b;
    }
    return grid;
}

} // namespace detail

// (1/t) int_0^t Psi(X_s) ds along one unperturbed path.
template <int N, int L, int D, int R>
double ergodic_average(const VectorFieldSet<N, R>& fields, const FoliatedChart<N, L, D>& chart,
                       const LevyDriverSpec<R>& driver, const Observable<N>& psi, const Point<N>& x0, double t_erg,
                       const IntegratorConfig& cfg, RngStream& rng)
{
    if (!(t_erg > 0.0)) {
        throw std::invalid_argument("ergodic_average: t_erg must be positive");
    }
    const auto noise = sample_path_noise(driver, t_erg, cfg, rng);
    detail::PathIntegral acc(cfg.scheme == Scheme::JumpDecomposition);
    const auto outcome = integrate_path(fields, chart, x0, noise, 0.0, cfg,
                                        [&](double t, const Point<N>& x, bool) { acc.add(t, psi(x)); });
    if (outcome.exited) {
        throw std::runtime_error("ergodic_average: unperturbed path left U");
    }
    return acc.integral() / t_erg;
}

template <int N, int L, int D, int R>
AveragedField<D> ergodic_mc_average(const VectorFieldSet<N, R>& fields, const FoliatedChart<N, L, D>& chart,
                                    const LevyDriverSpec<R>& driver, const IntegratorConfig& cfg,
                                    const Eigen::Matrix<double, L, 1>& start_leaf, double t_erg, std::size_t paths,
                                    std::uint64_t seed)
{
    if (paths == 0) {
        throw std::invalid_argument("ergodic_mc_average: need at least one path");
    }
    AveragedField<D> avg;
    avg.backend = AverageBackend::ErgodicMC;
    avg.eval = [=](const Eigen::Matrix<double, D, 1>& v) {
        const Point<N> x0 = chart.from_chart(start_leaf, v);
        Eigen::Matrix<double, D, 1> sum = Eigen::Matrix<double, D, 1>::Zero();
        for (std::size_t i = 0; i < paths; ++i) {
            RngStream rng(seed, i);
            const auto noise = sample_path_noise(driver, t_erg, cfg, rng);
            std::vector<detail::PathIntegral> acc(D, detail::PathIntegral(cfg.scheme == Scheme::JumpDecomposition));
            integrate_path(fields, chart, x0, noise, 0.0, cfg, [&](double t, const Point<N>& x, bool) {
                const auto d = chart.jacobian(x) * fields.eval_perturbation(x);
                for (int c = 0; c < D; ++c) {
                    acc[c].add(t, d(c));
                }
            });
            for (int c = 0; c < D; ++c) {
                sum(c) += acc[c].integral() / t_erg;
            }
        }
        return Eigen::Matrix<double, D, 1>(sum / static_cast<double>(paths));
    };
    return avg;
}

// Largest difference quotient of the field over all pairs of the given points of V.
template <int D>
double estimate_lipschitz(const AveragedField<D>& avg, const std::vector<Eigen::Matrix<double, D, 1>>& points)
{
    std::vector<Eigen::Matrix<double, D, 1>> values;
    values.reserve(points.size());
    for (const auto& v : points) {
        values.push_back(avg(v));
    }
    double lip = 0.0;
    for (std::size_t a = 0; a < points.size(); ++a) {
        for (std::size_t b = a + 1; b < points.size(); ++b) {
            const double dist = (points[a] - points[b]).norm();
            if (dist > 0.0) {
                lip = std::max(lip, (values[a] - values[b]).norm() / dist);
            }
        }
    }
    return lip;
}

struct RateEstimate {
    std::vector<double> horizons;
    std::vector<double> lp_errors;
    std::vector<double> std_errors;
    double fitted_exponent = std::numeric_limits<double>::quiet_NaN();
    double fitted_constant = std::numeric_limits<double>::quiet_NaN();
    double p = 2.0;
};

struct EnsembleOptions {
    std::size_t paths = 400;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

/**
 * Monte Carlo estimate of (E |(1/t) int_0^t Psi(X_s) ds - Q^Psi(Pi(x0))|^p)^(1/p) for each
 * horizon t, over independent paths (path i uses stream i; every horizon is read off the same
 * path), followed by a least-squares fit eta(t) = c t^e on log-log scale. The fit is left
 * undefined (NaN) when some error is exactly zero; in that case c is reported as 0 if all are.
 */
template <int N, int L, int D, int R>
RateEstimate estimate_eta(const VectorFieldSet<N, R>& fields, const FoliatedChart<N, L, D>& chart,
                          const LevyDriverSpec<R>& driver, const Observable<N>& psi, const Point<N>& x0,
                          const std::vector<double>& horizons, double p, const IntegratorConfig& cfg,
                          const EnsembleOptions& opts, std::optional<double> leaf_average = std::nullopt)
{
    if (!(p >= 2.0)) {
        throw std::invalid_argument("estimate_eta: moment order p must be at least 2");
    }
    if (opts.paths < 100) {
        throw std::invalid_argument("estimate_eta: at least 100 paths are required");
    }
    if (horizons.size() < 3) {
        throw std::invalid_argument("estimate_eta: at least 3 horizons are needed for a fit");
    }
    const double q = leaf_average ? *leaf_average : leaf_average_quadrature(chart, psi, x0, 256);
    const auto grid = detail::grid_through(horizons, cfg.step);
    const bool left_point = cfg.scheme == Scheme::JumpDecomposition;

    std::vector<std::vector<double>> errors(horizons.size(), std::vector<double>(opts.paths));
    parallel_for(opts.paths, opts.threads, [&](std::size_t i) {
        RngStream rng(opts.seed, i);
        const auto noise = sample_increments(driver, grid, rng, sampling_mode(driver, cfg));
        detail::PathIntegral acc(left_point);
        std::size_t next = 0;
        const auto outcome = integrate_path(fields, chart, x0, noise, 0.0, cfg, [&](double t, const Point<N>& x, bool) {
            acc.add(t, psi(x));
            while (next < horizons.size() && t == horizons[next]) {
                errors[next][i] = std::abs(acc.integral() / t - q);
                ++next;
            }
        });
        if (outcome.exited) {
            throw std::runtime_error("estimate_eta: unperturbed path left U");
        }
    });

    RateEstimate est;
    est.p = p;
    est.horizons = horizons;
    for (const auto& e : errors) {
        const auto lp = lp_norm_estimate(e, p);
        est.lp_errors.push_back(lp.value);
        est.std_errors.push_back(lp.std_error);
    }
    const bool all_zero = std::all_of(est.lp_errors.begin(), est.lp_errors.end(), [](double v) { return v == 0.0; });
    if (all_zero) {
        est.fitted_constant = 0.0;
    } else {
        const auto fit = fit_power_law(est.horizons, est.lp_errors);
        est.fitted_exponent = fit.exponent;
        est.fitted_constant = fit.constant;
    }
    return est;
}

// CSV columns: t, lp_error, p, fitted_exponent, fitted_constant.
inline void write_rate_csv(std::ostream& os, const RateEstimate& est)
{
    CsvWriter csv(os);
    csv << "t" << "lp_error" << "p" << "fitted_exponent" << "fitted_constant";
    csv.end_row();
    for (std::size_t k = 0; k < est.horizons.size(); ++k) {
        csv << est.horizons[k] << est.lp_errors[k] << est.p << est.fitted_exponent << est.fitted_constant;
        csv.end_row();
    }
}

/**
 * Solution of w' = Q(w) on a fixed RK4 grid, stopped where w reaches the boundary of V.
 * Boundary and gamma-approach times are bracketed on the grid and refined by bisection on a
 * partial RK4 step.
 */
template <int D>
class AveragedSolution {
public:
    using VerticalPoint = Eigen::Matrix<double, D, 1>;

    std::vector<double> times;
    std::vector<VerticalPoint> values;
    std::vector<VerticalPoint> slopes;
    std::vector<double> boundary_distances;
    std::optional<double> T0;

    // Cubic Hermite interpolation through the RK4 nodes (slopes from the field itself).
    VerticalPoint at(double t) const
    {
        if (t < 0.0 || t > times.back() * (1.0 + 1e-12) + 1e-15) {
            throw std::out_of_range("AveragedSolution::at: t outside the solved interval");
        }
        t = std::min(t, times.back());
        auto it = std::upper_bound(times.begin(), times.end(), t);
        std::size_t k = static_cast<std::size_t>(std::distance(times.begin(), it));
        if (k == 0) {
            return values.front();
        }
        if (k >= times.size()) {
            return values.back();
        }
        const std::size_t a = k - 1;
        const double h = times[k] - times[a];
        const double s = (t - times[a]) / h;
        const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
        const double h10 = s * (1 - s) * (1 - s);
        const double h01 = s * s * (3 - 2 * s);
        const double h11 = s * s * (s - 1);
        return h00 * values[a] + h10 * h * slopes[a] + h01 * values[k] + h11 * h * slopes[k];
    }

    // First time dist(w(t), boundary of V) <= gamma; 0 if already within gamma at t = 0.
    std::optional<double> T_gamma(double gamma) const
    {
        if (!(gamma > 0.0)) {
            throw std::invalid_argument("T_gamma: gamma must be positive");
        }
        return first_crossing(gamma);
    }

    std::function<VerticalPoint(const VerticalPoint&)> field;
    std::function<double(const VerticalPoint&)> distance;

    std::optional<double> first_crossing(double level) const
    {
        if (boundary_distances.front() <= level) {
            return 0.0;
        }
        for (std::size_t k = 1; k < times.size(); ++k) {
            if (boundary_distances[k] <= level) {
                double lo = 0.0;
                double hi = times[k] - times[k - 1];
                for (int it = 0; it < 60; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    if (distance(rk4(values[k - 1], mid)) <= level) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return times[k - 1] + hi;
            }
        }
        return std::nullopt;
    }

    VerticalPoint rk4(const VerticalPoint& w, double h) const
    {
        const VerticalPoint k1 = field(w);
        const VerticalPoint k2 = field(w + 0.5 * h * k1);
        const VerticalPoint k3 = field(w + 0.5 * h * k2);
        const VerticalPoint k4 = field(w + h * k3);
        return w + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
};

template <int N, int L, int D>
AveragedSolution<D> solve_averaged_ode(const AveragedField<D>& avg, const FoliatedChart<N, L, D>& chart,
                                       const Eigen::Matrix<double, D, 1>& w0, double horizon, double step = 1e-3)
{
    if (!chart.in_vertical(w0)) {
        throw std::domain_error("solve_averaged_ode: w0 lies outside V");
    }
    if (!(horizon >= 0.0) || !(step > 0.0)) {
        throw std::invalid_argument("solve_averaged_ode: horizon must be nonnegative and step positive");
    }
    AveragedSolution<D> sol;
    sol.field = [avg](const Eigen::Matrix<double, D, 1>& v) {
        auto q = avg(v);
        if (!q.allFinite()) {
            throw std::domain_error("solve_averaged_ode: averaged field is not finite");
        }
        return q;
    };
    sol.distance = chart.boundary_distance;
    const auto grid = uniform_grid(horizon, step);
    sol.times.push_back(0.0);
    sol.values.push_back(w0);
    sol.slopes.push_back(sol.field(w0));
    sol.boundary_distances.push_back(chart.boundary_distance(w0));
    for (std::size_t k = 1; k < grid.size(); ++k) {
        const auto w = sol.rk4(sol.values.back(), grid[k] - grid[k - 1]);
        sol.times.push_back(grid[k]);
        sol.values.push_back(w);
        sol.slopes.push_back(sol.field(w));
        sol.boundary_distances.push_back(chart.boundary_distance(w));
        if (sol.boundary_distances.back() <= 0.0) {
            sol.T0 = sol.first_crossing(0.0);
            break;
        }
    }
    return sol;
}

/**
 * delta^Psi(eps, t) = int_0^{t ^ eps tau} Psi(X^eps_{r/eps}) - Q^Psi(Pi(X^eps_{r/eps})) dr along one
 * perturbed path, i.e. eps times the path-time integral up to min(t/eps, tau).
 */
template <int N, int L, int D, int R>
double delta_defect(const VectorFieldSet<N, R>& fields, const FoliatedChart<N, L, D>& chart,
                    const LevyDriverSpec<R>& driver, const Observable<N>& psi,
                    const std::function<double(const Eigen::Matrix<double, D, 1>&)>& leaf_average, const Point<N>& x0,
                    double eps, double t, const IntegratorConfig& cfg, RngStream& rng)
{
    if (!(eps > 0.0) || !(t >= 0.0)) {
        throw std::invalid_argument("delta_defect: need eps > 0 and t >= 0");
    }
    if (t == 0.0) {
        return 0.0;
    }
    const auto noise = sample_path_noise(driver, t / eps, cfg, rng);
    detail::PathIntegral acc(cfg.scheme == Scheme::JumpDecomposition);
    integrate_path(fields, chart, x0, noise, eps, cfg, [&](double s, const Point<N>& x, bool) {
        acc.add(s, psi(x) - leaf_average(chart.vertical_projection(x)));
    });
    return eps * acc.integral();
}

template <int N, int L, int D, int R>
LpEstimate delta_defect_lp(const VectorFieldSet<N, R>& fields, const FoliatedChart<N, L, D>& chart,
                           const LevyDriverSpec<R>& driver, const Observable<N>& psi,
                           const std::function<double(const Eigen::Matrix<double, D, 1>&)>& leaf_average,
                           const Point<N>& x0, double eps, double t, double p, const IntegratorConfig& cfg,
                           const EnsembleOptions& opts)
{
    std::vector<double> values(opts.paths);
    parallel_for(opts.paths, opts.threads, [&](std::size_t i) {
        RngStream rng(opts.seed, i);
        values[i] = std::abs(delta_defect(fields, chart, driver, psi, leaf_average, x0, eps, t, cfg, rng));
    });
    return lp_norm_estimate(values, p);
}

} // namespace marcus

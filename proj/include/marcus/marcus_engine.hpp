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
#include <numbers>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "marcus/csv.hpp"
#include "marcus/geometry.hpp"
#include "marcus/levy_driver.hpp"

namespace marcus {

enum class Scheme {
    ExactLeaf,          // closed-form jump flow of the accumulated driver, drift by splitting
    JumpDecomposition,  // jumps above the cutoff at their own times, compensator as drift
    GridIncrement,      // one Marcus jump per macro step carrying the exact increment
};

enum class Splitting { Lie, Strang };

// How the driver path is sampled for the grid schemes; JumpDecomposition always decomposes.
enum class DriverMode { Exact, Decomposition };

struct IntegratorConfig {
    Scheme scheme = Scheme::GridIncrement;
    double step = 1e-2;
    int jump_ode_substeps = 4;
    Splitting splitting = Splitting::Strang;
    double cutoff = 1e-3;
    bool use_exact_jump_flow = true;
    DriverMode driver_mode = DriverMode::Exact;

    void validate() const
    {
        if (!(step > 0.0) || !std::isfinite(step)) {
            throw std::invalid_argument("IntegratorConfig: step_h must be positive");
        }
        if (jump_ode_substeps < 1) {
            throw std::invalid_argument("IntegratorConfig: jump_ode_substeps must be at least 1");
        }
        if ((scheme == Scheme::JumpDecomposition || driver_mode == DriverMode::Decomposition) && !(cutoff > 0.0)) {
            throw std::invalid_argument("IntegratorConfig: jump decomposition needs a positive cutoff");
        }
    }
};

// Macro step for perturbed runs, fine enough to resolve the eps K motion over horizons T/eps.
inline double default_step(double eps) { return eps > 0.0 ? std::min(1e-2, 0.1 * eps) : 1e-2; }

class IntegrationBlowup : public std::runtime_error {
public:
    IntegrationBlowup(const std::string& what, double sigma) : std::runtime_error(what), sigma_(sigma) {}
    double sigma_reached() const noexcept { return sigma_; }

private:
    double sigma_;
};

template <int N>
struct Trajectory {
    std::vector<double> times;
    std::vector<Point<N>> states;
    std::vector<char> jump_flags;
    std::optional<double> exit_time;
    bool exited = false;
};

struct PathOutcome {
    bool exited = false;
    std::optional<double> exit_time;
};

// Phi^{Fz}(x) = Y(1) for dY/ds = F(Y) z, Y(0) = x.
template <int N, int R>
Point<N> jump_flow(const VectorFieldSet<N, R>& fields, const Point<N>& x, const JumpVector<R>& z,
                   const IntegratorConfig& cfg)
{
    if (cfg.use_exact_jump_flow && fields.exact_jump_flow) {
        return fields.exact_jump_flow(x, z);
    }
    if (z.isZero(0.0)) {
        return x;
    }
    const double norm = z.norm();
    const int pieces = std::max(1, static_cast<int>(std::ceil(norm / 0.1)));
    const int n = cfg.jump_ode_substeps * pieces;
    const double s = 1.0 / n;
    auto f = [&](const Point<N>& y) -> Point<N> { return fields.noise(y) * z; };
    Point<N> y = x;
    for (int k = 0; k < n; ++k) {
        const Point<N> k1 = f(y);
        const Point<N> k2 = f(y + 0.5 * s * k1);
        const Point<N> k3 = f(y + 0.5 * s * k2);
        const Point<N> k4 = f(y + s * k3);
        y += (s / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!y.allFinite()) {
            throw IntegrationBlowup("jump_flow: non-finite state in the jump ODE", (k + 1) * s);
        }
    }
    return y;
}

namespace detail {

template <int N, int R>
struct DriftFlow {
    const VectorFieldSet<N, R>& fields;
    double eps;
    JumpVector<R> compensator;
    bool with_compensator;

    bool active() const
    {
        return static_cast<bool>(fields.drift) || (eps != 0.0 && static_cast<bool>(fields.perturbation)) ||
               with_compensator;
    }

    Point<N> field(const Point<N>& x) const
    {
        Point<N> v = fields.eval_drift(x);
        if (eps != 0.0 && fields.perturbation) {
            v += eps * fields.perturbation(x);
        }
        if (with_compensator) {
            v += fields.noise(x) * compensator;
        }
        return v;
    }

    // Increment of one classical fourth-order step of length tau from x.
    Point<N> increment(const Point<N>& x, double tau) const
    {
        if (tau <= 0.0 || !active()) {
            return Point<N>::Zero();
        }
        const Point<N> k1 = field(x);
        const Point<N> k2 = field(x + 0.5 * tau * k1);
        const Point<N> k3 = field(x + 0.5 * tau * k2);
        const Point<N> k4 = field(x + tau * k3);
        return (tau / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
};

// Path state with a Kahan carry on the drift increments, so a constant drift accumulates
// without a rounding bias. A jump keeps the carry only in the components it leaves unchanged.
template <int N, int R>
struct CompensatedState {
    Point<N> x;
    Point<N> carry = Point<N>::Zero();

    void drift(const DriftFlow<N, R>& flow, double tau)
    {
        if (tau <= 0.0 || !flow.active()) {
            return;
        }
        const Point<N> y = flow.increment(x, tau) - carry;
        const Point<N> t = x + y;
        carry = (t - x) - y;
        x = t;
        if (!x.allFinite()) {
            throw IntegrationBlowup("drift flow: non-finite state", tau);
        }
    }

    void jump_to(const Point<N>& y)
    {
        for (int c = 0; c < N; ++c) {
            if (y(c) != x(c)) {
                carry(c) = 0.0;
            }
        }
        x = y;
    }
};

} // namespace detail

/**
 * Integrates dX = (F0 + eps K)(X) dt + F(X) <> dZ along a pre-sampled driver path.
 *
 * `observe(t, x, is_jump)` is called at t = 0, at every grid time and, in JumpDecomposition
 * mode, right after every jump. The path stops at the first observation outside U; that
 * state is the last one observed (the stopped path is frozen there).
 *
 * Per macro step of length h:
 *   GridIncrement / ExactLeaf, Strang: drift h/2, jump with the step increment, drift h/2;
 *                              Lie:    jump, then drift h.
 *   JumpDecomposition: drift (including F b_delta) up to each jump time, jump, drift to the
 *                      end of the step; splitting is not used.
 * ExactLeaf without any drift evaluates Phi^{F Z_t}(x0) from the accumulated driver directly,
 * which presumes the jump flows commute (true for the rotation preset).
 */
template <int N, int L, int D, int R, class Observer>
PathOutcome integrate_path(const VectorFieldSet<N, R>& fields, const FoliatedChart<N, L, D>& chart,
                           const Point<N>& x0, const IncrementSeries<R>& noise, double eps,
                           const IntegratorConfig& cfg, Observer&& observe)
{
    cfg.validate();
    if (!chart.in_domain(x0)) {
        throw std::domain_error("integrate: initial condition lies outside the chart domain U");
    }
    if (!(eps >= 0.0)) {
        throw std::invalid_argument("integrate: eps must be nonnegative");
    }
    const bool decomposition = cfg.scheme == Scheme::JumpDecomposition;
    if (decomposition && !noise.decomposed) {
        throw std::invalid_argument("integrate: JumpDecomposition needs a decomposed driver path");
    }
    if (cfg.scheme == Scheme::ExactLeaf && !fields.exact_jump_flow) {
        throw std::invalid_argument("integrate: ExactLeaf needs a closed-form jump flow");
    }
    IntegratorConfig jump_cfg = cfg;
    if (cfg.scheme == Scheme::ExactLeaf) {
        jump_cfg.use_exact_jump_flow = true;
    }

    const detail::DriftFlow<N, R> drift{fields, eps, noise.compensator_drift,
                                        decomposition && !noise.compensator_drift.isZero(0.0)};
    PathOutcome outcome;
    detail::CompensatedState<N, R> state{x0};
    const Point<N>& x = state.x;
    observe(0.0, x, false);

    auto check_exit = [&](double t) {
        if (!chart.in_domain(x)) {
            outcome.exited = true;
            outcome.exit_time = t;
            return true;
        }
        return false;
    };

    if (cfg.scheme == Scheme::ExactLeaf && !drift.active()) {
        JumpVector<R> z = JumpVector<R>::Zero();
        for (std::size_t k = 1; k < noise.grid.size(); ++k) {
            z += noise.increments[k - 1];
            state.jump_to(fields.exact_jump_flow(x0, z));
            observe(noise.grid[k], x, !noise.increments[k - 1].isZero(0.0));
            if (check_exit(noise.grid[k])) {
                return outcome;
            }
        }
        return outcome;
    }

    if (!decomposition) {
        const bool strang = cfg.splitting == Splitting::Strang;
        for (std::size_t k = 1; k < noise.grid.size(); ++k) {
            const double h = noise.grid[k] - noise.grid[k - 1];
            const JumpVector<R>& dz = noise.increments[k - 1];
            if (strang) {
                state.drift(drift, 0.5 * h);
                state.jump_to(jump_flow(fields, x, dz, jump_cfg));
                state.drift(drift, 0.5 * h);
            } else {
                state.jump_to(jump_flow(fields, x, dz, jump_cfg));
                state.drift(drift, h);
            }
            observe(noise.grid[k], x, !dz.isZero(0.0));
            if (check_exit(noise.grid[k])) {
                return outcome;
            }
        }
        return outcome;
    }

    std::size_t j = 0;
    for (std::size_t k = 1; k < noise.grid.size(); ++k) {
        double t = noise.grid[k - 1];
        while (j < noise.large_jumps.size() && noise.large_jumps[j].time <= noise.grid[k]) {
            const auto& jump = noise.large_jumps[j++];
            state.drift(drift, jump.time - t);
            state.jump_to(jump_flow(fields, x, jump.size, jump_cfg));
            t = jump.time;
            observe(t, x, true);
            if (check_exit(t)) {
                return outcome;
            }
        }
        state.drift(drift, noise.grid[k] - t);
        observe(noise.grid[k], x, false);
        if (check_exit(noise.grid[k])) {
            return outcome;
        }
    }
    return outcome;
}

template <int N, int L, int D, int R>
Trajectory<N> integrate_with_noise(const VectorFieldSet<N, R>& fields, const FoliatedChart<N, L, D>& chart,
                                   const Point<N>& x0, const IncrementSeries<R>& noise, double eps,
                                   const IntegratorConfig& cfg)
{
    Trajectory<N> traj;
    traj.times.reserve(noise.grid.size() + noise.large_jumps.size());
    traj.states.reserve(noise.grid.size() + noise.large_jumps.size());
    traj.jump_flags.reserve(noise.grid.size() + noise.large_jumps.size());
    const PathOutcome outcome = integrate_path(fields, chart, x0, noise, eps, cfg,
                                               [&](double t, const Point<N>& x, bool jumped) {
                                                   traj.times.push_back(t);
                                                   traj.states.push_back(x);
                                                   traj.jump_flags.push_back(jumped ? 1 : 0);
                                               });
    traj.exited = outcome.exited;
    traj.exit_time = outcome.exit_time;
    return traj;
}

template <int R>
SamplingMode sampling_mode(const LevyDriverSpec<R>& driver, const IntegratorConfig& cfg)
{
    if (cfg.scheme == Scheme::JumpDecomposition || cfg.driver_mode == DriverMode::Decomposition) {
        return Decomposition{cfg.cutoff};
    }
    return driver.default_mode();
}

// Driver path on the macro grid of `cfg` over [0, horizon], in the mode the scheme consumes.
template <int R>
IncrementSeries<R> sample_path_noise(const LevyDriverSpec<R>& driver, double horizon, const IntegratorConfig& cfg,
                                     RngStream& rng)
{
    cfg.validate();
    const auto grid = uniform_grid(horizon, cfg.step);
    return sample_increments(driver, grid, rng, sampling_mode(driver, cfg));
}

template <int N, int L, int D, int R>
Trajectory<N> integrate_unperturbed(const VectorFieldSet<N, R>& fields, const FoliatedChart<N, L, D>& chart,
                                    const LevyDriverSpec<R>& driver, const Point<N>& x0, double horizon,
                                    const IntegratorConfig& cfg, RngStream& rng)
{
    if (!chart.in_domain(x0)) {
        throw std::domain_error("integrate_unperturbed: x0 lies outside U");
    }
    const auto noise = sample_path_noise(driver, horizon, cfg, rng);
    return integrate_with_noise(fields, chart, x0, noise, 0.0, cfg);
}

template <int N, int L, int D, int R>
Trajectory<N> integrate_perturbed(const VectorFieldSet<N, R>& fields, const FoliatedChart<N, L, D>& chart,
                                  const LevyDriverSpec<R>& driver, const Point<N>& x0, double horizon, double eps,
                                  const IntegratorConfig& cfg, RngStream& rng)
{
    if (!chart.in_domain(x0)) {
        throw std::domain_error("integrate_perturbed: x0 lies outside U");
    }
    const auto noise = sample_path_noise(driver, horizon, cfg, rng);
    return integrate_with_noise(fields, chart, x0, noise, eps, cfg);
}

// CSV columns: t, x, y, z, r, theta, is_jump, exited. theta in [0, 2pi).
inline void write_trajectory_csv(std::ostream& os, const Trajectory<3>& traj)
{
    CsvWriter csv(os);
    csv << "t" << "x" << "y" << "z" << "r" << "theta" << "is_jump" << "exited";
    csv.end_row();
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        const auto& p = traj.states[k];
        double theta = std::atan2(p(1), p(0));
        if (theta < 0.0) {
            theta += 2.0 * std::numbers::pi;
        }
        const bool exit_row = traj.exited && k + 1 == traj.times.size();
        csv << traj.times[k] << p(0) << p(1) << p(2) << std::hypot(p(0), p(1)) << theta
            << static_cast<int>(traj.jump_flags[k]) << (exit_row ? 1 : 0);
        csv.end_row();
    }
}

} // namespace marcus

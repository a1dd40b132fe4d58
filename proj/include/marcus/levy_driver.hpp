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
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "marcus/numerics.hpp"
#include "marcus/rng.hpp"

namespace marcus {

template <int R>
using JumpVector = Eigen::Matrix<double, R, 1>;

// ---------------------------------------------------------------------------------------
// Jump measures. Every driver component is an independent copy of the same one-dimensional
// pure-jump process, so the r-dimensional Levy measure lives on the coordinate axes.
// ---------------------------------------------------------------------------------------

// One-sided Gamma subordinator: nu(dy) = e^(-rate y) / y dy on (0, inf), marginals Gamma(t, rate).
struct GammaSubordinator {
    double rate = 1.0;
};

// Finite-activity driver: jumps arrive at `intensity`, sizes drawn by `sample_jump`, whose
// law has density `jump_density` (used for quadrature-based oracles).
struct CompoundPoisson {
    double intensity = 1.0;
    std::function<double(RngStream&)> sample_jump;
    std::function<double(double)> jump_density;
    bool two_sided = true;
};

// General Levy density on R \ {0}. Jumps at or below `cutoff` are never sampled; their mean is
// applied as a drift. `sample_large` may provide an exact sampler of the normalised measure
// restricted to |y| > cutoff; otherwise a tabulated inverse CDF is built at construction.
struct TruncatedMeasure {
    std::function<double(double)> density;
    double cutoff = 1e-3;
    bool two_sided = false;
    std::function<double(double)> log_density;
    std::function<double(RngStream&)> sample_large;
};

using LevyKind = std::variant<GammaSubordinator, CompoundPoisson, TruncatedMeasure>;

struct ExactIncrements {};
struct Decomposition {
    double cutoff = 1e-3;
};
using SamplingMode = std::variant<ExactIncrements, Decomposition>;

template <int R>
struct Jump {
    double time = 0.0;
    JumpVector<R> size = JumpVector<R>::Zero();
};

template <int R>
struct IncrementSeries {
    std::vector<double> grid;
    std::vector<JumpVector<R>> increments;
    std::vector<Jump<R>> large_jumps;  // sorted by time; empty in exact mode
    JumpVector<R> compensator_drift = JumpVector<R>::Zero();
    double cutoff = 0.0;
    bool decomposed = false;

    double horizon() const { return grid.empty() ? 0.0 : grid.back(); }
};

inline double exponential_integral_e1(double x) { return -std::expint(-x); }

namespace detail {

// Inverse-CDF table for the normalised restriction of a density to [lo, hi] (lo > 0).
class TabulatedSampler {
public:
    TabulatedSampler() = default;

    TabulatedSampler(const std::function<double(double)>& density, double lo, double hi, int cells = 4096)
    {
        edges_.resize(cells + 1);
        const double ratio = std::log(hi / lo);
        for (int i = 0; i <= cells; ++i) {
            edges_[i] = lo * std::exp(ratio * i / cells);
        }
        cdf_.assign(cells + 1, 0.0);
        for (int i = 0; i < cells; ++i) {
            cdf_[i + 1] = cdf_[i] + integrate(density, edges_[i], edges_[i + 1], 1e-14, 1e-10).value;
        }
        if (!(cdf_.back() > 0.0)) {
            throw std::invalid_argument("TruncatedMeasure: restricted measure has no mass to sample");
        }
    }

    double mass() const { return cdf_.empty() ? 0.0 : cdf_.back(); }

    double sample(RngStream& rng) const
    {
        const double target = rng.uniform() * cdf_.back();
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
        std::size_t cell = static_cast<std::size_t>(std::distance(cdf_.begin(), it));
        cell = std::clamp<std::size_t>(cell, 1, edges_.size() - 1) - 1;
        // log-uniform within the cell; cells are narrow so this tracks ~1/y shapes well
        const double a = edges_[cell];
        const double b = edges_[cell + 1];
        return a * std::exp(rng.uniform() * std::log(b / a));
    }

private:
    std::vector<double> edges_;
    std::vector<double> cdf_;
};

// Exact sampler of e^(-rate y)/y restricted to (cutoff, inf), normalised. Two-piece
// rejection: log-uniform proposal below max(cutoff, 1), shifted exponential above it.
inline double sample_gamma_large_jump(RngStream& rng, double rate, double cutoff)
{
    const double split = std::max(cutoff, 1.0);
    const double mass_low = split > cutoff ? exponential_integral_e1(rate * cutoff) - exponential_integral_e1(rate * split)
                                           : 0.0;
    const double mass_high = exponential_integral_e1(rate * split);
    const bool low = rng.uniform() * (mass_low + mass_high) < mass_low;
    for (;;) {
        if (low) {
            const double y = cutoff * std::exp(rng.uniform() * std::log(split / cutoff));
            if (rng.uniform() < std::exp(-rate * (y - cutoff))) {
                return y;
            }
        } else {
            const double y = split + exponential(rng, rate);
            if (rng.uniform() * y < split) {
                return y;
            }
        }
    }
}

struct SideIntegrals {
    std::function<double(double)> density;
    std::function<double(double)> log_density;
    bool two_sided = false;
};

// Integral of g(|y|) * sign(y)^odd over {lo < |y| <= hi} against the density.
inline double integrate_measure(const SideIntegrals& m, const std::function<double(double)>& g, double lo, double hi,
                                bool odd)
{
    double total = integrate([&](double y) { return g(y) * m.density(y); }, lo, hi).value;
    if (m.two_sided) {
        const double neg = integrate([&](double y) { return g(y) * m.density(-y); }, lo, hi).value;
        total += odd ? -neg : neg;
    }
    return total;
}

inline TailResult integrate_measure_tail(const SideIntegrals& m, double kappa, double from)
{
    auto side = [&](double sign) {
        return integrate_tail(
            [&](double y) {
                if (m.log_density) {
                    return std::exp(kappa * y + m.log_density(sign * y));
                }
                const double d = m.density(sign * y);
                return d > 0.0 ? std::exp(kappa * y) * d : 0.0;
            },
            from);
    };
    TailResult out = side(1.0);
    if (m.two_sided && out.converged) {
        const TailResult neg = side(-1.0);
        out.value += neg.value;
        out.error += neg.error;
        out.converged = neg.converged;
    }
    return out;
}

} // namespace detail

/**
 * Description of the pure-jump driver Z in R^R together with its sampling machinery.
 *
 * Immutable after construction and safe to share between threads. Construction rejects
 * measures failing the exponential-moment condition
 *     int_{|y|<=1} |y|^2 nu(dy) + int_{|y|>1} e^(kappa |y|) nu(dy) < inf,
 * evaluated by quadrature split at |y| = 1.
 */
template <int R>
class LevyDriverSpec {
public:
    static_assert(R >= 1, "driver dimension must be positive");

    static LevyDriverSpec gamma(double rate, double kappa)
    {
        if (!(rate > 0.0) || !std::isfinite(rate)) {
            throw std::invalid_argument("GammaSubordinator: rate theta must be positive, got " + std::to_string(rate));
        }
        if (!(kappa < rate)) {
            throw std::invalid_argument("GammaSubordinator: exponential moment order kappa must be below theta "
                                        "(the moment integral diverges for kappa >= theta)");
        }
        return LevyDriverSpec(GammaSubordinator{rate}, kappa);
    }

    static LevyDriverSpec compound_poisson(CompoundPoisson cp, double kappa)
    {
        if (!(cp.intensity > 0.0) || !std::isfinite(cp.intensity)) {
            throw std::invalid_argument("CompoundPoisson: intensity must be positive and finite");
        }
        if (!cp.sample_jump || !cp.jump_density) {
            throw std::invalid_argument("CompoundPoisson: jump sampler and density are both required");
        }
        return LevyDriverSpec(std::move(cp), kappa);
    }

    static LevyDriverSpec truncated(TruncatedMeasure tm, double kappa)
    {
        if (!tm.density) {
            throw std::invalid_argument("TruncatedMeasure: density is required");
        }
        if (!(tm.cutoff > 0.0)) {
            throw std::invalid_argument("TruncatedMeasure: cutoff delta must be positive");
        }
        return LevyDriverSpec(std::move(tm), kappa);
    }

    // Gamma Levy density e^(-rate y)/y as a general truncated measure with an exact large-jump sampler.
    static LevyDriverSpec gamma_truncated(double rate, double cutoff, double kappa)
    {
        if (!(rate > 0.0)) {
            throw std::invalid_argument("gamma_truncated: rate must be positive");
        }
        TruncatedMeasure tm;
        tm.density = [rate](double y) { return y > 0.0 ? std::exp(-rate * y) / y : 0.0; };
        tm.log_density = [rate](double y) {
            return y > 0.0 ? -rate * y - std::log(y) : -std::numeric_limits<double>::infinity();
        };
        tm.cutoff = cutoff;
        tm.two_sided = false;
        tm.sample_large = [rate, cutoff](RngStream& rng) { return detail::sample_gamma_large_jump(rng, rate, cutoff); };
        return truncated(std::move(tm), kappa);
    }

    static constexpr int dimension() noexcept { return R; }
    const LevyKind& kind() const noexcept { return kind_; }
    double exp_moment_kappa() const noexcept { return kappa_; }
    double exp_moment_integral() const noexcept { return moment_integral_; }

    SamplingMode default_mode() const
    {
        if (const auto* tm = std::get_if<TruncatedMeasure>(&kind_)) {
            return Decomposition{tm->cutoff};
        }
        return ExactIncrements{};
    }

    // Per-component mean of the jumps with 0 < |y| <= cutoff, per unit time.
    double compensator_drift(double cutoff) const
    {
        if (cutoff <= 0.0) {
            return 0.0;
        }
        if (const auto* g = std::get_if<GammaSubordinator>(&kind_)) {
            return -std::expm1(-g->rate * cutoff) / g->rate;
        }
        return detail::integrate_measure(measure(), [](double y) { return y; }, 0.0, cutoff, true);
    }

    // Per-component mass nu({|y| > cutoff}).
    double large_jump_mass(double cutoff) const
    {
        if (const auto* g = std::get_if<GammaSubordinator>(&kind_)) {
            if (!(cutoff > 0.0)) {
                return std::numeric_limits<double>::infinity();
            }
            return exponential_integral_e1(g->rate * cutoff);
        }
        if (const auto* cp = std::get_if<CompoundPoisson>(&kind_)) {
            if (cutoff <= 0.0) {
                return cp->intensity;
            }
        }
        const auto m = measure();
        const double one = std::max(cutoff, 1.0);
        double mass = cutoff < 1.0 ? detail::integrate_measure(m, [](double) { return 1.0; }, cutoff, 1.0, false) : 0.0;
        const TailResult tail = detail::integrate_measure_tail(m, 0.0, one);
        if (!tail.converged) {
            return std::numeric_limits<double>::infinity();
        }
        return mass + tail.value;
    }

    // Characteristic exponent Psi(u) = int (e^(iuy) - 1) nu(dy) of one component.
    std::complex<double> characteristic_exponent(double u) const
    {
        if (const auto* g = std::get_if<GammaSubordinator>(&kind_)) {
            return -std::log(std::complex<double>(1.0, -u / g->rate));
        }
        return characteristic_exponent_quadrature(u);
    }

    // Same exponent by quadrature of the measure (domain split at |y| = 1), for any kind.
    std::complex<double> characteristic_exponent_quadrature(double u) const
    {
        const auto m = measure();
        const double re_near = detail::integrate_measure(m, [u](double y) { return std::cos(u * y) - 1.0; }, 0.0, 1.0, false);
        const double im_near = detail::integrate_measure(m, [u](double y) { return std::sin(u * y); }, 0.0, 1.0, true);
        auto tail = [&](auto&& g, bool odd) {
            auto side = [&](double sign) {
                TailResult t = integrate_tail([&](double y) { return g(y) * m.density(sign * y); }, 1.0);
                if (!t.converged) {
                    throw QuadratureError("characteristic exponent: tail integral did not converge");
                }
                return t.value;
            };
            double v = side(1.0);
            if (m.two_sided) {
                v += odd ? -side(-1.0) : side(-1.0);
            }
            return v;
        };
        const double re_far = tail([u](double y) { return std::cos(u * y) - 1.0; }, false);
        const double im_far = tail([u](double y) { return std::sin(u * y); }, true);
        const std::complex<double> psi(re_near + re_far, im_near + im_far);
        if (!std::isfinite(psi.real()) || !std::isfinite(psi.imag())) {
            throw QuadratureError("characteristic exponent: non-finite quadrature result");
        }
        return psi;
    }

    // One jump of a single component with |y| > cutoff, from the normalised restricted measure.
    double sample_large_jump(RngStream& rng, double cutoff) const
    {
        if (const auto* g = std::get_if<GammaSubordinator>(&kind_)) {
            return detail::sample_gamma_large_jump(rng, g->rate, cutoff);
        }
        if (const auto* tm = std::get_if<TruncatedMeasure>(&kind_)) {
            if (cutoff != tm->cutoff) {
                throw std::invalid_argument("TruncatedMeasure: sampling cutoff must equal the measure cutoff");
            }
            if (tm->sample_large) {
                return tm->sample_large(rng);
            }
            const double total = table_pos_->mass() + (table_neg_ ? table_neg_->mass() : 0.0);
            if (table_neg_ && rng.uniform() * total >= table_pos_->mass()) {
                return -table_neg_->sample(rng);
            }
            return table_pos_->sample(rng);
        }
        throw std::logic_error("sample_large_jump: compound Poisson jumps are thinned, not sampled here");
    }

private:
    LevyDriverSpec(LevyKind kind, double kappa) : kind_(std::move(kind)), kappa_(kappa)
    {
        if (!(kappa > 0.0) || !std::isfinite(kappa)) {
            throw std::invalid_argument("LevyDriverSpec: exponential moment order kappa must be positive");
        }
        check_exponential_moment();
        if (auto* tm = std::get_if<TruncatedMeasure>(&kind_)) {
            const double mass = large_jump_mass(tm->cutoff);
            if (!(mass > 0.0) || !std::isfinite(mass)) {
                throw std::invalid_argument("TruncatedMeasure: restricted mass nu(|y| > delta) must be finite and positive");
            }
            if (!tm->sample_large) {
                build_tables(*tm);
            }
        }
    }

    detail::SideIntegrals measure() const
    {
        return std::visit(
            [](const auto& k) -> detail::SideIntegrals {
                using K = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<K, GammaSubordinator>) {
                    const double rate = k.rate;
                    return {[rate](double y) { return y > 0.0 ? std::exp(-rate * y) / y : 0.0; },
                            [rate](double y) {
                                return y > 0.0 ? -rate * y - std::log(y) : -std::numeric_limits<double>::infinity();
                            },
                            false};
                } else if constexpr (std::is_same_v<K, CompoundPoisson>) {
                    const double lambda = k.intensity;
                    auto f = k.jump_density;
                    return {[lambda, f](double y) { return lambda * f(y); }, {}, k.two_sided};
                } else {
                    return {k.density, k.log_density, k.two_sided};
                }
            },
            kind_);
    }

    void check_exponential_moment()
    {
        const auto m = measure();
        double near = 0.0;
        TailResult far;
        try {
            near = detail::integrate_measure(m, [](double y) { return y * y; }, 0.0, 1.0, false);
            far = detail::integrate_measure_tail(m, kappa_, 1.0);
        } catch (const QuadratureError& e) {
            throw std::invalid_argument(std::string("LevyDriverSpec: exponential moment integral could not be "
                                                    "verified: ") + e.what());
        }
        if (!far.converged || !std::isfinite(near)) {
            throw std::invalid_argument("LevyDriverSpec: exponential moment integral of order kappa = " +
                                        std::to_string(kappa_) + " is not finite");
        }
        moment_integral_ = near + far.value;
    }

    void build_tables(const TruncatedMeasure& tm)
    {
        auto upper = [&](double sign) {
            double hi = std::max(1.0, 2.0 * tm.cutoff);
            for (int k = 0; k < 60; ++k) {
                const double tail = integrate_tail([&](double y) { return tm.density(sign * y); }, hi).value;
                if (tail < 1e-14) {
                    break;
                }
                hi *= 2.0;
            }
            return hi;
        };
        table_pos_ = std::make_shared<detail::TabulatedSampler>([d = tm.density](double y) { return d(y); },
                                                                 tm.cutoff, upper(1.0));
        if (tm.two_sided) {
            table_neg_ = std::make_shared<detail::TabulatedSampler>([d = tm.density](double y) { return d(-y); },
                                                                     tm.cutoff, upper(-1.0));
        }
    }

    LevyKind kind_;
    double kappa_ = 0.0;
    double moment_integral_ = 0.0;
    std::shared_ptr<const detail::TabulatedSampler> table_pos_;
    std::shared_ptr<const detail::TabulatedSampler> table_neg_;
};

namespace detail {

inline void validate_grid(const std::vector<double>& grid)
{
    if (grid.empty() || grid.front() != 0.0) {
        throw std::invalid_argument("time grid must start at 0");
    }
    for (std::size_t k = 1; k < grid.size(); ++k) {
        if (!(grid[k] > grid[k - 1]) || !std::isfinite(grid[k])) {
            throw std::invalid_argument("time grid must be strictly increasing (violated at index " +
                                        std::to_string(k) + ")");
        }
    }
}

template <int R>
void accumulate_increments(IncrementSeries<R>& s)
{
    s.increments.assign(s.grid.size() > 0 ? s.grid.size() - 1 : 0, JumpVector<R>::Zero());
    std::size_t j = 0;
    for (std::size_t k = 1; k < s.grid.size(); ++k) {
        JumpVector<R> inc = s.compensator_drift * (s.grid[k] - s.grid[k - 1]);
        while (j < s.large_jumps.size() && s.large_jumps[j].time <= s.grid[k]) {
            inc += s.large_jumps[j].size;
            ++j;
        }
        s.increments[k - 1] = inc;
    }
}

} // namespace detail

// Uniform grid on [0, horizon] with step at most `step`; the last point is exactly `horizon`.
inline std::vector<double> uniform_grid(double horizon, double step)
{
    if (!(horizon >= 0.0) || !(step > 0.0)) {
        throw std::invalid_argument("uniform_grid: horizon must be nonnegative and step positive");
    }
    if (horizon == 0.0) {
        return {0.0};
    }
    const auto n = static_cast<std::size_t>(std::ceil(horizon / step * (1.0 - 1e-12)));
    std::vector<double> grid(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
        grid[k] = horizon * static_cast<double>(k) / static_cast<double>(n);
    }
    grid.back() = horizon;
    return grid;
}

/**
 * Increments of Z on `grid`.
 *
 * ExactIncrements: Gamma(dt, theta) per step and component (Gamma driver), or the full
 * jump sum (compound Poisson). Decomposition{delta}: jumps above delta with uniform arrival
 * times and a Poisson count of mean dt * nu(|y| > delta), plus the drift b_delta per unit time.
 * Draws are consumed step by step, component by component.
 */
template <int R>
IncrementSeries<R> sample_increments(const LevyDriverSpec<R>& spec, const std::vector<double>& grid, RngStream& rng,
                                     const SamplingMode& mode)
{
    detail::validate_grid(grid);
    IncrementSeries<R> out;
    out.grid = grid;
    const std::size_t steps = grid.size() - 1;

    const auto* gamma = std::get_if<GammaSubordinator>(&spec.kind());
    const auto* cp = std::get_if<CompoundPoisson>(&spec.kind());
    if (std::holds_alternative<ExactIncrements>(mode)) {
        if (gamma != nullptr) {
            out.increments.resize(steps);
            for (std::size_t k = 0; k < steps; ++k) {
                const double dt = grid[k + 1] - grid[k];
                for (int c = 0; c < R; ++c) {
                    out.increments[k](c) = gamma_variate(rng, dt, gamma->rate);
                }
            }
            return out;
        }
        if (cp == nullptr) {
            throw std::invalid_argument("sample_increments: TruncatedMeasure drivers only support decomposition mode");
        }
    }

    const double cutoff = std::holds_alternative<Decomposition>(mode) ? std::get<Decomposition>(mode).cutoff : 0.0;
    if (gamma != nullptr && !(cutoff > 0.0)) {
        throw std::invalid_argument("sample_increments: Gamma decomposition needs a positive cutoff");
    }
    if (const auto* tm = std::get_if<TruncatedMeasure>(&spec.kind()); tm != nullptr && cutoff != tm->cutoff) {
        throw std::invalid_argument("sample_increments: TruncatedMeasure decomposition must use the measure cutoff");
    }
    out.decomposed = true;
    out.cutoff = cutoff;
    out.compensator_drift = JumpVector<R>::Constant(spec.compensator_drift(cutoff));

    const double rate = cp != nullptr ? cp->intensity : spec.large_jump_mass(cutoff);
    for (std::size_t k = 0; k < steps; ++k) {
        const double t0 = grid[k];
        const double dt = grid[k + 1] - t0;
        const std::size_t first = out.large_jumps.size();
        for (int c = 0; c < R; ++c) {
            const std::uint64_t count = poisson_variate(rng, rate * dt);
            for (std::uint64_t j = 0; j < count; ++j) {
                Jump<R> jump;
                jump.time = t0 + dt * rng.uniform_open();
                const double y = cp != nullptr ? cp->sample_jump(rng) : spec.sample_large_jump(rng, cutoff);
                if (cp != nullptr && std::abs(y) <= cutoff) {
                    continue;
                }
                jump.size(c) = y;
                out.large_jumps.push_back(jump);
            }
        }
        std::stable_sort(out.large_jumps.begin() + static_cast<std::ptrdiff_t>(first), out.large_jumps.end(),
                         [](const Jump<R>& a, const Jump<R>& b) { return a.time < b.time; });
    }
    detail::accumulate_increments(out);
    return out;
}

template <int R>
IncrementSeries<R> sample_increments(const LevyDriverSpec<R>& spec, const std::vector<double>& grid, RngStream& rng)
{
    return sample_increments(spec, grid, rng, spec.default_mode());
}

// The same decomposed jump path re-binned onto another grid over the same horizon.
template <int R>
IncrementSeries<R> regrid(const IncrementSeries<R>& series, const std::vector<double>& grid)
{
    if (!series.decomposed) {
        throw std::invalid_argument("regrid: only decomposition-mode series carry jump times");
    }
    detail::validate_grid(grid);
    if (std::abs(grid.back() - series.horizon()) > 1e-12 * std::max(1.0, series.horizon())) {
        throw std::invalid_argument("regrid: new grid must cover the same horizon");
    }
    IncrementSeries<R> out = series;
    out.grid = grid;
    out.grid.back() = series.horizon();
    detail::accumulate_increments(out);
    return out;
}

// Drops the jumps in (series.cutoff, cutoff] and replaces them by the drift b_cutoff.
template <int R>
IncrementSeries<R> coarsen(const IncrementSeries<R>& series, const LevyDriverSpec<R>& spec, double cutoff)
{
    if (!series.decomposed || cutoff < series.cutoff) {
        throw std::invalid_argument("coarsen: needs a decomposed series and a cutoff no finer than its own");
    }
    IncrementSeries<R> out;
    out.grid = series.grid;
    out.decomposed = true;
    out.cutoff = cutoff;
    out.compensator_drift = JumpVector<R>::Constant(spec.compensator_drift(cutoff));
    for (const auto& jump : series.large_jumps) {
        if (jump.size.norm() > cutoff) {
            out.large_jumps.push_back(jump);
        }
    }
    detail::accumulate_increments(out);
    return out;
}

// E[exp(i <u, Z_t>)] = exp(t sum_c Psi(u_c)).
template <int R>
std::complex<double> characteristic_function(const LevyDriverSpec<R>& spec, const JumpVector<R>& u, double t)
{
    if (!(t >= 0.0)) {
        throw std::invalid_argument("characteristic_function: t must be nonnegative");
    }
    std::complex<double> exponent = 0.0;
    for (int c = 0; c < R; ++c) {
        exponent += spec.characteristic_exponent(u(c));
    }
    return std::exp(t * exponent);
}

inline std::complex<double> characteristic_function(const LevyDriverSpec<1>& spec, double u, double t)
{
    return characteristic_function<1>(spec, JumpVector<1>::Constant(u), t);
}

// Z_t for a one-dimensional driver, in the driver's default sampling mode.
inline double sample_marginal(const LevyDriverSpec<1>& spec, double t, RngStream& rng)
{
    if (t == 0.0) {
        return 0.0;
    }
    if (const auto* g = std::get_if<GammaSubordinator>(&spec.kind())) {
        return gamma_variate(rng, t, g->rate);
    }
    return sample_increments(spec, {0.0, t}, rng).increments.front()(0);
}

// KS distance between the law of Z_t mod 2pi (n_paths draws) and the uniform law on [0, 2pi).
inline double circle_law_distance(const LevyDriverSpec<1>& spec, double t, std::size_t n_paths, RngStream& rng)
{
    if (n_paths < 100) {
        throw std::invalid_argument("circle_law_distance: n_paths must be at least 100");
    }
    if (!(t >= 0.0)) {
        throw std::invalid_argument("circle_law_distance: t must be nonnegative");
    }
    constexpr double two_pi = 2.0 * std::numbers::pi;
    std::vector<double> u(n_paths);
    for (auto& v : u) {
        double angle = std::fmod(sample_marginal(spec, t, rng), two_pi);
        if (angle < 0.0) {
            angle += two_pi;
        }
        v = std::min(angle / two_pi, std::nextafter(1.0, 0.0));
    }
    return ks_distance_uniform(std::move(u));
}

} // namespace marcus

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
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "marcus/parallel.hpp"

namespace marcus {

class QuadratureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;
};

// Adaptive 61-point Gauss-Kronrod on a finite interval. Throws QuadratureError when the
// estimated error exceeds both the absolute and the relative tolerance.
template <class F>
QuadratureResult integrate(F&& f, double a, double b, double abs_tol = 1e-10, double rel_tol = 1e-12)
{
    if (a == b) {
        return {};
    }
    double err = 0.0;
    double l1 = 0.0;
    const double value = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        f, a, b, 20, rel_tol, &err, &l1);
    if (!std::isfinite(value) || !(err <= std::max(abs_tol, rel_tol * std::abs(value)))) {
        throw QuadratureError("quadrature did not converge on [" + std::to_string(a) + ", " + std::to_string(b) +
                              "]: value " + std::to_string(value) + ", error estimate " + std::to_string(err));
    }
    return {value, err};
}

// Integral over [a, inf) on geometrically growing segments [a 2^k, a 2^(k+1)].
// Stops once a segment contributes less than rel_tail of the running total (after the
// integrand has had at least `min_segments`), and reports divergence otherwise.
struct TailResult {
    double value = 0.0;
    double error = 0.0;
    bool converged = false;
};

template <class F>
TailResult integrate_tail(F&& f, double a, double abs_tol = 1e-10, double rel_tail = 1e-15, int max_segments = 64)
{
    TailResult out;
    double lo = a;
    int quiet = 0;
    for (int k = 0; k < max_segments; ++k) {
        const double hi = 2.0 * lo;
        QuadratureResult seg;
        try {
            seg = integrate(f, lo, hi, abs_tol * 0.5, 1e-12);
        } catch (const QuadratureError&) {
            return out;
        }
        out.value += seg.value;
        out.error += seg.error;
        if (!std::isfinite(out.value)) {
            return out;
        }
        if (std::abs(seg.value) <= rel_tail * std::max(1.0, std::abs(out.value))) {
            if (++quiet >= 3) {
                out.converged = true;
                return out;
            }
        } else {
            quiet = 0;
        }
        lo = hi;
    }
    return out;
}

// Kolmogorov-Smirnov distance between the empirical law of `samples` (all in [0, 1))
// and the uniform law on [0, 1). Sorts a copy.
inline double ks_distance_uniform(std::vector<double> samples)
{
    if (samples.empty()) {
        throw std::invalid_argument("ks_distance_uniform: empty sample");
    }
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double u = samples[i];
        d = std::max({d, (static_cast<double>(i) + 1.0) / n - u, u - static_cast<double>(i) / n});
    }
    return d;
}

// Least-squares fit of log(y) = log(c) + e log(x). Points with y <= 0 make the fit undefined.
struct PowerLawFit {
    double exponent = std::numeric_limits<double>::quiet_NaN();
    double constant = std::numeric_limits<double>::quiet_NaN();
    double exponent_stderr = std::numeric_limits<double>::quiet_NaN();
};

inline PowerLawFit fit_power_law(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size() || x.size() < 2) {
        throw std::invalid_argument("fit_power_law: need at least two paired points");
    }
    PowerLawFit fit;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) {
            return fit;
        }
    }
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(y[i]) - my);
    }
    fit.exponent = sxy / sxx;
    fit.constant = std::exp(my - fit.exponent * mx);
    if (x.size() > 2) {
        double rss = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = std::log(y[i]) - (std::log(fit.constant) + fit.exponent * std::log(x[i]));
            rss += r * r;
        }
        fit.exponent_stderr = std::sqrt(rss / (n - 2.0) / sxx);
    }
    return fit;
}

// (E|S|^p)^(1/p) from per-path samples of |S|, with a delta-method standard error.
struct LpEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

inline LpEstimate lp_norm_estimate(std::span<const double> abs_values, double p)
{
    if (abs_values.empty()) {
        throw std::invalid_argument("lp_norm_estimate: no samples");
    }
    std::vector<double> powered(abs_values.size());
    for (std::size_t i = 0; i < abs_values.size(); ++i) {
        powered[i] = std::pow(abs_values[i], p);
    }
    const double n = static_cast<double>(powered.size());
    const double mean = pairwise_sum(powered) / n;
    LpEstimate out;
    out.value = std::pow(mean, 1.0 / p);
    if (powered.size() > 1 && mean > 0.0) {
        std::vector<double> sq(powered.size());
        for (std::size_t i = 0; i < powered.size(); ++i) {
            sq[i] = (powered[i] - mean) * (powered[i] - mean);
        }
        const double var = pairwise_sum(sq) / (n - 1.0);
        const double se_mean = std::sqrt(var / n);
        out.std_error = std::pow(mean, 1.0 / p - 1.0) * se_mean / p;
    }
    return out;
}

struct MeanEstimate {
    double mean = 0.0;
    double std_error = 0.0;
};

inline MeanEstimate mean_estimate(std::span<const double> values)
{
    if (values.empty()) {
        throw std::invalid_argument("mean_estimate: no samples");
    }
    const double n = static_cast<double>(values.size());
    MeanEstimate out;
    out.mean = pairwise_sum(values) / n;
    if (values.size() > 1) {
        std::vector<double> sq(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) {
            sq[i] = (values[i] - out.mean) * (values[i] - out.mean);
        }
        out.std_error = std::sqrt(pairwise_sum(sq) / (n - 1.0) / n);
    }
    return out;
}

} // namespace marcus

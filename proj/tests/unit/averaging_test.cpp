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

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "marcus/averaging.hpp"
#include "marcus/cylinder.hpp"

namespace marcus {
namespace {

CylinderPreset preset_with(PerturbationChoice k)
{
    CylinderParams p;
    p.perturbation = k;
    return make_cylinder_preset(p);
}

Observable<3> dpi_component(const CylinderPreset& preset, int c)
{
    return [&preset, c](const Point<3>& x) { return dpi_k(preset.chart, preset.fields, x)(c); };
}

// Re 1 / log(1 - 2i): time integral of the correlation of cos(2 Z) under the unit-rate Gamma driver.
double cos2_correlation_integral() { return std::real(1.0 / std::log(std::complex<double>(1.0, -2.0))); }

TEST(LeafQuadrature, LinearFieldRadialAverageIsHalfRadius)
{
    const auto preset = preset_with(LinearPerturbation{});
    for (const double r : {0.3, 1.0, 2.3, 4.9}) {
        const Point<3> q(r * std::cos(1.1), r * std::sin(1.1), 3.0);
        EXPECT_NEAR(leaf_average_quadrature(preset.chart, dpi_component(preset, 0), q, 64), 0.5 * r, 1e-12);
        EXPECT_NEAR(leaf_average_quadrature(preset.chart, dpi_component(preset, 1), q, 64), 0.0, 1e-15);
    }
}

TEST(LeafQuadrature, ConstantFieldRadialAverageVanishes)
{
    const auto preset = preset_with(ConstantPerturbation{0.7, -0.3, 0.5});
    const Point<3> q(0.0, 2.0, -1.0);
    EXPECT_NEAR(leaf_average_quadrature(preset.chart, dpi_component(preset, 0), q, 64), 0.0, 1e-15);
    EXPECT_NEAR(leaf_average_quadrature(preset.chart, dpi_component(preset, 1), q, 64), 0.5, 1e-15);
}

TEST(LeafQuadrature, ConstantObservableAveragesToItself)
{
    const auto preset = preset_with(LinearPerturbation{});
    const Observable<3> c = [](const Point<3>&) { return -2.75; };
    EXPECT_NEAR(leaf_average_quadrature(preset.chart, c, Point<3>(1.0, 0.0, 0.0), 8), -2.75, 1e-15);
    EXPECT_NEAR(leaf_average_quadrature(preset.chart, c, Point<3>(1.0, 0.0, 0.0), 1000), -2.75, 1e-14);
}

TEST(LeafQuadrature, SpectralAccuracyOnTrigonometricPolynomials)
{
    const auto preset = preset_with(LinearPerturbation{});
    // mean of cos^4 over the circle is 3/8; the trapezoid rule with n > 4 nodes is exact
    const Observable<3> psi = [](const Point<3>& x) { return std::pow(x(0) / radial(x), 4); };
    EXPECT_NEAR(leaf_average_quadrature(preset.chart, psi, Point<3>(2.0, 0.0, 0.0), 8), 0.375, 1e-15);
}

TEST(LeafQuadrature, RejectsBadArguments)
{
    const auto preset = preset_with(LinearPerturbation{});
    const auto psi = dpi_component(preset, 0);
    EXPECT_THROW(leaf_average_quadrature(preset.chart, psi, Point<3>(1.0, 0.0, 0.0), 7), std::invalid_argument);
    EXPECT_THROW(leaf_average_quadrature(preset.chart, psi, Point<3>(6.0, 0.0, 0.0), 64), std::domain_error);
}

TEST(AveragedField, QuadratureBackendMatchesClosedForm)
{
    for (const auto& k : {PerturbationChoice{LinearPerturbation{}}, PerturbationChoice{ConstantPerturbation{1, -2, 0.4}}}) {
        const auto preset = preset_with(k);
        const auto quad = quadrature_average(preset.chart, preset.fields, 64);
        EXPECT_EQ(quad.backend, AverageBackend::Quadrature);
        for (const double r : {0.25, 1.0, 3.7}) {
            for (const double z : {-9.0, 0.0, 4.0}) {
                const Eigen::Vector2d v(r, z);
                EXPECT_LE((quad(v) - preset.average(v)).norm(), 1e-10);
            }
        }
    }
}

TEST(AveragedField, LipschitzEstimateOfLinearAverage)
{
    const auto preset = preset_with(LinearPerturbation{});
    std::vector<Eigen::Vector2d> points;
    for (const double r : {0.5, 1.0, 2.0, 4.0}) {
        for (const double z : {-1.0, 1.0}) {
            points.emplace_back(r, z);
        }
    }
    EXPECT_NEAR(estimate_lipschitz(preset.average, points), 0.5, 1e-15);
}

TEST(AveragedField, ErgodicBackendAgreesWithinItsRate)
{
    const auto preset = preset_with(LinearPerturbation{});
    const double t_erg = 200.0;
    const std::size_t paths = 20;
    const auto mc = ergodic_mc_average(preset.fields, preset.chart, preset.driver, IntegratorConfig{},
                                       Eigen::Vector2d(1.0, 0.0), t_erg, paths, 61);
    EXPECT_EQ(mc.backend, AverageBackend::ErgodicMC);
    const Eigen::Vector2d v(1.5, 2.0);
    const auto got = mc(v);
    // the radial time average is r (1/t) int cos^2; its variance is r^2 c / (4 t) for large t
    const double se = v(0) * std::sqrt(0.25 * cos2_correlation_integral() / t_erg / paths);
    EXPECT_LE(std::abs(got(0) - 0.75), 3.0 * se) << got(0) << " se " << se;
    EXPECT_EQ(got(1), 0.0);
}

TEST(ErgodicAverage, LinearFieldRadialTimeAverage)
{
    const auto preset = preset_with(LinearPerturbation{});
    RngStream rng(62, 0);
    const double t_erg = 1000.0;
    const double avg = ergodic_average(preset.fields, preset.chart, preset.driver, dpi_component(preset, 0),
                                       Point<3>(1.0, 0.0, 0.0), t_erg, IntegratorConfig{}, rng);
    const double sd = std::sqrt(0.25 * cos2_correlation_integral() / t_erg);
    EXPECT_LE(std::abs(avg - 0.5), 4.0 * sd) << avg;
}

TEST(ErgodicAverage, ConstantObservableIsExact)
{
    const auto preset = preset_with(LinearPerturbation{});
    RngStream rng(63, 0);
    const Observable<3> c = [](const Point<3>&) { return 0.625; };
    for (const Scheme scheme : {Scheme::GridIncrement, Scheme::JumpDecomposition}) {
        IntegratorConfig cfg;
        cfg.scheme = scheme;
        EXPECT_NEAR(ergodic_average(preset.fields, preset.chart, preset.driver, c, Point<3>(1.0, 0.0, 0.0), 50.0, cfg,
                                    rng),
                    0.625, 1e-14);
    }
}

TEST(ErgodicAverage, VerticalRateOfConstantFieldIsK3)
{
    const auto preset = preset_with(ConstantPerturbation{0.0, 0.0, 1.75});
    RngStream rng(64, 0);
    EXPECT_NEAR(ergodic_average(preset.fields, preset.chart, preset.driver, dpi_component(preset, 1),
                                Point<3>(1.0, 0.0, 0.0), 20.0, IntegratorConfig{}, rng),
                1.75, 1e-14);
}

TEST(ErgodicAverage, RejectsNonPositiveHorizon)
{
    const auto preset = preset_with(LinearPerturbation{});
    RngStream rng(65, 0);
    EXPECT_THROW(ergodic_average(preset.fields, preset.chart, preset.driver, dpi_component(preset, 0),
                                 Point<3>(1.0, 0.0, 0.0), 0.0, IntegratorConfig{}, rng),
                 std::invalid_argument);
}

TEST(EstimateEta, ConstantObservableHasZeroError)
{
    const auto preset = preset_with(LinearPerturbation{});
    const Observable<3> c = [](const Point<3>&) { return 3.0; };
    EnsembleOptions opts;
    opts.paths = 100;
    opts.seed = 66;
    const auto est = estimate_eta(preset.fields, preset.chart, preset.driver, c, Point<3>(1.0, 0.0, 0.0),
                                  {1.0, 2.0, 4.0}, 2.0, IntegratorConfig{}, opts);
    for (const double e : est.lp_errors) {
        EXPECT_LE(e, 1e-14);
    }
}

TEST(EstimateEta, VerticalConstantFieldRadialRateIsZero)
{
    const auto preset = preset_with(ConstantPerturbation{0.0, 0.0, 2.0});
    EnsembleOptions opts;
    opts.paths = 100;
    opts.seed = 67;
    const auto est = estimate_eta(preset.fields, preset.chart, preset.driver, dpi_component(preset, 0),
                                  Point<3>(1.0, 0.0, 0.0), {1.0, 3.0, 10.0}, 2.0, IntegratorConfig{}, opts);
    for (const double e : est.lp_errors) {
        EXPECT_EQ(e, 0.0);
    }
    EXPECT_EQ(est.fitted_constant, 0.0);
    EXPECT_TRUE(std::isnan(est.fitted_exponent));
}

TEST(EstimateEta, HorizontalConstantFieldDecaysLikeInverseRoot)
{
    const auto preset = preset_with(ConstantPerturbation{1.0, 0.0, 0.0});
    EnsembleOptions opts;
    opts.paths = 100;
    opts.seed = 68;
    const auto est = estimate_eta(preset.fields, preset.chart, preset.driver, dpi_component(preset, 0),
                                  Point<3>(1.0, 0.0, 0.0), {10.0, 30.0, 100.0}, 2.0, IntegratorConfig{}, opts);
    EXPECT_NEAR(est.fitted_exponent, -0.5, 0.2);
    EXPECT_GT(est.lp_errors.front(), est.lp_errors.back());
}

TEST(EstimateEta, LinearFieldDecaysLikeInverseRoot)
{
    const auto preset = preset_with(LinearPerturbation{});
    EnsembleOptions opts;
    opts.paths = 100;
    opts.seed = 69;
    const auto est = estimate_eta(preset.fields, preset.chart, preset.driver, dpi_component(preset, 0),
                                  Point<3>(1.0, 0.0, 0.0), {10.0, 30.0, 100.0}, 2.0, IntegratorConfig{}, opts);
    EXPECT_NEAR(est.fitted_exponent, -0.5, 0.2);
    for (std::size_t k = 0; k < est.lp_errors.size(); ++k) {
        EXPECT_GE(est.lp_errors[k], 0.0);
        EXPECT_TRUE(std::isfinite(est.std_errors[k]));
    }
}

TEST(EstimateEta, RejectsBadArguments)
{
    const auto preset = preset_with(LinearPerturbation{});
    const auto psi = dpi_component(preset, 0);
    const Point<3> x0(1.0, 0.0, 0.0);
    EnsembleOptions opts;
    opts.paths = 100;
    EXPECT_THROW(estimate_eta(preset.fields, preset.chart, preset.driver, psi, x0, {1.0, 2.0, 3.0}, 1.5,
                              IntegratorConfig{}, opts),
                 std::invalid_argument);
    EXPECT_THROW(estimate_eta(preset.fields, preset.chart, preset.driver, psi, x0, {1.0, 2.0}, 2.0, IntegratorConfig{},
                              opts),
                 std::invalid_argument);
    opts.paths = 99;
    EXPECT_THROW(estimate_eta(preset.fields, preset.chart, preset.driver, psi, x0, {1.0, 2.0, 3.0}, 2.0,
                              IntegratorConfig{}, opts),
                 std::invalid_argument);
}

TEST(EstimateEta, CsvLayout)
{
    RateEstimate est;
    est.horizons = {10.0, 100.0};
    est.lp_errors = {0.1, 0.03};
    est.fitted_exponent = -0.52;
    est.fitted_constant = 0.3;
    std::ostringstream os;
    write_rate_csv(os, est);
    const std::string text = os.str();
    EXPECT_EQ(text.substr(0, text.find('\n')), "t,lp_error,p,fitted_exponent,fitted_constant");
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
}

double sup_error(const AveragedSolution<2>& sol, const std::function<Eigen::Vector2d(double)>& exact)
{
    double sup = 0.0;
    for (std::size_t k = 0; k < sol.times.size(); ++k) {
        sup = std::max(sup, (sol.values[k] - exact(sol.times[k])).norm());
        if (k + 1 < sol.times.size()) {
            const double mid = 0.5 * (sol.times[k] + sol.times[k + 1]);
            sup = std::max(sup, (sol.at(mid) - exact(mid)).norm());
        }
    }
    return sup;
}

TEST(AveragedOde, ConstantCaseIsLinearInTime)
{
    const auto preset = preset_with(ConstantPerturbation{0.3, 0.1, 1.5});
    const Eigen::Vector2d w0(1.0, 0.25);
    const auto sol = solve_averaged_ode(preset.average, preset.chart, w0, 5.0);
    EXPECT_FALSE(sol.T0.has_value());
    EXPECT_DOUBLE_EQ(sol.times.back(), 5.0);
    EXPECT_LE(sup_error(sol, [&](double t) { return Eigen::Vector2d(1.0, 0.25 + 1.5 * t); }), 1e-8);
}

TEST(AveragedOde, LinearCaseGrowsExponentially)
{
    const auto preset = preset_with(LinearPerturbation{});
    const Eigen::Vector2d w0(0.3, -2.0);
    const auto sol = solve_averaged_ode(preset.average, preset.chart, w0, 5.0);
    EXPECT_FALSE(sol.T0.has_value());
    EXPECT_LE(sup_error(sol, [&](double t) { return Eigen::Vector2d(0.3 * std::exp(0.5 * t), -2.0); }), 1e-8);
}

TEST(AveragedOde, BoundaryHittingTimeAndGammaTimes)
{
    const auto preset = preset_with(LinearPerturbation{});
    const double r0 = 1.0;
    const auto sol = solve_averaged_ode(preset.average, preset.chart, Eigen::Vector2d(r0, 0.0), 10.0);
    ASSERT_TRUE(sol.T0.has_value());
    EXPECT_NEAR(*sol.T0, 2.0 * std::log(5.0 / r0), 1e-6);
    EXPECT_LT(sol.times.back(), 10.0);
    for (const double gamma : {0.05, 0.1, 0.5, 0.79}) {
        const auto tg = sol.T_gamma(gamma);
        ASSERT_TRUE(tg.has_value());
        EXPECT_NEAR(*tg, 2.0 * std::log((5.0 - gamma) / r0), 1e-6);
    }
    // the inner radius is 0.8 away at t = 0
    EXPECT_EQ(*sol.T_gamma(0.9), 0.0);
    EXPECT_THROW(sol.T_gamma(0.0), std::invalid_argument);
}

TEST(AveragedOde, GammaTimeIsNonincreasingInGamma)
{
    const auto preset = preset_with(ConstantPerturbation{0.0, 0.0, -0.8});
    const auto sol = solve_averaged_ode(preset.average, preset.chart, Eigen::Vector2d(2.0, 3.0), 20.0);
    double previous = std::numeric_limits<double>::infinity();
    for (double gamma = 0.01; gamma < 1.2; gamma += 0.01) {
        const double tg = *sol.T_gamma(gamma);
        EXPECT_LE(tg, previous);
        previous = tg;
    }
}

TEST(AveragedOde, ZeroFieldStaysPut)
{
    const auto preset = preset_with(ConstantPerturbation{1.0, 1.0, 0.0});
    const Eigen::Vector2d w0(2.0, 1.0);
    const auto sol = solve_averaged_ode(preset.average, preset.chart, w0, 3.0);
    EXPECT_FALSE(sol.T0.has_value());
    for (const auto& w : sol.values) {
        EXPECT_EQ(w, w0);
    }
    EXPECT_FALSE(sol.T_gamma(0.5).has_value());
}

TEST(AveragedOde, RejectsStartOutsideV)
{
    const auto preset = preset_with(LinearPerturbation{});
    EXPECT_THROW(solve_averaged_ode(preset.average, preset.chart, Eigen::Vector2d(5.5, 0.0), 1.0), std::domain_error);
}

TEST(DeltaDefect, ZeroHorizonIsZero)
{
    const auto preset = preset_with(LinearPerturbation{});
    RngStream rng(70, 0);
    const std::function<double(const Eigen::Vector2d&)> q = [](const Eigen::Vector2d& v) { return 0.5 * v(0); };
    EXPECT_EQ(delta_defect(preset.fields, preset.chart, preset.driver, dpi_component(preset, 0), q,
                           Point<3>(1.0, 0.0, 0.0), 0.1, 0.0, IntegratorConfig{}, rng),
              0.0);
}

TEST(DeltaDefect, VerticalConstantFieldHasNoDefect)
{
    const auto preset = preset_with(ConstantPerturbation{0.4, -0.2, 1.0});
    RngStream rng(71, 0);
    const std::function<double(const Eigen::Vector2d&)> q = [](const Eigen::Vector2d&) { return 1.0; };
    EXPECT_EQ(delta_defect(preset.fields, preset.chart, preset.driver, dpi_component(preset, 1), q,
                           Point<3>(1.0, 0.0, 0.0), 0.1, 1.0, IntegratorConfig{}, rng),
              0.0);
}

TEST(DeltaDefect, LinearFieldDefectShrinksWithEpsilon)
{
    const auto preset = preset_with(LinearPerturbation{});
    const std::function<double(const Eigen::Vector2d&)> q = [](const Eigen::Vector2d& v) { return 0.5 * v(0); };
    EnsembleOptions opts;
    opts.paths = 200;
    opts.seed = 72;
    std::vector<LpEstimate> est;
    for (const double eps : {0.1, 0.01}) {
        IntegratorConfig cfg;
        cfg.step = default_step(eps);
        est.push_back(delta_defect_lp(preset.fields, preset.chart, preset.driver, dpi_component(preset, 0), q,
                                      Point<3>(1.0, 0.0, 0.0), eps, 1.0, 2.0, cfg, opts));
    }
    EXPECT_LT(est[1].value + est[1].std_error, est[0].value - est[0].std_error);
}

} // namespace
} // namespace marcus

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
#include <numbers>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "marcus/averaging.hpp"
#include "marcus/geometry.hpp"
#include "marcus/levy_driver.hpp"

namespace marcus {

// K(x, y, z) = (k1, k2, k3).
struct ConstantPerturbation {
    double k1 = 0.0;
    double k2 = 0.0;
    double k3 = 0.0;
};

// K(x, y, z) = (x, 0, 0).
struct LinearPerturbation {};

using PerturbationChoice = std::variant<ConstantPerturbation, LinearPerturbation>;

struct CylinderParams {
    double r_min = 0.2;
    double r_max = 5.0;
    double z_min = -10.0;
    double z_max = 10.0;
    double theta = 1.0;  // Gamma rate
    PerturbationChoice perturbation = LinearPerturbation{};
};

using CylinderChart = FoliatedChart<3, 2, 2>;
using CylinderFields = VectorFieldSet<3, 1>;

/**
 * Random rotations dX = Lambda X <> dZ about the z-axis, driven by a Gamma subordinator, with
 * a transversal perturbation eps K. Leaves are the horizontal circles, Pi = (radius, height),
 * U = {r_min < r < r_max, z_min < z < z_max}. The leaf coordinate is stored as (cos, sin) of
 * the angle, so there is no branch cut.
 */
struct CylinderPreset {
    using Chart = CylinderChart;

    CylinderParams params;
    CylinderChart chart;
    CylinderFields fields;
    LevyDriverSpec<1> driver;
    AveragedField<2> average;  // closed form of v -> Q^{dPi K}(v)
};

inline Eigen::Matrix3d rotation_generator()
{
    Eigen::Matrix3d lambda;
    lambda << 0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0;
    return lambda;
}

inline Point<3> rotate_about_z(const Point<3>& p, double angle)
{
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    return Point<3>(p(0) * c - p(1) * s, p(0) * s + p(1) * c, p(2));
}

inline CylinderChart make_cylinder_chart(double r_min, double r_max, double z_min, double z_max)
{
    CylinderChart chart;
    chart.to_chart = [](const Point<3>& x) {
        const double r = std::hypot(x(0), x(1));
        CylinderChart::ChartPoint cp;
        cp.leaf = Eigen::Vector2d(x(0) / r, x(1) / r);
        cp.vertical = Eigen::Vector2d(r, x(2));
        return cp;
    };
    chart.from_chart = [](const Eigen::Vector2d& leaf, const Eigen::Vector2d& v) {
        const double norm = leaf.norm();
        return Point<3>(v(0) * leaf(0) / norm, v(0) * leaf(1) / norm, v(1));
    };
    chart.vertical_projection = [](const Point<3>& x) { return Eigen::Vector2d(std::hypot(x(0), x(1)), x(2)); };
    chart.projection_jacobian = [](const Point<3>& x) {
        const double r = std::hypot(x(0), x(1));
        Eigen::Matrix<double, 2, 3> j;
        j << x(0) / r, x(1) / r, 0.0, 0.0, 0.0, 1.0;
        return j;
    };
    chart.in_domain = [=](const Point<3>& x) {
        const double r = std::hypot(x(0), x(1));
        return r > r_min && r < r_max && x(2) > z_min && x(2) < z_max;
    };
    chart.boundary_distance = [=](const Eigen::Vector2d& v) {
        return std::min({v(0) - r_min, r_max - v(0), v(1) - z_min, z_max - v(1)});
    };
    chart.sample_proposal = [=](RngStream& rng) {
        const double x = -r_max + 2.0 * r_max * rng.uniform();
        const double y = -r_max + 2.0 * r_max * rng.uniform();
        const double z = z_min + (z_max - z_min) * rng.uniform();
        return Point<3>(x, y, z);
    };
    // normalised arc length on the circle through v
    chart.leaf_measure = [](const Eigen::Vector2d& v, int n) {
        std::vector<LeafNode<3>> nodes(static_cast<std::size_t>(n));
        for (int k = 0; k < n; ++k) {
            const double a = 2.0 * std::numbers::pi * k / n;
            nodes[static_cast<std::size_t>(k)] = {Point<3>(v(0) * std::cos(a), v(0) * std::sin(a), v(1)), 1.0 / n};
        }
        return nodes;
    };
    return chart;
}

inline CylinderFields make_rotation_fields(const PerturbationChoice& perturbation)
{
    CylinderFields fields;
    const Eigen::Matrix3d lambda = rotation_generator();
    fields.noise = [lambda](const Point<3>& x) -> Eigen::Matrix<double, 3, 1> { return lambda * x; };
    fields.noise_jacobian = [lambda](const Point<3>&, int) { return lambda; };
    fields.exact_jump_flow = [](const Point<3>& x, const JumpVector<1>& z) { return rotate_about_z(x, z(0)); };
    if (const auto* c = std::get_if<ConstantPerturbation>(&perturbation)) {
        const Point<3> k(c->k1, c->k2, c->k3);
        fields.perturbation = [k](const Point<3>&) { return k; };
        fields.perturbation_jacobian = [](const Point<3>&) { return Eigen::Matrix3d::Zero().eval(); };
    } else {
        fields.perturbation = [](const Point<3>& x) { return Point<3>(x(0), 0.0, 0.0); };
        fields.perturbation_jacobian = [](const Point<3>&) {
            Eigen::Matrix3d j = Eigen::Matrix3d::Zero();
            j(0, 0) = 1.0;
            return j;
        };
    }
    return fields;
}

inline CylinderPreset make_cylinder_preset(const CylinderParams& params, double exp_moment_kappa = -1.0)
{
    if (!(params.r_min > 0.0 && params.r_min < 1.0 && params.r_max > 1.0) || !std::isfinite(params.r_max)) {
        throw std::invalid_argument("cylinder preset: need 0 < r_min < 1 < r_max");
    }
    if (!(params.z_min < params.z_max) || !std::isfinite(params.z_min) || !std::isfinite(params.z_max)) {
        throw std::invalid_argument("cylinder preset: z interval is degenerate");
    }
    const double kappa = exp_moment_kappa > 0.0 ? exp_moment_kappa : 0.5 * params.theta;
    CylinderPreset preset{params, make_cylinder_chart(params.r_min, params.r_max, params.z_min, params.z_max),
                          make_rotation_fields(params.perturbation), LevyDriverSpec<1>::gamma(params.theta, kappa),
                          AveragedField<2>{}};
    if (const auto* c = std::get_if<ConstantPerturbation>(&params.perturbation)) {
        const double k3 = c->k3;
        preset.average = analytic_average<2>([k3](const Eigen::Vector2d&) { return Eigen::Vector2d(0.0, k3); });
        preset.average.lipschitz_estimate = 0.0;
    } else {
        preset.average = analytic_average<2>([](const Eigen::Vector2d& v) { return Eigen::Vector2d(0.5 * v(0), 0.0); });
        preset.average.lipschitz_estimate = 0.5;
    }
    return preset;
}

// Observables on the preset.
inline double radial(const Point<3>& x) { return std::hypot(x(0), x(1)); }
inline double height(const Point<3>& x) { return x(2); }

} // namespace marcus

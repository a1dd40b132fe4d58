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
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "marcus/levy_driver.hpp"
#include "marcus/rng.hpp"

namespace marcus {

template <int N>
using Point = Eigen::Matrix<double, N, 1>;

inline constexpr double kFiniteDifferenceStep = 1e-6;

template <int N>
struct LeafNode {
    Point<N> point;
    double weight = 0.0;
};

/**
 * Chart phi: U -> L x V of a foliated neighbourhood, with N ambient coordinates, L numbers
 * describing the position on the leaf and D vertical (transversal) coordinates.
 *
 * `projection_jacobian` and `leaf_measure` are optional. Without the former, derivatives of
 * the projection fall back to central differences; the latter is the normalised invariant
 * measure of the leafwise dynamics as a quadrature rule, when it is known in closed form.
 */
template <int N, int L, int D>
struct FoliatedChart {
    using AmbientPoint = Point<N>;
    using LeafCoords = Eigen::Matrix<double, L, 1>;
    using VerticalPoint = Eigen::Matrix<double, D, 1>;
    using ProjectionJacobian = Eigen::Matrix<double, D, N>;

    struct ChartPoint {
        LeafCoords leaf;
        VerticalPoint vertical;
    };

    static constexpr int ambient_dim = N;
    static constexpr int leaf_coords_dim = L;
    static constexpr int vertical_dim = D;

    std::function<ChartPoint(const AmbientPoint&)> to_chart;
    std::function<AmbientPoint(const LeafCoords&, const VerticalPoint&)> from_chart;
    std::function<VerticalPoint(const AmbientPoint&)> vertical_projection;
    std::function<ProjectionJacobian(const AmbientPoint&)> projection_jacobian;
    std::function<bool(const AmbientPoint&)> in_domain;
    // Euclidean distance from v to the boundary of V; nonpositive outside V.
    std::function<double(const VerticalPoint&)> boundary_distance;
    // Proposal distribution covering U (may produce points outside U).
    std::function<AmbientPoint(RngStream&)> sample_proposal;
    std::function<std::vector<LeafNode<N>>(const VerticalPoint&, int)> leaf_measure;

    bool in_vertical(const VerticalPoint& v) const { return boundary_distance(v) > 0.0; }

    ProjectionJacobian jacobian(const AmbientPoint& x) const
    {
        if (projection_jacobian) {
            return projection_jacobian(x);
        }
        ProjectionJacobian j;
        for (int c = 0; c < N; ++c) {
            AmbientPoint e = AmbientPoint::Zero();
            e(c) = kFiniteDifferenceStep;
            j.col(c) = (vertical_projection(x + e) - vertical_projection(x - e)) / (2.0 * kFiniteDifferenceStep);
        }
        return j;
    }
};

/**
 * The fields of dX = F0(X) dt + F(X) <> dZ + eps K(X) dt.
 *
 * Empty `drift` / `perturbation` mean the zero field. The columns of `noise(x)` are F_1..F_R and
 * must be tangent to the leaf through x. `exact_jump_flow(x, z)`, when set, is the time-one map
 * of dY/ds = F(Y) z.
 */
template <int N, int R>
struct VectorFieldSet {
    using AmbientPoint = Point<N>;
    using NoiseMatrix = Eigen::Matrix<double, N, R>;
    using Jacobian = Eigen::Matrix<double, N, N>;

    std::function<AmbientPoint(const AmbientPoint&)> drift;
    std::function<NoiseMatrix(const AmbientPoint&)> noise;
    std::function<AmbientPoint(const AmbientPoint&)> perturbation;

    std::function<Jacobian(const AmbientPoint&)> drift_jacobian;
    std::function<Jacobian(const AmbientPoint&, int)> noise_jacobian;
    std::function<Jacobian(const AmbientPoint&)> perturbation_jacobian;

    std::function<AmbientPoint(const AmbientPoint&, const JumpVector<R>&)> exact_jump_flow;

    AmbientPoint eval_drift(const AmbientPoint& x) const { return drift ? drift(x) : AmbientPoint::Zero(); }
    AmbientPoint eval_perturbation(const AmbientPoint& x) const
    {
        return perturbation ? perturbation(x) : AmbientPoint::Zero();
    }
};

// Central-difference Jacobian of a vector field, used when no analytic Jacobian is supplied.
template <int N, class Field>
Eigen::Matrix<double, N, N> finite_difference_jacobian(const Field& f, const Point<N>& x)
{
    Eigen::Matrix<double, N, N> j;
    for (int c = 0; c < N; ++c) {
        Point<N> e = Point<N>::Zero();
        e(c) = kFiniteDifferenceStep;
        j.col(c) = (f(x + e) - f(x - e)) / (2.0 * kFiniteDifferenceStep);
    }
    return j;
}

template <int N, int R>
Eigen::Matrix<double, N, N> perturbation_jacobian(const VectorFieldSet<N, R>& fields, const Point<N>& x)
{
    if (fields.perturbation_jacobian) {
        return fields.perturbation_jacobian(x);
    }
    return finite_difference_jacobian<N>([&](const Point<N>& y) { return fields.eval_perturbation(y); }, x);
}

template <int N, int R>
Eigen::Matrix<double, N, N> noise_column_jacobian(const VectorFieldSet<N, R>& fields, const Point<N>& x, int column)
{
    if (fields.noise_jacobian) {
        return fields.noise_jacobian(x, column);
    }
    return finite_difference_jacobian<N>([&](const Point<N>& y) -> Point<N> { return fields.noise(y).col(column); }, x);
}

struct TangencyReport {
    double max_violation = 0.0;
    std::size_t checked = 0;
    std::size_t skipped_outside = 0;
};

// max |dPi_i(F_j(x))| over sampled points of U.
template <int N, int L, int D, int R>
TangencyReport tangency_check(const VectorFieldSet<N, R>& fields, const FoliatedChart<N, L, D>& chart,
                              std::size_t sample_count, RngStream& rng)
{
    if (sample_count == 0) {
        throw std::invalid_argument("tangency_check: sample_count must be at least 1");
    }
    if (!chart.sample_proposal || !fields.noise) {
        throw std::invalid_argument("tangency_check: chart needs a proposal sampler and fields need F");
    }
    TangencyReport report;
    for (std::size_t i = 0; i < sample_count; ++i) {
        const Point<N> x = chart.sample_proposal(rng);
        if (!chart.in_domain(x)) {
            ++report.skipped_outside;
            continue;
        }
        ++report.checked;
        const auto violation = (chart.jacobian(x) * fields.noise(x)).cwiseAbs().maxCoeff();
        report.max_violation = std::max(report.max_violation, violation);
    }
    return report;
}

enum class DerivativeBackend { Automatic, Analytic, FiniteDifference };

// dPi(K)(x): the rate of change of the vertical coordinates along the perturbation.
template <int N, int L, int D, int R>
Eigen::Matrix<double, D, 1> dpi_k(const FoliatedChart<N, L, D>& chart, const VectorFieldSet<N, R>& fields,
                                  const Point<N>& x, DerivativeBackend backend = DerivativeBackend::Automatic)
{
    if (!chart.in_domain(x)) {
        throw std::domain_error("dpi_k: point lies outside the chart domain U");
    }
    const Point<N> k = fields.eval_perturbation(x);
    const bool analytic = backend == DerivativeBackend::Analytic ||
                          (backend == DerivativeBackend::Automatic && static_cast<bool>(chart.projection_jacobian));
    if (analytic) {
        if (!chart.projection_jacobian) {
            throw std::invalid_argument("dpi_k: analytic backend requested but the chart has no Jacobian");
        }
        return chart.projection_jacobian(x) * k;
    }
    const double norm = k.norm();
    if (norm == 0.0) {
        return Eigen::Matrix<double, D, 1>::Zero();
    }
    const Point<N> step = kFiniteDifferenceStep * k / norm;
    return (chart.vertical_projection(x + step) - chart.vertical_projection(x - step)) *
           (norm / (2.0 * kFiniteDifferenceStep));
}

} // namespace marcus

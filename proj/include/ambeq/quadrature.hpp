#pragma once

#include <cmath>
#include <utility>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "ambeq/errors.hpp"

namespace ambeq {

// Library-wide quadrature budget.
inline constexpr double kQuadAbsTol = 1e-12;
inline constexpr double kQuadRelTol = 1e-10;

// Adaptive Gauss-Kronrod integration on a finite interval [a, b].
// Refinement stops once the error estimate meets the absolute tolerance
// or the relative one, whichever is laxer for the integral's magnitude;
// purely relative targets drive the refinement below machine noise on
// very short intervals. The convergence guard only rejects results whose
// estimate is catastrophically large (the estimator is pessimistic near
// endpoint singularities).
template <class F>
double integrate(F&& f, double a, double b,
                 double abs_tol = kQuadAbsTol, double rel_tol = kQuadRelTol) {
    if (a == b) return 0.0;
    using kronrod = boost::math::quadrature::gauss_kronrod<double, 15>;
    double err = 0.0;
    double l1 = 0.0;
    const double rough = kronrod::integrate(f, a, b, 0, rel_tol, &err, &l1);
    if (!std::isfinite(rough))
        throw NumericError("quadrature: non-finite integral value");
    if (rough == 0.0 || err <= abs_tol + rel_tol * std::fabs(l1)) return rough;

    const double tol = std::min(0.1, std::max(rel_tol, abs_tol / std::fabs(rough)));
    const double value = kronrod::integrate(std::forward<F>(f), a, b, 25, tol, &err, &l1);
    if (!std::isfinite(value))
        throw NumericError("quadrature: non-finite integral value");
    if (err > 1e-3 * std::max(1.0, std::fabs(l1)))
        throw NumericError("quadrature: did not converge");
    return value;
}

} // namespace ambeq

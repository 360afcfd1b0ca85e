#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

#include <boost/math/tools/toms748_solve.hpp>

#include "ambeq/errors.hpp"

namespace ambeq {

// Root of a continuous function on a bracketing interval [lo, hi]
// (f(lo) and f(hi) of opposite sign). TOMS 748 bracketing iteration.
template <class F>
double find_root(F&& f, double lo, double hi, double f_lo, double f_hi,
                 int significant_bits = 50) {
    if (f_lo == 0.0) return lo;
    if (f_hi == 0.0) return hi;
    if ((f_lo > 0.0) == (f_hi > 0.0))
        throw NumericError("find_root: interval does not bracket a root");
    boost::math::tools::eps_tolerance<double> tol(
        static_cast<unsigned>(significant_bits));
    std::uintmax_t max_iter = 200;
    const auto r = boost::math::tools::toms748_solve(
        std::forward<F>(f), lo, hi, f_lo, f_hi, tol, max_iter);
    return 0.5 * (r.first + r.second);
}

template <class F>
double find_root(F&& f, double lo, double hi, int significant_bits = 50) {
    const double f_lo = f(lo);
    const double f_hi = f(hi);
    return find_root(std::forward<F>(f), lo, hi, f_lo, f_hi, significant_bits);
}

} // namespace ambeq

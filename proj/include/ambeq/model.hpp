#pragma once

#include <cmath>
#include <vector>

#include "ambeq/errors.hpp"

namespace ambeq {

// Observable-market constants. Rates and volatilities are per-year
// decimals, time is measured in years.
struct MarketParams {
    double r = 0.0;        // risk-free rate
    double sigma = 0.0;    // stock volatility, > 0
    double horizon = 0.0;  // investment horizon T, > 0

    double sigma2() const { return sigma * sigma; }
    void validate() const;
};

// Gaussian prior law of the unknown drift.
struct GaussianPrior {
    double beta0 = 0.0;   // prior mean
    double sigma0 = 0.0;  // prior standard deviation, > 0

    double var() const { return sigma0 * sigma0; }
    void validate() const;
};

struct PriorAtom {
    double z = 0.0;  // drift value
    double w = 0.0;  // probability
};

// Finitely supported prior law of the unknown drift.
struct DiscretePrior {
    std::vector<PriorAtom> atoms;

    double mean() const;
    double variance() const;
    void validate() const;
};

// Risk and ambiguity attitudes: CARA coefficient k and the power alpha
// of the ambiguity transform.
struct Preferences {
    double k = 1.0;
    double alpha = 1.0;

    void validate() const;
};

// Posterior state of the drift at time t: mean and variance.
struct BeliefState {
    double t = 0.0;
    double beta = 0.0;
    double zeta = 0.0;
};

// The alpha = 0 and alpha = 1 branches are selected within this tolerance
// to avoid catastrophic cancellation in (-u)^alpha / alpha.
inline constexpr double kAlphaBranchTol = 1e-12;

inline bool alpha_is_zero(double alpha) { return std::fabs(alpha) < kAlphaBranchTol; }
inline bool alpha_is_one(double alpha) { return std::fabs(alpha - 1.0) < kAlphaBranchTol; }

// CARA utility -(1/k) e^{-kx}. Strictly increasing and concave; k > 0.
double utility(double x, double k);

// Ambiguity transform of a (negative) utility value:
//   alpha != 0:  -(1/alpha) (-u)^alpha
//   alpha  = 0:  -log(-u)
double phi(double u, double alpha);

// phi'(u) = (-u)^(alpha - 1), u < 0.
double phi_prime(double u, double alpha);

// Monetary-scale value V(x) = phi(utility(x)):
//   alpha != 0:  -(1/(alpha k^alpha)) e^{-k alpha x}
//   alpha  = 0:  k x + log k
double monetary_v(double x, double k, double alpha);

// Exponential-quadratic moments of a normal variable xi ~ N(mu, var):
//   e0 = E[e^{a xi^2 + b xi}],  e1 = E[xi e^{a xi^2 + b xi}].
// Finite only when 2 a var < 1; otherwise the moment diverges.
struct GaussianExpMoments {
    double e0 = 0.0;
    double e1 = 0.0;
};

GaussianExpMoments gaussian_exp_moments(double mu, double var, double a, double b);
double gaussian_exp_moment(double mu, double var, double a, double b);
double gaussian_exp_moment_x(double mu, double var, double a, double b);

} // namespace ambeq

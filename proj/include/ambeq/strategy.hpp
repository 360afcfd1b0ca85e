#pragma once

#include "ambeq/odes.hpp"

namespace ambeq {

// Dollar positions: total equilibrium holding, its myopic part, and the
// two hedging demands expressed as ratios to the myopic part.
struct StrategyDecomposition {
    double pi_total = 0.0;
    double pi_myopic = 0.0;
    double h_z = 0.0;     // hedge against drift uncertainty
    double h_beta = 0.0;  // hedge against revealing-process risk
};

// Inside value under the quadratic-exponent ansatz: g < 0 and the
// exponent f with g = -(1/k) exp(-k e^{r(T-t)} x + f).
struct AnsatzValue {
    double g = 0.0;
    double f = 0.0;
};

// Generator residual scaled by |g|, plus the magnitude of the individual
// terms entering it (for relative tolerance checks).
struct ResidualValue {
    double value = 0.0;
    double term_scale = 0.0;
};

// Hedging ratios from point values of (m1, m2, m3) at time t.
StrategyDecomposition hedge_ratios_from(double t, double beta, double m1, double m2,
                                        double m3, const MarketParams& market,
                                        const GaussianPrior& prior,
                                        const Preferences& prefs);

// Equilibrium dollar amount in the stock:
//   pi*(t, x, beta) = e^{-r(T-t)} / (k sigma^2) * (a1 + zeta m1) * (beta - r).
// Linear in beta, independent of wealth x.
double equilibrium_pi(double t, double x, double beta, const OdeSolution& sol,
                      const MarketParams& market, const Preferences& prefs);

// Myopic/hedging decomposition of the equilibrium strategy at (t, beta).
StrategyDecomposition decompose(double t, double beta, const OdeSolution& sol,
                                const MarketParams& market, const Preferences& prefs);

// Inside expected utility of the equilibrium strategy given the drift
// realization z, evaluated from the ansatz.
AnsatzValue g_value(double t, double x, double beta, double z, const OdeSolution& sol,
                    const MarketParams& market, const Preferences& prefs);

// Generator applied to the ansatz value divided by |g|, with time
// derivatives of the m_i taken from the ODE right-hand sides. Vanishes at
// pi = pi*; as a function of pi it is a downward parabola.
ResidualValue pde_residual(double t, double x, double beta, double z, double pi_value,
                           const OdeSolution& sol, const MarketParams& market,
                           const Preferences& prefs);

// Candidate maximizer of the first-order condition, assembled from the
// Gaussian exponential-quadratic moments of the conditional drift
// Z | beta_t = beta ~ N(beta, zeta(t)). Coincides with equilibrium_pi.
double foc_maximizer(double t, double x, double beta, const OdeSolution& sol,
                     const MarketParams& market, const Preferences& prefs);

// The first-order-condition maximand E[ phi'(g^Z) A g^Z | beta ], scaled by
// E[ phi'(g^Z) |g^Z| | beta ]. A downward parabola in pi with maximum 0 at
// the equilibrium strategy: conditional on a single drift value a spike
// deviation can raise the inside value, but the ambiguity-weighted average
// cannot improve.
double foc_objective(double t, double x, double beta, double pi_value,
                     const OdeSolution& sol, const MarketParams& market,
                     const Preferences& prefs);

// Full-information benchmark: the optimal CARA holding when the drift z
// is known, (z - r) / (k e^{r(T-t)} sigma^2).
double inside_optimal_pi(double t, double z, const MarketParams& market,
                         const Preferences& prefs);

// Value of the full-information benchmark,
//   -(1/k) exp[-k e^{r(T-t)} x + (t - T)(z - r)^2 / (2 sigma^2)].
double inside_optimal_value(double t, double x, double z, const MarketParams& market,
                            const Preferences& prefs);

// Smallest constant C certifying the linear-growth admissibility bound
//   |pi*(t, x, beta)| <= C (1 + |beta| + sqrt(log(1 + |x|))).
double admissibility_bound(const OdeSolution& sol, const MarketParams& market,
                           const Preferences& prefs);

// Analytic value of the two-layer objective at the equilibrium strategy,
//   E[ phi(g^Z(t, x, beta)) | beta ], via the Gaussian moment formulas.
double smooth_objective_value(double t, double x, double beta, const OdeSolution& sol,
                              const MarketParams& market, const Preferences& prefs);

} // namespace ambeq

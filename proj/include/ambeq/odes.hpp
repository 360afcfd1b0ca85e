#pragma once

#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ambeq/model.hpp"

namespace ambeq {

// Posterior variance of the drift at time t:
//   zeta(t) = sigma^2 sigma0^2 / (sigma^2 + t sigma0^2).
// Strictly decreasing in t. Pure formula; callers validate parameters.
double zeta(double t, const MarketParams& market, const GaussianPrior& prior);

// Coefficient functions of the backward system,
//   a1 = (1 + zeta m2)(zeta^-1 + alpha m2) / (zeta^-1 - alpha m3),
//   a2 = alpha (1 + zeta m2) / (zeta^-1 - alpha m3).
// The denominator must stay positive on the whole horizon.
double coeff_a1(double t, double m2, double m3, double alpha,
                const MarketParams& market, const GaussianPrior& prior);
double coeff_a2(double t, double m2, double m3, double alpha,
                const MarketParams& market, const GaussianPrior& prior);

// The integral I(alpha) = int_0^inf e^-x (1 + (1-alpha) x)^(alpha/(1-alpha)) dx
// entering the solvability threshold, by two independent routes:
// truncation at x = 80 plus an exponential tail estimate, and the
// substitution u = e^-x mapping onto (0, 1].
double ambiguity_threshold_integral(double alpha);
double ambiguity_threshold_integral_substituted(double alpha);

// The unique negative root alpha* of
//   (1 + sigma0^-2 sigma^2 T^-1) I(alpha) = 1.
// Closed-form solutions of the backward system exist for alpha > alpha*.
double alpha_star(const MarketParams& market, const GaussianPrior& prior);

// Whether alpha lies strictly above alpha* for these parameters. Cheap
// predicate form: evaluates the threshold equation at alpha instead of
// solving for the root, which runs off to -infinity as sigma0 -> 0.
bool alpha_is_solvable(double alpha, const MarketParams& market,
                       const GaussianPrior& prior);

// psi(x) = e^{x/(1-x)} (1-x)^{(alpha-2)/(alpha-1)} (1-alpha x)^{alpha/(alpha-1)}
// on [0, 1/(alpha v 1)); alpha must not be 0 or 1.
double psi(double x, double alpha);

// Psi(x) = int_0^x 1/psi(s) ds, strictly increasing on [0, 1/(alpha v 1)].
double Psi(double x, double alpha);

// Inverse of Psi by bracketed root finding. Throws ValidityError when v
// exceeds the range of Psi (possible only when alpha <= alpha*).
double Psi_inverse(double v, double alpha);

// Cached Psi evaluations for one alpha: anchor nodes built lazily, each
// query integrates only from the nearest anchor. Not thread-safe during
// construction of new anchors; solvers use one instance single-threaded.
class SpecialFnTable {
public:
    explicit SpecialFnTable(double alpha);

    double alpha() const { return alpha_; }
    double domain_sup() const { return domain_sup_; }
    double psi(double x) const;
    double value(double x);    // Psi(x)
    double inverse(double v);  // Psi^{-1}(v)
    double range_sup();        // Psi at the domain endpoint; +inf for alpha >= 1

    // Solvability threshold for the (sigma, sigma0, T) triple this table
    // is used with; filled by the solvers.
    double alpha_star = std::numeric_limits<double>::quiet_NaN();

private:
    double inv_psi(double x) const;
    double anchor_value(std::size_t j);

    double alpha_ = 0.0;
    double domain_sup_ = 1.0;
    double anchor_dx_ = 0.0;
    std::vector<std::pair<double, double>> anchors_;  // ascending (x, Psi(x))
    double range_sup_ = -1.0;                         // < 0 while unknown
};

// Closed-form solution of the (m2, m3) pair at time t. Branches:
// logarithmic form at alpha = 0, rational form at alpha = 1, Psi-inversion
// otherwise. Requires alpha > alpha*.
std::pair<double, double> closed_form_m2_m3(double t, double alpha,
                                            const MarketParams& market,
                                            const GaussianPrior& prior);

// m1 by the dedicated printed forms at alpha in {0, 1}; generic quadrature
// otherwise.
double m1_value(double t, double alpha, const MarketParams& market,
                const GaussianPrior& prior);

// m1(t) = sigma^-2 zeta(t)^-2 int_t^T zeta^2(s) a1^2(s) ds by adaptive
// quadrature over the closed-form coefficients, for any admissible alpha.
double m1_quadrature(double t, double alpha, const MarketParams& market,
                     const GaussianPrior& prior);

// m4 = -r (m1 + m2), m5 = -r (m2 + m3).
std::pair<double, double> m4_m5_values(double m1, double m2, double m3, double r);

// m6(t) = sigma^-2 int_t^T [ a2^2 m5^2 / 2 - r^2 / 2 + zeta^2 m1 / 2 + r zeta m4 ] ds.
double m6_value(double t, double alpha, const MarketParams& market,
                const GaussianPrior& prior);

struct OdeState {
    double m1 = 0.0, m2 = 0.0, m3 = 0.0, m4 = 0.0, m5 = 0.0, m6 = 0.0;
};

// Right-hand side of the backward system at (t, state). Throws
// ValidityError naming t if zeta(t)^-1 - alpha m3 is not positive.
OdeState ode_rhs(double t, const OdeState& s, double alpha,
                 const MarketParams& market, const GaussianPrior& prior);

// Solution of the backward system on a uniform grid over [0, T].
struct OdeSolution {
    MarketParams market;
    GaussianPrior prior;
    double alpha = 1.0;
    std::string method;  // "closed-form" or "rk4"

    std::vector<double> t;  // ascending, uniform
    std::vector<double> m1, m2, m3, m4, m5, m6;
    std::vector<double> a1, a2, zeta;  // coefficients cached at the nodes
    std::vector<std::string> warnings;

    std::size_t size() const { return t.size(); }
    double horizon() const { return t.empty() ? 0.0 : t.back(); }
    double step() const;
    OdeState node(std::size_t i) const;

    // Cubic Hermite interpolation between nodes, with slopes taken from
    // the ODE right-hand sides so that residual checks see consistent
    // time derivatives.
    OdeState state_at(double time) const;
    double zeta_at(double time) const;
    double a1_at(double time) const;
    double a2_at(double time) const;

    // a1 + zeta m1 at the interpolated state; the feedback coefficient of
    // the equilibrium strategy. Cheaper than state_at: only m1, m2, m3 are
    // interpolated and the node coefficients are reused for the slopes.
    double strategy_coeff_at(double time) const;
};

// Closed-form route: Proposition-style branch formulas for (m2, m3),
// cumulative Simpson quadrature for m1 and m6, identities for m4, m5.
OdeSolution solve_ode_closed_form(const MarketParams& market,
                                  const GaussianPrior& prior,
                                  const Preferences& prefs, int n_steps);

// Independent oracle: classical 4th-order Runge-Kutta integrating the
// full six-equation system backward from t = T. n_steps >= 1000.
OdeSolution solve_ode_numeric(const MarketParams& market,
                              const GaussianPrior& prior,
                              const Preferences& prefs, int n_steps);

} // namespace ambeq

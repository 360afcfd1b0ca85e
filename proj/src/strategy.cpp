#include "ambeq/strategy.hpp"

#include <cmath>

namespace ambeq {

namespace {

void check_consistent(const OdeSolution& sol, const MarketParams& market,
                      const Preferences& prefs) {
    prefs.validate();
    if (market.r != sol.market.r || market.sigma != sol.market.sigma ||
        market.horizon != sol.market.horizon)
        throw ParameterError("strategy: market parameters do not match the ODE solution");
    if (prefs.alpha != sol.alpha)
        throw ParameterError("strategy: alpha does not match the ODE solution");
}

double discount(double t, const MarketParams& market) {
    return std::exp(-market.r * (market.horizon - t));
}

// CARA scale of the exponent, b(t) = k e^{r(T-t)}.
double b_of(double t, const MarketParams& market, const Preferences& prefs) {
    return prefs.k * std::exp(market.r * (market.horizon - t));
}

} // namespace

StrategyDecomposition hedge_ratios_from(double t, double beta, double m1, double m2,
                                        double m3, const MarketParams& market,
                                        const GaussianPrior& prior,
                                        const Preferences& prefs) {
    const double z = zeta(t, market, prior);
    const double denom = 1.0 / z - prefs.alpha * m3;
    if (!(denom > 0.0))
        throw ValidityError("hedge ratios: zeta^-1 - alpha m3 is not positive");
    StrategyDecomposition d;
    d.pi_myopic = discount(t, market) * (beta - market.r) / (prefs.k * market.sigma2());
    d.h_z = prefs.alpha * (m2 + m3) / denom;
    d.h_beta = z * ((m2 / z + prefs.alpha * m2 * m2) / denom + m1);
    d.pi_total = d.pi_myopic * (1.0 + d.h_z + d.h_beta);
    return d;
}

double equilibrium_pi(double t, double /*x*/, double beta, const OdeSolution& sol,
                      const MarketParams& market, const Preferences& prefs) {
    check_consistent(sol, market, prefs);
    const OdeState s = sol.state_at(t);
    const double a1 = coeff_a1(t, s.m2, s.m3, sol.alpha, market, sol.prior);
    const double z = zeta(t, market, sol.prior);
    return discount(t, market) / (prefs.k * market.sigma2()) * (a1 + z * s.m1) *
           (beta - market.r);
}

StrategyDecomposition decompose(double t, double beta, const OdeSolution& sol,
                                const MarketParams& market, const Preferences& prefs) {
    check_consistent(sol, market, prefs);
    const OdeState s = sol.state_at(t);
    return hedge_ratios_from(t, beta, s.m1, s.m2, s.m3, market, sol.prior, prefs);
}

AnsatzValue g_value(double t, double x, double beta, double z, const OdeSolution& sol,
                    const MarketParams& market, const Preferences& prefs) {
    check_consistent(sol, market, prefs);
    const OdeState s = sol.state_at(t);
    AnsatzValue v;
    v.f = 0.5 * s.m1 * beta * beta + s.m2 * beta * z + 0.5 * s.m3 * z * z + s.m4 * beta +
          s.m5 * z + s.m6;
    v.g = -std::exp(-b_of(t, market, prefs) * x + v.f) / prefs.k;
    return v;
}

ResidualValue pde_residual(double t, double /*x*/, double beta, double z, double pi_value,
                           const OdeSolution& sol, const MarketParams& market,
                           const Preferences& prefs) {
    check_consistent(sol, market, prefs);
    const OdeState s = sol.state_at(t);
    const OdeState d = ode_rhs(t, s, sol.alpha, market, sol.prior);
    const double zt = zeta(t, market, sol.prior);
    const double b = b_of(t, market, prefs);
    const double s2 = market.sigma2();
    const double r = market.r;
    const double f_beta = s.m1 * beta + s.m2 * z + s.m4;

    // the generator applied to the ansatz, divided by g; the wealth terms
    // r x (g_x/g) and the -b'(t) x part of g_t/g cancel exactly
    const double terms[] = {
        0.5 * d.m1 * beta * beta,
        d.m2 * beta * z,
        0.5 * d.m3 * z * z,
        d.m4 * beta,
        d.m5 * z,
        d.m6,
        -b * pi_value * (z - r),
        zt * f_beta * (z - beta) / s2,
        -zt * f_beta * b * pi_value,
        0.5 * b * b * s2 * pi_value * pi_value,
        0.5 * zt * zt / s2 * s.m1,
        0.5 * zt * zt / s2 * f_beta * f_beta,
    };
    double q = 0.0;
    double scale = 1.0;
    for (double term : terms) {
        q += term;
        scale += std::fabs(term);
    }
    // g < 0, so the generator scaled by |g| is -q
    return ResidualValue{-q, scale};
}

double foc_maximizer(double t, double /*x*/, double beta, const OdeSolution& sol,
                     const MarketParams& market, const Preferences& prefs) {
    check_consistent(sol, market, prefs);
    const OdeState s = sol.state_at(t);
    const double zt = zeta(t, market, sol.prior);
    const double alpha = sol.alpha;

    // conditional drift Z | beta ~ N(beta, zeta); the relevant moments are
    // those of exp(a Z^2 + b Z) with the exponent read off alpha f^Z
    const double a = 0.5 * alpha * s.m3;
    const double b = alpha * (s.m2 * beta + s.m5);
    const GaussianExpMoments mom = gaussian_exp_moments(beta, zt, a, b);
    const double ratio = mom.e1 / mom.e0;  // E[Z e^{alpha f^Z}] / E[e^{alpha f^Z}]

    const double pi_a = ratio - beta;
    const double pi_b = zt * (s.m2 * ratio + s.m1 * beta + s.m4);
    return discount(t, market) / (prefs.k * market.sigma2()) *
           ((beta - market.r) + pi_a + pi_b);
}

double foc_objective(double t, double /*x*/, double beta, double pi_value,
                     const OdeSolution& sol, const MarketParams& market,
                     const Preferences& prefs) {
    check_consistent(sol, market, prefs);
    const OdeState s = sol.state_at(t);
    const OdeState d = ode_rhs(t, s, sol.alpha, market, sol.prior);
    const double zt = zeta(t, market, sol.prior);
    const double b = b_of(t, market, prefs);
    const double s2 = market.sigma2();
    const double r = market.r;
    const double alpha = sol.alpha;

    // phi'(g^Z) A g^Z = -k^-alpha e^{alpha(-bx+f^Z)} Q(t, pi, beta, Z); the
    // x-dependent factor cancels under the scaling, leaving tilted Gaussian
    // moments of the quadratic Q in Z
    const double a_coef = 0.5 * alpha * s.m3;
    const double b_coef = alpha * (s.m2 * beta + s.m5);
    const double denom = 1.0 - 2.0 * a_coef * zt;
    if (!(denom > 0.0))
        throw ValidityError("foc_objective: divergent conditional moment");
    // tilted law of Z: still Gaussian, with these mean and variance
    const double var_t = zt / denom;
    const double mean_t = (beta + b_coef * zt) / denom;
    const double ez = mean_t;
    const double ez2 = mean_t * mean_t + var_t;

    // E[Q(Z)] under the tilted law, grouped by powers of Z
    const double f_const = s.m1 * beta + s.m4;
    const double c0 = 0.5 * d.m1 * beta * beta + d.m4 * beta + d.m6 + b * pi_value * r -
                      zt * f_const * (beta / s2 + b * pi_value) +
                      0.5 * b * b * s2 * pi_value * pi_value +
                      0.5 * zt * zt / s2 * (s.m1 + f_const * f_const);
    const double c1 = d.m2 * beta + d.m5 - b * pi_value +
                      zt * f_const / s2 +
                      zt * s.m2 * (-beta / s2 - b * pi_value) +
                      zt * zt / s2 * f_const * s.m2;
    const double c2 = 0.5 * d.m3 + zt * s.m2 / s2 + 0.5 * zt * zt / s2 * s.m2 * s.m2;
    const double expected_q = c0 + c1 * ez + c2 * ez2;
    return -expected_q;  // scaled by E[phi'(g)(-g)] > 0, g < 0
}

double inside_optimal_pi(double t, double z, const MarketParams& market,
                         const Preferences& prefs) {
    prefs.validate();
    return (z - market.r) / (b_of(t, market, prefs) * market.sigma2());
}

double inside_optimal_value(double t, double x, double z, const MarketParams& market,
                            const Preferences& prefs) {
    prefs.validate();
    const double premium = z - market.r;
    return -std::exp(-b_of(t, market, prefs) * x +
                     0.5 * (t - market.horizon) * premium * premium / market.sigma2()) /
           prefs.k;
}

double admissibility_bound(const OdeSolution& sol, const MarketParams& market,
                           const Preferences& prefs) {
    check_consistent(sol, market, prefs);
    double best = 0.0;
    for (std::size_t i = 0; i < sol.size(); ++i) {
        const double coeff = std::fabs(sol.a1[i] + sol.zeta[i] * sol.m1[i]);
        const double c = discount(sol.t[i], market) * coeff *
                         std::max(1.0, std::fabs(market.r)) / (prefs.k * market.sigma2());
        best = std::max(best, c);
    }
    return best;
}

double smooth_objective_value(double t, double x, double beta, const OdeSolution& sol,
                              const MarketParams& market, const Preferences& prefs) {
    check_consistent(sol, market, prefs);
    const OdeState s = sol.state_at(t);
    const double zt = zeta(t, market, sol.prior);
    const double alpha = sol.alpha;
    const double b = b_of(t, market, prefs);

    if (alpha_is_zero(alpha)) {
        // phi(g) = log k + b x - f^Z; only E[f^Z | beta] enters
        const double ef = 0.5 * s.m1 * beta * beta + s.m2 * beta * beta +
                          0.5 * s.m3 * (beta * beta + zt) + s.m4 * beta + s.m5 * beta + s.m6;
        return std::log(prefs.k) + b * x - ef;
    }
    const double a_coef = 0.5 * alpha * s.m3;
    const double b_coef = alpha * (s.m2 * beta + s.m5);
    const double m0 = gaussian_exp_moment(beta, zt, a_coef, b_coef);
    const double c = -alpha * std::log(prefs.k) - alpha * b * x +
                     alpha * (0.5 * s.m1 * beta * beta + s.m4 * beta + s.m6);
    return -std::exp(c) * m0 / alpha;
}

} // namespace ambeq

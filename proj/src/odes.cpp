#include "ambeq/odes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include "ambeq/quadrature.hpp"
#include "ambeq/rootfind.hpp"

namespace ambeq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string format_time(double t) {
    std::ostringstream os;
    os.precision(12);
    os << t;
    return os.str();
}

} // namespace

double zeta(double t, const MarketParams& market, const GaussianPrior& prior) {
    const double s2 = market.sigma2();
    const double s02 = prior.var();
    return s2 * s02 / (s2 + t * s02);
}

namespace {

double a_denominator(double zeta_t, double m3, double alpha, double t) {
    const double denom = 1.0 / zeta_t - alpha * m3;
    if (!(denom > 0.0))
        throw ValidityError("coefficient denominator zeta^-1 - alpha m3 is not positive at t = " +
                            format_time(t));
    return denom;
}

} // namespace

double coeff_a1(double t, double m2, double m3, double alpha,
                const MarketParams& market, const GaussianPrior& prior) {
    const double z = zeta(t, market, prior);
    const double denom = a_denominator(z, m3, alpha, t);
    return (1.0 + z * m2) * (1.0 / z + alpha * m2) / denom;
}

double coeff_a2(double t, double m2, double m3, double alpha,
                const MarketParams& market, const GaussianPrior& prior) {
    const double z = zeta(t, market, prior);
    const double denom = a_denominator(z, m3, alpha, t);
    return alpha * (1.0 + z * m2) / denom;
}

// ---------------------------------------------------------------------------
// Solvability threshold alpha*
// ---------------------------------------------------------------------------

double ambiguity_threshold_integral(double alpha) {
    if (!(alpha < 1.0))
        throw ParameterError("ambiguity_threshold_integral: alpha must be below 1");
    const double p = alpha / (1.0 - alpha);
    const auto f = [=](double x) { return std::exp(-x + p * std::log1p((1.0 - alpha) * x)); };
    const double cutoff = 80.0;  // integrand <= e^-x, far below 1e-16 here
    const double main = integrate(f, 0.0, cutoff);
    const double tail = f(cutoff);  // int_X^inf e^-x g(x) dx ~ g(X) e^-X, g slowly varying
    return main + tail;
}

double ambiguity_threshold_integral_substituted(double alpha) {
    if (!(alpha < 1.0))
        throw ParameterError("ambiguity_threshold_integral_substituted: alpha must be below 1");
    const double p = alpha / (1.0 - alpha);
    const auto g = [=](double u) {
        return std::exp(p * std::log1p((1.0 - alpha) * (-std::log(u))));
    };
    // split at 0.01: the logarithmic left edge is integrated separately
    const double eps = 1e-12;  // remaining mass below eps * g(eps) ~ 1e-13
    return integrate(g, eps, 1e-2) + integrate(g, 1e-2, 1.0) + 0.5 * eps * g(eps);
}

double alpha_star(const MarketParams& market, const GaussianPrior& prior) {
    market.validate();
    prior.validate();
    const double prefactor = 1.0 + market.sigma2() / (prior.var() * market.horizon);
    const auto residual = [&](double a) {
        return prefactor * ambiguity_threshold_integral(a) - 1.0;
    };
    double hi = 0.0;
    double f_hi = prefactor - 1.0;  // I(0) = 1, so residual(0) > 0
    double lo = -1.0;
    double f_lo = residual(lo);
    while (f_lo > 0.0) {
        hi = lo;
        f_hi = f_lo;
        lo *= 2.0;
        if (lo < -1e6)
            throw NumericError("alpha_star: root below -1e6 (near-degenerate prior); "
                               "use the solvability predicate instead");
        f_lo = residual(lo);
    }
    return find_root(residual, lo, hi, f_lo, f_hi, 52);
}

bool alpha_is_solvable(double alpha, const MarketParams& market,
                       const GaussianPrior& prior) {
    market.validate();
    prior.validate();
    if (alpha >= 0.0) return true;  // alpha* is strictly negative
    const double prefactor = 1.0 + market.sigma2() / (prior.var() * market.horizon);
    return prefactor * ambiguity_threshold_integral(alpha) > 1.0;
}

// ---------------------------------------------------------------------------
// psi, Psi and its inverse
// ---------------------------------------------------------------------------

namespace {

double psi_domain_sup(double alpha) { return 1.0 / std::max(alpha, 1.0); }

void check_psi_alpha(double alpha) {
    if (alpha_is_zero(alpha) || alpha_is_one(alpha))
        throw ParameterError("psi: alpha must not be 0 or 1");
}

} // namespace

double psi(double x, double alpha) {
    check_psi_alpha(alpha);
    const double sup = psi_domain_sup(alpha);
    if (!(x >= 0.0) || !(x < sup))
        throw ValidityError("psi: x outside [0, 1/(alpha v 1))");
    const double q1 = (alpha - 2.0) / (alpha - 1.0);
    const double q2 = alpha / (alpha - 1.0);
    return std::exp(x / (1.0 - x) + q1 * std::log1p(-x) + q2 * std::log1p(-alpha * x));
}

SpecialFnTable::SpecialFnTable(double alpha) : alpha_(alpha) {
    check_psi_alpha(alpha);
    domain_sup_ = psi_domain_sup(alpha);
    anchor_dx_ = domain_sup_ / 64.0;
    anchors_.push_back({0.0, 0.0});
}

double SpecialFnTable::inv_psi(double x) const {
    // 1/psi, assembled as a single exponential of summed log terms so the
    // essential decay at x -> 1 (alpha < 1) wins before overflow.
    const double q1 = (alpha_ - 2.0) / (alpha_ - 1.0);
    const double q2 = alpha_ / (alpha_ - 1.0);
    const double omx = 1.0 - x;
    if (!(omx > 0.0)) return 0.0;  // alpha < 1 endpoint limit
    const double om_ax = 1.0 - alpha_ * x;
    if (!(om_ax > 0.0))
        throw ValidityError("psi: x beyond the 1/alpha pole");
    return std::exp(-x / omx - q1 * std::log(omx) - q2 * std::log(om_ax));
}

double SpecialFnTable::psi(double x) const { return ambeq::psi(x, alpha_); }

double SpecialFnTable::anchor_value(std::size_t j) {
    // Extend the canonical anchor sequence up to index j. Anchors sit at
    // k * dx for k <= 63, then approach the domain endpoint geometrically.
    // Returns +inf without extending once the endpoint cannot be approached
    // any closer; callers check anchors_.size() for exhaustion.
    while (anchors_.size() <= j) {
        const auto& last = anchors_.back();
        double next_x;
        if (anchors_.size() < 64) {
            next_x = static_cast<double>(anchors_.size()) * anchor_dx_;
        } else if (alpha_ < 1.0 && anchors_.size() == 64) {
            next_x = domain_sup_;
        } else {
            const double gap = domain_sup_ - last.first;
            if (gap <= 2e-12) return kInf;
            next_x = domain_sup_ - 0.5 * gap;
        }
        if (next_x <= last.first) return kInf;
        double v = last.second;
        if (std::isfinite(v)) {
            const auto f = [this](double s) { return inv_psi(s); };
            v += integrate(f, last.first, next_x);
        }
        anchors_.push_back({next_x, v});
    }
    return anchors_[j].second;
}

double SpecialFnTable::value(double x) {
    if (!(x >= 0.0) || !(x <= domain_sup_))
        throw ValidityError("Psi: x outside [0, 1/(alpha v 1)]");
    if (x == 0.0) return 0.0;
    if (alpha_ >= 1.0 && domain_sup_ - x < 1e-12) return kInf;
    if (alpha_ < 1.0 && x == domain_sup_) return range_sup();
    // integrate from the highest anchor at or below x
    std::size_t j = std::min<std::size_t>(63, static_cast<std::size_t>(x / anchor_dx_));
    anchor_value(j);
    while (j + 1 < anchors_.size() && anchors_[j + 1].first <= x) ++j;
    const auto& base = anchors_[j];
    const auto f = [this](double s) { return inv_psi(s); };
    return base.second + integrate(f, base.first, x);
}

double SpecialFnTable::range_sup() {
    if (alpha_ >= 1.0) return kInf;
    if (range_sup_ < 0.0) {
        anchor_value(63);
        const auto f = [this](double s) { return inv_psi(s); };
        range_sup_ = anchors_[63].second + integrate(f, anchors_[63].first, domain_sup_);
    }
    return range_sup_;
}

double SpecialFnTable::inverse(double v) {
    if (!(v >= 0.0))
        throw ParameterError("Psi_inverse: v must be nonnegative");
    if (v == 0.0) return 0.0;
    if (alpha_ < 1.0 && v > range_sup())
        throw ValidityError("Psi_inverse: v exceeds the range of Psi "
                            "(alpha is at or below the solvability threshold alpha*)");

    // find bracketing anchors
    std::size_t j = 0;
    bool exhausted = false;
    for (;;) {
        const double next = anchor_value(j + 1);
        if (anchors_.size() <= j + 1) {
            exhausted = true;  // no anchor beyond j can be materialized
            break;
        }
        if (next >= v) break;
        ++j;
    }
    if (exhausted && alpha_ >= 1.0)
        throw ValidityError("Psi_inverse: v beyond the resolvable range near the pole");
    double lo = anchors_[j].first;
    double f_lo = anchors_[j].second - v;
    double hi = exhausted ? domain_sup_ : anchors_[j + 1].first;
    double f_hi = exhausted ? range_sup() - v : anchors_[j + 1].second - v;
    // shave an infinite upper bracket down to a finite one
    while (!std::isfinite(f_hi)) {
        const double mid = 0.5 * (lo + hi);
        const double f_mid = value(mid) - v;
        if (f_mid >= 0.0) {
            hi = mid;
            f_hi = f_mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
        if (hi - lo < 1e-15) return lo;
    }
    if (f_hi < 0.0) return hi;  // v == range_sup within quadrature noise
    const auto g = [&](double x) { return value(x) - v; };
    return find_root(g, lo, hi, f_lo, f_hi, 50);
}

double Psi(double x, double alpha) {
    SpecialFnTable table(alpha);
    return table.value(x);
}

double Psi_inverse(double v, double alpha) {
    SpecialFnTable table(alpha);
    return table.inverse(v);
}

// ---------------------------------------------------------------------------
// Closed-form solution engine
// ---------------------------------------------------------------------------

namespace {

// Evaluates the closed-form (m2, m3) pair and derived quantities for one
// fixed (market, prior, alpha). Memoizes by time: the grid builders ask
// for the same nodes repeatedly.
class ClosedFormEngine {
public:
    ClosedFormEngine(const MarketParams& market, const GaussianPrior& prior, double alpha)
        : market_(market), prior_(prior), alpha_(alpha), s2_(market.sigma2()),
          horizon_(market.horizon), zeta_T_(ambeq::zeta(market.horizon, market, prior)) {
        if (!alpha_is_zero(alpha_) && !alpha_is_one(alpha_)) table_.emplace(alpha_);
    }

    std::pair<double, double> m2m3(double t) {
        auto it = cache_.find(t);
        if (it != cache_.end()) return it->second;
        auto value = compute_m2m3(t);
        cache_.emplace(t, value);
        return value;
    }

    double a1(double t) {
        const auto [m2, m3] = m2m3(t);
        return coeff_a1(t, m2, m3, alpha_, market_, prior_);
    }

    double a2(double t) {
        const auto [m2, m3] = m2m3(t);
        return coeff_a2(t, m2, m3, alpha_, market_, prior_);
    }

    double m1_quad(double t) {
        const auto f = [this](double s) {
            const double z = ambeq::zeta(s, market_, prior_);
            const double a = a1(s);
            return z * z * a * a;
        };
        const double zt = ambeq::zeta(t, market_, prior_);
        return integrate(f, t, horizon_) / (s2_ * zt * zt);
    }

    double m6_quad(double t) {
        const double r = market_.r;
        const auto g = [this, r](double s) {
            const auto [m2, m3] = m2m3(s);
            const double m1 = m1_quad(s);
            const auto [m4, m5] = m4_m5_values(m1, m2, m3, r);
            const double z = ambeq::zeta(s, market_, prior_);
            const double a2v = a2(s);
            return 0.5 * a2v * a2v * m5 * m5 - 0.5 * r * r + 0.5 * z * z * m1 + r * z * m4;
        };
        return integrate(g, t, horizon_) / s2_;
    }

    SpecialFnTable* table() { return table_ ? &*table_ : nullptr; }

private:
    std::pair<double, double> compute_m2m3(double t) {
        if (!(t >= -1e-12) || !(t <= horizon_ * (1.0 + 1e-12)))
            throw ValidityError("closed form: t outside [0, T]");
        t = std::clamp(t, 0.0, horizon_);
        const double zt = ambeq::zeta(t, market_, prior_);
        if (alpha_is_zero(alpha_)) {
            const double lg = std::log(zt / zeta_T_);
            const double m2 = (1.0 / (1.0 + lg) - 1.0) / zt;
            const auto f = [](double x) { return std::exp(-x) / ((1.0 + x) * (1.0 + x)); };
            const double m3 = integrate(f, 0.0, lg) / zeta_T_ - (horizon_ - t) / s2_;
            return {m2, m3};
        }
        if (alpha_is_one(alpha_)) {
            const double d = 1.0 + zeta_T_ * (horizon_ - t) / s2_;
            const double m2 = (1.0 / d - 1.0) / zt;
            const double m3 = 1.0 / zt - 1.0 / (zeta_T_ * d);
            return {m2, m3};
        }
        const double v = zeta_T_ * (horizon_ - t) / s2_;
        const double x = table_->inverse(v);
        const double hm2 = -x;
        const double m2 = hm2 / zt;
        const double hm3 = std::exp(hm2 / (1.0 + hm2) + alpha_ / (alpha_ - 1.0) * std::log1p(hm2) -
                                    1.0 / (alpha_ - 1.0) * std::log1p(alpha_ * hm2)) /
                           zeta_T_;
        const double m3 = (1.0 / zt - hm3) / alpha_;
        return {m2, m3};
    }

    MarketParams market_;
    GaussianPrior prior_;
    double alpha_;
    double s2_;
    double horizon_;
    double zeta_T_;
    std::optional<SpecialFnTable> table_;
    std::map<double, std::pair<double, double>> cache_;
};

} // namespace

std::pair<double, double> closed_form_m2_m3(double t, double alpha,
                                            const MarketParams& market,
                                            const GaussianPrior& prior) {
    market.validate();
    prior.validate();
    ClosedFormEngine engine(market, prior, alpha);
    return engine.m2m3(t);
}

double m1_quadrature(double t, double alpha, const MarketParams& market,
                     const GaussianPrior& prior) {
    market.validate();
    prior.validate();
    ClosedFormEngine engine(market, prior, alpha);
    return engine.m1_quad(t);
}

double m1_value(double t, double alpha, const MarketParams& market,
                const GaussianPrior& prior) {
    market.validate();
    prior.validate();
    const double T = market.horizon;
    const double s2 = market.sigma2();
    const double zt = zeta(t, market, prior);
    const double zT = zeta(T, market, prior);
    if (alpha_is_zero(alpha)) {
        const double lg = std::log(zt / zT);
        const auto f = [](double x) { return std::exp(-x - 1.0) / (x * x); };
        return zT / (zt * zt) * integrate(f, -1.0 - lg, -1.0);
    }
    if (alpha_is_one(alpha)) {
        const double d = 1.0 + zT * (T - t) / s2;
        return zT * zT * (T - t) / (s2 * zt * zt * d);
    }
    return m1_quadrature(t, alpha, market, prior);
}

std::pair<double, double> m4_m5_values(double m1, double m2, double m3, double r) {
    return {-r * (m1 + m2), -r * (m2 + m3)};
}

double m6_value(double t, double alpha, const MarketParams& market,
                const GaussianPrior& prior) {
    market.validate();
    prior.validate();
    ClosedFormEngine engine(market, prior, alpha);
    return engine.m6_quad(t);
}

// ---------------------------------------------------------------------------
// Backward system
// ---------------------------------------------------------------------------

OdeState ode_rhs(double t, const OdeState& s, double alpha,
                 const MarketParams& market, const GaussianPrior& prior) {
    const double z = zeta(t, market, prior);
    const double denom = a_denominator(z, s.m3, alpha, t);
    const double one_zm2 = 1.0 + z * s.m2;
    const double a1v = one_zm2 * (1.0 / z + alpha * s.m2) / denom;
    const double a2v = alpha * one_zm2 / denom;
    const double r = market.r;
    const double inv_s2 = 1.0 / market.sigma2();

    OdeState d;
    d.m1 = (2.0 * z * s.m1 - a1v * a1v) * inv_s2;
    d.m2 = (one_zm2 * a1v + z * s.m2) * inv_s2;
    d.m3 = (-2.0 * z * s.m2 - z * z * s.m2 * s.m2) * inv_s2;
    d.m4 = (z * s.m4 - a1v * a2v * s.m5 - r * z * s.m1) * inv_s2;
    d.m5 = (one_zm2 * a2v * s.m5 - r * one_zm2) * inv_s2;
    d.m6 = (-0.5 * a2v * a2v * s.m5 * s.m5 + 0.5 * r * r - 0.5 * z * z * s.m1 - r * z * s.m4) * inv_s2;
    return d;
}

double OdeSolution::step() const {
    if (t.size() < 2)
        throw NumericError("ode solution: grid too small");
    return t[1] - t[0];
}

OdeState OdeSolution::node(std::size_t i) const {
    return OdeState{m1[i], m2[i], m3[i], m4[i], m5[i], m6[i]};
}

OdeState OdeSolution::state_at(double time) const {
    const double T = horizon();
    if (!(time >= -1e-9 * (1.0 + T)) || !(time <= T * (1.0 + 1e-9) + 1e-12))
        throw ValidityError("ode solution: t = " + format_time(time) +
                            " outside the interpolation range [0, T]");
    time = std::clamp(time, 0.0, T);
    const double h = step();
    std::size_t i = static_cast<std::size_t>(time / h);
    if (i >= t.size() - 1) i = t.size() - 2;
    const double s = (time - t[i]) / (t[i + 1] - t[i]);
    if (s == 0.0) return node(i);

    const OdeState y0 = node(i);
    const OdeState y1 = node(i + 1);
    const OdeState d0 = ode_rhs(t[i], y0, alpha, market, prior);
    const OdeState d1 = ode_rhs(t[i + 1], y1, alpha, market, prior);

    const double s2 = s * s;
    const double s3 = s2 * s;
    const double h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    const double h10 = s3 - 2.0 * s2 + s;
    const double h01 = -2.0 * s3 + 3.0 * s2;
    const double h11 = s3 - s2;
    const double dt = t[i + 1] - t[i];

    const auto hermite = [&](double a, double da, double b, double db) {
        return h00 * a + h10 * dt * da + h01 * b + h11 * dt * db;
    };
    OdeState out;
    out.m1 = hermite(y0.m1, d0.m1, y1.m1, d1.m1);
    out.m2 = hermite(y0.m2, d0.m2, y1.m2, d1.m2);
    out.m3 = hermite(y0.m3, d0.m3, y1.m3, d1.m3);
    out.m4 = hermite(y0.m4, d0.m4, y1.m4, d1.m4);
    out.m5 = hermite(y0.m5, d0.m5, y1.m5, d1.m5);
    out.m6 = hermite(y0.m6, d0.m6, y1.m6, d1.m6);
    return out;
}

double OdeSolution::zeta_at(double time) const { return ambeq::zeta(time, market, prior); }

double OdeSolution::strategy_coeff_at(double time) const {
    const double T = horizon();
    if (!(time >= -1e-9 * (1.0 + T)) || !(time <= T * (1.0 + 1e-9) + 1e-12))
        throw ValidityError("ode solution: t = " + format_time(time) +
                            " outside the interpolation range [0, T]");
    time = std::clamp(time, 0.0, T);
    const double h = step();
    std::size_t i = static_cast<std::size_t>(time / h);
    if (i >= t.size() - 1) i = t.size() - 2;

    const double inv_s2 = 1.0 / market.sigma2();
    const auto slope = [&](std::size_t j, double& d1, double& d2, double& d3) {
        const double z = zeta[j];
        const double one_zm2 = 1.0 + z * m2[j];
        d1 = (2.0 * z * m1[j] - a1[j] * a1[j]) * inv_s2;
        d2 = (one_zm2 * a1[j] + z * m2[j]) * inv_s2;
        d3 = (-2.0 * z * m2[j] - z * z * m2[j] * m2[j]) * inv_s2;
    };
    double d1a, d2a, d3a, d1b, d2b, d3b;
    slope(i, d1a, d2a, d3a);
    slope(i + 1, d1b, d2b, d3b);

    const double dt = t[i + 1] - t[i];
    const double s = (time - t[i]) / dt;
    const double s2 = s * s;
    const double s3 = s2 * s;
    const double h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    const double h10 = s3 - 2.0 * s2 + s;
    const double h01 = -2.0 * s3 + 3.0 * s2;
    const double h11 = s3 - s2;
    const auto hermite = [&](double a, double da, double b, double db) {
        return h00 * a + h10 * dt * da + h01 * b + h11 * dt * db;
    };
    const double m1i = hermite(m1[i], d1a, m1[i + 1], d1b);
    const double m2i = hermite(m2[i], d2a, m2[i + 1], d2b);
    const double m3i = hermite(m3[i], d3a, m3[i + 1], d3b);
    const double z = ambeq::zeta(time, market, prior);
    return coeff_a1(time, m2i, m3i, alpha, market, prior) + z * m1i;
}

double OdeSolution::a1_at(double time) const {
    const OdeState s = state_at(time);
    return coeff_a1(time, s.m2, s.m3, alpha, market, prior);
}

double OdeSolution::a2_at(double time) const {
    const OdeState s = state_at(time);
    return coeff_a2(time, s.m2, s.m3, alpha, market, prior);
}

namespace {

void common_solver_checks(const MarketParams& market, const GaussianPrior& prior,
                          const Preferences& prefs, OdeSolution& sol) {
    market.validate();
    prior.validate();
    prefs.validate();
    if (!alpha_is_solvable(prefs.alpha, market, prior)) {
        std::ostringstream os;
        os.precision(12);
        os << "alpha = " << prefs.alpha
           << " is at or below the solvability threshold alpha*; no solution exists on [0, T]";
        throw ValidityError(os.str());
    }
    const double thm = 1.0 - 0.5 * market.sigma2() / (prior.var() * market.horizon);
    if (!(prefs.alpha > thm)) {
        std::ostringstream os;
        os.precision(12);
        os << "alpha = " << prefs.alpha
           << " does not satisfy the equilibrium verification condition alpha > "
           << thm << "; the solution and hedging ratios remain valid, but the "
           << "equilibrium property is not certified for this configuration";
        sol.warnings.push_back(os.str());
    }
    sol.market = market;
    sol.prior = prior;
    sol.alpha = prefs.alpha;
}

void fill_coefficients(OdeSolution& sol) {
    const std::size_t n = sol.t.size();
    sol.a1.resize(n);
    sol.a2.resize(n);
    sol.zeta.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        sol.zeta[i] = ambeq::zeta(sol.t[i], sol.market, sol.prior);
        sol.a1[i] = coeff_a1(sol.t[i], sol.m2[i], sol.m3[i], sol.alpha, sol.market, sol.prior);
        sol.a2[i] = coeff_a2(sol.t[i], sol.m2[i], sol.m3[i], sol.alpha, sol.market, sol.prior);
    }
}

} // namespace

OdeSolution solve_ode_closed_form(const MarketParams& market, const GaussianPrior& prior,
                                  const Preferences& prefs, int n_steps) {
    if (n_steps < 2)
        throw ParameterError("solve_ode_closed_form: n_steps must be at least 2");
    OdeSolution sol;
    sol.method = "closed-form";
    common_solver_checks(market, prior, prefs, sol);

    ClosedFormEngine engine(market, prior, prefs.alpha);
    if (auto* table = engine.table()) {
        try {
            table->alpha_star = alpha_star(market, prior);
        } catch (const NumericError&) {
            // near-degenerate prior: the root is far below any usable alpha
        }
        const double v_max = zeta(market.horizon, market, prior) * market.horizon / market.sigma2();
        const double range = table->range_sup();
        if (std::isfinite(range) && v_max > 0.99 * range)
            sol.warnings.push_back(
                "alpha is close to the solvability threshold; the inversion defining m2 "
                "operates near the end of its range and may lose accuracy");
    }

    const std::size_t n = static_cast<std::size_t>(n_steps);
    const double T = market.horizon;
    sol.t.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) sol.t[i] = static_cast<double>(i) * T / static_cast<double>(n);
    sol.t.back() = T;

    sol.m2.resize(n + 1);
    sol.m3.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        const auto [m2, m3] = engine.m2m3(sol.t[i]);
        sol.m2[i] = m2;
        sol.m3[i] = m3;
    }

    // m1: cumulative backward quadrature of zeta^2 a1^2, Simpson on each
    // half-cell; records mid-cell values for the m6 pass.
    const double s2 = market.sigma2();
    std::vector<double> m1_mid(n);
    sol.m1.assign(n + 1, 0.0);
    {
        const auto f = [&](double s) {
            const double z = zeta(s, market, prior);
            const double a = engine.a1(s);
            return z * z * a * a;
        };
        double acc = 0.0;  // integral from current point to T
        for (std::size_t i = n; i-- > 0;) {
            const double a = sol.t[i];
            const double b = sol.t[i + 1];
            const double h = b - a;
            const double mid = a + 0.5 * h;
            const double f_a = f(a), f_q1 = f(a + 0.25 * h), f_m = f(mid),
                         f_q3 = f(a + 0.75 * h), f_b = f(b);
            acc += h / 12.0 * (f_m + 4.0 * f_q3 + f_b);
            const double z_mid = zeta(mid, market, prior);
            m1_mid[i] = acc / (s2 * z_mid * z_mid);
            acc += h / 12.0 * (f_a + 4.0 * f_q1 + f_m);
            const double z_a = zeta(a, market, prior);
            sol.m1[i] = acc / (s2 * z_a * z_a);
        }
    }

    sol.m4.resize(n + 1);
    sol.m5.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        const auto [m4, m5] = m4_m5_values(sol.m1[i], sol.m2[i], sol.m3[i], market.r);
        sol.m4[i] = m4;
        sol.m5[i] = m5;
    }

    // m6: cumulative backward Simpson of the printed integrand.
    sol.m6.assign(n + 1, 0.0);
    {
        const double r = market.r;
        const auto g = [&](double s, double m1v) {
            const auto [m2, m3] = engine.m2m3(s);
            const auto [m4, m5] = m4_m5_values(m1v, m2, m3, r);
            const double z = zeta(s, market, prior);
            const double a2v = engine.a2(s);
            return 0.5 * a2v * a2v * m5 * m5 - 0.5 * r * r + 0.5 * z * z * m1v + r * z * m4;
        };
        double acc = 0.0;
        for (std::size_t i = n; i-- > 0;) {
            const double a = sol.t[i];
            const double b = sol.t[i + 1];
            const double h = b - a;
            const double g_a = g(a, sol.m1[i]);
            const double g_m = g(a + 0.5 * h, m1_mid[i]);
            const double g_b = g(b, sol.m1[i + 1]);
            acc += h / 6.0 * (g_a + 4.0 * g_m + g_b);
            sol.m6[i] = acc / s2;
        }
    }

    fill_coefficients(sol);
    return sol;
}

OdeSolution solve_ode_numeric(const MarketParams& market, const GaussianPrior& prior,
                              const Preferences& prefs, int n_steps) {
    if (n_steps < 1000)
        throw ParameterError("solve_ode_numeric: n_steps must be at least 1000");
    OdeSolution sol;
    sol.method = "rk4";
    common_solver_checks(market, prior, prefs, sol);

    const std::size_t n = static_cast<std::size_t>(n_steps);
    const double T = market.horizon;
    sol.t.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) sol.t[i] = static_cast<double>(i) * T / static_cast<double>(n);
    sol.t.back() = T;

    sol.m1.assign(n + 1, 0.0);
    sol.m2.assign(n + 1, 0.0);
    sol.m3.assign(n + 1, 0.0);
    sol.m4.assign(n + 1, 0.0);
    sol.m5.assign(n + 1, 0.0);
    sol.m6.assign(n + 1, 0.0);

    const auto rhs = [&](double time, const OdeState& s) {
        return ode_rhs(time, s, prefs.alpha, market, prior);
    };
    const auto axpy = [](const OdeState& y, double c, const OdeState& d) {
        return OdeState{y.m1 + c * d.m1, y.m2 + c * d.m2, y.m3 + c * d.m3,
                        y.m4 + c * d.m4, y.m5 + c * d.m5, y.m6 + c * d.m6};
    };

    OdeState y;  // terminal condition: all zero
    for (std::size_t i = n; i-- > 0;) {
        const double t1 = sol.t[i + 1];
        const double t0 = sol.t[i];
        const double h = t1 - t0;
        const OdeState k1 = rhs(t1, y);
        const OdeState k2 = rhs(t1 - 0.5 * h, axpy(y, -0.5 * h, k1));
        const OdeState k3 = rhs(t1 - 0.5 * h, axpy(y, -0.5 * h, k2));
        const OdeState k4 = rhs(t0, axpy(y, -h, k3));
        y.m1 -= h / 6.0 * (k1.m1 + 2.0 * k2.m1 + 2.0 * k3.m1 + k4.m1);
        y.m2 -= h / 6.0 * (k1.m2 + 2.0 * k2.m2 + 2.0 * k3.m2 + k4.m2);
        y.m3 -= h / 6.0 * (k1.m3 + 2.0 * k2.m3 + 2.0 * k3.m3 + k4.m3);
        y.m4 -= h / 6.0 * (k1.m4 + 2.0 * k2.m4 + 2.0 * k3.m4 + k4.m4);
        y.m5 -= h / 6.0 * (k1.m5 + 2.0 * k2.m5 + 2.0 * k3.m5 + k4.m5);
        y.m6 -= h / 6.0 * (k1.m6 + 2.0 * k2.m6 + 2.0 * k3.m6 + k4.m6);
        // the validity domain must hold at every accepted node
        a_denominator(zeta(t0, market, prior), y.m3, prefs.alpha, t0);
        sol.m1[i] = y.m1;
        sol.m2[i] = y.m2;
        sol.m3[i] = y.m3;
        sol.m4[i] = y.m4;
        sol.m5[i] = y.m5;
        sol.m6[i] = y.m6;
    }

    fill_coefficients(sol);
    return sol;
}

} // namespace ambeq

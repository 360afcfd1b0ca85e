#include "ambeq/model.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace ambeq {

void MarketParams::validate() const {
    if (!std::isfinite(r))
        throw ParameterError("market: risk-free rate must be finite");
    if (!(sigma > 0.0) || !std::isfinite(sigma))
        throw ParameterError("market: sigma must be positive");
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw ParameterError("market: horizon must be positive");
}

void GaussianPrior::validate() const {
    if (!std::isfinite(beta0))
        throw ParameterError("prior: beta0 must be finite");
    if (!(sigma0 > 0.0) || !std::isfinite(sigma0))
        throw ParameterError("prior: sigma0 must be positive (degenerate priors are not supported)");
}

double DiscretePrior::mean() const {
    double m = 0.0;
    for (const auto& a : atoms) m += a.w * a.z;
    return m;
}

double DiscretePrior::variance() const {
    const double m = mean();
    double v = 0.0;
    for (const auto& a : atoms) v += a.w * (a.z - m) * (a.z - m);
    return v;
}

void DiscretePrior::validate() const {
    if (atoms.empty())
        throw ParameterError("discrete prior: no atoms");
    double total = 0.0;
    for (const auto& a : atoms) {
        if (!std::isfinite(a.z))
            throw ParameterError("discrete prior: atom value must be finite");
        if (!(a.w > 0.0))
            throw ParameterError("discrete prior: atom weights must be positive");
        total += a.w;
    }
    if (std::fabs(total - 1.0) > 1e-12)
        throw ParameterError("discrete prior: weights must sum to 1 (got " + std::to_string(total) + ")");
    for (std::size_t i = 0; i < atoms.size(); ++i)
        for (std::size_t j = i + 1; j < atoms.size(); ++j)
            if (atoms[i].z == atoms[j].z)
                throw ParameterError("discrete prior: atom values must be distinct");
}

void Preferences::validate() const {
    if (!(k > 0.0) || !std::isfinite(k))
        throw ParameterError("preferences: k must be positive");
    if (!std::isfinite(alpha))
        throw ParameterError("preferences: alpha must be finite");
}

double utility(double x, double k) {
    if (!(k > 0.0))
        throw ParameterError("utility: k must be positive");
    return -std::exp(-k * x) / k;
}

namespace {

void require_negative_utility(double u, const char* who) {
    if (!(u < 0.0))
        throw ValidityError(std::string(who) + ": argument must be a negative utility value");
}

} // namespace

double phi(double u, double alpha) {
    require_negative_utility(u, "phi");
    const double log_mu = std::log(-u);
    if (alpha_is_zero(alpha)) return -log_mu;
    return -std::exp(alpha * log_mu) / alpha;
}

double phi_prime(double u, double alpha) {
    require_negative_utility(u, "phi_prime");
    return std::exp((alpha - 1.0) * std::log(-u));
}

double monetary_v(double x, double k, double alpha) {
    if (!(k > 0.0))
        throw ParameterError("monetary_v: k must be positive");
    if (alpha_is_zero(alpha)) return k * x + std::log(k);
    return -std::exp(-alpha * (std::log(k) + k * x)) / alpha;
}

GaussianExpMoments gaussian_exp_moments(double mu, double var, double a, double b) {
    if (!(var >= 0.0))
        throw ParameterError("gaussian_exp_moments: variance must be nonnegative");
    const double denom = 1.0 - 2.0 * a * var;
    if (!(denom > 0.0))
        throw ValidityError("gaussian_exp_moments: 2 a var >= 1, the moment diverges");
    const double expo = (2.0 * a * mu * mu + 2.0 * mu * b + b * b * var) / (2.0 * denom);
    const double common = std::exp(expo);
    GaussianExpMoments m;
    m.e0 = common / std::sqrt(denom);
    m.e1 = (mu + b * var) * common / (denom * std::sqrt(denom));
    return m;
}

double gaussian_exp_moment(double mu, double var, double a, double b) {
    return gaussian_exp_moments(mu, var, a, b).e0;
}

double gaussian_exp_moment_x(double mu, double var, double a, double b) {
    return gaussian_exp_moments(mu, var, a, b).e1;
}

} // namespace ambeq

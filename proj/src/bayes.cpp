#include "ambeq/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ambeq {

std::vector<double> posterior_weights(const DiscretePrior& prior,
                                      const ObservationSummary& obs,
                                      double sigma) {
    prior.validate();
    if (!(sigma > 0.0))
        throw ParameterError("posterior_weights: sigma must be positive");
    if (!std::isfinite(obs.t) || !std::isfinite(obs.dy))
        throw ParameterError("posterior_weights: non-finite observation");

    const double s2 = sigma * sigma;
    const std::size_t n = prior.atoms.size();
    std::vector<double> log_w(n);
    double log_max = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const double z = prior.atoms[i].z;
        // no information has arrived at t = 0: all exponents are 0
        const double expo =
            obs.t == 0.0
                ? 0.0
                : (z / s2) * (obs.dy + 0.5 * s2 * obs.t) - z * z * obs.t / (2.0 * s2);
        log_w[i] = std::log(prior.atoms[i].w) + expo;
        log_max = std::max(log_max, log_w[i]);
    }
    if (!std::isfinite(log_max))
        throw NumericError("posterior_weights: all weights degenerated");

    std::vector<double> w(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = std::exp(log_w[i] - log_max);
        total += w[i];
    }
    for (auto& wi : w) wi /= total;
    return w;
}

double posterior_expectation(const DiscretePrior& prior,
                             const ObservationSummary& obs,
                             double sigma,
                             const std::function<double(double)>& f) {
    const auto w = posterior_weights(prior, obs, sigma);
    double e = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) e += w[i] * f(prior.atoms[i].z);
    return e;
}

double varphi(const DiscretePrior& prior, const ObservationSummary& obs, double sigma) {
    const auto w = posterior_weights(prior, obs, sigma);
    double mean = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) mean += w[i] * prior.atoms[i].z;
    return mean;
}

double varphi_y(const DiscretePrior& prior, const ObservationSummary& obs, double sigma) {
    const auto w = posterior_weights(prior, obs, sigma);
    double mean = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) mean += w[i] * prior.atoms[i].z;
    double var = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double d = prior.atoms[i].z - mean;
        var += w[i] * d * d;
    }
    return var / (sigma * sigma);
}

BeliefState gaussian_posterior(const GaussianPrior& prior,
                               const MarketParams& market,
                               const ObservationSummary& obs) {
    prior.validate();
    market.validate();
    const double s2 = market.sigma2();
    const double s02 = prior.var();
    if (obs.t == 0.0) return BeliefState{0.0, prior.beta0, s02};
    const double zeta = s2 * s02 / (s2 + obs.t * s02);
    const double beta = zeta * (obs.dy / s2 + 0.5 * obs.t + prior.beta0 / s02);
    return BeliefState{obs.t, beta, zeta};
}

} // namespace ambeq

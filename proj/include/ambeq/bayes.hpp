#pragma once

#include <functional>
#include <vector>

#include "ambeq/model.hpp"

namespace ambeq {

// Summary of the price observation up to time t: the cumulative
// log-price change dy = Y_t - Y_0.
struct ObservationSummary {
    double t = 0.0;
    double dy = 0.0;
    double y0 = 0.0;
};

// Normalized posterior weights of a discrete prior given the observation.
// Exponents are computed in log space and shifted by their maximum before
// exponentiation; z^2 t / sigma^2 reaches hundreds for long horizons.
std::vector<double> posterior_weights(const DiscretePrior& prior,
                                      const ObservationSummary& obs,
                                      double sigma);

// E[f(Z) | observations] for a discrete prior.
double posterior_expectation(const DiscretePrior& prior,
                             const ObservationSummary& obs,
                             double sigma,
                             const std::function<double(double)>& f);

// Posterior mean of the drift.
double varphi(const DiscretePrior& prior, const ObservationSummary& obs, double sigma);

// Sensitivity of the posterior mean to the log price: equals the posterior
// variance of the drift divided by sigma^2. Strictly positive for priors
// with at least two atoms, so the posterior mean is strictly increasing
// in the observed log price.
double varphi_y(const DiscretePrior& prior, const ObservationSummary& obs, double sigma);

// Conjugate Gaussian update: posterior mean and variance of the drift.
BeliefState gaussian_posterior(const GaussianPrior& prior,
                               const MarketParams& market,
                               const ObservationSummary& obs);

} // namespace ambeq

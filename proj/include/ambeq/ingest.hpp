#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ambeq/model.hpp"

namespace ambeq {

struct PricePoint {
    std::string date;  // ISO-8601 calendar date
    double close = 0.0;
};

// Ordered daily closes with a fixed sampling interval in years.
struct PriceSeries {
    std::vector<PricePoint> observations;
    double dt = 1.0 / 252.0;
};

// CSV with header "date,close", ISO dates, positive closes, strictly
// increasing dates. Bad rows are rejected with their line number.
PriceSeries load_prices(const std::string& path, double dt = 1.0 / 252.0);

struct MleEstimate {
    double mu_hat = 0.0;     // drift per year
    double sigma_hat = 0.0;  // volatility per sqrt(year)
    long n_returns = 0;
    double dt = 0.0;
};

// Geometric-Brownian-motion maximum likelihood from log returns r_i over
// step dt:  sigma^2 = (1/(n dt)) sum (r_i - rbar)^2,  mu = rbar/dt + sigma^2/2.
// Requires at least 30 observations.
MleEstimate mle_estimate(const PriceSeries& series);

// Prior for the unknown drift: mean = mu_hat; standard deviation from the
// override when given, otherwise the drift-estimate standard error
// sigma_hat / sqrt(n dt).
GaussianPrior calibrate_prior(const MleEstimate& est,
                              std::optional<double> sigma0_override = std::nullopt);

} // namespace ambeq

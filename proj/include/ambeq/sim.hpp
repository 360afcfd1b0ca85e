#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ambeq/strategy.hpp"

namespace ambeq {

enum class BetaScheme {
    euler,  // Euler step on the posterior-mean dynamics
    exact,  // closed-form update from the cumulative Brownian increment
};

struct SimConfig {
    long n_paths = 200000;       // paths for single-layer estimates
    long n_steps = 1000;         // time steps over [t0, T]
    std::uint64_t seed = 0x5eedULL;
    double t0 = 0.0;
    double x0 = 1.0;
    double beta0 = 0.0;          // initial posterior mean
    long inner_paths = 10000;    // inner paths per outer draw (nested objective)
    long outer_paths = 1000;     // outer drift draws (nested objective)
    BetaScheme scheme = BetaScheme::exact;
    bool antithetic = true;

    void validate(const MarketParams& market) const;
};

struct SimReport {
    double estimate = 0.0;
    double std_error = 0.0;
    long n_effective = 0;  // independent averaging units (pairs when antithetic)
    std::vector<std::pair<std::string, double>> diagnostics;

    double diagnostic(const std::string& name) const;
};

struct TerminalSamples {
    std::vector<double> x;
    std::vector<double> beta;
    long excluded = 0;  // paths dropped for non-finite states
};

// Feedback strategy: dollar amount in the stock as a function of
// (t, wealth, posterior mean).
using Strategy = std::function<double(double, double, double)>;

// The equilibrium feedback strategy read off an ODE solution.
Strategy make_equilibrium_strategy(const OdeSolution& sol, const MarketParams& market,
                                   const Preferences& prefs);

// Terminal samples of (X_T, beta_T) under a fixed drift realization z.
// Antithetic pairing puts the mirrored path right after its partner.
TerminalSamples simulate_inside(double z, const Strategy& strategy, const SimConfig& cfg,
                                const MarketParams& market, const GaussianPrior& prior,
                                int threads = 0);

// Mean and standard error of U(X_T) under the fixed drift z.
SimReport estimate_inside_utility(double z, const Strategy& strategy, const SimConfig& cfg,
                                  const MarketParams& market, const GaussianPrior& prior,
                                  const Preferences& prefs, int threads = 0);

// Two-layer objective: outer draws of the drift from the time-t0 posterior,
// inner antithetic paths for the conditional expected utility, the ambiguity
// transform applied to each inner mean. Reports a split-half jackknife
// estimate of the nested-MC bias in the diagnostics.
SimReport estimate_J(const Strategy& strategy, const SimConfig& cfg,
                     const MarketParams& market, const GaussianPrior& prior,
                     const Preferences& prefs, int threads = 0);

// Spike-perturbation slopes (J(pi_{t0,h}) - J(pi*)) / h for each h, with
// common random numbers across the two strategies. An equilibrium strategy
// must keep every slope below twice its standard error.
std::vector<SimReport> perturbation_test(const Strategy& pi_perturb,
                                         const std::vector<double>& h_list,
                                         const SimConfig& cfg, const OdeSolution& sol,
                                         const MarketParams& market,
                                         const GaussianPrior& prior,
                                         const Preferences& prefs, int threads = 0);

// E[g^z(t0 + delta, X, beta)] - g^z(t0, x0, beta0) under the equilibrium
// strategy, one report per delta. Zero within noise when the inside value
// process is a martingale.
std::vector<SimReport> martingale_check(double z, const std::vector<double>& deltas,
                                        const SimConfig& cfg, const OdeSolution& sol,
                                        const MarketParams& market,
                                        const GaussianPrior& prior,
                                        const Preferences& prefs, int threads = 0);

// Same contract as martingale_check but under an arbitrary strategy;
// non-equilibrium strategies drift negative.
std::vector<SimReport> martingale_check_strategy(double z, const Strategy& strategy,
                                                 const std::vector<double>& deltas,
                                                 const SimConfig& cfg, const OdeSolution& sol,
                                                 const MarketParams& market,
                                                 const GaussianPrior& prior,
                                                 const Preferences& prefs, int threads = 0);

} // namespace ambeq

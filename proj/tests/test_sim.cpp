#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "ambeq/rng.hpp"
#include "ambeq/sim.hpp"
#include "oracles.hpp"

using namespace ambeq;

namespace {

const MarketParams kMarket = oracles::ref_market();
const GaussianPrior kPrior = oracles::ref_prior();
const Preferences kPrefs{1.0, 1.5};

SimConfig quick_cfg() {
    SimConfig cfg;
    cfg.n_paths = 20000;
    cfg.n_steps = 500;
    cfg.seed = 20240601;
    cfg.t0 = 0.0;
    cfg.x0 = 1.0;
    cfg.beta0 = kPrior.beta0;
    cfg.inner_paths = 400;
    cfg.outer_paths = 200;
    return cfg;
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j])
            ++i;
        else
            ++j;
        d = std::max(d, std::fabs(static_cast<double>(i) / a.size() -
                                  static_cast<double>(j) / b.size()));
    }
    return d;
}

} // namespace

TEST_CASE("philox block function reproduces the published vectors") {
    using A4 = std::array<std::uint32_t, 4>;
    using A2 = std::array<std::uint32_t, 2>;
    CHECK(Philox4x32::block(A4{0, 0, 0, 0}, A2{0, 0}) ==
          A4{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(Philox4x32::block(A4{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                            A2{0xffffffffu, 0xffffffffu}) ==
          A4{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(Philox4x32::block(A4{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                            A2{0xa4093822u, 0x299f31d0u}) ==
          A4{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("normal streams: reproducible, distinct, roughly standard") {
    NormalStream a(42, 1, 7);
    NormalStream b(42, 1, 7);
    NormalStream c(42, 1, 8);
    double sum = 0.0, sum_sq = 0.0;
    bool any_diff = false;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double x = a.next();
        CHECK(x == b.next());
        any_diff = any_diff || (x != c.next());
        sum += x;
        sum_sq += x * x;
    }
    CHECK(any_diff);
    CHECK(std::fabs(sum / n) < 0.02);
    CHECK(std::fabs(sum_sq / n - 1.0) < 0.03);
}

TEST_CASE("zero strategy: deterministic wealth, zero variance") {
    SimConfig cfg = quick_cfg();
    cfg.n_paths = 64;
    const Strategy none = [](double, double, double) { return 0.0; };
    const SimReport r =
        estimate_inside_utility(kPrior.beta0, none, cfg, kMarket, kPrior, kPrefs);
    const double expected = utility(cfg.x0 * std::exp(kMarket.r * kMarket.horizon), kPrefs.k);
    CHECK(r.estimate == doctest::Approx(expected).epsilon(1e-12));
    CHECK(r.std_error == 0.0);

    const TerminalSamples s = simulate_inside(0.1, none, cfg, kMarket, kPrior);
    CHECK(s.excluded == 0);
    for (const double x : s.x)
        CHECK(x == doctest::Approx(cfg.x0 * std::exp(kMarket.r * kMarket.horizon))
                       .epsilon(1e-12));
}

TEST_CASE("exact posterior-mean scheme is increment-additive") {
    SimConfig cfg = quick_cfg();
    cfg.n_paths = 2;
    cfg.n_steps = 64;
    cfg.scheme = BetaScheme::exact;
    const double z = 0.21;
    const Strategy none = [](double, double, double) { return 0.0; };
    const TerminalSamples s = simulate_inside(z, none, cfg, kMarket, kPrior);

    // replay the increments of path 0 and apply the closed-form update once
    NormalStream ns(cfg.seed, 1, 0);
    const double dt = (kMarket.horizon - cfg.t0) / cfg.n_steps;
    double w = 0.0;
    for (long j = 0; j < cfg.n_steps; ++j) w += std::sqrt(dt) * ns.next();
    const double zt = zeta(kMarket.horizon, kMarket, kPrior);
    const double direct = zt * (cfg.beta0 / zeta(0.0, kMarket, kPrior) +
                                z * kMarket.horizon / kMarket.sigma2() + w / kMarket.sigma);
    CHECK(s.beta[0] == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("terminal posterior mean matches its Gaussian expectation") {
    SimConfig cfg = quick_cfg();
    cfg.n_paths = 20000;
    cfg.n_steps = 250;
    const double z = kPrior.beta0;
    const Strategy none = [](double, double, double) { return 0.0; };
    const TerminalSamples s = simulate_inside(z, none, cfg, kMarket, kPrior);
    double sum = 0.0, sum_sq = 0.0;
    for (const double b : s.beta) {
        sum += b;
        sum_sq += b * b;
    }
    const double n = static_cast<double>(s.beta.size());
    const double mean = sum / n;
    const double se = std::sqrt((sum_sq / n - mean * mean) / n);
    const double zt = zeta(kMarket.horizon, kMarket, kPrior);
    const double expected = zt * (kPrior.beta0 / kPrior.var() +
                                  z * kMarket.horizon / kMarket.sigma2());
    CHECK(std::fabs(mean - expected) < 3.0 * se);
}

TEST_CASE("euler and exact posterior-mean schemes agree in distribution") {
    SimConfig cfg = quick_cfg();
    cfg.n_paths = 5000;
    cfg.n_steps = 2000;
    const Strategy none = [](double, double, double) { return 0.0; };
    cfg.scheme = BetaScheme::exact;
    const TerminalSamples exact = simulate_inside(0.2, none, cfg, kMarket, kPrior);
    cfg.scheme = BetaScheme::euler;
    const TerminalSamples euler = simulate_inside(0.2, none, cfg, kMarket, kPrior);
    CHECK(ks_distance(exact.beta, euler.beta) < 0.01);
}

TEST_CASE("inside value matches the ansatz under the equilibrium strategy") {
    const OdeSolution sol = solve_ode_closed_form(kMarket, kPrior, kPrefs, 800);
    const Strategy eq = make_equilibrium_strategy(sol, kMarket, kPrefs);
    SimConfig cfg = quick_cfg();
    cfg.n_paths = 40000;
    const double z = kPrior.beta0;
    const SimReport r = estimate_inside_utility(z, eq, cfg, kMarket, kPrior, kPrefs);
    const double analytic =
        g_value(cfg.t0, cfg.x0, cfg.beta0, z, sol, kMarket, kPrefs).g;
    CHECK(std::fabs(r.estimate - analytic) < 3.0 * r.std_error);

    // the full-information benchmark dominates and matches its own value
    const Strategy inside = [&](double t, double, double) {
        return inside_optimal_pi(t, z, kMarket, kPrefs);
    };
    const SimReport best = estimate_inside_utility(z, inside, cfg, kMarket, kPrior, kPrefs);
    const double best_analytic = inside_optimal_value(cfg.t0, cfg.x0, z, kMarket, kPrefs);
    CHECK(std::fabs(best.estimate - best_analytic) < 3.0 * best.std_error);
    const double se = std::hypot(r.std_error, best.std_error);
    CHECK(best.estimate >= r.estimate - 2.0 * se);
}

TEST_CASE("antithetic pairing preserves the estimator mean") {
    const OdeSolution sol = solve_ode_closed_form(kMarket, kPrior, kPrefs, 400);
    const Strategy eq = make_equilibrium_strategy(sol, kMarket, kPrefs);
    SimConfig cfg = quick_cfg();
    cfg.n_paths = 30000;
    cfg.n_steps = 100;
    const SimReport with = estimate_inside_utility(0.2, eq, cfg, kMarket, kPrior, kPrefs);
    cfg.antithetic = false;
    cfg.seed += 1;
    const SimReport without = estimate_inside_utility(0.2, eq, cfg, kMarket, kPrior, kPrefs);
    CHECK(std::fabs(with.estimate - without.estimate) <
          3.0 * std::hypot(with.std_error, without.std_error));
}

TEST_CASE("nested objective: no drift dependence collapses it exactly") {
    SimConfig cfg = quick_cfg();
    cfg.outer_paths = 50;
    cfg.inner_paths = 8;
    const Strategy none = [](double, double, double) { return 0.0; };
    const SimReport r = estimate_J(none, cfg, kMarket, kPrior, kPrefs);
    const double expected =
        phi(utility(cfg.x0 * std::exp(kMarket.r * kMarket.horizon), kPrefs.k), kPrefs.alpha);
    CHECK(r.estimate == doctest::Approx(expected).epsilon(1e-12));
    CHECK(r.std_error == 0.0);
    CHECK(r.diagnostic("jackknife_bias") == doctest::Approx(0.0));
}

TEST_CASE("nested objective: ambiguity-neutral case equals single-layer sampling") {
    const Preferences neutral{1.0, 1.0};
    const OdeSolution sol = solve_ode_closed_form(kMarket, kPrior, neutral, 400);
    const Strategy eq = make_equilibrium_strategy(sol, kMarket, neutral);
    SimConfig cfg = quick_cfg();
    cfg.n_steps = 200;
    cfg.outer_paths = 300;
    cfg.inner_paths = 300;
    const SimReport nested = estimate_J(eq, cfg, kMarket, kPrior, neutral);

    SimConfig flat = cfg;
    flat.outer_paths = 20000;
    flat.inner_paths = 2;  // one antithetic pair per drift draw
    flat.seed += 17;
    const SimReport single = estimate_J(eq, flat, kMarket, kPrior, neutral);
    CHECK(std::fabs(nested.estimate - single.estimate) <
          3.0 * std::hypot(nested.std_error, single.std_error));

    // and both agree with the analytic value
    const double analytic =
        smooth_objective_value(cfg.t0, cfg.x0, cfg.beta0, sol, kMarket, neutral);
    CHECK(std::fabs(nested.estimate - analytic) < 3.0 * nested.std_error);
}

TEST_CASE("nested objective matches the analytic value under ambiguity") {
    const OdeSolution sol = solve_ode_closed_form(kMarket, kPrior, kPrefs, 800);
    const Strategy eq = make_equilibrium_strategy(sol, kMarket, kPrefs);
    SimConfig cfg = quick_cfg();
    cfg.n_steps = 400;
    cfg.outer_paths = 256;
    cfg.inner_paths = 1024;
    const SimReport r = estimate_J(eq, cfg, kMarket, kPrior, kPrefs);
    const double analytic =
        smooth_objective_value(cfg.t0, cfg.x0, cfg.beta0, sol, kMarket, kPrefs);
    CHECK(std::fabs(r.estimate - analytic) <
          3.0 * r.std_error + std::fabs(r.diagnostic("jackknife_bias")));
}

TEST_CASE("perturbation slopes: identical strategy gives exactly zero") {
    const OdeSolution sol = solve_ode_closed_form(kMarket, kPrior, kPrefs, 400);
    const Strategy eq = make_equilibrium_strategy(sol, kMarket, kPrefs);
    SimConfig cfg = quick_cfg();
    cfg.outer_paths = 20;
    cfg.inner_paths = 16;
    cfg.n_steps = 100;
    const auto slopes =
        perturbation_test(eq, {0.02, 0.01}, cfg, sol, kMarket, kPrior, kPrefs);
    for (const auto& s : slopes) {
        CHECK(s.estimate == 0.0);
        CHECK(s.std_error == 0.0);
    }
}

TEST_CASE("perturbation slopes: spike deviations do not improve the objective") {
    const OdeSolution sol = solve_ode_closed_form(kMarket, kPrior, kPrefs, 400);
    const Strategy eq = make_equilibrium_strategy(sol, kMarket, kPrefs);
    SimConfig cfg = quick_cfg();
    cfg.outer_paths = 128;
    cfg.inner_paths = 256;
    cfg.n_steps = 250;
    const Strategy shifted = [&](double t, double x, double beta) {
        return eq(t, x, beta) + 0.5;
    };
    for (const auto& s :
         perturbation_test(shifted, {0.02, 0.01}, cfg, sol, kMarket, kPrior, kPrefs)) {
        CHECK(s.estimate <= 2.0 * s.std_error);
    }
}

TEST_CASE("martingale check: near zero at the equilibrium, negative off it") {
    const OdeSolution sol = solve_ode_closed_form(kMarket, kPrior, kPrefs, 800);
    SimConfig cfg = quick_cfg();
    cfg.n_paths = 40000;
    cfg.n_steps = 1000;
    const double z = kPrior.beta0;
    for (const auto& r :
         martingale_check(z, {0.05, 0.1}, cfg, sol, kMarket, kPrior, kPrefs)) {
        CHECK(std::fabs(r.estimate) <= 3.0 * r.std_error);
    }

    // off the equilibrium the inside value drifts; at z = r any stock
    // position is uncompensated noise, so the drift is strictly negative
    const Strategy eq = make_equilibrium_strategy(sol, kMarket, kPrefs);
    const Strategy off = [&](double t, double x, double beta) {
        return eq(t, x, beta) + 1.0;
    };
    for (const auto& r : martingale_check_strategy(kMarket.r, off, {0.1}, cfg, sol,
                                                   kMarket, kPrior, kPrefs)) {
        CHECK(r.estimate < -3.0 * r.std_error);
    }
}

TEST_CASE("estimates are bit-identical across repeat runs and thread counts") {
    const OdeSolution sol = solve_ode_closed_form(kMarket, kPrior, kPrefs, 400);
    const Strategy eq = make_equilibrium_strategy(sol, kMarket, kPrefs);
    SimConfig cfg = quick_cfg();
    cfg.n_paths = 8000;
    cfg.n_steps = 50;
    const SimReport a = estimate_inside_utility(0.2, eq, cfg, kMarket, kPrior, kPrefs, 1);
    const SimReport b = estimate_inside_utility(0.2, eq, cfg, kMarket, kPrior, kPrefs, 2);
    const SimReport c = estimate_inside_utility(0.2, eq, cfg, kMarket, kPrior, kPrefs, 0);
    CHECK(a.estimate == b.estimate);
    CHECK(a.std_error == b.std_error);
    CHECK(a.estimate == c.estimate);

    cfg.outer_paths = 40;
    cfg.inner_paths = 32;
    const SimReport ja = estimate_J(eq, cfg, kMarket, kPrior, kPrefs, 1);
    const SimReport jb = estimate_J(eq, cfg, kMarket, kPrior, kPrefs, 2);
    CHECK(ja.estimate == jb.estimate);
    CHECK(ja.std_error == jb.std_error);
    CHECK(ja.diagnostic("jackknife_bias") == jb.diagnostic("jackknife_bias"));
}

TEST_CASE("euler weak error halves when the step count doubles") {
    // coupled refinement: one fine increment sequence aggregated onto
    // coarser grids, antithetic pairs, reference 16x finer than the finest
    // tested grid; the bias is ~7 standard errors at this sample size
    const OdeSolution sol = solve_ode_closed_form(kMarket, kPrior, kPrefs, 400);
    const Strategy eq = make_equilibrium_strategy(sol, kMarket, kPrefs);
    const double z = kPrior.beta0;
    const long n_pairs = 8000;
    const long base = 4;  // coarse steps over the horizon
    const long fine = base * 2 * 16;

    const double span = kMarket.horizon;
    const double s2 = kMarket.sigma2();
    const auto terminal_u = [&](long steps, const std::vector<double>& dw_fine,
                                double sign) {
        const double dt = span / static_cast<double>(steps);
        const long agg = fine / steps;
        const double growth = std::exp(kMarket.r * dt);
        double x = 1.0, beta = kPrior.beta0, w = 0.0;
        for (long j = 0; j < steps; ++j) {
            const double t = static_cast<double>(j) * dt;
            double dw = 0.0;
            for (long m = 0; m < agg; ++m) dw += sign * dw_fine[j * agg + m];
            const double pi = eq(t, x, beta);
            x = x * growth + pi * ((z - kMarket.r) * dt + kMarket.sigma * dw);
            w += dw;
            const double tn = static_cast<double>(j + 1) * dt;
            beta = zeta(tn, kMarket, kPrior) *
                   (kPrior.beta0 / kPrior.var() + z * tn / s2 + w / kMarket.sigma);
        }
        return utility(x, kPrefs.k);
    };

    double bias_coarse = 0.0, bias_mid = 0.0;
    std::vector<double> dw(fine);
    const double sd = std::sqrt(span / static_cast<double>(fine));
    for (long p = 0; p < n_pairs; ++p) {
        NormalStream ns(987, 9, static_cast<std::uint64_t>(p));
        for (long j = 0; j < fine; ++j) dw[j] = sd * ns.next();
        for (const double sign : {1.0, -1.0}) {
            const double ref = terminal_u(fine, dw, sign);
            bias_coarse += 0.5 * (terminal_u(base, dw, sign) - ref);
            bias_mid += 0.5 * (terminal_u(base * 2, dw, sign) - ref);
        }
    }
    bias_coarse /= static_cast<double>(n_pairs);
    bias_mid /= static_cast<double>(n_pairs);
    const double ratio = bias_coarse / bias_mid;
    CHECK(ratio > 1.3);
    CHECK(ratio < 3.0);
}

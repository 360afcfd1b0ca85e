#include <doctest.h>

#include <cmath>
#include <random>

#include "ambeq/bayes.hpp"
#include "oracles.hpp"

using namespace ambeq;

namespace {

const DiscretePrior kTwoAtom{{{0.1, 0.5}, {0.3, 0.5}}};
constexpr double kSigma = 0.2;

// direct two-term Bayes ratio in extended precision
long double two_atom_mean_ref(long double t, long double dy) {
    const long double s2 = 0.04L;
    const auto expo = [&](long double z) {
        return (z / s2) * (dy + 0.5L * s2 * t) - z * z * t / (2.0L * s2);
    };
    const long double l1 = std::exp(expo(0.1L));
    const long double l2 = std::exp(expo(0.3L));
    return (0.1L * l1 + 0.3L * l2) / (l1 + l2);
}

} // namespace

TEST_CASE("posterior at t = 0 is the prior") {
    for (const double dy : {-0.5, 0.0, 0.3}) {
        const ObservationSummary obs{0.0, dy};
        CHECK(varphi(kTwoAtom, obs, kSigma) == doctest::Approx(0.2).epsilon(1e-15));
        const double e = posterior_expectation(kTwoAtom, obs, kSigma,
                                               [](double z) { return z * z; });
        CHECK(e == doctest::Approx(0.5 * 0.01 + 0.5 * 0.09).epsilon(1e-14));
    }
}

TEST_CASE("single-atom prior is degenerate") {
    const DiscretePrior one{{{0.1, 1.0}}};
    for (const double t : {0.0, 0.5, 3.0}) {
        for (const double dy : {-1.0, 0.2}) {
            const ObservationSummary obs{t, dy};
            CHECK(varphi(one, obs, kSigma) == doctest::Approx(0.1).epsilon(1e-15));
            CHECK(varphi_y(one, obs, kSigma) == doctest::Approx(0.0).epsilon(1e-15));
        }
    }
}

TEST_CASE("two-atom posterior mean matches the direct Bayes ratio") {
    const ObservationSummary obs{1.0, 0.2};
    const double mean = varphi(kTwoAtom, obs, kSigma);
    CHECK(mean == doctest::Approx(static_cast<double>(two_atom_mean_ref(1.0L, 0.2L)))
                      .epsilon(1e-14));
    // frozen from a 40-digit evaluation of the same ratio
    CHECK(mean == doctest::Approx(0.20499583749578800).epsilon(1e-12));
}

TEST_CASE("symmetric two-atom posterior lands on the midpoint") {
    // both exponents equal when dy + s2 t/2 = (z1 + z2) t / 2
    const double t = 1.0;
    const double s2 = kSigma * kSigma;
    const double dy = 0.5 * (0.1 + 0.3) * t - 0.5 * s2 * t;
    CHECK(varphi(kTwoAtom, {t, dy}, kSigma) == doctest::Approx(0.2).epsilon(1e-13));
}

TEST_CASE("varphi_y equals the posterior variance over sigma^2 and the dy derivative") {
    const ObservationSummary obs{1.0, 0.2};
    const double direct = varphi_y(kTwoAtom, obs, kSigma);
    CHECK(direct == doctest::Approx(0.24937604019289197).epsilon(1e-12));

    const double fd = oracles::central_diff(
        [&](double dy) { return varphi(kTwoAtom, {1.0, dy}, kSigma); }, 0.2, 1e-6);
    CHECK(std::fabs(fd - direct) < 1e-6 * std::fabs(direct));

    CHECK(varphi_y(kTwoAtom, {0.0, 0.0}, kSigma) ==
          doctest::Approx(kTwoAtom.variance() / (kSigma * kSigma)).epsilon(1e-13));
}

TEST_CASE("posterior weights stay normalized under extreme exponents") {
    DiscretePrior wide;
    for (int i = 0; i < 41; ++i)
        wide.atoms.push_back({-1.0 + 0.05 * i, 1.0 / 41.0});
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ts(0.0, 50.0);
    std::uniform_real_distribution<double> dys(-5.0, 5.0);
    for (int i = 0; i < 50; ++i) {
        const auto w = posterior_weights(wide, {ts(rng), dys(rng)}, kSigma);
        double total = 0.0;
        for (const double wi : w) {
            CHECK(wi >= 0.0);
            total += wi;
        }
        CHECK(std::fabs(total - 1.0) < 1e-12);
    }
}

TEST_CASE("posterior mean is nondecreasing in the observed log price") {
    double prev = -1e300;
    for (double dy = -2.0; dy <= 2.0; dy += 0.05) {
        const double m = varphi(kTwoAtom, {1.5, dy}, kSigma);
        CHECK(m >= prev);
        CHECK(m > prev);  // strictly increasing with two atoms
        prev = m;
    }
}

TEST_CASE("degenerate weights raise a numeric error") {
    const DiscretePrior huge{{{1e200, 0.5}, {2e200, 0.5}}};
    CHECK_THROWS_AS(posterior_weights(huge, {1.0, 0.0}, kSigma), NumericError);
}

TEST_CASE("gaussian posterior: t = 0 and the reference variance") {
    const auto market = oracles::ref_market();
    const auto prior = oracles::ref_prior();
    const BeliefState at0 = gaussian_posterior(prior, market, {0.0, 0.4});
    CHECK(at0.beta == doctest::Approx(prior.beta0).epsilon(1e-14));
    CHECK(at0.zeta == doctest::Approx(prior.var()).epsilon(1e-14));

    // frozen: zeta(2) for sigma = 0.192, sigma0 = 0.121
    const BeliefState atT = gaussian_posterior(prior, market, {2.0, 0.1});
    CHECK(atT.zeta == doctest::Approx(0.0081596139449097451).epsilon(1e-13));
    const long double s2 = 0.192L * 0.192L;
    const long double s02 = 0.121L * 0.121L;
    CHECK(atT.zeta ==
          doctest::Approx(static_cast<double>(s2 * s02 / (s2 + 2.0L * s02))).epsilon(1e-14));
}

TEST_CASE("gaussian posterior agrees with a fine discretized prior") {
    const auto market = oracles::ref_market();
    const auto prior = oracles::ref_prior();

    // 2001 atoms over beta0 +- 8 sigma0 with Gaussian weights
    DiscretePrior grid;
    const int n = 2001;
    const double lo = prior.beta0 - 8.0 * prior.sigma0;
    const double hi = prior.beta0 + 8.0 * prior.sigma0;
    const double dz = (hi - lo) / (n - 1);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = lo + i * dz;
        const double u = (z - prior.beta0) / prior.sigma0;
        const double w = std::exp(-0.5 * u * u);
        grid.atoms.push_back({z, w});
        total += w;
    }
    for (auto& a : grid.atoms) a.w /= total;

    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> ts(0.0, market.horizon);
    std::uniform_real_distribution<double> dys(-0.6, 0.6);
    for (int i = 0; i < 12; ++i) {
        const ObservationSummary obs{ts(rng), dys(rng)};
        const BeliefState conjugate = gaussian_posterior(prior, market, obs);
        const double discrete_mean = varphi(grid, obs, market.sigma);
        CHECK(std::fabs(discrete_mean - conjugate.beta) < 1e-6);
        const double discrete_vy = varphi_y(grid, obs, market.sigma);
        CHECK(std::fabs(discrete_vy - conjugate.zeta / market.sigma2()) < 1e-6);
    }
}

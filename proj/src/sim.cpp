#include "ambeq/sim.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <memory>
#include <thread>

#include "ambeq/rng.hpp"

namespace ambeq {

namespace {

constexpr std::uint32_t kStreamInside = 1;
constexpr std::uint32_t kStreamOuter = 2;
constexpr std::uint32_t kStreamNested = 3;

struct PathEnd {
    double x = 0.0;
    double beta = 0.0;
    bool ok = false;
};

// Euler step for the wealth, posterior mean per the configured scheme;
// both schemes consume the same Brownian increments.
template <class Strat>
PathEnd run_path(double z, const Strat& strat, const SimConfig& cfg,
                 const MarketParams& market, const GaussianPrior& prior,
                 std::uint32_t stream, std::uint64_t path_id, double sign,
                 double t_end, long steps) {
    NormalStream normals(cfg.seed, stream, path_id);
    const double span = t_end - cfg.t0;
    const double dt = span / static_cast<double>(steps);
    const double sqrt_dt = std::sqrt(dt);
    const double s2 = market.sigma2();
    const double inv_zeta0 = 1.0 / zeta(cfg.t0, market, prior);
    const double growth = std::exp(market.r * dt);  // exact bond accumulation

    double x = cfg.x0;
    double beta = cfg.beta0;
    double w_cum = 0.0;
    for (long j = 0; j < steps; ++j) {
        const double t = cfg.t0 + static_cast<double>(j) * dt;
        const double t_next = cfg.t0 + static_cast<double>(j + 1) * dt;
        const double xi = sign * normals.next();
        const double dw = sqrt_dt * xi;
        const double pi = strat(t, x, beta);
        x = x * growth + pi * ((z - market.r) * dt + market.sigma * dw);
        if (cfg.scheme == BetaScheme::exact) {
            w_cum += dw;
            beta = zeta(t_next, market, prior) *
                   (inv_zeta0 * cfg.beta0 + z * (t_next - cfg.t0) / s2 + w_cum / market.sigma);
        } else {
            beta += zeta(t, market, prior) / s2 * ((z - beta) * dt + market.sigma * dw);
        }
        if (!std::isfinite(x) || !std::isfinite(beta)) return {x, beta, false};
    }
    return {x, beta, true};
}

struct MeanAccum {
    double sum = 0.0;
    double sum_sq = 0.0;
    double aux_a = 0.0;
    double aux_b = 0.0;
    long n = 0;
    long excluded = 0;

    void value(double v) {
        sum += v;
        sum_sq += v * v;
        ++n;
    }
    void merge(const MeanAccum& o) {
        sum += o.sum;
        sum_sq += o.sum_sq;
        aux_a += o.aux_a;
        aux_b += o.aux_b;
        n += o.n;
        excluded += o.excluded;
    }
};

// Fixed batches of work units; thread count only decides who computes
// which batch, the batch partials and their pairwise merge order do not
// change. Keeps estimates bit-identical across thread counts.
template <class Accum, class UnitFn>
Accum run_units(long n_units, long batch_size, int threads, const UnitFn& fn) {
    if (n_units <= 0) return Accum{};
    const long n_batches = (n_units + batch_size - 1) / batch_size;
    std::vector<Accum> parts(static_cast<std::size_t>(n_batches));
    long use = threads <= 0 ? static_cast<long>(std::thread::hardware_concurrency()) : threads;
    use = std::max<long>(1, std::min(use, n_batches));

    std::atomic<long> next{0};
    const auto worker = [&]() {
        for (;;) {
            const long b = next.fetch_add(1, std::memory_order_relaxed);
            if (b >= n_batches) break;
            const long lo = b * batch_size;
            const long hi = std::min(n_units, lo + batch_size);
            for (long u = lo; u < hi; ++u) fn(u, parts[static_cast<std::size_t>(b)]);
        }
    };
    if (use == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(use));
        for (long i = 0; i < use; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (long stride = 1; stride < n_batches; stride *= 2)
        for (long i = 0; i + stride < n_batches; i += 2 * stride)
            parts[static_cast<std::size_t>(i)].merge(parts[static_cast<std::size_t>(i + stride)]);
    return parts[0];
}

SimReport report_from(const MeanAccum& a) {
    SimReport r;
    r.n_effective = a.n;
    if (a.n > 0) r.estimate = a.sum / static_cast<double>(a.n);
    if (a.n > 1) {
        const double var =
            (a.sum_sq - static_cast<double>(a.n) * r.estimate * r.estimate) /
            static_cast<double>(a.n - 1);
        r.std_error = std::sqrt(std::max(0.0, var) / static_cast<double>(a.n));
    }
    r.diagnostics.push_back({"excluded_units", static_cast<double>(a.excluded)});
    return r;
}

} // namespace

void SimConfig::validate(const MarketParams& market) const {
    market.validate();
    if (n_paths < 1) throw ParameterError("sim: n_paths must be at least 1");
    if (n_steps < 1) throw ParameterError("sim: n_steps must be at least 1");
    if (inner_paths < 1) throw ParameterError("sim: inner_paths must be at least 1");
    if (outer_paths < 1) throw ParameterError("sim: outer_paths must be at least 1");
    if (!(t0 >= 0.0) || !(t0 < market.horizon))
        throw ParameterError("sim: t0 must lie in [0, T)");
    if (!std::isfinite(x0) || !std::isfinite(beta0))
        throw ParameterError("sim: initial state must be finite");
}

double SimReport::diagnostic(const std::string& name) const {
    for (const auto& [key, value] : diagnostics)
        if (key == name) return value;
    throw ParameterError("sim report: no diagnostic named " + name);
}

Strategy make_equilibrium_strategy(const OdeSolution& sol, const MarketParams& market,
                                   const Preferences& prefs) {
    prefs.validate();
    auto shared = std::make_shared<OdeSolution>(sol);
    const double k = prefs.k;
    const double s2 = market.sigma2();
    const double r = market.r;
    const double T = market.horizon;
    return [shared, k, s2, r, T](double t, double /*x*/, double beta) {
        return std::exp(-r * (T - t)) / (k * s2) * shared->strategy_coeff_at(t) * (beta - r);
    };
}

TerminalSamples simulate_inside(double z, const Strategy& strategy, const SimConfig& cfg,
                                const MarketParams& market, const GaussianPrior& prior,
                                int threads) {
    cfg.validate(market);
    prior.validate();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    TerminalSamples out;
    out.x.assign(static_cast<std::size_t>(cfg.n_paths), nan);
    out.beta.assign(static_cast<std::size_t>(cfg.n_paths), nan);

    const long n_units = cfg.antithetic ? (cfg.n_paths + 1) / 2 : cfg.n_paths;
    const auto unit = [&](long u, MeanAccum& acc) {
        const auto store = [&](long idx, const PathEnd& e) {
            if (e.ok) {
                out.x[static_cast<std::size_t>(idx)] = e.x;
                out.beta[static_cast<std::size_t>(idx)] = e.beta;
            } else {
                ++acc.excluded;
            }
        };
        if (cfg.antithetic) {
            store(2 * u, run_path(z, strategy, cfg, market, prior, kStreamInside,
                                  static_cast<std::uint64_t>(u), +1.0, market.horizon,
                                  cfg.n_steps));
            if (2 * u + 1 < cfg.n_paths)
                store(2 * u + 1, run_path(z, strategy, cfg, market, prior, kStreamInside,
                                          static_cast<std::uint64_t>(u), -1.0,
                                          market.horizon, cfg.n_steps));
        } else {
            store(u, run_path(z, strategy, cfg, market, prior, kStreamInside,
                              static_cast<std::uint64_t>(u), +1.0, market.horizon,
                              cfg.n_steps));
        }
    };
    const MeanAccum acc = run_units<MeanAccum>(n_units, 4096, threads, unit);
    out.excluded = acc.excluded;
    return out;
}

SimReport estimate_inside_utility(double z, const Strategy& strategy, const SimConfig& cfg,
                                  const MarketParams& market, const GaussianPrior& prior,
                                  const Preferences& prefs, int threads) {
    cfg.validate(market);
    prior.validate();
    prefs.validate();
    const long n_units = cfg.antithetic ? cfg.n_paths / 2 : cfg.n_paths;
    const auto unit = [&](long u, MeanAccum& acc) {
        if (cfg.antithetic) {
            const PathEnd plus = run_path(z, strategy, cfg, market, prior, kStreamInside,
                                          static_cast<std::uint64_t>(u), +1.0,
                                          market.horizon, cfg.n_steps);
            const PathEnd minus = run_path(z, strategy, cfg, market, prior, kStreamInside,
                                           static_cast<std::uint64_t>(u), -1.0,
                                           market.horizon, cfg.n_steps);
            if (!plus.ok || !minus.ok) {
                ++acc.excluded;
                return;
            }
            acc.value(0.5 * (utility(plus.x, prefs.k) + utility(minus.x, prefs.k)));
        } else {
            const PathEnd end = run_path(z, strategy, cfg, market, prior, kStreamInside,
                                         static_cast<std::uint64_t>(u), +1.0,
                                         market.horizon, cfg.n_steps);
            if (!end.ok) {
                ++acc.excluded;
                return;
            }
            acc.value(utility(end.x, prefs.k));
        }
    };
    SimReport r = report_from(run_units<MeanAccum>(n_units, 4096, threads, unit));
    r.diagnostics.push_back({"antithetic", cfg.antithetic ? 1.0 : 0.0});
    return r;
}

namespace {

// Inner conditional-expected-utility estimate for one outer drift draw,
// with split halves for the jackknife bias term.
struct InnerMeans {
    double full = 0.0;
    double half_a = 0.0;
    double half_b = 0.0;
    long included = 0;
};

template <class StratT>
InnerMeans inner_utility_mean(double z, const StratT& strategy, const SimConfig& cfg,
                              const MarketParams& market, const GaussianPrior& prior,
                              const Preferences& prefs, long outer_index) {
    const long pairs = std::max<long>(1, cfg.inner_paths / 2);
    InnerMeans m;
    double sum = 0.0, sum_a = 0.0, sum_b = 0.0;
    long n_a = 0, n_b = 0;
    for (long j = 0; j < pairs; ++j) {
        const std::uint64_t path_id =
            static_cast<std::uint64_t>(outer_index) * static_cast<std::uint64_t>(pairs) +
            static_cast<std::uint64_t>(j);
        const PathEnd plus = run_path(z, strategy, cfg, market, prior, kStreamNested,
                                      path_id, +1.0, market.horizon, cfg.n_steps);
        const PathEnd minus = run_path(z, strategy, cfg, market, prior, kStreamNested,
                                       path_id, -1.0, market.horizon, cfg.n_steps);
        if (!plus.ok || !minus.ok) continue;
        const double v = 0.5 * (utility(plus.x, prefs.k) + utility(minus.x, prefs.k));
        sum += v;
        if (j % 2 == 0) {
            sum_a += v;
            ++n_a;
        } else {
            sum_b += v;
            ++n_b;
        }
        ++m.included;
    }
    if (m.included > 0) m.full = sum / static_cast<double>(m.included);
    if (n_a > 0) m.half_a = sum_a / static_cast<double>(n_a);
    if (n_b > 0) m.half_b = sum_b / static_cast<double>(n_b);
    // a single inner pair cannot be split: keep the estimate, report no bias
    if (n_a == 0 || n_b == 0) {
        m.half_a = m.full;
        m.half_b = m.full;
    }
    return m;
}

double outer_draw(const SimConfig& cfg, const MarketParams& market,
                  const GaussianPrior& prior, long outer_index) {
    NormalStream ns(cfg.seed, kStreamOuter, static_cast<std::uint64_t>(outer_index));
    return cfg.beta0 + std::sqrt(zeta(cfg.t0, market, prior)) * ns.next();
}

} // namespace

SimReport estimate_J(const Strategy& strategy, const SimConfig& cfg,
                     const MarketParams& market, const GaussianPrior& prior,
                     const Preferences& prefs, int threads) {
    cfg.validate(market);
    prior.validate();
    prefs.validate();
    const double alpha = prefs.alpha;
    const auto unit = [&](long o, MeanAccum& acc) {
        const double z = outer_draw(cfg, market, prior, o);
        const InnerMeans m =
            inner_utility_mean(z, strategy, cfg, market, prior, prefs, o);
        if (m.included == 0) {
            ++acc.excluded;
            return;
        }
        if (!(m.full < 0.0))
            throw NumericError("estimate_J: inner utility estimate is not negative");
        const double v = phi(m.full, alpha);
        acc.value(v);
        acc.aux_a += 0.5 * (phi(m.half_a, alpha) + phi(m.half_b, alpha)) - v;
    };
    const MeanAccum acc = run_units<MeanAccum>(cfg.outer_paths, 16, threads, unit);
    SimReport r = report_from(acc);
    if (acc.n > 0)
        r.diagnostics.push_back({"jackknife_bias", acc.aux_a / static_cast<double>(acc.n)});
    r.diagnostics.push_back({"outer_paths", static_cast<double>(cfg.outer_paths)});
    r.diagnostics.push_back({"inner_paths", static_cast<double>(cfg.inner_paths)});
    return r;
}

std::vector<SimReport> perturbation_test(const Strategy& pi_perturb,
                                         const std::vector<double>& h_list,
                                         const SimConfig& cfg, const OdeSolution& sol,
                                         const MarketParams& market,
                                         const GaussianPrior& prior,
                                         const Preferences& prefs, int threads) {
    cfg.validate(market);
    prior.validate();
    prefs.validate();
    const Strategy pi_eq = make_equilibrium_strategy(sol, market, prefs);
    const double alpha = prefs.alpha;

    std::vector<SimReport> out;
    out.reserve(h_list.size());
    for (const double h : h_list) {
        if (!(h > 0.0) || !(cfg.t0 + h < market.horizon))
            throw ParameterError("perturbation_test: h must lie in (0, T - t0)");
        const double cutoff = cfg.t0 + h;
        const auto spiked = [&](double t, double x, double beta) {
            return t < cutoff ? pi_perturb(t, x, beta) : pi_eq(t, x, beta);
        };
        const auto unit = [&](long o, MeanAccum& acc) {
            const double z = outer_draw(cfg, market, prior, o);
            const InnerMeans a =
                inner_utility_mean(z, spiked, cfg, market, prior, prefs, o);
            const InnerMeans b =
                inner_utility_mean(z, pi_eq, cfg, market, prior, prefs, o);
            if (a.included == 0 || b.included == 0) {
                ++acc.excluded;
                return;
            }
            const double phi_a = phi(a.full, alpha);
            const double phi_b = phi(b.full, alpha);
            acc.value(phi_a - phi_b);
            acc.aux_a += phi_a;
            acc.aux_b += phi_b;
        };
        const MeanAccum acc = run_units<MeanAccum>(cfg.outer_paths, 16, threads, unit);
        SimReport r = report_from(acc);
        // common random numbers: the slope is the paired difference over h
        r.estimate /= h;
        r.std_error /= h;
        r.diagnostics.push_back({"h", h});
        if (acc.n > 0) {
            r.diagnostics.push_back({"j_perturbed", acc.aux_a / static_cast<double>(acc.n)});
            r.diagnostics.push_back({"j_equilibrium", acc.aux_b / static_cast<double>(acc.n)});
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<SimReport> martingale_check_strategy(double z, const Strategy& strategy,
                                                 const std::vector<double>& deltas,
                                                 const SimConfig& cfg, const OdeSolution& sol,
                                                 const MarketParams& market,
                                                 const GaussianPrior& prior,
                                                 const Preferences& prefs, int threads) {
    cfg.validate(market);
    prior.validate();
    prefs.validate();
    const AnsatzValue g0 = g_value(cfg.t0, cfg.x0, cfg.beta0, z, sol, market, prefs);
    const double span = market.horizon - cfg.t0;

    std::vector<SimReport> out;
    out.reserve(deltas.size());
    for (const double delta : deltas) {
        if (!(delta > 0.0) || !(cfg.t0 + delta <= market.horizon))
            throw ParameterError("martingale_check: delta must lie in (0, T - t0]");
        const double t_end = cfg.t0 + delta;
        const long steps = std::max<long>(
            1, std::lround(static_cast<double>(cfg.n_steps) * delta / span));
        const long n_units = std::max<long>(1, cfg.n_paths / 2);
        const auto unit = [&](long u, MeanAccum& acc) {
            const PathEnd plus = run_path(z, strategy, cfg, market, prior, kStreamInside,
                                          static_cast<std::uint64_t>(u), +1.0, t_end, steps);
            const PathEnd minus = run_path(z, strategy, cfg, market, prior, kStreamInside,
                                           static_cast<std::uint64_t>(u), -1.0, t_end, steps);
            if (!plus.ok || !minus.ok) {
                ++acc.excluded;
                return;
            }
            const double ga = g_value(t_end, plus.x, plus.beta, z, sol, market, prefs).g;
            const double gb = g_value(t_end, minus.x, minus.beta, z, sol, market, prefs).g;
            acc.value(0.5 * (ga + gb));
        };
        SimReport r = report_from(run_units<MeanAccum>(n_units, 1024, threads, unit));
        r.diagnostics.push_back({"g_start", g0.g});
        r.diagnostics.push_back({"delta", delta});
        r.diagnostics.push_back({"steps", static_cast<double>(steps)});
        r.estimate -= g0.g;
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<SimReport> martingale_check(double z, const std::vector<double>& deltas,
                                        const SimConfig& cfg, const OdeSolution& sol,
                                        const MarketParams& market,
                                        const GaussianPrior& prior,
                                        const Preferences& prefs, int threads) {
    return martingale_check_strategy(z, make_equilibrium_strategy(sol, market, prefs),
                                     deltas, cfg, sol, market, prior, prefs, threads);
}

} // namespace ambeq

// Command-line front end: calibration, closed-form solves with an RK4
// cross-check, figure sweeps, Monte Carlo experiments, and the numeric
// verification suite. Outputs are CSV plus a machine-readable manifest.

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ambeq/bayes.hpp"
#include "ambeq/ingest.hpp"
#include "ambeq/odes.hpp"
#include "ambeq/sim.hpp"
#include "ambeq/strategy.hpp"

using json = nlohmann::json;
using namespace ambeq;

namespace {

constexpr const char* kVersion = "0.1.0";

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitValidity = 2;
constexpr int kExitVerification = 3;

// locale-proof, round-trip-exact number formatting for CSV
std::string fmt(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

struct RunConfig {
    MarketParams market{0.02, 0.192, 2.0};
    GaussianPrior prior{0.172, 0.121};
    Preferences prefs{1.0, 1.5};
    // sim.beta0 starts unset (NaN) and resolves to the prior mean

    RunConfig() { sim.beta0 = std::numeric_limits<double>::quiet_NaN(); }

    int grid_steps = 2000;
    int beta_points = 5;
    double beta_span = 2.0;  // strategy table covers beta0 +- span * sigma0

    SimConfig sim;

    int sweep_points = 100;
    double alpha_min = -0.25;
    double alpha_max = 5.0;
    double sigma0_min = 0.005;
    double sigma0_max = 0.5;

    std::string out_dir = "out";
};

json to_json(const RunConfig& cfg) {
    json j;
    j["market"] = {{"r", cfg.market.r}, {"sigma", cfg.market.sigma}, {"T", cfg.market.horizon}};
    j["prior"] = {{"beta0", cfg.prior.beta0}, {"sigma0", cfg.prior.sigma0}};
    j["prefs"] = {{"k", cfg.prefs.k}, {"alpha", cfg.prefs.alpha}};
    j["grid"] = {{"n_steps", cfg.grid_steps},
                 {"beta_points", cfg.beta_points},
                 {"beta_span", cfg.beta_span}};
    j["sim"] = {{"n_paths", cfg.sim.n_paths},
                {"n_steps", cfg.sim.n_steps},
                {"seed", cfg.sim.seed},
                {"t0", cfg.sim.t0},
                {"x0", cfg.sim.x0},
                {"beta0", cfg.sim.beta0},
                {"inner_paths", cfg.sim.inner_paths},
                {"outer_paths", cfg.sim.outer_paths},
                {"scheme", cfg.sim.scheme == BetaScheme::exact ? "exact-beta" : "euler"},
                {"antithetic", cfg.sim.antithetic}};
    j["sweep"] = {{"points", cfg.sweep_points},
                  {"alpha_min", cfg.alpha_min},
                  {"alpha_max", cfg.alpha_max},
                  {"sigma0_min", cfg.sigma0_min},
                  {"sigma0_max", cfg.sigma0_max}};
    j["output_dir"] = cfg.out_dir;
    return j;
}

void merge_config(RunConfig& cfg, const json& j) {
    if (j.contains("market")) {
        const auto& m = j.at("market");
        cfg.market.r = m.value("r", cfg.market.r);
        cfg.market.sigma = m.value("sigma", cfg.market.sigma);
        cfg.market.horizon = m.value("T", cfg.market.horizon);
    }
    if (j.contains("prior")) {
        const auto& p = j.at("prior");
        cfg.prior.beta0 = p.value("beta0", cfg.prior.beta0);
        cfg.prior.sigma0 = p.value("sigma0", cfg.prior.sigma0);
    }
    if (j.contains("prefs")) {
        const auto& p = j.at("prefs");
        cfg.prefs.k = p.value("k", cfg.prefs.k);
        cfg.prefs.alpha = p.value("alpha", cfg.prefs.alpha);
    }
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        cfg.grid_steps = g.value("n_steps", cfg.grid_steps);
        cfg.beta_points = g.value("beta_points", cfg.beta_points);
        cfg.beta_span = g.value("beta_span", cfg.beta_span);
    }
    if (j.contains("sim")) {
        const auto& s = j.at("sim");
        cfg.sim.n_paths = s.value("n_paths", cfg.sim.n_paths);
        cfg.sim.n_steps = s.value("n_steps", cfg.sim.n_steps);
        cfg.sim.seed = s.value("seed", cfg.sim.seed);
        cfg.sim.t0 = s.value("t0", cfg.sim.t0);
        cfg.sim.x0 = s.value("x0", cfg.sim.x0);
        if (s.contains("beta0") && !s.at("beta0").is_null())
            cfg.sim.beta0 = s.at("beta0").get<double>();
        cfg.sim.inner_paths = s.value("inner_paths", cfg.sim.inner_paths);
        cfg.sim.outer_paths = s.value("outer_paths", cfg.sim.outer_paths);
        if (s.contains("scheme")) {
            const std::string scheme = s.at("scheme").get<std::string>();
            if (scheme == "euler")
                cfg.sim.scheme = BetaScheme::euler;
            else if (scheme == "exact-beta")
                cfg.sim.scheme = BetaScheme::exact;
            else
                throw ParameterError("config: unknown scheme '" + scheme + "'");
        }
        cfg.sim.antithetic = s.value("antithetic", cfg.sim.antithetic);
    }
    if (j.contains("sweep")) {
        const auto& s = j.at("sweep");
        cfg.sweep_points = s.value("points", cfg.sweep_points);
        cfg.alpha_min = s.value("alpha_min", cfg.alpha_min);
        cfg.alpha_max = s.value("alpha_max", cfg.alpha_max);
        cfg.sigma0_min = s.value("sigma0_min", cfg.sigma0_min);
        cfg.sigma0_max = s.value("sigma0_max", cfg.sigma0_max);
    }
    if (j.contains("output_dir")) cfg.out_dir = j.at("output_dir").get<std::string>();
}

void load_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    json j;
    in >> j;
    // a manifest from an earlier run carries its config under "config"
    if (j.contains("config")) j = j.at("config");
    merge_config(cfg, j);
}

std::filesystem::path prepare_out_dir(const RunConfig& cfg) {
    std::filesystem::path dir(cfg.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + cfg.out_dir + "'");
    return dir;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

// Full resolved configuration plus tool metadata; thread count is an
// execution detail and deliberately not recorded, so re-running a manifest
// with any --threads value reproduces the outputs byte for byte.
void write_manifest(const std::filesystem::path& dir, const std::string& command,
                    const RunConfig& cfg) {
    json manifest;
    manifest["app"] = "ambeq";
    manifest["version"] = kVersion;
    manifest["command"] = command;
    manifest["config"] = to_json(cfg);
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

void print_warnings(const OdeSolution& sol) {
    for (const auto& w : sol.warnings) std::cerr << "warning: " << w << "\n";
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

int cmd_solve(const RunConfig& cfg) {
    const auto dir = prepare_out_dir(cfg);
    const OdeSolution cf =
        solve_ode_closed_form(cfg.market, cfg.prior, cfg.prefs, cfg.grid_steps);
    print_warnings(cf);

    const int factor = std::max(1, (999 + cfg.grid_steps) / cfg.grid_steps);
    const OdeSolution rk =
        solve_ode_numeric(cfg.market, cfg.prior, cfg.prefs, cfg.grid_steps * factor);

    // per-component sup norms of the closed-form solution set the scale
    double sup[6] = {0, 0, 0, 0, 0, 0};
    for (std::size_t i = 0; i < cf.size(); ++i) {
        const OdeState s = cf.node(i);
        const double vals[6] = {s.m1, s.m2, s.m3, s.m4, s.m5, s.m6};
        for (int c = 0; c < 6; ++c) sup[c] = std::max(sup[c], std::fabs(vals[c]));
    }

    std::string csv = "t,m1,m2,m3,m4,m5,m6,A1,A2,zeta,rk4_rel_err\n";
    for (std::size_t i = 0; i < cf.size(); ++i) {
        const OdeState a = cf.node(i);
        const OdeState b = rk.node(i * static_cast<std::size_t>(factor));
        const double av[6] = {a.m1, a.m2, a.m3, a.m4, a.m5, a.m6};
        const double bv[6] = {b.m1, b.m2, b.m3, b.m4, b.m5, b.m6};
        double rel = 0.0;
        for (int c = 0; c < 6; ++c)
            rel = std::max(rel, std::fabs(av[c] - bv[c]) / std::max(sup[c], 1e-300));
        csv += fmt(cf.t[i]) + ',' + fmt(a.m1) + ',' + fmt(a.m2) + ',' + fmt(a.m3) + ',' +
               fmt(a.m4) + ',' + fmt(a.m5) + ',' + fmt(a.m6) + ',' + fmt(cf.a1[i]) + ',' +
               fmt(cf.a2[i]) + ',' + fmt(cf.zeta[i]) + ',' + fmt(rel) + '\n';
    }
    write_text(dir / "ode_solution.csv", csv);

    std::string strat = "t,beta,pi,pi_myopic,hZ,hBeta\n";
    for (std::size_t i = 0; i < cf.size(); ++i) {
        for (int bpt = 0; bpt < cfg.beta_points; ++bpt) {
            const double frac =
                cfg.beta_points == 1
                    ? 0.0
                    : -1.0 + 2.0 * static_cast<double>(bpt) / (cfg.beta_points - 1);
            const double beta = cfg.prior.beta0 + frac * cfg.beta_span * cfg.prior.sigma0;
            const StrategyDecomposition d =
                decompose(cf.t[i], beta, cf, cfg.market, cfg.prefs);
            strat += fmt(cf.t[i]) + ',' + fmt(beta) + ',' + fmt(d.pi_total) + ',' +
                     fmt(d.pi_myopic) + ',' + fmt(d.h_z) + ',' + fmt(d.h_beta) + '\n';
        }
    }
    write_text(dir / "strategy.csv", strat);
    write_manifest(dir, "solve", cfg);
    std::cout << "solve: wrote " << (dir / "ode_solution.csv").string() << " and "
              << (dir / "strategy.csv").string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct SweepRow {
    double value = 0.0;
    double h_z = 0.0;
    double h_beta = 0.0;
    bool ok = false;
};

SweepRow sweep_point(double alpha, const MarketParams& market, const GaussianPrior& prior,
                     const Preferences& base) {
    SweepRow row;
    try {
        if (!alpha_is_solvable(alpha, market, prior)) return row;
        const auto [m2, m3] = closed_form_m2_m3(0.0, alpha, market, prior);
        const double m1 = m1_quadrature(0.0, alpha, market, prior);
        Preferences prefs = base;
        prefs.alpha = alpha;
        const StrategyDecomposition d =
            hedge_ratios_from(0.0, prior.beta0, m1, m2, m3, market, prior, prefs);
        row.h_z = d.h_z;
        row.h_beta = d.h_beta;
        row.ok = true;
    } catch (const ValidityError&) {
        row.ok = false;
    } catch (const NumericError&) {
        row.ok = false;
    }
    return row;
}

int cmd_sweep(const RunConfig& cfg, const std::string& axis) {
    const auto dir = prepare_out_dir(cfg);
    std::string csv = axis + ",hZ,hBeta,h,status\n";
    const int n = std::max(2, cfg.sweep_points);
    for (int i = 0; i < n; ++i) {
        const double frac = static_cast<double>(i) / (n - 1);
        SweepRow row;
        double value;
        if (axis == "alpha") {
            value = cfg.alpha_min + frac * (cfg.alpha_max - cfg.alpha_min);
            row = sweep_point(value, cfg.market, cfg.prior, cfg.prefs);
        } else if (axis == "sigma0") {
            value = cfg.sigma0_min + frac * (cfg.sigma0_max - cfg.sigma0_min);
            GaussianPrior prior = cfg.prior;
            prior.sigma0 = value;
            row = sweep_point(cfg.prefs.alpha, cfg.market, prior, cfg.prefs);
        } else {
            throw ParameterError("sweep: axis must be alpha or sigma0");
        }
        row.value = value;
        if (row.ok)
            csv += fmt(row.value) + ',' + fmt(row.h_z) + ',' + fmt(row.h_beta) + ',' +
                   fmt(row.h_z + row.h_beta) + ",ok\n";
        else
            csv += fmt(row.value) + ",,,,skipped\n";
    }
    write_text(dir / "sweep.csv", csv);
    write_manifest(dir, "sweep --axis " + axis, cfg);
    std::cout << "sweep: wrote " << (dir / "sweep.csv").string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct Check {
    std::string name;
    bool passed = false;
    double value = 0.0;
    double threshold = 0.0;
    std::string details;
};

json check_json(const Check& c) {
    return json{{"name", c.name},
                {"passed", c.passed},
                {"value", c.value},
                {"threshold", c.threshold},
                {"details", c.details}};
}

int cmd_verify(const RunConfig& cfg, long outer, long inner, int threads) {
    const auto dir = prepare_out_dir(cfg);
    std::vector<Check> checks;
    const std::vector<double> alphas{-0.3, 0.0, 0.5, 1.0, 1.5, 3.0};

    // closed form vs backward RK4, sup-norm relative error on (m2, m3)
    {
        Check c{"ode_oracle", false, 0.0, 1e-6, "closed form vs rk4(1e5), m2/m3 sup rel"};
        double worst = 0.0;
        for (const double a : alphas) {
            Preferences prefs = cfg.prefs;
            prefs.alpha = a;
            const OdeSolution cf =
                solve_ode_closed_form(cfg.market, cfg.prior, prefs, 1000);
            const OdeSolution rk = solve_ode_numeric(cfg.market, cfg.prior, prefs, 100000);
            double sup2 = 0.0, sup3 = 0.0, d2 = 0.0, d3 = 0.0;
            for (std::size_t i = 0; i < cf.size(); ++i) {
                const std::size_t j = i * 100;
                sup2 = std::max(sup2, std::fabs(cf.m2[i]));
                sup3 = std::max(sup3, std::fabs(cf.m3[i]));
                d2 = std::max(d2, std::fabs(cf.m2[i] - rk.m2[j]));
                d3 = std::max(d3, std::fabs(cf.m3[i] - rk.m3[j]));
            }
            worst = std::max({worst, d2 / sup2, d3 / sup3});
        }
        c.value = worst;
        c.passed = worst < c.threshold;
        checks.push_back(c);
    }

    // m4/m5 identities along the RK4 solution and the sign bands
    {
        Check c{"identities_and_bands", false, 0.0, 1e-8,
                "max |m4 + r(m1+m2)|, |m5 + r(m2+m3)| on rk4; bands checked"};
        double worst = 0.0;
        bool bands = true;
        for (const double a : alphas) {
            Preferences prefs = cfg.prefs;
            prefs.alpha = a;
            const OdeSolution rk = solve_ode_numeric(cfg.market, cfg.prior, prefs, 20000);
            for (std::size_t i = 0; i < rk.size(); ++i) {
                worst = std::max(worst,
                                 std::fabs(rk.m4[i] + cfg.market.r * (rk.m1[i] + rk.m2[i])));
                worst = std::max(worst,
                                 std::fabs(rk.m5[i] + cfg.market.r * (rk.m2[i] + rk.m3[i])));
                if (i + 1 < rk.size()) {
                    const double zm2 = rk.zeta[i] * rk.m2[i];
                    bands = bands && zm2 < 0.0 && zm2 > -1.0 / std::max(a, 1.0) &&
                            rk.m3[i] < 0.0 && 1.0 / rk.zeta[i] - a * rk.m3[i] > 0.0;
                }
            }
        }
        c.value = worst;
        c.passed = worst < c.threshold && bands;
        if (!bands) c.details += " [band violation]";
        checks.push_back(c);
    }

    // solvability threshold: negative root, small residual, route agreement
    {
        Check c{"alpha_star", false, 0.0, 1e-8, "equation residual at the root"};
        const double astar = alpha_star(cfg.market, cfg.prior);
        const double prefactor =
            1.0 + cfg.market.sigma2() / (cfg.prior.var() * cfg.market.horizon);
        const double residual =
            std::fabs(prefactor * ambiguity_threshold_integral(astar) - 1.0);
        const double agreement = std::fabs(ambiguity_threshold_integral(astar) -
                                           ambiguity_threshold_integral_substituted(astar));
        c.value = residual;
        c.passed = astar < 0.0 && residual < 1e-8 && agreement < 1e-9;
        c.details = "alpha* = " + fmt(astar) + ", route agreement " + fmt(agreement);
        checks.push_back(c);
    }

    // first-order condition and generator residual on a (t, beta) grid
    {
        Check foc{"foc_match", false, 0.0, 1e-8, "max |foc - pi*| / |pi*| on 10x10 grid"};
        Check pde{"pde_residual", false, 0.0, 1e-8, "max scaled residual at pi*"};
        double worst_foc = 0.0, worst_pde = 0.0;
        for (const double a : {-0.3, 0.0, 0.5, 1.0, 1.5}) {
            Preferences prefs = cfg.prefs;
            prefs.alpha = a;
            const OdeSolution sol =
                solve_ode_closed_form(cfg.market, cfg.prior, prefs, 1000);
            for (int i = 0; i < 10; ++i) {
                const double t = cfg.market.horizon * i / 10.0;
                for (int jb = 0; jb < 10; ++jb) {
                    const double beta = -0.1 + 0.06 * jb;
                    const double pi = equilibrium_pi(t, 1.0, beta, sol, cfg.market, prefs);
                    const double hat = foc_maximizer(t, 1.0, beta, sol, cfg.market, prefs);
                    worst_foc = std::max(worst_foc, std::fabs(hat - pi) /
                                                        std::max(1e-12, std::fabs(pi)));
                    const double z = beta + 0.5 * cfg.prior.sigma0;
                    const ResidualValue res =
                        pde_residual(t, 1.0, beta, z, pi, sol, cfg.market, prefs);
                    worst_pde = std::max(worst_pde, std::fabs(res.value) / res.term_scale);
                }
            }
        }
        foc.value = worst_foc;
        foc.passed = worst_foc < foc.threshold;
        pde.value = worst_pde;
        pde.passed = worst_pde < pde.threshold;
        checks.push_back(foc);
        checks.push_back(pde);
    }

    // martingale property of the inside value under pi*
    {
        Check c{"martingale", false, 0.0, 3.0, "max |drift| / SE at deltas 0.05, 0.1"};
        const OdeSolution sol =
            solve_ode_closed_form(cfg.market, cfg.prior, cfg.prefs, cfg.grid_steps);
        const SimConfig& sim = cfg.sim;
        double worst = 0.0;
        for (const auto& r : martingale_check(cfg.prior.beta0, {0.05, 0.1}, sim, sol,
                                              cfg.market, cfg.prior, cfg.prefs, threads))
            worst = std::max(worst, std::fabs(r.estimate) / std::max(r.std_error, 1e-300));
        c.value = worst;
        c.passed = worst <= c.threshold;
        checks.push_back(c);
    }

    // spike perturbations cannot improve the objective
    {
        Check c{"perturbation", false, 0.0, 2.0, "max slope / SE over perturbations"};
        double worst = -1e300;
        for (const double a : {0.5, 1.5}) {
            Preferences prefs = cfg.prefs;
            prefs.alpha = a;
            const OdeSolution sol =
                solve_ode_closed_form(cfg.market, cfg.prior, prefs, cfg.grid_steps);
            const Strategy eq = make_equilibrium_strategy(sol, cfg.market, prefs);
            SimConfig sim = cfg.sim;
            sim.outer_paths = outer;
            sim.inner_paths = inner;
            const std::vector<std::pair<std::string, Strategy>> perturbations{
                {"shift", [eq](double t, double x, double b) { return eq(t, x, b) + 0.5; }},
                {"double", [eq](double t, double x, double b) { return 2.0 * eq(t, x, b); }},
                {"zero", [](double, double, double) { return 0.0; }}};
            for (const auto& [name, pert] : perturbations) {
                for (const auto& r :
                     perturbation_test(pert, {0.02, 0.01, 0.005}, sim, sol, cfg.market,
                                       cfg.prior, prefs, threads)) {
                    worst = std::max(worst, r.estimate / std::max(r.std_error, 1e-300));
                }
            }
        }
        c.value = worst;
        c.passed = worst <= c.threshold;
        checks.push_back(c);
    }

    // posterior formulas: two-atom exactness and conjugate agreement
    {
        Check c{"posterior", false, 0.0, 1e-6, "conjugacy error over a (t, dy) grid"};
        const DiscretePrior two{{{0.1, 0.5}, {0.3, 0.5}}};
        const ObservationSummary obs{1.0, 0.2};
        const auto expo = [&](double zv) {
            const double s2 = cfg.market.sigma2();
            return (zv / s2) * (obs.dy + 0.5 * s2 * obs.t) - zv * zv * obs.t / (2.0 * s2);
        };
        const double l1 = std::exp(expo(0.1)), l2 = std::exp(expo(0.3));
        const double direct = (0.1 * l1 + 0.3 * l2) / (l1 + l2);
        const double two_atom_err =
            std::fabs(varphi(two, obs, cfg.market.sigma) - direct);

        DiscretePrior grid;
        const int n_atoms = 2001;
        double total = 0.0;
        for (int i = 0; i < n_atoms; ++i) {
            const double zv = cfg.prior.beta0 +
                              (-8.0 + 16.0 * i / (n_atoms - 1)) * cfg.prior.sigma0;
            const double u = (zv - cfg.prior.beta0) / cfg.prior.sigma0;
            grid.atoms.push_back({zv, std::exp(-0.5 * u * u)});
            total += grid.atoms.back().w;
        }
        for (auto& atom : grid.atoms) atom.w /= total;
        double worst = 0.0;
        for (int i = 0; i <= 6; ++i)
            for (int jd = 0; jd <= 6; ++jd) {
                const ObservationSummary o{cfg.market.horizon * i / 6.0,
                                           -0.5 + jd / 6.0};
                const BeliefState conj = gaussian_posterior(cfg.prior, cfg.market, o);
                worst =
                    std::max(worst, std::fabs(varphi(grid, o, cfg.market.sigma) - conj.beta));
            }
        c.value = worst;
        c.passed = worst < 1e-6 && two_atom_err < 1e-12;
        c.details = "two-atom error " + fmt(two_atom_err);
        checks.push_back(c);
    }

    json out;
    bool all = true;
    out["checks"] = json::array();
    for (const auto& c : checks) {
        out["checks"].push_back(check_json(c));
        all = all && c.passed;
        std::cout << (c.passed ? "PASS" : "FAIL") << "  " << c.name << "  value=" << fmt(c.value)
                  << " threshold=" << fmt(c.threshold) << "\n";
    }
    out["passed"] = all;
    write_text(dir / "verify.json", out.dump(2) + "\n");
    write_manifest(dir, "verify", cfg);
    return all ? kExitOk : kExitVerification;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

int cmd_simulate(const RunConfig& cfg, int threads) {
    const auto dir = prepare_out_dir(cfg);
    const OdeSolution sol =
        solve_ode_closed_form(cfg.market, cfg.prior, cfg.prefs, cfg.grid_steps);
    print_warnings(sol);
    const Strategy eq = make_equilibrium_strategy(sol, cfg.market, cfg.prefs);
    SimConfig sim = cfg.sim;

    std::string csv = "experiment,estimate,std_error,n_effective,analytic,abs_z\n";
    {
        const double z = cfg.prior.beta0;
        const SimReport r =
            estimate_inside_utility(z, eq, sim, cfg.market, cfg.prior, cfg.prefs, threads);
        const double analytic =
            g_value(sim.t0, sim.x0, sim.beta0, z, sol, cfg.market, cfg.prefs).g;
        const double abs_z = std::fabs(r.estimate - analytic) / std::max(r.std_error, 1e-300);
        csv += "inside_value," + fmt(r.estimate) + ',' + fmt(r.std_error) + ',' +
               std::to_string(r.n_effective) + ',' + fmt(analytic) + ',' + fmt(abs_z) + '\n';
    }
    {
        const Strategy none = [](double, double, double) { return 0.0; };
        const SimReport r = estimate_inside_utility(cfg.prior.beta0, none, sim, cfg.market,
                                                    cfg.prior, cfg.prefs, threads);
        const double analytic = utility(
            sim.x0 * std::exp(cfg.market.r * (cfg.market.horizon - sim.t0)), cfg.prefs.k);
        csv += "zero_strategy," + fmt(r.estimate) + ',' + fmt(r.std_error) + ',' +
               std::to_string(r.n_effective) + ',' + fmt(analytic) + ',' +
               fmt(std::fabs(r.estimate - analytic)) + '\n';
    }
    write_text(dir / "paths_summary.csv", csv);

    {
        const SimReport r = estimate_J(eq, sim, cfg.market, cfg.prior, cfg.prefs, threads);
        const double analytic =
            smooth_objective_value(sim.t0, sim.x0, sim.beta0, sol, cfg.market, cfg.prefs);
        const double abs_z = std::fabs(r.estimate - analytic) / std::max(r.std_error, 1e-300);
        std::string jcsv = "estimate,std_error,jackknife_bias,n_outer,analytic,abs_z\n";
        jcsv += fmt(r.estimate) + ',' + fmt(r.std_error) + ',' +
                fmt(r.diagnostic("jackknife_bias")) + ',' + std::to_string(r.n_effective) +
                ',' + fmt(analytic) + ',' + fmt(abs_z) + '\n';
        write_text(dir / "j_estimates.csv", jcsv);
    }
    write_manifest(dir, "simulate", cfg);
    std::cout << "simulate: wrote " << (dir / "paths_summary.csv").string() << " and "
              << (dir / "j_estimates.csv").string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

int cmd_estimate(const RunConfig& cfg, const std::string& data_path, double dt,
                 std::optional<double> sigma0_override) {
    const auto dir = prepare_out_dir(cfg);
    const PriceSeries series = load_prices(data_path, dt);
    const MleEstimate est = mle_estimate(series);
    const GaussianPrior prior = calibrate_prior(est, sigma0_override);

    json out;
    out["beta0"] = prior.beta0;
    out["sigma"] = est.sigma_hat;
    out["sigma0"] = prior.sigma0;
    out["sigma0_source"] = sigma0_override ? "override" : "drift standard error";
    out["n"] = est.n_returns;
    out["dt"] = est.dt;
    write_text(dir / "calibration.json", out.dump(2) + "\n");
    write_manifest(dir, "estimate", cfg);
    std::cout << out.dump(2) << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// alpha-star
// ---------------------------------------------------------------------------

int cmd_alpha_star(const RunConfig& cfg) {
    const auto dir = prepare_out_dir(cfg);
    const double astar = alpha_star(cfg.market, cfg.prior);
    const double i1 = ambiguity_threshold_integral(astar);
    const double i2 = ambiguity_threshold_integral_substituted(astar);
    const double prefactor =
        1.0 + cfg.market.sigma2() / (cfg.prior.var() * cfg.market.horizon);
    json out;
    out["alpha_star"] = astar;
    out["residual"] = prefactor * i1 - 1.0;
    out["integral_truncated"] = i1;
    out["integral_substituted"] = i2;
    out["route_agreement"] = std::fabs(i1 - i2);
    write_text(dir / "alpha_star.json", out.dump(2) + "\n");
    write_manifest(dir, "alpha-star", cfg);
    std::cout << out.dump(2) << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Equilibrium investment under smooth ambiguity with drift learning"};
    app.set_version_flag("--version", kVersion);
    app.fallthrough();  // global options may follow the subcommand

    RunConfig cfg;
    if (const char* env_dir = std::getenv("AMBEQ_OUT_DIR")) cfg.out_dir = env_dir;

    std::string config_path;
    int threads = 0;
    app.add_option("--config", config_path, "JSON config or manifest from an earlier run");
    app.add_option("--threads", threads, "worker threads for simulation (0 = auto)");

    // flag overrides applied after the config file
    std::optional<double> opt_r, opt_sigma, opt_T, opt_beta0, opt_sigma0, opt_k, opt_alpha;
    std::optional<int> opt_grid;
    std::optional<long> opt_paths, opt_steps, opt_inner, opt_outer;
    std::optional<std::uint64_t> opt_seed;
    std::optional<std::string> opt_out;
    app.add_option("--r", opt_r, "risk-free rate (per year)");
    app.add_option("--sigma", opt_sigma, "stock volatility (per sqrt-year)");
    app.add_option("--horizon", opt_T, "investment horizon T (years)");
    app.add_option("--beta0", opt_beta0, "prior mean of the drift");
    app.add_option("--sigma0", opt_sigma0, "prior standard deviation of the drift");
    app.add_option("--k", opt_k, "CARA risk aversion");
    app.add_option("--alpha", opt_alpha, "ambiguity power");
    app.add_option("--grid-steps", opt_grid, "time grid steps for the solvers");
    app.add_option("--paths", opt_paths, "Monte Carlo paths");
    app.add_option("--sim-steps", opt_steps, "Monte Carlo time steps over [t0, T]");
    app.add_option("--inner", opt_inner, "inner paths per outer draw");
    app.add_option("--outer", opt_outer, "outer drift draws");
    app.add_option("--seed", opt_seed, "Monte Carlo seed");
    app.add_option("--out", opt_out, "output directory (or set AMBEQ_OUT_DIR)");

    auto* solve = app.add_subcommand("solve", "closed-form solve with an RK4 cross-check");
    auto* sweep = app.add_subcommand("sweep", "hedging ratios along alpha or sigma0");
    std::string axis = "alpha";
    sweep->add_option("--axis", axis, "sweep axis: alpha or sigma0")
        ->check(CLI::IsMember({"alpha", "sigma0"}));
    auto* verify = app.add_subcommand("verify", "run the numeric verification suite");
    long verify_outer = 256, verify_inner = 2048;
    verify->add_option("--verify-outer", verify_outer, "outer draws for the slope checks");
    verify->add_option("--verify-inner", verify_inner, "inner paths for the slope checks");
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo value and objective runs");
    auto* estimate = app.add_subcommand("estimate", "calibrate from a CSV of daily closes");
    std::string data_path;
    double data_dt = 1.0 / 252.0;
    std::optional<double> sigma0_override;
    estimate->add_option("--data", data_path, "CSV file with header date,close")->required();
    estimate->add_option("--dt", data_dt, "sampling interval in years (default 1/252)");
    estimate->add_option("--prior-sigma0", sigma0_override,
                         "override the calibrated prior standard deviation");
    auto* astar = app.add_subcommand("alpha-star", "solvability threshold for the parameters");

    app.require_subcommand(1);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitValidity;
    }

    try {
        if (!config_path.empty()) load_config_file(cfg, config_path);
        if (opt_r) cfg.market.r = *opt_r;
        if (opt_sigma) cfg.market.sigma = *opt_sigma;
        if (opt_T) cfg.market.horizon = *opt_T;
        if (opt_beta0) cfg.prior.beta0 = *opt_beta0;
        if (opt_sigma0) cfg.prior.sigma0 = *opt_sigma0;
        if (opt_k) cfg.prefs.k = *opt_k;
        if (opt_alpha) cfg.prefs.alpha = *opt_alpha;
        if (opt_grid) cfg.grid_steps = *opt_grid;
        if (opt_paths) cfg.sim.n_paths = *opt_paths;
        if (opt_steps) cfg.sim.n_steps = *opt_steps;
        if (opt_inner) cfg.sim.inner_paths = *opt_inner;
        if (opt_outer) cfg.sim.outer_paths = *opt_outer;
        if (opt_seed) cfg.sim.seed = *opt_seed;
        if (opt_out) cfg.out_dir = *opt_out;

        cfg.market.validate();
        cfg.prior.validate();
        cfg.prefs.validate();
        // the simulated state starts at the prior mean unless configured
        if (!std::isfinite(cfg.sim.beta0)) cfg.sim.beta0 = cfg.prior.beta0;

        if (*solve) return cmd_solve(cfg);
        if (*sweep) return cmd_sweep(cfg, axis);
        if (*verify) return cmd_verify(cfg, verify_outer, verify_inner, threads);
        if (*simulate) return cmd_simulate(cfg, threads);
        if (*estimate) return cmd_estimate(cfg, data_path, data_dt, sigma0_override);
        if (*astar) return cmd_alpha_star(cfg);
        return kExitValidity;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const ParameterError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidity;
    } catch (const ValidityError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidity;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidity;
    } catch (const json::exception& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
}

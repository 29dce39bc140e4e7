#include "rbsde/rbsde_solver.hpp"

#include "rbsde/error.hpp"
#include "rbsde/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

namespace rbsde {

namespace {

constexpr std::size_t kMaxRank = 8;

double sample_stderr(double sum, double sum_sq, std::size_t count) {
    if (count < 2) return 0.0;
    const double c = static_cast<double>(count);
    const double mean = sum / c;
    const double var = std::max(0.0, (sum_sq / c - mean * mean) * c / (c - 1.0));
    return std::sqrt(var / c);
}

}  // namespace

std::vector<double> terminal_values(const PathBundle& bundle, const ConvexBarrier& barrier,
                                    const DriverSpec& driver) {
    const std::size_t M = bundle.paths();
    const auto xs = bundle.states_at(bundle.steps());
    std::vector<double> xi(M);
    const auto dom = barrier.domain();
    for (std::size_t m = 0; m < M; ++m) {
        double v = driver.xi(xs[m]);
        if (barrier.is_indicator()) {
            v = std::clamp(v, dom.lo, dom.hi);
        } else if (!std::isfinite(barrier.value(v))) {
            throw InfeasibleTerminal("h(L_T) = " + std::to_string(v) + " lies outside Dom(Phi)");
        }
        xi[m] = v;
    }
    return xi;
}

RegressionBasis default_regression_basis(const ConvexBarrier& barrier, int degree, int knots) {
    RegressionBasis rb;
    rb.degree = degree;
    rb.knots = knots;
    if (barrier.is_indicator()) {
        const auto d = barrier.domain();
        if (std::isfinite(d.lo)) rb.hinge_lower = d.lo;
        if (std::isfinite(d.hi)) rb.hinge_upper = d.hi;
    }
    return rb;
}

RbsdeSolution solve_penalized(const RegressionPlan& plan, const ConvexBarrier& barrier, const DriverSpec& driver,
                              double n, const SolverOptions& options) {
    const PathBundle& bundle = plan.bundle();
    const std::size_t M = bundle.paths();
    const int N = bundle.steps();
    const int r = bundle.rank();
    const auto R = static_cast<std::size_t>(r);
    const double dt = bundle.grid().dt();
    if (R > kMaxRank) throw std::invalid_argument("solve_penalized: basis rank too large");
    if (!(n >= 1.0)) throw std::invalid_argument("solve_penalized: n must be >= 1");
    if (dt * std::sqrt(driver.lipschitz) >= 1.0) {
        throw FixedPointDiverged("dt * sqrt(C_f) >= 1; refine the time grid");
    }
    const YosidaLevel level(barrier, n);

    RbsdeSolution sol;
    sol.n = n;
    sol.steps = N;
    sol.paths = M;
    sol.rank = r;
    sol.dt = dt;
    sol.y.assign(static_cast<std::size_t>(N + 1) * M, 0.0);
    sol.z.assign(static_cast<std::size_t>(N) * M * R, 0.0);
    sol.k.assign(static_cast<std::size_t>(N + 1) * M, 0.0);
    sol.diagnostics.resize(static_cast<std::size_t>(N));

    const auto xi = terminal_values(bundle, barrier, driver);
    std::copy(xi.begin(), xi.end(), sol.y.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(N) * M));

    // sol.k temporarily holds A_n(Y_k) at row k.
    std::vector<double> first_step_estimate;
    for (int k = N - 1; k >= 0; --k) {
        const auto kk = static_cast<std::size_t>(k);
        const std::span<const double> target(sol.y.data() + (kk + 1) * M, M);
        const Eigen::VectorXd coef = plan.fit(k, target);
        const int p = plan.feature_count(k);
        // Targets lie in the (convex) domain up to their own violation, so the
        // conditional expectation does too; this stops polynomial extrapolation
        // across a finite domain end in sparse tails.
        const auto [lo_it, hi_it] = std::minmax_element(target.begin(), target.end());
        const double target_lo = std::min(barrier.domain().lo, *lo_it);
        const double target_hi = std::max(barrier.domain().hi, *hi_it);
        const double t = bundle.grid().time(k);
        if (k == 0) first_step_estimate.assign(M, 0.0);

        const auto resid = parallel::reduce(M, 1, options.threads, [&](std::size_t m, std::vector<double>& acc) {
            std::array<double, kMaxFeatures> phi{};
            std::array<double, kMaxRank> zv{};
            std::array<double, kMaxRank> dh{};
            const double x = bundle.state(k, m);
            plan.features(k, x, phi);
            double yhat = 0.0;
            for (int a = 0; a < p; ++a) yhat += coef(a) * phi[static_cast<std::size_t>(a)];
            const double yfit = yhat;
            yhat = std::clamp(yhat, target_lo, target_hi);
            double mart = 0.0;
            for (int i = 0; i < r; ++i) {
                double zi = 0.0;
                for (int a = 0; a < p; ++a) zi += coef((i + 1) * p + a) * phi[static_cast<std::size_t>(a)];
                zv[static_cast<std::size_t>(i)] = zi;
                dh[static_cast<std::size_t>(i)] = bundle.h_increment(k, m, i + 1);
                mart += zi * dh[static_cast<std::size_t>(i)];
            }
            const std::span<const double> zspan(zv.data(), R);

            double y = level.implicit_step(dt, yhat + dt * driver(t, x, yhat, zspan));
            if (driver.depends_on_y) {
                bool converged = false;
                for (int it = 0; it < options.max_fixed_point_iterations; ++it) {
                    const double next = level.implicit_step(dt, yhat + dt * driver(t, x, y, zspan));
                    const double diff = std::abs(next - y);
                    y = next;
                    if (diff <= options.fixed_point_tolerance * std::max(1.0, std::abs(y))) {
                        converged = true;
                        break;
                    }
                }
                if (!converged) {
                    throw FixedPointDiverged("implicit step did not converge at step " + std::to_string(k));
                }
            }
            const double a_n = level.yosida(y);
            sol.y[kk * M + m] = y;
            sol.k[kk * M + m] = a_n;
            for (std::size_t i = 0; i < R; ++i) sol.z[(kk * M + m) * R + i] = zv[i];
            const double y_next = target[m];
            const double e = y_next - yfit - mart;
            acc[0] += e * e;
            if (k == 0) first_step_estimate[m] = y_next + dt * (driver(t, x, y, zspan) - a_n);
        });
        auto& diag = sol.diagnostics[kk];
        diag.condition_number = plan.condition_number(k);
        diag.ridge = plan.ridge_applied(k);
        diag.residual_rms = std::sqrt(resid[0] / static_cast<double>(M));
    }

    // Forward accumulation K_{k+1} = K_k - A_n(Y_k) dt.
    parallel::for_chunks(M, options.threads, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t m = b; m < e; ++m) {
            double acc = 0.0;
            for (int k = 0; k < N; ++k) {
                const auto kk = static_cast<std::size_t>(k);
                const double a_n = sol.k[kk * M + m];
                sol.k[kk * M + m] = acc;
                acc -= a_n * dt;
            }
            sol.k[static_cast<std::size_t>(N) * M + m] = acc;
        }
    });

    const auto s = parallel::reduce(M, 2, options.threads, [&](std::size_t m, std::vector<double>& acc) {
        acc[0] += first_step_estimate[m];
        acc[1] += first_step_estimate[m] * first_step_estimate[m];
    });
    sol.y0_stderr = sample_stderr(s[0], s[1], M);
    return sol;
}

RbsdeSolution solve_penalized(const PathBundle& bundle, const ConvexBarrier& barrier, const DriverSpec& driver,
                              double n, const RegressionBasis& basis, const SolverOptions& options) {
    const RegressionPlan plan(bundle, basis, options.threads);
    return solve_penalized(plan, barrier, driver, n, options);
}

double cauchy_gap(const RbsdeSolution& a, const RbsdeSolution& b, unsigned threads) {
    if (a.paths != b.paths || a.steps != b.steps || a.rank != b.rank) {
        throw std::invalid_argument("cauchy_gap: solutions live on different grids");
    }
    const std::size_t M = a.paths;
    const auto R = static_cast<std::size_t>(a.rank);
    const auto s = parallel::reduce(M, 2, threads, [&](std::size_t m, std::vector<double>& acc) {
        double sup = 0.0;
        for (int k = 0; k <= a.steps; ++k) sup = std::max(sup, std::abs(a.Y(k, m) - b.Y(k, m)));
        double zz = 0.0;
        for (int k = 0; k < a.steps; ++k) {
            const std::size_t base = (static_cast<std::size_t>(k) * M + m) * R;
            for (std::size_t i = 0; i < R; ++i) {
                const double d = a.z[base + i] - b.z[base + i];
                zz += d * d;
            }
        }
        acc[0] += sup * sup;
        acc[1] += zz * a.dt;
    });
    return s[0] / static_cast<double>(M) + 0.5 * s[1] / static_cast<double>(M);
}

MinimalityResult minimality_statistic(const RbsdeSolution& sol, double alpha, double beta, unsigned threads) {
    const std::size_t M = sol.paths;
    const auto s = parallel::reduce(M, 2, threads, [&](std::size_t m, std::vector<double>& acc) {
        double v = 0.0;
        for (int k = 0; k < sol.steps; ++k) {
            const double dk = sol.K(k + 1, m) - sol.K(k, m);
            v += (sol.Y(k, m) - alpha) * (dk + beta * sol.dt);
        }
        acc[0] += v;
        acc[1] += v * v;
    });
    MinimalityResult res;
    res.alpha = alpha;
    res.beta = beta;
    res.mean = s[0] / static_cast<double>(M);
    res.stderr_ = sample_stderr(s[0], s[1], M);
    return res;
}

namespace {

LevelStats level_stats(const RbsdeSolution& sol, const ConvexBarrier& barrier, const GraphPair& pair,
                       unsigned threads) {
    const std::size_t M = sol.paths;
    const auto R = static_cast<std::size_t>(sol.rank);
    const auto s = parallel::reduce(M, 4, threads, [&](std::size_t m, std::vector<double>& acc) {
        double sup = 0.0;
        for (int k = 0; k <= sol.steps; ++k) sup = std::max(sup, sol.Y(k, m) * sol.Y(k, m));
        double ea = 0.0, aa = 0.0, ez = 0.0;
        for (int k = 0; k < sol.steps; ++k) {
            const double a_n = sol.push(k, m);
            ea += a_n * a_n * sol.dt;
            aa += std::abs(a_n) * sol.dt;
            const std::size_t base = (static_cast<std::size_t>(k) * M + m) * R;
            for (std::size_t i = 0; i < R; ++i) ez += sol.z[base + i] * sol.z[base + i] * sol.dt;
        }
        acc[0] += sup;
        acc[1] += ea;
        acc[2] += aa;
        acc[3] += ez;
    });
    double viol = 0.0;
    for (double v : sol.y) viol = std::max(viol, barrier.domain_distance(v));

    LevelStats st;
    st.n = sol.n;
    st.gap_next = std::numeric_limits<double>::quiet_NaN();
    st.y0 = sol.y0();
    st.y0_stderr = sol.y0_stderr;
    st.domain_violation = viol;
    const auto mres = minimality_statistic(sol, pair.alpha.front(), pair.beta.front(), threads);
    st.minimality_stat = mres.mean;
    st.minimality_stderr = mres.stderr_;
    const double Mm = static_cast<double>(M);
    st.sup_y2 = s[0] / Mm;
    st.energy_a = s[1] / Mm;
    st.abs_a = s[2] / Mm;
    st.energy_z = s[3] / Mm;
    return st;
}

}  // namespace

std::pair<RbsdeSolution, ConvergenceReport> solve_reflected(const RegressionPlan& plan, const ConvexBarrier& barrier,
                                                            const DriverSpec& driver, const std::vector<double>& ladder,
                                                            const SolverOptions& options) {
    if (ladder.empty()) throw std::invalid_argument("solve_reflected: empty ladder");
    for (std::size_t i = 1; i < ladder.size(); ++i) {
        if (!(ladder[i] > ladder[i - 1])) throw std::invalid_argument("solve_reflected: ladder must increase");
    }
    const auto pair = graph_test_pair(barrier, plan.bundle().grid().times());
    ConvergenceReport report;
    RbsdeSolution prev;
    for (std::size_t i = 0; i < ladder.size(); ++i) {
        RbsdeSolution cur = solve_penalized(plan, barrier, driver, ladder[i], options);
        report.levels.push_back(level_stats(cur, barrier, pair, options.threads));
        if (i > 0) report.levels[i - 1].gap_next = cauchy_gap(prev, cur, options.threads);
        prev = std::move(cur);
    }
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i + 1 < report.levels.size(); ++i) {
        const double w = 1.0 / report.levels[i].n + 1.0 / report.levels[i + 1].n;
        num += w * report.levels[i].gap_next;
        den += w * w;
        if (i > 0 && report.levels[i].gap_next > report.levels[i - 1].gap_next) report.non_cauchy = true;
    }
    report.fitted_constant = den > 0.0 ? num / den : 0.0;
    return {std::move(prev), std::move(report)};
}

ContractReport check_solution_contract(const RbsdeSolution& sol, const PathBundle& bundle,
                                       const ConvexBarrier& barrier, const DriverSpec& driver,
                                       const std::vector<GraphPair>& test_pairs, unsigned threads) {
    ContractReport rep;
    for (double v : sol.y) rep.domain_violation = std::max(rep.domain_violation, barrier.domain_distance(v));
    for (const auto& pr : test_pairs) {
        if (pr.alpha.empty() || pr.beta.empty()) continue;
        // Test pairs are constant in time.
        rep.minimality.push_back(minimality_statistic(sol, pr.alpha.front(), pr.beta.front(), threads));
    }
    const std::size_t M = sol.paths;
    const auto R = static_cast<std::size_t>(sol.rank);
    for (std::size_t m = 0; m < M; ++m) {
        if (sol.K(0, m) != 0.0) rep.k_starts_at_zero = false;
    }
    const auto xi = terminal_values(bundle, barrier, driver);
    for (std::size_t m = 0; m < M; ++m) {
        rep.terminal_mismatch = std::max(rep.terminal_mismatch, std::abs(sol.Y(sol.steps, m) - xi[m]));
    }
    const auto s = parallel::reduce(M, 1, threads, [&](std::size_t m, std::vector<double>& acc) {
        std::array<double, kMaxRank> zv{};
        double tot = 0.0;
        for (int k = 0; k < sol.steps; ++k) {
            const std::size_t base = (static_cast<std::size_t>(k) * M + m) * R;
            double mart = 0.0;
            for (std::size_t i = 0; i < R; ++i) {
                zv[i] = sol.z[base + i];
                mart += zv[i] * bundle.h_increment(k, m, static_cast<int>(i) + 1);
            }
            const double f = driver(bundle.grid().time(k), bundle.state(k, m), sol.Y(k, m),
                                    std::span<const double>(zv.data(), R));
            const double dk = sol.K(k + 1, m) - sol.K(k, m);
            const double res = sol.Y(k, m) - sol.Y(k + 1, m) - f * sol.dt - dk + mart;
            tot += res * res;
        }
        acc[0] += tot;
    });
    rep.residual_rms = std::sqrt(s[0] / static_cast<double>(M));
    return rep;
}

FeynmanKacReport feynman_kac_check(const RbsdeSolution& sol, const PdiiSurface& surface, const PathBundle& bundle,
                                   int time_points, unsigned threads) {
    FeynmanKacReport rep;
    rep.escape_fraction = bundle.escape_fraction(surface.x_min(), surface.x_max());
    if (rep.escape_fraction > 0.01) {
        throw DomainEscape(std::to_string(100.0 * rep.escape_fraction) + "% of paths leave the oracle box");
    }
    rep.y0_gap = std::abs(sol.y0() - surface.value(0.0, 0.0));
    const std::size_t M = sol.paths;
    const int N = sol.steps;
    time_points = std::clamp(time_points, 1, N);
    for (int q = 0; q < time_points; ++q) {
        const int k = static_cast<int>(static_cast<long>(q) * N / time_points);
        const double t = bundle.grid().time(k);
        const auto s = parallel::reduce(M, 2, threads, [&](std::size_t m, std::vector<double>& acc) {
            const double x = bundle.state(k, m);
            acc[0] += std::abs(sol.Y(k, m) - surface.value(t, x));
            const auto coeffs = surface_coefficients(surface, bundle.model(), bundle.basis(), t, x);
            acc[1] += std::abs(sol.Z(k, m, 1) - coeffs.front());
        });
        rep.y_error = std::max(rep.y_error, s[0] / static_cast<double>(M));
        rep.z1_error = std::max(rep.z1_error, s[1] / static_cast<double>(M));
    }
    return rep;
}

}  // namespace rbsde

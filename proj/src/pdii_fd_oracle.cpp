#include "rbsde/pdii_fd_oracle.hpp"

#include "rbsde/error.hpp"
#include "rbsde/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

namespace rbsde {

PdiiSurface::PdiiSurface(double x_min, double dx, std::size_t nodes, std::vector<double> times,
                         std::vector<std::vector<double>> rows, double n)
    : x_min_(x_min), dx_(dx), nodes_(nodes), times_(std::move(times)), rows_(std::move(rows)), n_(n) {
    if (nodes_ < 3) throw std::invalid_argument("PdiiSurface: need at least 3 nodes");
    if (times_.size() != rows_.size() || times_.empty()) throw std::invalid_argument("PdiiSurface: time rows");
}

double PdiiSurface::row_value(std::size_t q, double x) const {
    const auto& u = rows_[q];
    const double s = (x - x_min_) / dx_;
    auto i = static_cast<long>(std::floor(s));
    i = std::clamp(i, 0L, static_cast<long>(nodes_) - 2);
    const double w = s - static_cast<double>(i);
    const auto ii = static_cast<std::size_t>(i);
    return u[ii] + w * (u[ii + 1] - u[ii]);
}

double PdiiSurface::row_derivative(std::size_t q, double x) const {
    return (row_value(q, x + dx_) - row_value(q, x - dx_)) / (2.0 * dx_);
}

namespace {

// Bracketing time rows and weight for t.
std::pair<std::size_t, double> time_slot(const std::vector<double>& times, double t) {
    if (times.size() == 1 || t <= times.front()) return {0, 0.0};
    if (t >= times.back()) return {times.size() - 2, 1.0};
    const double dt = times[1] - times[0];
    auto q = static_cast<std::size_t>(std::floor((t - times.front()) / dt));
    q = std::min(q, times.size() - 2);
    return {q, (t - times[q]) / dt};
}

}  // namespace

double PdiiSurface::value(double t, double x) const {
    const auto [q, w] = time_slot(times_, t);
    if (times_.size() == 1) return row_value(0, x);
    const double a = row_value(q, x);
    if (w == 0.0) return a;
    return a + w * (row_value(q + 1, x) - a);
}

double PdiiSurface::derivative(double t, double x) const {
    return (value(t, x + dx_) - value(t, x - dx_)) / (2.0 * dx_);
}

double PdiiSurface::jump_remainder(double t, double x, double y) const {
    return value(t, x + y) - value(t, x) - derivative(t, x) * y;
}

double PdiiSurface::max_second_difference() const {
    double m = 0.0;
    for (const auto& u : rows_) {
        for (std::size_t i = 1; i + 1 < nodes_; ++i) {
            m = std::max(m, std::abs(u[i + 1] - 2.0 * u[i] + u[i - 1]) / (dx_ * dx_));
        }
    }
    return m;
}

void PdiiSurface::write_csv(std::ostream& os) const {
    os << "t,x,u\n";
    const std::size_t tstride = std::max<std::size_t>(1, times_.size() / 100);
    const std::size_t xstride = std::max<std::size_t>(1, nodes_ / 400);
    char buf[96];
    for (std::size_t q = 0; q < times_.size(); q += tstride) {
        for (std::size_t i = 0; i < nodes_; i += xstride) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", times_[q], node(i), rows_[q][i]);
            os << buf;
        }
    }
}

std::vector<double> surface_coefficients(const PdiiSurface& surface, const LevyModel& model,
                                         const TeugelsBasis& basis, double t, double x) {
    const int r = basis.rank();
    std::vector<double> z(static_cast<std::size_t>(r), 0.0);
    const double ux = surface.derivative(t, x);
    const double u0 = surface.value(t, x);
    for (const auto& a : model.atoms()) {
        const double rem = surface.value(t, x + a.location) - u0 - ux * a.location;
        for (int i = 1; i <= r; ++i) z[static_cast<std::size_t>(i - 1)] += a.rate * rem * basis.p(i, a.location);
    }
    z[0] += ux * std::sqrt(basis.moment_table().mu(0));
    return z;
}

PdiiSurface solve_pdii(const LevyModel& model, const TeugelsBasis& basis, const ConvexBarrier& barrier,
                       const DriverSpec& driver, double n, const FdGridParams& grid) {
    if (!(grid.x_max > grid.x_min) || !(grid.dx > 0.0) || !(grid.dtau > 0.0)) {
        throw std::invalid_argument("solve_pdii: bad grid parameters");
    }
    const auto nx = static_cast<std::size_t>(std::llround((grid.x_max - grid.x_min) / grid.dx)) + 1;
    if (nx < 3) throw std::invalid_argument("solve_pdii: box too narrow for dx");
    const double dx = (grid.x_max - grid.x_min) / static_cast<double>(nx - 1);
    const double T = model.horizon();
    const auto nt = static_cast<std::size_t>(std::ceil(T / grid.dtau - 1e-9));
    const double dtau = T / static_cast<double>(nt);

    const double b = model.path_drift();
    const double sigma = model.sigma();
    const double rate = model.total_rate();
    const double cfl = dtau * (std::abs(b) / dx + rate);
    if (cfl > 1.0) {
        throw CflViolation("dtau (|b|/dx + sum lambda) = " + std::to_string(cfl) + " > 1");
    }

    const auto& atoms = model.atoms();
    const std::size_t J = atoms.size();
    // Nonlocal stencil per atom: u(x_i + y) = (1 - w) u[i + s] + w u[i + s + 1].
    std::vector<long> shift(J);
    std::vector<double> weight(J);
    for (std::size_t j = 0; j < J; ++j) {
        const double s = atoms[j].location / dx;
        shift[j] = static_cast<long>(std::floor(s));
        weight[j] = s - static_cast<double>(shift[j]);
    }
    if (J > 0) {
        double outside = 0.0;
        for (std::size_t i = 0; i < nx; ++i) {
            const double x = grid.x_min + dx * static_cast<double>(i);
            for (const auto& a : atoms) {
                if (x + a.location < grid.x_min || x + a.location > grid.x_max) outside += a.rate;
            }
        }
        const double share = outside / (static_cast<double>(nx) * rate);
        if (share > grid.max_extrapolated_share) {
            throw BoxTooSmall(std::to_string(100.0 * share) + "% of nonlocal evaluations leave the box");
        }
    }

    const auto L = static_cast<long>(nx);
    auto at = [&](const std::vector<double>& u, long i) {
        if (i < 0) return u[0] + static_cast<double>(i) * (u[1] - u[0]);
        if (i >= L) return u[nx - 1] + static_cast<double>(i - L + 1) * (u[nx - 1] - u[nx - 2]);
        return u[static_cast<std::size_t>(i)];
    };

    const YosidaLevel level(barrier, n);
    const auto dom = barrier.domain();
    std::vector<double> times(nt + 1);
    for (std::size_t q = 0; q <= nt; ++q) times[q] = dtau * static_cast<double>(q);
    std::vector<std::vector<double>> rows(nt + 1, std::vector<double>(nx));

    auto& terminal = rows[nt];
    for (std::size_t i = 0; i < nx; ++i) {
        double h = driver.xi(grid.x_min + dx * static_cast<double>(i));
        if (barrier.is_indicator()) h = std::clamp(h, dom.lo, dom.hi);
        terminal[i] = h;
    }

    const int r = basis.rank();
    const double scale1 = std::sqrt(basis.moment_table().mu(0));
    std::vector<std::vector<double>> pw(J, std::vector<double>(static_cast<std::size_t>(r)));
    for (std::size_t j = 0; j < J; ++j) {
        for (int i = 1; i <= r; ++i) pw[j][static_cast<std::size_t>(i - 1)] = basis.p(i, atoms[j].location);
    }

    const double c = 0.5 * sigma * sigma * dtau / (dx * dx);
    std::vector<double> v(nx), cp(nx), dp(nx), z(static_cast<std::size_t>(r));
    for (std::size_t q = nt; q-- > 0;) {
        const auto& u = rows[q + 1];
        const double t_next = times[q + 1];
        for (std::size_t i = 0; i < nx; ++i) {
            const auto li = static_cast<long>(i);
            const double x = grid.x_min + dx * static_cast<double>(i);
            double drift_term;
            if (b >= 0.0) {
                drift_term = i + 1 < nx ? (u[i + 1] - u[i]) / dx : (u[i] - u[i - 1]) / dx;
            } else {
                drift_term = i > 0 ? (u[i] - u[i - 1]) / dx : (u[i + 1] - u[i]) / dx;
            }
            const double ux = i == 0 ? (u[1] - u[0]) / dx
                              : i + 1 == nx ? (u[i] - u[i - 1]) / dx
                                            : (u[i + 1] - u[i - 1]) / (2.0 * dx);
            double jump = 0.0;
            std::fill(z.begin(), z.end(), 0.0);
            for (std::size_t j = 0; j < J; ++j) {
                const double uy = (1.0 - weight[j]) * at(u, li + shift[j]) + weight[j] * at(u, li + shift[j] + 1);
                jump += atoms[j].rate * (uy - u[i]);
                const double rem = uy - u[i] - ux * atoms[j].location;
                for (std::size_t k = 0; k < z.size(); ++k) z[k] += atoms[j].rate * rem * pw[j][k];
            }
            z[0] += ux * scale1;
            const double f = driver(t_next, x, u[i], z);
            v[i] = u[i] + dtau * (b * drift_term + jump + f);
        }
        auto& w = rows[q];
        if (c > 0.0) {
            // Thomas algorithm; boundary rows are identity.
            cp[0] = 0.0;
            dp[0] = v[0];
            for (std::size_t i = 1; i + 1 < nx; ++i) {
                const double denom = (1.0 + 2.0 * c) + c * cp[i - 1];
                cp[i] = -c / denom;
                dp[i] = (v[i] + c * dp[i - 1]) / denom;
            }
            w[nx - 1] = v[nx - 1];
            for (std::size_t i = nx - 1; i-- > 1;) w[i] = dp[i] - cp[i] * w[i + 1];
            w[0] = v[0];
        } else {
            w = v;
        }
        for (std::size_t i = 0; i < nx; ++i) w[i] = level.implicit_step(dtau, w[i]);
    }
    return PdiiSurface(grid.x_min, dx, nx, std::move(times), std::move(rows), n);
}

JumpSumReport jump_sum_identity_check(const PathBundle& bundle, const JumpFunctional& c, unsigned threads) {
    const std::size_t M = bundle.paths();
    const auto& atoms = bundle.model().atoms();
    const std::size_t J = atoms.size();
    const int r = bundle.rank();
    const double dt = bundle.grid().dt();
    std::vector<std::vector<double>> pw(J, std::vector<double>(static_cast<std::size_t>(r)));
    for (std::size_t j = 0; j < J; ++j) {
        for (int i = 1; i <= r; ++i) pw[j][static_cast<std::size_t>(i - 1)] = bundle.basis().p(i, atoms[j].location);
    }
    std::vector<double> chunk_scale(parallel::chunk_count(M), 0.0);
    const auto s = parallel::reduce(M, 2, threads, [&](std::size_t m, std::vector<double>& acc) {
        double lhs = 0.0, rhs = 0.0, scale = 0.0;
        std::vector<double> cv(J), inner(static_cast<std::size_t>(r));
        for (int k = 0; k < bundle.steps(); ++k) {
            const double t = bundle.grid().time(k);
            const double x = bundle.state(k, m);
            std::fill(inner.begin(), inner.end(), 0.0);
            double comp = 0.0;
            for (std::size_t j = 0; j < J; ++j) {
                cv[j] = c(t, x, atoms[j].location);
                scale = std::max(scale, std::abs(cv[j]));
                comp += atoms[j].rate * cv[j];
                for (std::size_t i = 0; i < inner.size(); ++i) inner[i] += atoms[j].rate * cv[j] * pw[j][i];
            }
            rhs += comp * dt;
            for (int i = 1; i <= r; ++i) rhs += inner[static_cast<std::size_t>(i - 1)] * bundle.h_increment(k, m, i);
            double state = x;
            for (std::size_t j = 0; j < J; ++j) {
                for (std::uint16_t q = 0; q < bundle.count(k, m, j); ++q) {
                    const double cj = c(t, state, atoms[j].location);
                    scale = std::max(scale, std::abs(cj));
                    lhs += cj;
                    state += atoms[j].location;
                }
            }
        }
        acc[0] += (lhs - rhs) * (lhs - rhs);
        acc[1] += lhs * lhs;
        auto& cs = chunk_scale[m / parallel::kChunk];
        cs = std::max(cs, scale);
    });
    JumpSumReport rep;
    rep.rms_mismatch = std::sqrt(s[0] / static_cast<double>(M));
    rep.rms_lhs = std::sqrt(s[1] / static_cast<double>(M));
    for (double v : chunk_scale) rep.c_scale = std::max(rep.c_scale, v);
    return rep;
}

JumpSumReport jump_sum_identity_check(const PathBundle& bundle, const PdiiSurface& surface, unsigned threads) {
    return jump_sum_identity_check(
        bundle, [&surface](double t, double x, double y) { return surface.jump_remainder(t, x, y); }, threads);
}

}  // namespace rbsde

#include "rbsde/regression.hpp"

#include "rbsde/error.hpp"
#include "rbsde/parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace rbsde {

namespace {
constexpr std::size_t kMaxRow = kMaxFeatures * 9;
}

RegressionPlan::RegressionPlan(const PathBundle& bundle, RegressionBasis basis, unsigned threads)
    : bundle_(&bundle), basis_(basis), rank_(bundle.rank()), threads_(threads) {
    if (basis_.degree < 0) throw std::invalid_argument("RegressionBasis: degree must be >= 0");
    if (basis_.knots < 0) throw std::invalid_argument("RegressionBasis: knots must be >= 0");
    if (static_cast<std::size_t>(basis_.feature_count()) > kMaxFeatures) {
        throw std::invalid_argument("RegressionBasis: too many features");
    }
    if (static_cast<std::size_t>(basis_.feature_count() * (1 + rank_)) > kMaxRow) {
        throw std::invalid_argument("RegressionBasis: design too wide for the basis rank");
    }
    const std::size_t M = bundle.paths();
    const int N = bundle.steps();
    steps_.resize(static_cast<std::size_t>(N));

    for (int k = 0; k < N; ++k) {
        auto& st = steps_[static_cast<std::size_t>(k)];
        const auto xs = bundle.states_at(k);
        const auto mom = parallel::reduce(M, 2, threads_, [&](std::size_t m, std::vector<double>& acc) {
            acc[0] += xs[m];
            acc[1] += xs[m] * xs[m];
        });
        const double mean = mom[0] / static_cast<double>(M);
        const double var = std::max(0.0, mom[1] / static_cast<double>(M) - mean * mean);
        st.center = mean;
        st.scale = std::sqrt(var);
        st.features = (st.scale > 1e-12 * (1.0 + std::abs(mean)) && M > 1) ? basis_.feature_count() : 1;
        if (st.features == 1) st.scale = 1.0;
        if (st.features > 1 && basis_.knots > 0) {
            std::vector<double> sorted(xs.begin(), xs.end());
            std::sort(sorted.begin(), sorted.end());
            for (int j = 1; j <= basis_.knots; ++j) {
                const auto q = static_cast<std::size_t>(static_cast<double>(j) / (basis_.knots + 1) *
                                                        static_cast<double>(M - 1));
                st.knots.push_back(sorted[q]);
            }
        }

        const int P = st.features * (1 + rank_);
        const auto PP = static_cast<std::size_t>(P);
        auto gram = parallel::reduce(M, PP * PP, threads_, [&](std::size_t m, std::vector<double>& acc) {
            std::array<double, kMaxRow> row{};
            fill_row(k, m, row);
            for (std::size_t a = 0; a < PP; ++a) {
                const double ra = row[a];
                if (ra == 0.0) continue;
                double* dst = acc.data() + a * PP;
                for (std::size_t b = a; b < PP; ++b) dst[b] += ra * row[b];
            }
        });

        Eigen::MatrixXd G(P, P);
        for (int a = 0; a < P; ++a) {
            for (int b = a; b < P; ++b) {
                G(a, b) = G(b, a) = gram[static_cast<std::size_t>(a) * PP + static_cast<std::size_t>(b)];
            }
        }
        st.column_scale.resize(P);
        st.active.assign(PP, true);
        const double diag_max = G.diagonal().maxCoeff();
        for (int a = 0; a < P; ++a) {
            if (!(G(a, a) > 1e-28 * std::max(diag_max, 1e-300))) {
                st.active[static_cast<std::size_t>(a)] = false;
                G.row(a).setZero();
                G.col(a).setZero();
                G(a, a) = 1.0;
                st.column_scale(a) = 1.0;
            } else {
                st.column_scale(a) = std::sqrt(G(a, a));
            }
        }
        for (int a = 0; a < P; ++a) {
            for (int b = 0; b < P; ++b) G(a, b) /= st.column_scale(a) * st.column_scale(b);
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G, Eigen::EigenvaluesOnly);
        const double lmax = eig.eigenvalues().maxCoeff();
        const double lmin = eig.eigenvalues().minCoeff();
        st.condition = lmin > 0.0 ? lmax / lmin : std::numeric_limits<double>::infinity();
        if (st.condition > kRidgeConditionThreshold) {
            st.ridge = true;
            G.diagonal().array() += kRidgeFactor * G.trace();
        }
        st.factor.compute(G);
        if (st.factor.info() != Eigen::Success) {
            throw RegressionSingular("normal equations not positive definite at step " + std::to_string(k));
        }
    }
}

int RegressionPlan::features(int k, double x, std::span<double> out) const noexcept {
    const auto& st = steps_[static_cast<std::size_t>(k)];
    out[0] = 1.0;
    if (st.features == 1) return 1;
    const double z = (x - st.center) / st.scale;
    int f = 1;
    double pw = 1.0;
    for (int d = 1; d <= basis_.degree; ++d) {
        pw *= z;
        out[static_cast<std::size_t>(f++)] = pw;
    }
    if (basis_.hinge_lower) out[static_cast<std::size_t>(f++)] = std::max(x - *basis_.hinge_lower, 0.0) / st.scale;
    if (basis_.hinge_upper) out[static_cast<std::size_t>(f++)] = std::max(*basis_.hinge_upper - x, 0.0) / st.scale;
    for (double kn : st.knots) out[static_cast<std::size_t>(f++)] = std::max(x - kn, 0.0) / st.scale;
    return f;
}

int RegressionPlan::fill_row(int k, std::size_t m, std::span<double> row) const noexcept {
    const int p = features(k, bundle_->state(k, m), row);
    for (int i = 1; i <= rank_; ++i) {
        const double dh = bundle_->h_increment(k, m, i);
        double* dst = row.data() + static_cast<std::size_t>(i * p);
        for (int a = 0; a < p; ++a) dst[a] = row[static_cast<std::size_t>(a)] * dh;
    }
    return p * (1 + rank_);
}

Eigen::VectorXd RegressionPlan::fit(int k, std::span<const double> target) const {
    const auto& st = steps_[static_cast<std::size_t>(k)];
    const int P = st.features * (1 + rank_);
    const auto PP = static_cast<std::size_t>(P);
    const auto rhs = parallel::reduce(bundle_->paths(), PP, threads_, [&](std::size_t m, std::vector<double>& acc) {
        std::array<double, kMaxRow> row{};
        fill_row(k, m, row);
        const double y = target[m];
        for (std::size_t a = 0; a < PP; ++a) acc[a] += row[a] * y;
    });
    Eigen::VectorXd b(P);
    for (int a = 0; a < P; ++a) {
        b(a) = st.active[static_cast<std::size_t>(a)] ? rhs[static_cast<std::size_t>(a)] / st.column_scale(a) : 0.0;
    }
    Eigen::VectorXd c = st.factor.solve(b);
    for (int a = 0; a < P; ++a) c(a) /= st.column_scale(a);
    return c;
}

}  // namespace rbsde

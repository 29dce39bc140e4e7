#include "rbsde/teugels_basis.hpp"

#include "rbsde/error.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

namespace rbsde {

namespace {

double horner(const std::vector<double>& c, double x) {
    double acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
    return acc;
}

// <a, b>_mu for coefficient vectors of length K using the Hankel matrix.
long double hankel_dot(const std::vector<long double>& a, const std::vector<long double>& b,
                       const MomentTable& m) {
    long double s = 0.0L;
    for (std::size_t j = 0; j < a.size(); ++j) {
        if (a[j] == 0.0L) continue;
        for (std::size_t k = 0; k < b.size(); ++k) {
            s += a[j] * b[k] * static_cast<long double>(m.mu(static_cast<int>(j + k)));
        }
    }
    return s;
}

}  // namespace

TeugelsBasis::TeugelsBasis(MomentTable moments, int truncation, std::vector<std::vector<double>> coeffs)
    : moments_(std::move(moments)), truncation_(truncation), coeffs_(std::move(coeffs)) {}

void TeugelsBasis::check_index(int i) const {
    if (i < 1 || i > rank()) {
        throw IndexOutOfRank("index " + std::to_string(i) + " outside 1.." + std::to_string(rank()));
    }
}

double TeugelsBasis::coeff(int i, int k) const {
    check_index(i);
    if (k < 1 || k > i) throw IndexOutOfRank("coefficient column " + std::to_string(k));
    return coeffs_[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(k - 1)];
}

const std::vector<double>& TeugelsBasis::q_coeffs(int i) const {
    check_index(i);
    return coeffs_[static_cast<std::size_t>(i - 1)];
}

double TeugelsBasis::q(int i, double x) const { return horner(q_coeffs(i), x); }

double TeugelsBasis::p(int i, double y) const { return y * q(i, y); }

double TeugelsBasis::compensator_rate(int i) const {
    const auto& c = q_coeffs(i);
    long double s = 0.0L;
    for (std::size_t k = 0; k < c.size(); ++k) {
        s += static_cast<long double>(c[k]) * moments_.nu(static_cast<int>(k) + 1);
    }
    return static_cast<double>(s);
}

double TeugelsBasis::gaussian_loading(int i) const { return q_coeffs(i)[0] * moments_.sigma; }

void TeugelsBasis::write_csv(std::ostream& os) const {
    os << "i";
    for (int k = 1; k <= rank(); ++k) os << ",c_" << k;
    os << '\n';
    char buf[64];
    for (int i = 1; i <= rank(); ++i) {
        os << i;
        for (int k = 1; k <= rank(); ++k) {
            const double v = k <= i ? coeff(i, k) : 0.0;
            std::snprintf(buf, sizeof buf, ",%.17g", v);
            os << buf;
        }
        os << '\n';
    }
}

TeugelsBasis build_basis(const MomentTable& moments, int truncation) {
    if (truncation < 1) throw std::invalid_argument("build_basis: truncation must be >= 1");
    if (moments.order < truncation) {
        throw std::invalid_argument("build_basis: moment table order below truncation");
    }
    const double mu0 = moments.mu(0);
    if (!(mu0 > 0.0)) throw RankZero("mu_0 = " + std::to_string(mu0));

    const auto K = static_cast<std::size_t>(truncation);
    const long double cutoff = static_cast<long double>(kBasisNullTolerance) * mu0;
    std::vector<std::vector<long double>> qs;
    for (std::size_t j = 0; j < K; ++j) {
        std::vector<long double> v(K, 0.0L);
        v[j] = 1.0L;
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& q : qs) {
                const long double proj = hankel_dot(v, q, moments);
                for (std::size_t k = 0; k < K; ++k) v[k] -= proj * q[k];
            }
        }
        const long double norm2 = hankel_dot(v, v, moments);
        if (!(norm2 > cutoff)) break;  // every higher monomial is dependent too
        const long double inv = 1.0L / std::sqrt(norm2);
        for (auto& c : v) c *= inv;
        qs.push_back(std::move(v));
    }

    std::vector<std::vector<double>> coeffs;
    coeffs.reserve(qs.size());
    for (std::size_t i = 0; i < qs.size(); ++i) {
        std::vector<double> c(i + 1);
        for (std::size_t k = 0; k <= i; ++k) c[k] = static_cast<double>(qs[i][k]);
        coeffs.push_back(std::move(c));
    }
    return TeugelsBasis(moments, truncation, std::move(coeffs));
}

double ProjectionPolys::operator()(int i, double y) const {
    if (i < 1 || i > size()) throw IndexOutOfRank("projection polynomial " + std::to_string(i));
    return horner(coeffs[static_cast<std::size_t>(i - 1)], y);
}

ProjectionPolys projection_polys(const TeugelsBasis& basis) {
    ProjectionPolys out;
    for (int i = 1; i <= basis.rank(); ++i) {
        const auto& q = basis.q_coeffs(i);
        std::vector<double> c(q.size() + 1, 0.0);
        for (std::size_t k = 0; k < q.size(); ++k) c[k + 1] = q[k];
        out.coeffs.push_back(std::move(c));
    }
    return out;
}

std::vector<double> h_increment_weights(const TeugelsBasis& basis, double jump) {
    if (jump == 0.0) throw std::invalid_argument("h_increment_weights: jump must be nonzero");
    std::vector<double> w(static_cast<std::size_t>(basis.rank()));
    for (int i = 1; i <= basis.rank(); ++i) w[static_cast<std::size_t>(i - 1)] = basis.p(i, jump);
    return w;
}

}  // namespace rbsde

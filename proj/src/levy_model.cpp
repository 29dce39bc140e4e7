#include "rbsde/levy_model.hpp"

#include "rbsde/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

namespace rbsde {

namespace {

void validate_atoms(const std::vector<JumpAtom>& atoms) {
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        const auto& a = atoms[i];
        if (!std::isfinite(a.location) || a.location == 0.0) {
            throw InvalidAtom("atom " + std::to_string(i) + " has zero or non-finite location");
        }
        if (!std::isfinite(a.rate) || a.rate <= 0.0) {
            throw InvalidAtom("atom " + std::to_string(i) + " has nonpositive rate");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (atoms[j].location == a.location) {
                throw InvalidAtom("duplicate atom location " + std::to_string(a.location));
            }
        }
    }
}

std::uint64_t fnv1a(std::uint64_t h, std::uint64_t word) {
    for (int b = 0; b < 8; ++b) {
        h ^= (word >> (8 * b)) & 0xffu;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

LevyModel::LevyModel(double drift, double sigma, std::vector<JumpAtom> atoms, double horizon)
    : drift_(drift), sigma_(sigma), atoms_(std::move(atoms)), horizon_(horizon) {
    if (!std::isfinite(drift_)) throw DegenerateModel("drift must be finite");
    if (!std::isfinite(sigma_) || sigma_ < 0.0) throw DegenerateModel("sigma must be >= 0");
    if (!std::isfinite(horizon_) || horizon_ <= 0.0) throw DegenerateModel("horizon must be > 0");
    validate_atoms(atoms_);
    if (sigma_ == 0.0 && atoms_.empty()) {
        throw DegenerateModel("no noise source: sigma = 0 and no jump atoms");
    }
}

double LevyModel::total_rate() const noexcept {
    long double s = 0.0L;
    for (const auto& a : atoms_) s += a.rate;
    return static_cast<double>(s);
}

double LevyModel::path_drift() const noexcept {
    long double b = drift_;
    for (const auto& a : atoms_) {
        if (std::abs(a.location) < 1.0) b -= static_cast<long double>(a.rate) * a.location;
    }
    return static_cast<double>(b);
}

double LevyModel::max_jump() const noexcept {
    double m = 0.0;
    for (const auto& a : atoms_) m = std::max(m, std::abs(a.location));
    return m;
}

double LevyModel::small_jump_integral() const noexcept {
    long double s = 0.0L;
    for (const auto& a : atoms_) s += a.rate * std::min(1.0, a.location * a.location);
    return static_cast<double>(s);
}

double LevyModel::exponential_moment(double lambda, double eps) const noexcept {
    long double s = 0.0L;
    for (const auto& a : atoms_) {
        if (std::abs(a.location) >= eps) s += a.rate * std::exp(static_cast<long double>(lambda) * std::abs(a.location));
    }
    return static_cast<double>(s);
}

std::uint64_t LevyModel::fingerprint() const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    h = fnv1a(h, std::bit_cast<std::uint64_t>(drift_));
    h = fnv1a(h, std::bit_cast<std::uint64_t>(sigma_));
    h = fnv1a(h, std::bit_cast<std::uint64_t>(horizon_));
    h = fnv1a(h, atoms_.size());
    for (const auto& a : atoms_) {
        h = fnv1a(h, std::bit_cast<std::uint64_t>(a.location));
        h = fnv1a(h, std::bit_cast<std::uint64_t>(a.rate));
    }
    return h;
}

LevyModel make_model(double drift, double sigma, std::vector<JumpAtom> atoms, double horizon) {
    return LevyModel(drift, sigma, std::move(atoms), horizon);
}

MomentTable moments(const LevyModel& model, int order) {
    if (order < 1) throw std::invalid_argument("moments: order must be >= 1");
    MomentTable t;
    t.order = order;
    t.sigma = model.sigma();
    const int top = 2 * order + 2;
    t.nu_moments.assign(static_cast<std::size_t>(top) + 1, 0.0);
    for (int k = 0; k <= top; ++k) {
        long double s = 0.0L;
        for (const auto& a : model.atoms()) {
            s += static_cast<long double>(a.rate) * std::pow(static_cast<long double>(a.location), k);
        }
        t.nu_moments[static_cast<std::size_t>(k)] = static_cast<double>(s);
    }
    t.mu_moments.assign(static_cast<std::size_t>(2 * order) + 1, 0.0);
    t.mu_moments[0] = static_cast<double>(static_cast<long double>(model.sigma()) * model.sigma() +
                                          static_cast<long double>(t.nu_moments[2]));
    for (int k = 1; k <= 2 * order; ++k) {
        t.mu_moments[static_cast<std::size_t>(k)] = t.nu_moments[static_cast<std::size_t>(k) + 2];
    }
    long double el1 = model.drift();
    for (const auto& a : model.atoms()) {
        if (std::abs(a.location) >= 1.0) el1 += static_cast<long double>(a.rate) * a.location;
    }
    t.mean_increment = static_cast<double>(el1);
    t.drift_prime = t.mean_increment;
    return t;
}

}  // namespace rbsde

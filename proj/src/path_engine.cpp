#include "rbsde/path_engine.hpp"

#include "rbsde/error.hpp"
#include "rbsde/parallel.hpp"
#include "rbsde/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace rbsde {

GridSpec::GridSpec(int steps_, double horizon_) : steps(steps_), horizon(horizon_) {
    if (steps < 1) throw std::invalid_argument("GridSpec: steps must be >= 1");
    if (!(horizon > 0.0)) throw std::invalid_argument("GridSpec: horizon must be > 0");
}

std::vector<double> GridSpec::times() const {
    std::vector<double> t(static_cast<std::size_t>(steps) + 1);
    for (int k = 0; k <= steps; ++k) t[static_cast<std::size_t>(k)] = time(k);
    return t;
}

PathBundle::PathBundle(LevyModel model, TeugelsBasis basis, GridSpec grid, std::size_t paths, std::uint64_t seed,
                       std::vector<double> states, std::vector<double> gaussian, std::vector<std::uint16_t> counts)
    : model_(std::move(model)),
      basis_(std::move(basis)),
      grid_(grid),
      paths_(paths),
      seed_(seed),
      states_(std::move(states)),
      gaussian_(std::move(gaussian)),
      counts_(std::move(counts)) {
    const auto N = static_cast<std::size_t>(grid_.steps);
    if (states_.size() != (N + 1) * paths_) throw std::invalid_argument("PathBundle: state array size");
    if (!gaussian_.empty() && gaussian_.size() != N * paths_) {
        throw std::invalid_argument("PathBundle: gaussian array size");
    }
    if (counts_.size() != N * paths_ * atom_count()) throw std::invalid_argument("PathBundle: count array size");

    const int r = basis_.rank();
    const std::size_t J = atom_count();
    jump_weight_.resize(static_cast<std::size_t>(r) * J);
    gauss_loading_.resize(static_cast<std::size_t>(r));
    compensation_.resize(static_cast<std::size_t>(r));
    for (int i = 1; i <= r; ++i) {
        const auto ii = static_cast<std::size_t>(i - 1);
        for (std::size_t j = 0; j < J; ++j) jump_weight_[ii * J + j] = basis_.p(i, model_.atoms()[j].location);
        gauss_loading_[ii] = basis_.gaussian_loading(i);
        compensation_[ii] = grid_.dt() * basis_.compensator_rate(i);
    }
}

double PathBundle::h_increment(int k, std::size_t m, int i) const noexcept {
    if (i < 1 || i > rank()) return 0.0;
    const auto ii = static_cast<std::size_t>(i - 1);
    const std::size_t J = atom_count();
    double v = gauss_loading_[ii] * gaussian(k, m);
    const std::size_t base = idx(k, m) * J;
    for (std::size_t j = 0; j < J; ++j) {
        const auto c = counts_[base + j];
        if (c != 0) v += c * jump_weight_[ii * J + j];
    }
    return v - compensation_[ii];
}

void PathBundle::h_increments(int k, std::size_t m, std::span<double> out) const noexcept {
    for (int i = 1; i <= rank(); ++i) out[static_cast<std::size_t>(i - 1)] = h_increment(k, m, i);
}

double PathBundle::h_value(int k, std::size_t m, int i) const noexcept {
    double s = 0.0;
    for (int q = 0; q < k; ++q) s += h_increment(q, m, i);
    return s;
}

double PathBundle::escape_fraction(double lo, double hi) const {
    const auto out = parallel::reduce(paths_, 1, 1, [&](std::size_t m, std::vector<double>& acc) {
        for (int k = 0; k <= steps(); ++k) {
            const double x = state(k, m);
            if (x < lo || x > hi) {
                acc[0] += 1.0;
                return;
            }
        }
    });
    return out[0] / static_cast<double>(paths_);
}

PathBundle simulate(const LevyModel& model, const TeugelsBasis& basis, const GridSpec& grid, std::size_t paths,
                    std::uint64_t seed, unsigned threads) {
    if (paths < 1) throw std::invalid_argument("simulate: need at least one path");
    const auto N = static_cast<std::size_t>(grid.steps);
    const double dt = grid.dt();
    const double sigma = model.sigma();
    const double sqdt = std::sqrt(dt);
    const double drift = model.path_drift();
    const auto& atoms = model.atoms();
    const std::size_t J = atoms.size();
    for (const auto& a : atoms) {
        if (a.rate * dt > 500.0) throw std::invalid_argument("simulate: jump rate too large for the time step");
    }

    std::vector<double> states((N + 1) * paths, 0.0);
    std::vector<double> gaussian(sigma > 0.0 ? N * paths : 0, 0.0);
    std::vector<std::uint16_t> counts(N * paths * J, 0);

    parallel::for_chunks(paths, threads, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t m = b; m < e; ++m) {
            CounterRng rng(seed, m);
            double x = 0.0;
            for (std::size_t k = 0; k < N; ++k) {
                double dx = drift * dt;
                if (sigma > 0.0) {
                    const double dw = sqdt * rng.normal();
                    gaussian[k * paths + m] = dw;
                    dx += sigma * dw;
                }
                for (std::size_t j = 0; j < J; ++j) {
                    const std::uint32_t c = std::min<std::uint32_t>(
                        rng.poisson(atoms[j].rate * dt), std::numeric_limits<std::uint16_t>::max());
                    counts[(k * paths + m) * J + j] = static_cast<std::uint16_t>(c);
                    dx += c * atoms[j].location;
                }
                x += dx;
                states[(k + 1) * paths + m] = x;
            }
        }
    });
    return PathBundle(model, basis, grid, paths, seed, std::move(states), std::move(gaussian), std::move(counts));
}

std::vector<double> power_jump(const PathBundle& bundle, int i, std::size_t path) {
    if (path >= bundle.paths()) throw IndexError("path " + std::to_string(path) + " out of range");
    if (i < 1) throw IndexError("power index must be >= 1");
    std::vector<double> out(static_cast<std::size_t>(bundle.steps()) + 1, 0.0);
    if (i == 1) {
        for (int k = 0; k <= bundle.steps(); ++k) out[static_cast<std::size_t>(k)] = bundle.state(k, path);
        return out;
    }
    const auto& atoms = bundle.model().atoms();
    std::vector<double> powers(atoms.size());
    for (std::size_t j = 0; j < atoms.size(); ++j) powers[j] = std::pow(atoms[j].location, i);
    double acc = 0.0;
    for (int k = 0; k < bundle.steps(); ++k) {
        for (std::size_t j = 0; j < atoms.size(); ++j) acc += bundle.count(k, path, j) * powers[j];
        out[static_cast<std::size_t>(k) + 1] = acc;
    }
    return out;
}

namespace {

constexpr char kMagic[8] = {'R', 'B', 'S', 'D', 'E', 'P', 'B', '1'};

template <class T>
void put(std::ofstream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw DumpFormatError("truncated header");
    return v;
}

void read_doubles(std::ifstream& is, std::vector<double>& buf) {
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(double)));
    if (!is) throw DumpFormatError("truncated body");
}

}  // namespace

void write_dump(const PathBundle& bundle, const std::filesystem::path& file, const std::string& config_text) {
    std::ofstream os(file, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open dump file " + file.string());
    const std::size_t M = bundle.paths();
    const auto N = static_cast<std::size_t>(bundle.steps());
    const std::size_t J = bundle.atom_count();
    const bool has_gauss = !bundle.raw_gaussian().empty();

    os.write(kMagic, sizeof kMagic);
    put<std::uint64_t>(os, bundle.seed());
    put<std::uint64_t>(os, bundle.model().fingerprint());
    put<std::uint64_t>(os, N);
    put<double>(os, bundle.grid().horizon);
    put<std::uint64_t>(os, M);
    put<std::uint64_t>(os, J);
    put<std::uint64_t>(os, has_gauss ? 1 : 0);
    put<std::uint64_t>(os, config_text.size());
    os.write(config_text.data(), static_cast<std::streamsize>(config_text.size()));

    std::vector<double> row;
    row.resize(N + 1);
    for (std::size_t m = 0; m < M; ++m) {
        for (std::size_t k = 0; k <= N; ++k) row[k] = bundle.raw_states()[k * M + m];
        os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>((N + 1) * sizeof(double)));
    }
    if (has_gauss) {
        row.resize(N);
        for (std::size_t m = 0; m < M; ++m) {
            for (std::size_t k = 0; k < N; ++k) row[k] = bundle.raw_gaussian()[k * M + m];
            os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(N * sizeof(double)));
        }
    }
    if (J > 0) {
        row.resize(N * J);
        for (std::size_t m = 0; m < M; ++m) {
            for (std::size_t k = 0; k < N; ++k) {
                for (std::size_t j = 0; j < J; ++j) row[k * J + j] = bundle.raw_counts()[(k * M + m) * J + j];
            }
            os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(N * J * sizeof(double)));
        }
    }
    if (!os) throw std::runtime_error("failed writing dump " + file.string());
}

BundleDump read_dump(const std::filesystem::path& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw DumpFormatError("cannot open " + file.string());
    char magic[8];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0) throw DumpFormatError("bad magic");
    BundleDump d;
    d.seed = get<std::uint64_t>(is);
    d.model_hash = get<std::uint64_t>(is);
    d.steps = static_cast<int>(get<std::uint64_t>(is));
    d.horizon = get<double>(is);
    d.paths = get<std::uint64_t>(is);
    d.atoms = get<std::uint64_t>(is);
    const bool has_gauss = get<std::uint64_t>(is) != 0;
    const auto cfg_len = get<std::uint64_t>(is);
    d.config_text.resize(cfg_len);
    is.read(d.config_text.data(), static_cast<std::streamsize>(cfg_len));
    if (!is) throw DumpFormatError("truncated config");

    const std::size_t M = d.paths;
    const auto N = static_cast<std::size_t>(d.steps);
    const std::size_t J = d.atoms;
    std::vector<double> row(N + 1);
    d.states.assign((N + 1) * M, 0.0);
    for (std::size_t m = 0; m < M; ++m) {
        read_doubles(is, row);
        for (std::size_t k = 0; k <= N; ++k) d.states[k * M + m] = row[k];
    }
    if (has_gauss) {
        row.resize(N);
        d.gaussian.assign(N * M, 0.0);
        for (std::size_t m = 0; m < M; ++m) {
            read_doubles(is, row);
            for (std::size_t k = 0; k < N; ++k) d.gaussian[k * M + m] = row[k];
        }
    }
    d.counts.assign(N * M * J, 0);
    if (J > 0) {
        row.resize(N * J);
        for (std::size_t m = 0; m < M; ++m) {
            read_doubles(is, row);
            for (std::size_t k = 0; k < N; ++k) {
                for (std::size_t j = 0; j < J; ++j) {
                    d.counts[(k * M + m) * J + j] = static_cast<std::uint16_t>(row[k * J + j]);
                }
            }
        }
    }
    return d;
}

PathBundle bundle_from_dump(BundleDump dump, const LevyModel& model, const TeugelsBasis& basis) {
    if (dump.model_hash != model.fingerprint()) {
        throw HashMismatch("dump was produced by a different model");
    }
    if (dump.atoms != model.atoms().size()) throw HashMismatch("atom count differs");
    if (model.sigma() > 0.0 && dump.gaussian.empty()) throw DumpFormatError("missing gaussian increments");
    return PathBundle(model, basis, GridSpec(dump.steps, dump.horizon), dump.paths, dump.seed,
                      std::move(dump.states), std::move(dump.gaussian), std::move(dump.counts));
}

}  // namespace rbsde

#include "rbsde/driver.hpp"

#include "rbsde/error.hpp"
#include "rbsde/random.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace rbsde {

DriverSpec zero_driver() {
    DriverSpec d;
    d.name = "zero";
    d.f = [](double, double, double, std::span<const double>) { return 0.0; };
    set_terminal(d, "identity");
    return d;
}

DriverSpec linear_y_driver(double c0, double c1) {
    DriverSpec d;
    d.name = "linear_y";
    d.f = [c0, c1](double, double, double y, std::span<const double>) { return c0 + c1 * y; };
    d.lipschitz = c1 * c1;
    d.depends_on_y = c1 != 0.0;
    set_terminal(d, "identity");
    return d;
}

DriverSpec lipschitz_test_driver(double offset, double y_coef, double z_coef) {
    DriverSpec d;
    d.name = "lipschitz_test";
    d.f = [=](double, double, double y, std::span<const double> z) {
        return offset + y_coef * std::sin(y) + z_coef * std::tanh(z.empty() ? 0.0 : z[0]);
    };
    d.lipschitz = 2.0 * std::max(y_coef * y_coef, z_coef * z_coef);
    d.depends_on_y = y_coef != 0.0;
    set_terminal(d, "identity");
    return d;
}

void set_terminal(DriverSpec& driver, const std::string& kind, double strike) {
    driver.terminal_name = kind;
    if (kind == "identity") {
        driver.terminal = [](double x) { return x; };
    } else if (kind == "square") {
        driver.terminal = [](double x) { return x * x; };
    } else if (kind == "positive_part") {
        driver.terminal = [strike](double x) { return std::max(x - strike, 0.0); };
    } else if (kind == "softplus") {
        driver.terminal = [strike](double x) {
            const double s = x - strike;
            return s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
        };
    } else {
        throw ConfigError("unknown terminal map '" + kind + "'");
    }
}

double probe_lipschitz(const DriverSpec& driver, int rank, int probes, std::uint64_t seed) {
    CounterRng rng(seed, 0);
    std::vector<double> z1(static_cast<std::size_t>(rank)), z2(z1.size());
    double worst = 0.0;
    for (int p = 0; p < probes; ++p) {
        const double t = rng.uniform();
        const double x = 4.0 * rng.normal();
        const double y1 = 4.0 * rng.normal();
        const double y2 = y1 + rng.normal();
        double dz2 = 0.0;
        for (std::size_t i = 0; i < z1.size(); ++i) {
            z1[i] = 4.0 * rng.normal();
            z2[i] = z1[i] + rng.normal();
            dz2 += (z1[i] - z2[i]) * (z1[i] - z2[i]);
        }
        const double df = driver(t, x, y1, z1) - driver(t, x, y2, z2);
        const double den = (y1 - y2) * (y1 - y2) + dz2;
        if (den > 0.0) worst = std::max(worst, df * df / den);
    }
    return worst;
}

}  // namespace rbsde

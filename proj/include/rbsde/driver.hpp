#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>

namespace rbsde {

/// Generator f(t, x, y, z) with x = L_t and z the vector of martingale
/// coefficients, its Lipschitz constant C_f in
///   |f(t,x,y1,z1) - f(t,x,y2,z2)|^2 <= C_f (|y1 - y2|^2 + ||z1 - z2||^2),
/// and the terminal map h with xi = h(L_T).
struct DriverSpec {
    using Generator = std::function<double(double t, double x, double y, std::span<const double> z)>;

    std::string name;
    Generator f;
    double lipschitz = 0.0;
    /// False when f ignores y; the implicit step then needs no fixed point.
    bool depends_on_y = false;
    std::string terminal_name;
    std::function<double(double)> terminal;

    double operator()(double t, double x, double y, std::span<const double> z) const { return f(t, x, y, z); }
    double xi(double x) const { return terminal(x); }
};

DriverSpec zero_driver();
/// f = c0 + c1 y.
DriverSpec linear_y_driver(double c0, double c1);
/// f = offset + y_coef sin(y) + z_coef tanh(z_1); C_f = 2 max(y_coef^2, z_coef^2).
DriverSpec lipschitz_test_driver(double offset, double y_coef, double z_coef);

/// Terminal maps: "identity" x, "square" x^2, "positive_part" max(x - strike, 0),
/// "softplus" log(1 + e^{x - strike}).
void set_terminal(DriverSpec& driver, const std::string& kind, double strike = 0.0);

/// Largest observed |df|^2 / (|dy|^2 + ||dz||^2) over random probes.
double probe_lipschitz(const DriverSpec& driver, int rank, int probes, std::uint64_t seed);

}  // namespace rbsde

#include "locreg/bounds.hpp"

#include "locreg/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace locreg {

double alpha_m(int m)
{
    if (m < 1)
        throw Error(ErrorCode::invalid_dimension, "alpha_m needs m >= 1");
    return std::pow(std::numbers::pi, 0.5 * m) / std::tgamma(0.5 * m + 1.0);
}

GeometryParams GeometryParams::unit_sphere(int m)
{
    GeometryParams g;
    g.m = m;
    g.R = 1.0;
    g.i0 = std::numbers::pi;
    g.K_curv = 1.0;
    // surface area of S^m is (m+1) α_{m+1}
    const double area = (m + 1) * alpha_m(m + 1);
    g.p_min = 1.0 / area;
    g.p_max = 1.0 / area;
    return g;
}

RBounds r_bounds(double r, double sigma, const GeometryParams& g)
{
    if (!(r > 0.0) || !(sigma >= 0.0) || !(g.R > 0.0))
        throw Error(ErrorCode::invalid_argument, "r_bounds needs r > 0, sigma >= 0, R > 0");
    const double m = g.m;
    const double lo = std::sqrt(1.0 + 4.0 * sigma / g.R + 16.0 * sigma * sigma / (r * r)) + m * sigma / g.R;
    const double arg = 1.0 - 8.0 * r * r / g.R - 4.0 * sigma / g.R;
    if (!(arg > 0.0))
        throw Error(ErrorCode::domain_error, "r_plus: square-root argument is not positive");
    const double hi = std::sqrt(arg) - m * sigma / g.R;
    if (!(hi > 0.0))
        throw Error(ErrorCode::domain_error, "r_plus: denominator is not positive");
    return {r / lo, r / hi};
}

double c_m_R(int m, double R)
{
    return std::max((8.0 * m + 32.0) / R, 64.0);
}

double eta_bound(double r, double sigma, double C_M)
{
    if (!(r > 0.0))
        throw Error(ErrorCode::invalid_argument, "eta_bound needs r > 0");
    return C_M * (r * r * r + r * sigma + sigma * sigma / r);
}

AssumptionReport assumption3_check(double r, double sigma, const GeometryParams& g, double C)
{
    AssumptionReport rep;
    auto clause = [&](bool ok, const char* name) {
        if (!ok) {
            rep.pass = false;
            rep.violated.emplace_back(name);
        }
    };
    const double m = g.m;
    clause(sigma <= g.R / (16.0 * m), "sigma <= R/(16m)");
    clause(r <= g.i0, "r <= i0");
    clause(r <= 1.0 / std::sqrt(g.K_curv), "r <= 1/sqrt(K)");
    clause(r <= std::sqrt(alpha_m(g.m) / (2.0 * C * m * g.K_curv)), "r <= sqrt(alpha_m/(2CmK))");
    clause(r <= std::sqrt(g.R / 32.0), "r <= sqrt(R/32)");
    clause(sigma <= r / 3.0, "sigma <= r/3");
    return rep;
}

double concentration_constant(int m, double p_min)
{
    const double a = alpha_m(m);
    return std::min(a * a * p_min * p_min / std::pow(4.0, m + 2), 1.0 / 16.0);
}

double failure_probability(long long n, double r, int m, double p_min)
{
    if (n < 1)
        throw Error(ErrorCode::invalid_argument, "failure_probability needs n >= 1");
    const double c = concentration_constant(m, p_min);
    const double nn = static_cast<double>(n);
    const double p = 4.0 * nn * std::exp(-c * nn * std::pow(r, std::max(2 * m, m + 4)));
    return std::clamp(p, 0.0, 1.0);
}

}  // namespace locreg

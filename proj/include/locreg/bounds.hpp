#pragma once

#include <string>
#include <vector>

namespace locreg {

/// Volume of the m-dimensional Euclidean unit ball.
double alpha_m(int m);

struct GeometryParams {
    int m = 2;
    double R = 1.0;        ///< reach
    double i0 = 3.141592653589793;  ///< injectivity radius
    double K_curv = 1.0;   ///< max |sectional curvature|
    double p_min = 1.0;
    double p_max = 1.0;
    double C_M = 1.0;

    /// Unit sphere S^m with the uniform density.
    static GeometryParams unit_sphere(int m);
};

struct RBounds {
    double r_minus;
    double r_plus;
};

/// r₋ = r(√(1+4σ/R+16σ²/r²) + mσ/R)⁻¹ and r₊ = r(√(1−8r²/R−4σ/R) − mσ/R)⁻¹.
/// Throws domain-error when the r₊ denominator is not positive.
RBounds r_bounds(double r, double sigma, const GeometryParams& g);

/// max{(8m+32)/R, 64}
double c_m_R(int m, double R);

/// C_M (r³ + rσ + σ²/r)
double eta_bound(double r, double sigma, double C_M = 1.0);

struct AssumptionReport {
    bool pass = true;
    std::vector<std::string> violated;
};

/// Clauses: "sigma <= R/(16m)", "r <= i0", "r <= 1/sqrt(K)",
/// "r <= sqrt(alpha_m/(2CmK))", "r <= sqrt(R/32)", "sigma <= r/3".
AssumptionReport assumption3_check(double r, double sigma, const GeometryParams& g, double C = 1.0);

/// 4n·exp(−c n r^{max(2m, m+4)}) clamped to [0, 1], c = min{α_m² p_min²/4^{m+2}, 1/16}.
double failure_probability(long long n, double r, int m, double p_min);

/// The constant c above.
double concentration_constant(int m, double p_min);

}  // namespace locreg

#pragma once

#include "locreg/graph.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace locreg {

/// Ascending eigenvalues of a Laplacian. `values` are plain matrix
/// eigenvalues; the Dirichlet-quotient convention (energy over the 1/n-weighted
/// norm) is n times larger and available through scaled_values().
struct Spectrum {
    Vector values;
    std::optional<Matrix> vectors;  ///< n×k, orthonormal columns
    Eigen::Index nodes = 0;

    Vector scaled_values() const { return values * static_cast<double>(nodes); }
};

enum class EigenMethod { automatic, dense, iterative };

struct EigenOptions {
    double tol = 1e-9;         ///< residual bound, relative to max(1, ‖L‖)
    int dense_limit = 2000;    ///< largest component solved densely
    bool want_vectors = true;
    EigenMethod method = EigenMethod::automatic;
    int max_blocks = 0;        ///< Krylov block expansions; 0 means 50·k
    std::uint64_t seed = 0x5eed;
};

/// k algebraically smallest eigenpairs of a symmetric PSD operator. The
/// sparsity pattern is split into connected components first; small ones go
/// to LAPACK, large ones to a shift-invert block Krylov iteration.
Spectrum smallest_eigs(const SymmetricOperator& L, int k, const EigenOptions& opts = {});

/// ℓ(ℓ+1) with multiplicity 2ℓ+1, first `count` values.
std::vector<double> sphere_spectrum(int count);

/// |computed − reference| / reference, except the first entry which is the
/// absolute error.
std::vector<double> spectral_error(const std::vector<double>& computed, const std::vector<double>& reference);

/// Largest |distX − distY| over pairs with min(distX, distY) < eps + eta,
/// iterated from the global maximum until it stops changing.
double sandwich_eta(const Matrix& distX, const Matrix& distY, double eps, int* iterations = nullptr);

struct SandwichReport {
    double eps = 0.0;
    double eta = 0.0;
    int eta_iterations = 0;
    std::vector<double> lower;   ///< ((ε−η)/ε)^{m+2} λ_ℓ(X, ε−η)
    std::vector<double> middle;  ///< λ_ℓ(Ȳ, ε)
    std::vector<double> upper;   ///< ((ε+η)/ε)^{m+2} λ_ℓ(X, ε+η)
    std::vector<bool> pass;

    bool all_pass() const;
};

/// Compares Dirichlet-quotient eigenvalues of ε-graphs on two distance
/// matrices. Throws eta-too-large when ε ≤ η.
SandwichReport sandwich_check(const Matrix& distX, const Matrix& distYbar, double eps, int m, int k,
                              double rel_slack = 1e-8);

/// Columns: index,value_paper_convention,value_matrix_convention,reference,relative_error.
/// The reference column is compared against the matrix-convention value.
void write_spectrum_csv(const std::filesystem::path& path, const Spectrum& s,
                        const std::vector<double>& reference);

}  // namespace locreg

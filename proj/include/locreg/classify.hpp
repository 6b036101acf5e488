#pragma once

#include "locreg/graph.hpp"
#include "locreg/regularize.hpp"
#include "locreg/spectral.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace locreg {

/// log Φ(x) for the standard normal CDF, finite and increasing for every
/// finite x.
double log_std_normal_cdf(double x);

/// φ(x)/Φ(x), the derivative of log Φ.
double normal_hazard(double x);

/// log Φ(t/γ): log-CDF of N(0, γ²) at t.
double log_normal_cdf(double t, double gamma);

/// Full eigendecomposition of the symmetric-normalized Laplacian, prepared
/// for the probit problem. The null vector is pinned to D^{1/2}1 and the
/// remaining eigenvalues are floored at 1e-12, so numerically disconnected
/// graphs do not mix the null direction into U.
struct ProbitBasis {
    Vector lambda;  ///< ascending, lambda(0) = 0
    Matrix q;       ///< n×n orthonormal columns
    double lambda2_raw = 0.0;  ///< second eigenvalue before flooring
};

/// Throws disconnected-graph when `strict` and the second eigenvalue is
/// below 1e-10; otherwise warns.
ProbitBasis probit_basis(const SimilarityGraph& g, bool strict = false);

struct LabelSet {
    std::vector<int> index;
    std::vector<int> sign;  ///< ±1

    std::size_t size() const { return index.size(); }
};

struct ProbitProblem {
    ProbitBasis basis;
    LabelSet labels;
    double gamma = 0.1;
    double c = 0.0;  ///< n (Σ_{i≥2} 1/λ_i)^{-1}

    Eigen::Index n() const { return basis.q.rows(); }
};

/// Validates the labels and computes c.
ProbitProblem make_probit_problem(ProbitBasis basis, LabelSet labels, double gamma = 0.1);

/// J(u) = (1/2c)⟨u, Δu⟩ − Σ_j log Φ(y_j u_j; γ). u is taken as given; callers
/// keep it inside span{q_2..q_n}.
double probit_objective(const ProbitProblem& p, const Vector& u);

/// Same objective in the coefficients a of u = Σ_{i≥2} a_i q_i.
double probit_objective_coeffs(const ProbitProblem& p, const Vector& a);
Vector probit_gradient_coeffs(const ProbitProblem& p, const Vector& a);

struct ProbitOptions {
    double grad_tol = 1e-8;
    int max_iter = 500;
};

struct ClassifierResult {
    Vector u;
    std::vector<int> predictions;  ///< sign(u) with sign(0) = +1
    int error_unlabeled = -1;      ///< -1 when no ground truth was given
    int iterations = 0;
    double grad_norm = 0.0;
};

/// Damped Newton over the coefficients, Hessian solved through the labelled
/// rows only. Throws no-convergence when the gradient target is missed.
ClassifierResult fit_probit(const ProbitProblem& p, const ProbitOptions& opts = {},
                            const std::vector<int>* truth = nullptr);

/// Number of unlabelled points whose prediction differs from the truth.
int count_unlabeled_errors(const std::vector<int>& predictions, const std::vector<int>& truth,
                           const LabelSet& labels);

/// Picks `count` labels uniformly without replacement; with `stratified`
/// each class gets a share proportional to its size (at least one each).
LabelSet reveal_labels(const std::vector<int>& truth, int count, std::uint64_t seed, bool stratified = false);

/// Regularize, build the graph, fit. The graph is built on the regularized
/// cloud's distances.
ClassifierResult classify_cloud(const PointCloud& Y, const RegularizerSpec& reg, const GraphRecipe& graph,
                                const LabelSet& labels, const std::vector<int>& truth, double gamma = 0.1);

struct CvRow {
    RegularizerSpec spec;
    double mean_error = 0.0;  ///< held-out label errors per repeat
    std::vector<int> repeat_errors;
};

struct CvResult {
    RegularizerSpec best;
    std::vector<CvRow> table;
};

/// Two-fold stratified cross-validation over the revealed labels. Every grid
/// value sees the same splits. Ties go to the smaller parameter.
CvResult cross_validate(const PointCloud& Y, const LabelSet& labels, const std::vector<RegularizerSpec>& grid,
                        const GraphRecipe& graph, int repeats, std::uint64_t seed, double gamma = 0.1);

void write_cv_csv(const std::string& path, const CvResult& cv);
void write_predictions_csv(const std::string& path, const ClassifierResult& res, const std::vector<int>& truth,
                           const LabelSet& labels);

}  // namespace locreg

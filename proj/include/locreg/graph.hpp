#pragma once

#include "locreg/pointcloud.hpp"

#include <Eigen/Sparse>

#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

namespace locreg {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Full n×n Euclidean distance matrix between rows.
Matrix pairwise_distances(const Matrix& points);

/// Indices of the k nearest rows to each row, self excluded, ascending by
/// (distance, index).
std::vector<std::vector<int>> knn_indices(const Matrix& dist, int k);

enum class GraphKind { epsilon, self_tuning, knn_self_tuning };
enum class KnnRule { union_rule, mutual_rule };

std::string to_string(GraphKind kind);
std::string to_string(KnnRule rule);
KnnRule parse_knn_rule(const std::string& text);

struct GraphRecipe {
    GraphKind kind = GraphKind::epsilon;
    double eps = 0.0;
    int K = 0;
    int m = 0;
    double vol = 1.0;
    KnnRule rule = KnnRule::union_rule;
};

struct Edge {
    int i;
    int j;  ///< always i < j
    double w;
};

/// Symmetric non-negative weights. Sparse graphs keep only the strict upper
/// triangle; dense graphs store the full matrix, diagonal included.
class SimilarityGraph {
public:
    SimilarityGraph(Eigen::Index n, std::vector<Edge> edges, GraphRecipe recipe);
    SimilarityGraph(Matrix weights, GraphRecipe recipe);

    Eigen::Index n() const { return n_; }
    const GraphRecipe& recipe() const { return recipe_; }
    bool is_dense() const { return std::holds_alternative<Matrix>(weights_); }

    const Matrix& dense_weights() const { return std::get<Matrix>(weights_); }
    const std::vector<Edge>& edges() const { return std::get<std::vector<Edge>>(weights_); }

    /// Off-diagonal weight lookup (linear in the edge count for sparse graphs).
    double weight(Eigen::Index i, Eigen::Index j) const;

    /// Degrees with the diagonal excluded.
    Vector degrees() const;

    /// Number of distinct off-diagonal pairs with positive weight.
    std::size_t edge_count() const;

    /// Full symmetric matrix with the diagonal zeroed.
    Matrix to_dense() const;

    /// Header "n m_edges kind" then one "i j w" line per edge with i < j.
    void write_edge_list(std::ostream& out) const;

private:
    Eigen::Index n_;
    std::variant<Matrix, std::vector<Edge>> weights_;
    GraphRecipe recipe_;
};

/// ε-graph: W(i,j) = 2(m+2)·vol/(α_m ε^{m+2} n) when dist(i,j) < ε.
SimilarityGraph epsilon_graph(const Matrix& dist, double eps, int m, double vol = 1.0);

/// Per-point bandwidth: distance to the K-th nearest neighbour, self excluded.
/// Zero bandwidths are replaced by the smallest positive one (with a warning).
Vector self_tuning_scales(const Matrix& dist, int K);

/// Dense graph W(i,j) = exp(-dist²/(2 τ_i τ_j)).
SimilarityGraph self_tuning_graph(const Matrix& dist, int K);

/// Keeps W(i,j) only if j is among the K nearest of i or vice versa (union),
/// or both (mutual).
SimilarityGraph knn_restrict(const SimilarityGraph& g, const Matrix& dist, int K,
                             KnnRule rule = KnnRule::union_rule);

/// Builds the graph a recipe describes: epsilon (eps, m, vol), self-tuning (K)
/// or self-tuning restricted to K nearest neighbours (K, rule).
SimilarityGraph build_graph(const Matrix& dist, const GraphRecipe& recipe);

enum class LaplacianKind { unnormalized, symmetric_normalized };

/// Symmetric matrix operator: dense or sparse (both triangles stored).
struct SymmetricOperator {
    std::variant<Matrix, SparseMatrix> storage;

    Eigen::Index n() const;
    bool is_dense() const { return std::holds_alternative<Matrix>(storage); }
    const Matrix& dense() const { return std::get<Matrix>(storage); }
    const SparseMatrix& sparse() const { return std::get<SparseMatrix>(storage); }

    Vector apply(const Vector& v) const;
    Matrix to_dense() const;
    /// Gershgorin bound on the spectral radius.
    double norm_bound() const;
};

/// D − W or I − D^{-1/2} W D^{-1/2}; the diagonal of W is ignored. Dense
/// graphs give dense operators, sparse graphs sparse ones.
SymmetricOperator laplacian(const SimilarityGraph& g, LaplacianKind kind = LaplacianKind::unnormalized);

/// (m+2)·vol/(α_m ε^{m+2} n) Σ_i Σ_j 1{dist(i,j) < ε} (u_i − u_j)², which
/// equals uᵀ(D−W)u for the matching ε-graph.
double dirichlet_energy(const Matrix& dist, double eps, int m, double vol, const Vector& u);

}  // namespace locreg

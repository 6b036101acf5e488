#include "locreg/graph.hpp"

#include "locreg/bounds.hpp"
#include "locreg/error.hpp"
#include "locreg/log.hpp"
#include "locreg/textio.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

namespace locreg {

Matrix pairwise_distances(const Matrix& points)
{
    const Eigen::Index n = points.rows();
    const Matrix pt = points.transpose();  // one point per contiguous column
    Matrix dist(n, n);
#pragma omp parallel for schedule(dynamic, 16)
    for (Eigen::Index i = 0; i < n; ++i) {
        dist(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j)
            dist(i, j) = (pt.col(i) - pt.col(j)).norm();
    }
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < i; ++j)
            dist(i, j) = dist(j, i);
    return dist;
}

std::vector<std::vector<int>> knn_indices(const Matrix& dist, int k)
{
    const auto n = static_cast<int>(dist.rows());
    if (k < 1 || k >= n)
        throw Error(ErrorCode::invalid_k, "need 1 <= k < n, got k=" + std::to_string(k));
    std::vector<std::vector<int>> out(n);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        std::vector<int> order;
        order.reserve(n - 1);
        for (int j = 0; j < n; ++j)
            if (j != i)
                order.push_back(j);
        auto closer = [&](int a, int b) {
            return dist(i, a) < dist(i, b) || (dist(i, a) == dist(i, b) && a < b);
        };
        std::partial_sort(order.begin(), order.begin() + k, order.end(), closer);
        order.resize(k);
        out[i] = std::move(order);
    }
    return out;
}

std::string to_string(GraphKind kind)
{
    switch (kind) {
    case GraphKind::epsilon: return "epsilon";
    case GraphKind::self_tuning: return "self-tuning";
    case GraphKind::knn_self_tuning: return "knn-self-tuning";
    }
    return "unknown";
}

std::string to_string(KnnRule rule)
{
    return rule == KnnRule::union_rule ? "union" : "mutual";
}

KnnRule parse_knn_rule(const std::string& text)
{
    if (text == "union")
        return KnnRule::union_rule;
    if (text == "mutual")
        return KnnRule::mutual_rule;
    throw Error(ErrorCode::unsupported_mode, "unknown kNN rule '" + text + "'");
}

// -- SimilarityGraph ------------------------------------------------------------

SimilarityGraph::SimilarityGraph(Eigen::Index n, std::vector<Edge> edges, GraphRecipe recipe)
    : n_(n), weights_(std::move(edges)), recipe_(recipe)
{
    for (const auto& e : std::get<std::vector<Edge>>(weights_))
        if (e.i < 0 || e.j <= e.i || e.j >= n || !(e.w >= 0.0))
            throw Error(ErrorCode::invalid_argument, "edges must satisfy 0 <= i < j < n and w >= 0");
}

SimilarityGraph::SimilarityGraph(Matrix weights, GraphRecipe recipe)
    : n_(weights.rows()), weights_(std::move(weights)), recipe_(recipe)
{
    const auto& w = std::get<Matrix>(weights_);
    if (w.rows() != w.cols())
        throw Error(ErrorCode::shape_mismatch, "weight matrix must be square");
    if (w != w.transpose())
        throw Error(ErrorCode::invalid_argument, "weight matrix must be symmetric");
}

double SimilarityGraph::weight(Eigen::Index i, Eigen::Index j) const
{
    if (i == j)
        return 0.0;
    if (is_dense())
        return dense_weights()(i, j);
    if (i > j)
        std::swap(i, j);
    for (const auto& e : edges())
        if (e.i == i && e.j == j)
            return e.w;
    return 0.0;
}

Vector SimilarityGraph::degrees() const
{
    if (is_dense()) {
        const Matrix& w = dense_weights();
        return w.rowwise().sum() - w.diagonal();
    }
    Vector deg = Vector::Zero(n_);
    for (const auto& e : edges()) {
        deg(e.i) += e.w;
        deg(e.j) += e.w;
    }
    return deg;
}

std::size_t SimilarityGraph::edge_count() const
{
    std::size_t count = 0;
    if (is_dense()) {
        const Matrix& w = dense_weights();
        for (Eigen::Index j = 0; j < n_; ++j)
            for (Eigen::Index i = 0; i < j; ++i)
                count += w(i, j) > 0.0;
        return count;
    }
    for (const auto& e : edges())
        count += e.w > 0.0;
    return count;
}

Matrix SimilarityGraph::to_dense() const
{
    if (is_dense()) {
        Matrix w = dense_weights();
        w.diagonal().setZero();
        return w;
    }
    Matrix w = Matrix::Zero(n_, n_);
    for (const auto& e : edges()) {
        w(e.i, e.j) = e.w;
        w(e.j, e.i) = e.w;
    }
    return w;
}

void SimilarityGraph::write_edge_list(std::ostream& out) const
{
    out << n_ << ' ' << edge_count() << ' ' << to_string(recipe_.kind) << '\n';
    if (is_dense()) {
        const Matrix& w = dense_weights();
        for (Eigen::Index i = 0; i < n_; ++i)
            for (Eigen::Index j = i + 1; j < n_; ++j)
                if (w(i, j) > 0.0)
                    out << i << ' ' << j << ' ' << format_double(w(i, j)) << '\n';
        return;
    }
    for (const auto& e : edges())
        if (e.w > 0.0)
            out << e.i << ' ' << e.j << ' ' << format_double(e.w) << '\n';
}

// -- constructions -------------------------------------------------------------

SimilarityGraph epsilon_graph(const Matrix& dist, double eps, int m, double vol)
{
    if (!(eps > 0.0))
        throw Error(ErrorCode::invalid_argument, "epsilon must be positive");
    if (!(vol > 0.0))
        throw Error(ErrorCode::invalid_argument, "volume factor must be positive");
    if (dist.rows() != dist.cols())
        throw Error(ErrorCode::shape_mismatch, "distance matrix must be square");

    const Eigen::Index n = dist.rows();
    const double w = 2.0 * (m + 2) * vol /
                     (alpha_m(m) * std::pow(eps, m + 2) * static_cast<double>(n));
    std::vector<Edge> edges;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            if (dist(i, j) < eps)
                edges.push_back({static_cast<int>(i), static_cast<int>(j), w});
    if (edges.empty())
        warn("epsilon graph with eps=" + format_double(eps) + " has no edges");

    GraphRecipe recipe;
    recipe.kind = GraphKind::epsilon;
    recipe.eps = eps;
    recipe.m = m;
    recipe.vol = vol;
    return SimilarityGraph(n, std::move(edges), recipe);
}

Vector self_tuning_scales(const Matrix& dist, int K)
{
    const auto nn = knn_indices(dist, K);
    const Eigen::Index n = dist.rows();
    Vector tau(n);
    double smallest = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
        tau(i) = dist(i, nn[i].back());
        if (tau(i) > 0.0)
            smallest = std::min(smallest, tau(i));
    }
    int zeros = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        zeros += tau(i) == 0.0;
    if (zeros > 0) {
        if (!std::isfinite(smallest))
            throw Error(ErrorCode::degenerate_scale,
                        "every K-th neighbour distance is zero (all points coincide)");
        warn(std::to_string(zeros) + " zero self-tuning scales replaced by " + format_double(smallest));
        for (Eigen::Index i = 0; i < n; ++i)
            if (tau(i) == 0.0)
                tau(i) = smallest;
    }
    return tau;
}

SimilarityGraph self_tuning_graph(const Matrix& dist, int K)
{
    const Vector tau = self_tuning_scales(dist, K);
    const Eigen::Index n = dist.rows();
    Matrix w(n, n);
#pragma omp parallel for schedule(static)
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i)
            w(i, j) = std::exp(-dist(i, j) * dist(i, j) / (2.0 * tau(i) * tau(j)));
    // exp is evaluated on identical arguments, but keep symmetry exact regardless
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < j; ++i)
            w(j, i) = w(i, j);

    GraphRecipe recipe;
    recipe.kind = GraphKind::self_tuning;
    recipe.K = K;
    return SimilarityGraph(std::move(w), recipe);
}

SimilarityGraph knn_restrict(const SimilarityGraph& g, const Matrix& dist, int K, KnnRule rule)
{
    const Eigen::Index n = g.n();
    if (dist.rows() != n || dist.cols() != n)
        throw Error(ErrorCode::shape_mismatch, "distance matrix does not match the graph");
    const auto nn = knn_indices(dist, K);
    std::vector<std::vector<char>> is_nb(n, std::vector<char>(n, 0));
    for (Eigen::Index i = 0; i < n; ++i)
        for (int j : nn[i])
            is_nb[i][j] = 1;

    std::vector<Edge> edges;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const bool keep = rule == KnnRule::union_rule ? (is_nb[i][j] || is_nb[j][i])
                                                          : (is_nb[i][j] && is_nb[j][i]);
            if (!keep)
                continue;
            const double w = g.weight(i, j);
            if (w > 0.0)
                edges.push_back({static_cast<int>(i), static_cast<int>(j), w});
        }
    }
    GraphRecipe recipe = g.recipe();
    if (recipe.kind == GraphKind::self_tuning)
        recipe.kind = GraphKind::knn_self_tuning;
    recipe.K = K;
    recipe.rule = rule;
    return SimilarityGraph(n, std::move(edges), recipe);
}

SimilarityGraph build_graph(const Matrix& dist, const GraphRecipe& recipe)
{
    switch (recipe.kind) {
    case GraphKind::epsilon:
        return epsilon_graph(dist, recipe.eps, recipe.m, recipe.vol);
    case GraphKind::self_tuning:
        return self_tuning_graph(dist, recipe.K);
    case GraphKind::knn_self_tuning:
        return knn_restrict(self_tuning_graph(dist, recipe.K), dist, recipe.K, recipe.rule);
    }
    throw Error(ErrorCode::unsupported_mode, "unknown graph kind");
}

// -- Laplacians ------------------------------------------------------------------

Eigen::Index SymmetricOperator::n() const
{
    return is_dense() ? dense().rows() : sparse().rows();
}

Vector SymmetricOperator::apply(const Vector& v) const
{
    if (is_dense())
        return dense() * v;
    return sparse() * v;
}

Matrix SymmetricOperator::to_dense() const
{
    if (is_dense())
        return dense();
    return Matrix(sparse());
}

double SymmetricOperator::norm_bound() const
{
    if (is_dense())
        return dense().cwiseAbs().rowwise().sum().maxCoeff();
    const SparseMatrix& s = sparse();
    Vector rows = Vector::Zero(s.rows());
    for (Eigen::Index k = 0; k < s.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(s, k); it; ++it)
            rows(it.row()) += std::abs(it.value());
    return rows.size() ? rows.maxCoeff() : 0.0;
}

SymmetricOperator laplacian(const SimilarityGraph& g, LaplacianKind kind)
{
    const Eigen::Index n = g.n();
    const Vector deg = g.degrees();
    Vector scale = Vector::Ones(n);
    if (kind == LaplacianKind::symmetric_normalized) {
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!(deg(i) > 0.0))
                throw Error(ErrorCode::isolated_node,
                            "node " + std::to_string(i) + " has zero degree");
            scale(i) = 1.0 / std::sqrt(deg(i));
        }
    }
    const bool normalized = kind == LaplacianKind::symmetric_normalized;

    if (g.is_dense()) {
        Matrix L = -g.dense_weights();
        if (normalized)
            L = scale.asDiagonal() * L * scale.asDiagonal();
        for (Eigen::Index i = 0; i < n; ++i)
            L(i, i) = normalized ? 1.0 : deg(i);
        // rounding in the diagonal scaling must not break symmetry
        L = 0.5 * (L + L.transpose()).eval();
        return {std::move(L)};
    }

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(2 * g.edges().size() + n);
    for (const auto& e : g.edges()) {
        if (e.w == 0.0)
            continue;
        const double v = -e.w * scale(e.i) * scale(e.j);
        trip.emplace_back(e.i, e.j, v);
        trip.emplace_back(e.j, e.i, v);
    }
    for (Eigen::Index i = 0; i < n; ++i)
        trip.emplace_back(i, i, normalized ? 1.0 : deg(i));
    SparseMatrix L(n, n);
    L.setFromTriplets(trip.begin(), trip.end());
    return {std::move(L)};
}

double dirichlet_energy(const Matrix& dist, double eps, int m, double vol, const Vector& u)
{
    if (!(eps > 0.0))
        throw Error(ErrorCode::invalid_argument, "epsilon must be positive");
    const Eigen::Index n = dist.rows();
    if (u.size() != n)
        throw Error(ErrorCode::length_mismatch, "u must have one entry per node");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (dist(i, j) < eps) {
                const double du = u(i) - u(j);
                sum += du * du;
            }
    return (m + 2) * vol / (alpha_m(m) * std::pow(eps, m + 2) * static_cast<double>(n)) * sum;
}

}  // namespace locreg

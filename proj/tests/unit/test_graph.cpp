#include "locreg/bounds.hpp"
#include "locreg/error.hpp"
#include "locreg/graph.hpp"
#include "locreg/log.hpp"
#include "support.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <sstream>

using namespace locreg;
using testing_support::line_cloud;
using testing_support::random_cloud;

namespace {

Matrix two_point_dist(double delta)
{
    Matrix d(2, 2);
    d << 0.0, delta, delta, 0.0;
    return d;
}

Vector dense_eigenvalues(const SymmetricOperator& L)
{
    return Eigen::SelfAdjointEigenSolver<Matrix>(L.to_dense(), Eigen::EigenvaluesOnly).eigenvalues();
}

}  // namespace

TEST_CASE("epsilon_graph: closed-form weights")
{
    Matrix dist = Matrix::Constant(1000, 1000, 0.7);
    dist.diagonal().setZero();
    dist(3, 4) = dist(4, 3) = 0.2;
    const SimilarityGraph g = epsilon_graph(dist, 0.5, 2, 1.0);
    CHECK(g.weight(3, 4) == doctest::Approx(0.040744).epsilon(1e-5));
    CHECK(g.weight(3, 4) == doctest::Approx(8.0 / (alpha_m(2) * 0.0625 * 1000.0)).epsilon(1e-14));
    CHECK(g.weight(0, 1) == 0.0);
    CHECK(g.edge_count() == 1);

    CHECK(epsilon_graph(two_point_dist(0.5), 1.0, 1).weight(0, 1) == doctest::Approx(1.5).epsilon(1e-14));
}

TEST_CASE("epsilon_graph: threshold is strict and empty graphs warn")
{
    ScopedWarningCapture capture;
    const SimilarityGraph g = epsilon_graph(two_point_dist(1.0), 1.0, 1);
    CHECK(g.edge_count() == 0);
    CHECK(capture.messages().size() == 1);
}

TEST_CASE("self_tuning_scales and weights on {0, 1, 3}")
{
    const Matrix dist = pairwise_distances(line_cloud({0.0, 1.0, 3.0}).points);
    const Vector tau = self_tuning_scales(dist, 1);
    CHECK(tau(0) == 1.0);
    CHECK(tau(1) == 1.0);
    CHECK(tau(2) == 2.0);
    const SimilarityGraph g = self_tuning_graph(dist, 1);
    CHECK(g.weight(0, 2) == doctest::Approx(std::exp(-2.25)).epsilon(1e-14));
    CHECK(g.dense_weights()(1, 1) == 1.0);
}

TEST_CASE("self_tuning_graph: scale invariance")
{
    const Matrix dist = pairwise_distances(random_cloud(25, 3, 4).points);
    const SimilarityGraph a = self_tuning_graph(dist, 4);
    const SimilarityGraph b = self_tuning_graph(3.7 * dist, 4);
    CHECK((self_tuning_scales(3.7 * dist, 4) - 3.7 * self_tuning_scales(dist, 4)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a.to_dense() - b.to_dense()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("self_tuning_scales: duplicate points get the smallest positive scale")
{
    const Matrix dist = pairwise_distances(line_cloud({0.0, 0.0, 1.0, 3.0}).points);
    ScopedWarningCapture capture;
    const Vector tau = self_tuning_scales(dist, 1);
    CHECK(tau(0) == 1.0);
    CHECK(tau(1) == 1.0);
    CHECK(capture.messages().size() == 1);

    const Matrix same = pairwise_distances(line_cloud({2.0, 2.0, 2.0}).points);
    try {
        self_tuning_scales(same, 1);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::degenerate_scale);
    }
}

TEST_CASE("knn_restrict: union and mutual rules on {0, 1, 3}")
{
    const Matrix dist = pairwise_distances(line_cloud({0.0, 1.0, 3.0}).points);
    const SimilarityGraph full = self_tuning_graph(dist, 1);
    const SimilarityGraph u = knn_restrict(full, dist, 1, KnnRule::union_rule);
    CHECK(u.weight(0, 1) > 0.0);
    CHECK(u.weight(1, 2) > 0.0);
    CHECK(u.weight(0, 2) == 0.0);
    const SimilarityGraph m = knn_restrict(full, dist, 1, KnnRule::mutual_rule);
    CHECK(m.weight(0, 1) > 0.0);
    CHECK(m.weight(1, 2) == 0.0);
    CHECK(m.weight(0, 2) == 0.0);

    const Matrix d5 = pairwise_distances(random_cloud(6, 2, 3).points);
    const SimilarityGraph g5 = self_tuning_graph(d5, 2);
    CHECK((knn_restrict(g5, d5, 5).to_dense() - g5.to_dense()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("knn_restrict: union rule gives degree at least K")
{
    const Matrix dist = pairwise_distances(random_cloud(50, 3, 9).points);
    const SimilarityGraph g = knn_restrict(self_tuning_graph(dist, 5), dist, 5);
    const Matrix W = g.to_dense();
    for (Eigen::Index i = 0; i < 50; ++i)
        CHECK((W.row(i).array() > 0.0).count() >= 5);
}

TEST_CASE("laplacian: two-node closed form")
{
    const SimilarityGraph g(Matrix((Matrix(2, 2) << 1.0, 0.3, 0.3, 1.0).finished()), GraphRecipe{});
    const Matrix L = laplacian(g).to_dense();
    CHECK(L(0, 0) == doctest::Approx(0.3));
    CHECK(L(0, 1) == doctest::Approx(-0.3));
    const Vector ev = dense_eigenvalues(laplacian(g));
    CHECK(std::abs(ev(0)) < 1e-15);
    CHECK(ev(1) == doctest::Approx(0.6));
}

TEST_CASE("laplacian: normalized kind rejects isolated nodes")
{
    const SimilarityGraph g(3, {Edge{0, 1, 1.0}}, GraphRecipe{});
    CHECK_NOTHROW(laplacian(g, LaplacianKind::unnormalized));
    try {
        laplacian(g, LaplacianKind::symmetric_normalized);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::isolated_node);
    }
}

TEST_CASE("graph properties: symmetry, PSD, null vector, normalized spectrum in [0, 2]")
{
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        const Matrix dist = pairwise_distances(random_cloud(40, 3, seed).points);
        std::vector<SimilarityGraph> graphs;
        graphs.push_back(epsilon_graph(dist, 1.0, 2, 2.0));
        graphs.push_back(self_tuning_graph(dist, 5));
        graphs.push_back(knn_restrict(self_tuning_graph(dist, 5), dist, 5, KnnRule::mutual_rule));
        graphs.push_back(knn_restrict(self_tuning_graph(dist, 5), dist, 5, KnnRule::union_rule));
        for (const auto& g : graphs) {
            const Matrix W = g.to_dense();
            CHECK(W == W.transpose());
            CHECK(W.minCoeff() >= 0.0);
            const SymmetricOperator L = laplacian(g);
            CHECK(dense_eigenvalues(L).minCoeff() >= -1e-8);
            CHECK(L.apply(Vector::Ones(40)).cwiseAbs().maxCoeff() < 1e-10);
            if (g.degrees().minCoeff() > 0.0) {
                const Vector ev = dense_eigenvalues(laplacian(g, LaplacianKind::symmetric_normalized));
                CHECK(ev.minCoeff() >= -1e-10);
                CHECK(ev.maxCoeff() <= 2.0 + 1e-10);
            }
        }
    }
}

TEST_CASE("dirichlet_energy: hand values and invariances")
{
    Vector u(2);
    u << 1.0, 0.0;
    CHECK(dirichlet_energy(two_point_dist(0.5), 1.0, 1, 1.0, u) == doctest::Approx(1.5).epsilon(1e-14));

    const Matrix dist = pairwise_distances(random_cloud(20, 2, 2).points);
    CHECK(dirichlet_energy(dist, 0.8, 2, 1.0, Vector::Constant(20, 3.0)) == 0.0);
    const Vector v = Vector::LinSpaced(20, -1.0, 2.0);
    CHECK(dirichlet_energy(dist, 0.8, 2, 1.0, v) ==
          doctest::Approx(dirichlet_energy(dist, 0.8, 2, 1.0, (v.array() + 5.0).matrix())).epsilon(1e-12));
}

TEST_CASE("dirichlet_energy agrees with the quadratic form of D − W")
{
    std::mt19937_64 rng(77);
    std::normal_distribution<double> g;
    for (int inst = 0; inst < 5; ++inst) {
        const Matrix dist = pairwise_distances(random_cloud(30, 3, 100 + inst).points);
        const double eps = 0.9, vol = 4.0;
        const SymmetricOperator L = laplacian(epsilon_graph(dist, eps, 2, vol));
        for (int t = 0; t < 20; ++t) {
            Vector u(30);
            for (auto& x : u)
                x = g(rng);
            const double E = dirichlet_energy(dist, eps, 2, vol, u);
            CHECK(std::abs(E - u.dot(L.apply(u))) <= 1e-10 * (1.0 + std::abs(E)));
        }
    }
}

TEST_CASE("scaled quotient equals n times the matrix eigenvalue")
{
    // Courant–Fischer with the 1/n-weighted norm: for an eigenvector v of D−W,
    // E[v] / ((1/n)Σv²) = n·λ.
    const Matrix dist = pairwise_distances(random_cloud(25, 2, 31).points);
    const SymmetricOperator L = laplacian(epsilon_graph(dist, 1.2, 2));
    Eigen::SelfAdjointEigenSolver<Matrix> es(L.to_dense());
    for (int l = 1; l < 6; ++l) {
        const Vector v = es.eigenvectors().col(l);
        const double quotient = dirichlet_energy(dist, 1.2, 2, 1.0, v) / (v.squaredNorm() / 25.0);
        CHECK(quotient == doctest::Approx(25.0 * es.eigenvalues()(l)).epsilon(1e-8));
    }
}

TEST_CASE("edge list output and recipe dispatch")
{
    const Matrix dist = pairwise_distances(line_cloud({0.0, 1.0, 3.0}).points);
    GraphRecipe r;
    r.kind = GraphKind::knn_self_tuning;
    r.K = 1;
    r.rule = KnnRule::mutual_rule;
    const SimilarityGraph g = build_graph(dist, r);
    CHECK(g.edge_count() == 1);
    std::ostringstream out;
    g.write_edge_list(out);
    CHECK(out.str().rfind("3 1 ", 0) == 0);
    CHECK(parse_knn_rule(to_string(KnnRule::mutual_rule)) == KnnRule::mutual_rule);
    CHECK_THROWS_AS(knn_indices(dist, 3), Error);
}

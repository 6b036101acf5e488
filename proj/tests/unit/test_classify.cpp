#include "locreg/classify.hpp"
#include "locreg/error.hpp"
#include "locreg/log.hpp"
#include "support.hpp"

#include <doctest.h>

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

using namespace locreg;
using testing_support::random_cloud;

namespace {

struct Oracle {
    double x;
    double log_cdf;
    double hazard;
};

// mpmath at 40 digits
const Oracle kOracle[] = {
    {-50.0, -1254.8313611394199013, 50.019984031905639809},
    {-30.0, -454.32124395634319711, 0.0},
    {-20.0, -203.91715537109726394, 0.0},
    {-12.0, -75.410673001568795939, 12.08221417525428433},
    {-10.0, -53.231285150512470578, 0.0},
    {-8.5, -39.197396428217669289, 8.6145953201651728741},
    {-8.0, -35.013437159914549896, 8.1213681122361126807},
    {-7.9, -34.206228170981715976, 8.0228172462087806185},
    {-3.0, -6.6077262215103495433, 3.2830986549304365069},
    {-0.5, -1.1759117615936186089, 1.1410777703680644809},
    {1.0, -0.17275377902344988953, 0.28759997093917836123},
    {5.0, -2.8665161296376359338e-7, 1.4867199409049057124e-6},
    {9.0, -1.1285884059538406478e-19, 1.0279773571668914796e-18},
};

SimilarityGraph path4()
{
    return SimilarityGraph(4, {Edge{0, 1, 1.0}, Edge{1, 2, 1.0}, Edge{2, 3, 1.0}}, GraphRecipe{});
}

// Two moons with all pairwise self-tuning weights; small enough for fast fits.
struct MoonsFixture {
    PointCloud Y;
    std::vector<int> truth;
    SimilarityGraph graph{Matrix::Zero(1, 1), GraphRecipe{}};
};

MoonsFixture moons(int n, double sigma, std::uint64_t seed)
{
    const LabeledCloud lc = sample_two_moons(n, 10, seed);
    MoonsFixture f;
    f.Y = add_noise(lc.cloud, {sigma, NoiseMode::ambient_cube}, seed + 1);
    f.truth = lc.labels;
    f.graph = self_tuning_graph(pairwise_distances(f.Y.points), 10);
    return f;
}

ProbitProblem random_problem(std::uint64_t seed, int n = 25, int labels = 6)
{
    const Matrix dist = pairwise_distances(random_cloud(n, 3, seed).points);
    std::vector<int> truth(n);
    std::mt19937_64 rng(seed);
    for (auto& t : truth)
        t = (rng() & 1) ? 1 : -1;
    truth[0] = 1;
    truth[1] = -1;
    return make_probit_problem(probit_basis(self_tuning_graph(dist, 5)), reveal_labels(truth, labels, seed, false));
}

Vector random_vector(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0)
{
    std::normal_distribution<double> g(0.0, scale);
    Vector v(n);
    for (auto& x : v)
        x = g(rng);
    return v;
}

}  // namespace

TEST_CASE("log_std_normal_cdf: high-precision oracle")
{
    for (const auto& o : kOracle) {
        CAPTURE(o.x);
        CHECK(std::abs(log_std_normal_cdf(o.x) - o.log_cdf) <= 1e-12 * std::abs(o.log_cdf));
        if (o.hazard != 0.0)
            CHECK(std::abs(normal_hazard(o.x) - o.hazard) <= 1e-12 * o.hazard);
    }
    CHECK(log_std_normal_cdf(0.0) == doctest::Approx(std::log(0.5)).epsilon(1e-15));
    CHECK(log_normal_cdf(-1.0, 0.1) == log_std_normal_cdf(-10.0));
    CHECK_THROWS_AS(log_normal_cdf(1.0, 0.0), Error);
}

TEST_CASE("log_std_normal_cdf: tends to 0 from below and is increasing")
{
    CHECK(log_std_normal_cdf(40.0) <= 0.0);
    CHECK(log_std_normal_cdf(40.0) > -1e-300);
    double prev = log_std_normal_cdf(-1e100);
    CHECK(std::isfinite(prev));
    for (double x = -1e4; x <= 8.0; x += 0.01) {
        const double v = log_std_normal_cdf(x);
        CHECK(std::isfinite(v));
        if (!(v > prev)) {
            CAPTURE(x);
            CHECK(v > prev);
        }
        prev = v;
    }
}

TEST_CASE("normal_hazard is the derivative of log Φ")
{
    for (double x : {-40.0, -9.0, -8.001, -7.999, -2.0, 0.0, 1.5, 4.0}) {
        const double h = 1e-5 * std::max(1.0, std::abs(x));
        const double fd = (log_std_normal_cdf(x + h) - log_std_normal_cdf(x - h)) / (2.0 * h);
        CHECK(normal_hazard(x) == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("probit_basis: path graph spectrum and pinned null vector")
{
    const ProbitBasis b = probit_basis(path4());
    CHECK(b.lambda(0) == 0.0);
    CHECK(b.lambda(1) == doctest::Approx(0.5).epsilon(1e-13));
    CHECK(b.lambda(2) == doctest::Approx(1.5).epsilon(1e-13));
    CHECK(b.lambda(3) == doctest::Approx(2.0).epsilon(1e-13));
    Vector q1(4);
    q1 << 1.0, std::sqrt(2.0), std::sqrt(2.0), 1.0;
    CHECK((b.q.col(0) - q1.normalized()).norm() < 1e-15);
    CHECK((b.q.transpose() * b.q - Matrix::Identity(4, 4)).norm() < 1e-12);
}

TEST_CASE("probit_basis: disconnected graphs warn or throw")
{
    const SimilarityGraph g(4, {Edge{0, 1, 1.0}, Edge{2, 3, 1.0}}, GraphRecipe{});
    {
        ScopedWarningCapture capture;
        CHECK_NOTHROW(probit_basis(g));
        CHECK(capture.messages().size() == 1);
    }
    try {
        probit_basis(g, true);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::disconnected_graph);
    }
}

TEST_CASE("probit_objective: path graph against an arbitrary-precision evaluation")
{
    const ProbitProblem p = make_probit_problem(probit_basis(path4()), LabelSet{{0, 1}, {1, -1}}, 0.1);
    CHECK(p.c == doctest::Approx(1.2631578947368421053).epsilon(1e-14));
    Vector u(4);
    u << 0.3, 0.2, -0.2, -0.3;
    CHECK(probit_objective(p, u) == doctest::Approx(3.8361099994340581278).epsilon(1e-12));
}

TEST_CASE("probit_objective: J(0) = J log 2 and the no-label case")
{
    for (int labels : {1, 4, 9}) {
        const ProbitProblem p = random_problem(3, 25, labels);
        CHECK(probit_objective(p, Vector::Zero(25)) == doctest::Approx(labels * std::log(2.0)).epsilon(1e-14));
    }
    const ProbitProblem empty = make_probit_problem(probit_basis(path4()), LabelSet{}, 0.1);
    const ClassifierResult r = fit_probit(empty);
    CHECK(r.u.cwiseAbs().maxCoeff() == 0.0);
    for (int s : r.predictions)
        CHECK(s == 1);
}

TEST_CASE("make_probit_problem: label validation")
{
    const ProbitBasis b = probit_basis(path4());
    CHECK_THROWS_AS(make_probit_problem(b, LabelSet{{0, 0}, {1, 1}}), Error);
    CHECK_THROWS_AS(make_probit_problem(b, LabelSet{{7}, {1}}), Error);
    CHECK_THROWS_AS(make_probit_problem(b, LabelSet{{1}, {0}}), Error);
    CHECK_THROWS_AS(make_probit_problem(b, LabelSet{{1}, {1}}, -0.1), Error);
}

TEST_CASE("probit gradient matches central differences")
{
    std::mt19937_64 rng(12);
    for (int inst = 0; inst < 20; ++inst) {
        const ProbitProblem p = random_problem(100 + inst);
        const Vector a = random_vector(24, rng, 0.3);
        const Vector g = probit_gradient_coeffs(p, a);
        for (Eigen::Index i = 0; i < a.size(); ++i) {
            Vector ap = a, am = a;
            ap(i) += 1e-5;
            am(i) -= 1e-5;
            const double fd = (probit_objective_coeffs(p, ap) - probit_objective_coeffs(p, am)) / 2e-5;
            CHECK(std::abs(fd - g(i)) <= 1e-4 * std::max(1.0, std::abs(g(i))));
        }
    }
}

TEST_CASE("probit objective is midpoint convex")
{
    std::mt19937_64 rng(13);
    const ProbitProblem p = random_problem(14);
    for (int t = 0; t < 200; ++t) {
        const Vector u = random_vector(25, rng), v = random_vector(25, rng);
        const double mid = probit_objective(p, 0.5 * (u + v));
        CHECK(mid <= 0.5 * probit_objective(p, u) + 0.5 * probit_objective(p, v) + 1e-12);
    }
}

TEST_CASE("fit_probit: converges and matches a projected Newton solve in u")
{
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const ProbitProblem p = random_problem(200 + seed, 30, 8);
        const ClassifierResult res = fit_probit(p);
        CHECK(res.grad_norm <= 1e-8);
        const Vector q1 = p.basis.q.col(0);
        CHECK(std::abs(q1.dot(res.u)) < 1e-10);

        // independent solve: Newton on u with the q1 direction projected out
        const Matrix Delta = p.basis.q * p.basis.lambda.asDiagonal() * p.basis.q.transpose();
        const Matrix P = Matrix::Identity(30, 30) - q1 * q1.transpose();
        Vector u = Vector::Zero(30);
        for (int it = 0; it < 100; ++it) {
            Vector grad = Delta * u / p.c;
            Matrix H = Delta / p.c;
            for (std::size_t j = 0; j < p.labels.size(); ++j) {
                const int i = p.labels.index[j];
                const double y = p.labels.sign[j];
                const double x = y * u(i) / p.gamma;
                const double r = normal_hazard(x);
                grad(i) -= y / p.gamma * r;
                H(i, i) += r * (x + r) / (p.gamma * p.gamma);
            }
            grad = P * grad;
            if (grad.norm() < 1e-12)
                break;
            const Matrix Hp = P * H * P + q1 * q1.transpose();
            u -= P * Hp.ldlt().solve(grad);
        }
        CHECK(std::abs(probit_objective(p, u) - probit_objective(p, res.u)) <= 1e-9);
    }
}

TEST_CASE("fit_probit: predictions are signs of u with sign(0) = +1")
{
    const ProbitProblem p = random_problem(9, 30, 10);
    const ClassifierResult res = fit_probit(p);
    for (Eigen::Index i = 0; i < res.u.size(); ++i)
        CHECK(res.predictions[i] == (res.u(i) >= 0.0 ? 1 : -1));
}

TEST_CASE("fit_probit: all labels revealed on clean moons are reproduced")
{
    const MoonsFixture f = moons(200, 0.0, 5);
    LabelSet all;
    for (int i = 0; i < 200; ++i) {
        all.index.push_back(i);
        all.sign.push_back(f.truth[i]);
    }
    const ClassifierResult res = fit_probit(make_probit_problem(probit_basis(f.graph), all, 0.1), {}, &f.truth);
    CHECK(res.predictions == f.truth);
    CHECK(res.error_unlabeled == 0);
}

TEST_CASE("reveal_labels: stratified and uniform draws")
{
    std::vector<int> truth(100, 1);
    std::fill(truth.begin() + 80, truth.end(), -1);
    const LabelSet s = reveal_labels(truth, 10, 4, true);
    CHECK(s.size() == 10);
    CHECK(std::count(s.sign.begin(), s.sign.end(), 1) == 8);
    CHECK(std::set<int>(s.index.begin(), s.index.end()).size() == 10);
    for (std::size_t j = 0; j < s.size(); ++j)
        CHECK(truth[s.index[j]] == s.sign[j]);

    const LabelSet tiny = reveal_labels(truth, 2, 4, true);
    CHECK(std::count(tiny.sign.begin(), tiny.sign.end(), -1) == 1);

    const LabelSet u = reveal_labels(truth, 30, 4, false);
    CHECK(u.size() == 30);
    CHECK(std::set<int>(u.index.begin(), u.index.end()).size() == 30);
    CHECK(reveal_labels(truth, 30, 4).index == u.index);
    CHECK(reveal_labels(truth, 10, 4, true).index == s.index);
    CHECK_THROWS_AS(reveal_labels(truth, 101, 1), Error);
}

TEST_CASE("count_unlabeled_errors skips revealed points")
{
    const std::vector<int> truth{1, 1, -1, -1};
    const std::vector<int> pred{-1, 1, 1, -1};
    CHECK(count_unlabeled_errors(pred, truth, LabelSet{{0}, {1}}) == 1);
    CHECK(count_unlabeled_errors(pred, truth, LabelSet{}) == 2);
}

TEST_CASE("cross_validate: single grid value and label requirements")
{
    const MoonsFixture f = moons(160, 0.3, 21);
    GraphRecipe recipe;
    recipe.kind = GraphKind::self_tuning;
    recipe.K = 10;
    const LabelSet labels = reveal_labels(f.truth, 12, 22, true);
    const CvResult one = cross_validate(f.Y, labels, {RegularizerSpec::ball(0.3)}, recipe, 2, 23);
    CHECK(one.best.kind == RegularizerKind::ball);
    CHECK(one.best.value == 0.3);
    CHECK(one.table.size() == 1);
    CHECK(one.table[0].repeat_errors.size() == 2);

    try {
        cross_validate(f.Y, LabelSet{}, {RegularizerSpec::identity()}, recipe, 2, 1);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::insufficient_labels);
    }
}

TEST_CASE("cross_validate: the clean oracle beats the raw cloud")
{
    const MoonsFixture f = moons(200, 0.9, 31);
    GraphRecipe recipe;
    recipe.kind = GraphKind::self_tuning;
    recipe.K = 10;
    const LabelSet labels = reveal_labels(f.truth, 20, 32, true);
    const CvResult cv =
        cross_validate(f.Y, labels, {RegularizerSpec::identity(), RegularizerSpec::clean_oracle()}, recipe, 3, 33);
    CHECK(cv.best.kind == RegularizerKind::clean_oracle);
    CHECK(cv.table[1].mean_error < cv.table[0].mean_error);
}

TEST_CASE("cross_validate: selected value attains the table minimum")
{
    const MoonsFixture f = moons(200, 0.5, 41);
    GraphRecipe recipe;
    recipe.kind = GraphKind::self_tuning;
    recipe.K = 10;
    const LabelSet labels = reveal_labels(f.truth, 16, 42, true);
    std::vector<RegularizerSpec> grid;
    for (int k = 1; k <= 20; k += 3)
        grid.push_back(RegularizerSpec::ball(0.1 * k * 0.5));
    const CvResult cv = cross_validate(f.Y, labels, grid, recipe, 3, 43);
    double best = 1e300;
    for (const auto& row : cv.table) {
        double sum = 0.0;
        for (int e : row.repeat_errors)
            sum += e;
        CHECK(row.mean_error == doctest::Approx(sum / 3.0));
        best = std::min(best, row.mean_error);
    }
    for (const auto& row : cv.table)
        if (row.spec.value == cv.best.value)
            CHECK(row.mean_error == best);
    for (const auto& row : cv.table)
        if (row.mean_error == best)
            CHECK(cv.best.value <= row.spec.value);
}

#include "locreg/classify.hpp"

#include "locreg/error.hpp"
#include "locreg/log.hpp"
#include "locreg/textio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

namespace locreg {

namespace {

// Mills ratio Q(z)/φ(z) for z >= 8 by backward evaluation of its continued
// fraction 1/(z + 1/(z + 2/(z + 3/(z + ...)))).
double mills_ratio(double z)
{
    double tail = z;
    for (int k = 80; k >= 1; --k)
        tail = z + k / tail;
    return 1.0 / tail;
}

constexpr double kSwitch = -8.0;

}  // namespace

double log_std_normal_cdf(double x)
{
    if (x >= kSwitch) {
        if (x > 0.0)
            return std::log1p(-0.5 * std::erfc(x / std::numbers::sqrt2));
        return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
    }
    return -0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(mills_ratio(-x));
}

double normal_hazard(double x)
{
    if (x >= kSwitch) {
        const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
        return pdf / (0.5 * std::erfc(-x / std::numbers::sqrt2));
    }
    return 1.0 / mills_ratio(-x);
}

double log_normal_cdf(double t, double gamma)
{
    if (!(gamma > 0.0))
        throw Error(ErrorCode::invalid_argument, "gamma must be positive");
    return log_std_normal_cdf(t / gamma);
}

ProbitBasis probit_basis(const SimilarityGraph& g, bool strict)
{
    const Eigen::Index n = g.n();
    const SymmetricOperator L = laplacian(g, LaplacianKind::symmetric_normalized);
    const Vector q1 = g.degrees().cwiseSqrt().normalized();
    Matrix lifted = L.to_dense();
    lifted.noalias() += 3.0 * q1 * q1.transpose();

    EigenOptions opts;
    opts.method = EigenMethod::dense;
    Spectrum full = smallest_eigs(SymmetricOperator{std::move(lifted)}, static_cast<int>(n), opts);

    ProbitBasis basis;
    basis.lambda.resize(n);
    basis.q.resize(n, n);
    basis.lambda(0) = 0.0;
    basis.q.col(0) = q1;
    // the lifted null direction sits on top at eigenvalue 3
    basis.q.rightCols(n - 1) = full.vectors->leftCols(n - 1);
    basis.lambda.tail(n - 1) = full.values.head(n - 1);
    basis.lambda2_raw = n > 1 ? full.values(0) : 0.0;
    if (n > 1 && basis.lambda2_raw < 1e-10) {
        if (strict)
            throw Error(ErrorCode::disconnected_graph,
                        "second eigenvalue " + format_double(basis.lambda2_raw) + " is numerically zero");
        warn("graph is numerically disconnected (lambda_2 = " + format_double(basis.lambda2_raw) + ")");
    }
    for (Eigen::Index i = 1; i < n; ++i)
        basis.lambda(i) = std::max(basis.lambda(i), 1e-12);
    return basis;
}

ProbitProblem make_probit_problem(ProbitBasis basis, LabelSet labels, double gamma)
{
    if (!(gamma > 0.0))
        throw Error(ErrorCode::invalid_argument, "gamma must be positive");
    const Eigen::Index n = basis.q.rows();
    if (labels.index.size() != labels.sign.size())
        throw Error(ErrorCode::length_mismatch, "label indices and signs differ in length");
    std::vector<char> seen(n, 0);
    for (std::size_t j = 0; j < labels.size(); ++j) {
        const int i = labels.index[j];
        if (i < 0 || i >= n)
            throw Error(ErrorCode::invalid_argument, "label index out of range");
        if (seen[i])
            throw Error(ErrorCode::invalid_argument, "duplicate label index " + std::to_string(i));
        seen[i] = 1;
        if (labels.sign[j] != 1 && labels.sign[j] != -1)
            throw Error(ErrorCode::invalid_argument, "labels must be +1 or -1");
    }
    ProbitProblem p;
    p.gamma = gamma;
    double inv = 0.0;
    for (Eigen::Index i = 1; i < n; ++i)
        inv += 1.0 / basis.lambda(i);
    p.c = n > 1 ? static_cast<double>(n) / inv : 1.0;
    p.basis = std::move(basis);
    p.labels = std::move(labels);
    return p;
}

namespace {

double likelihood_term(const ProbitProblem& p, const Vector& u_at_labels)
{
    double sum = 0.0;
    for (std::size_t j = 0; j < p.labels.size(); ++j)
        sum -= log_std_normal_cdf(p.labels.sign[j] * u_at_labels(static_cast<Eigen::Index>(j)) / p.gamma);
    return sum;
}

// Rows of q_2..q_n at the labelled nodes.
Matrix labelled_rows(const ProbitProblem& p)
{
    const Eigen::Index n1 = p.n() - 1;
    Matrix B(static_cast<Eigen::Index>(p.labels.size()), n1);
    for (std::size_t j = 0; j < p.labels.size(); ++j)
        B.row(static_cast<Eigen::Index>(j)) = p.basis.q.row(p.labels.index[j]).tail(n1);
    return B;
}

}  // namespace

double probit_objective(const ProbitProblem& p, const Vector& u)
{
    if (u.size() != p.n())
        throw Error(ErrorCode::length_mismatch, "u must have one entry per node");
    const Vector coeff = p.basis.q.transpose() * u;
    const double quad = coeff.cwiseAbs2().dot(p.basis.lambda);
    Vector ul(static_cast<Eigen::Index>(p.labels.size()));
    for (std::size_t j = 0; j < p.labels.size(); ++j)
        ul(static_cast<Eigen::Index>(j)) = u(p.labels.index[j]);
    return quad / (2.0 * p.c) + likelihood_term(p, ul);
}

double probit_objective_coeffs(const ProbitProblem& p, const Vector& a)
{
    const Eigen::Index n1 = p.n() - 1;
    const double quad = a.cwiseAbs2().dot(p.basis.lambda.tail(n1));
    return quad / (2.0 * p.c) + likelihood_term(p, labelled_rows(p) * a);
}

Vector probit_gradient_coeffs(const ProbitProblem& p, const Vector& a)
{
    const Eigen::Index n1 = p.n() - 1;
    const Matrix B = labelled_rows(p);
    const Vector ul = B * a;
    Vector gu(ul.size());
    for (Eigen::Index j = 0; j < ul.size(); ++j) {
        const double y = p.labels.sign[j];
        gu(j) = -(y / p.gamma) * normal_hazard(y * ul(j) / p.gamma);
    }
    return p.basis.lambda.tail(n1).cwiseProduct(a) / p.c + B.transpose() * gu;
}

ClassifierResult fit_probit(const ProbitProblem& p, const ProbitOptions& opts, const std::vector<int>* truth)
{
    const Eigen::Index n = p.n();
    const Eigen::Index n1 = n - 1;
    const auto J = static_cast<Eigen::Index>(p.labels.size());
    const Vector dg = p.basis.lambda.tail(n1) / p.c;
    const Matrix B = labelled_rows(p);
    const Matrix BDinv = B * dg.cwiseInverse().asDiagonal();  // J×n1
    const Matrix BDinvBt = BDinv * B.transpose();             // J×J

    auto objective = [&](const Vector& a) {
        return 0.5 * a.cwiseAbs2().dot(dg) + likelihood_term(p, B * a);
    };

    ClassifierResult res;
    Vector a = Vector::Zero(n1);
    double value = objective(a);
    for (res.iterations = 0;; ++res.iterations) {
        const Vector ul = B * a;
        Vector gu(J), h(J);
        for (Eigen::Index j = 0; j < J; ++j) {
            const double y = p.labels.sign[j];
            const double x = y * ul(j) / p.gamma;
            const double ratio = normal_hazard(x);
            gu(j) = -(y / p.gamma) * ratio;
            h(j) = std::max(0.0, ratio * (x + ratio)) / (p.gamma * p.gamma);
        }
        const Vector grad = dg.cwiseProduct(a) + B.transpose() * gu;
        res.grad_norm = grad.norm();
        if (res.grad_norm <= opts.grad_tol)
            break;
        if (res.iterations >= opts.max_iter)
            throw Error(ErrorCode::no_convergence,
                        "probit fit stopped at gradient norm " + format_double(res.grad_norm));

        // Woodbury: (D + Bᵀ S B)^{-1} g with S = diag(h)
        const Vector s = h.cwiseSqrt();
        const Vector t = grad.cwiseQuotient(dg);
        Matrix inner = s.asDiagonal() * BDinvBt * s.asDiagonal();
        inner.diagonal().array() += 1.0;
        const Vector w = inner.llt().solve(s.cwiseProduct(B * t));
        const Vector step = t - BDinv.transpose() * s.cwiseProduct(w);

        const double slope = grad.dot(step);
        double alpha = 1.0;
        bool moved = false;
        for (int k = 0; k < 60; ++k, alpha *= 0.5) {
            const Vector trial = a - alpha * step;
            const double v = objective(trial);
            if (v <= value - 1e-4 * alpha * slope) {
                a = trial;
                value = v;
                moved = true;
                break;
            }
        }
        if (!moved) {
            if (res.grad_norm <= 1e3 * opts.grad_tol)
                break;  // rounding floor reached just above the target
            throw Error(ErrorCode::no_convergence,
                        "line search failed at gradient norm " + format_double(res.grad_norm));
        }
    }

    res.u = p.basis.q.rightCols(n1) * a;
    res.predictions.resize(n);
    for (Eigen::Index i = 0; i < n; ++i)
        res.predictions[i] = res.u(i) >= 0.0 ? 1 : -1;
    if (truth)
        res.error_unlabeled = count_unlabeled_errors(res.predictions, *truth, p.labels);
    return res;
}

int count_unlabeled_errors(const std::vector<int>& predictions, const std::vector<int>& truth,
                           const LabelSet& labels)
{
    if (predictions.size() != truth.size())
        throw Error(ErrorCode::length_mismatch, "predictions and truth differ in length");
    std::vector<char> labelled(truth.size(), 0);
    for (int i : labels.index)
        labelled[i] = 1;
    int errors = 0;
    for (std::size_t i = 0; i < truth.size(); ++i)
        errors += !labelled[i] && predictions[i] != truth[i];
    return errors;
}

LabelSet reveal_labels(const std::vector<int>& truth, int count, std::uint64_t seed, bool stratified)
{
    const auto n = static_cast<int>(truth.size());
    if (count < 0 || count > n)
        throw Error(ErrorCode::invalid_argument, "label count out of range");
    std::mt19937_64 rng(seed);
    std::vector<int> chosen;
    if (!stratified) {
        std::vector<int> all(n);
        std::iota(all.begin(), all.end(), 0);
        std::shuffle(all.begin(), all.end(), rng);
        chosen.assign(all.begin(), all.begin() + count);
    } else {
        std::vector<int> pos, neg;
        for (int i = 0; i < n; ++i)
            (truth[i] > 0 ? pos : neg).push_back(i);
        int take_pos = static_cast<int>(std::lround(static_cast<double>(count) * pos.size() / n));
        if (count >= 2)
            take_pos = std::clamp(take_pos, 1, count - 1);
        take_pos = std::min<int>(take_pos, static_cast<int>(pos.size()));
        const int take_neg = std::min<int>(count - take_pos, static_cast<int>(neg.size()));
        std::shuffle(pos.begin(), pos.end(), rng);
        std::shuffle(neg.begin(), neg.end(), rng);
        chosen.assign(pos.begin(), pos.begin() + take_pos);
        chosen.insert(chosen.end(), neg.begin(), neg.begin() + take_neg);
    }
    std::sort(chosen.begin(), chosen.end());
    LabelSet out;
    for (int i : chosen) {
        out.index.push_back(i);
        out.sign.push_back(truth[i]);
    }
    return out;
}

ClassifierResult classify_cloud(const PointCloud& Y, const RegularizerSpec& reg, const GraphRecipe& graph,
                                const LabelSet& labels, const std::vector<int>& truth, double gamma)
{
    const PointCloud Ybar = regularize(Y, reg);
    const Matrix dist = pairwise_distances(Ybar.points);
    ProbitProblem p = make_probit_problem(probit_basis(build_graph(dist, graph)), labels, gamma);
    return fit_probit(p, {}, truth.empty() ? nullptr : &truth);
}

CvResult cross_validate(const PointCloud& Y, const LabelSet& labels, const std::vector<RegularizerSpec>& grid,
                        const GraphRecipe& graph, int repeats, std::uint64_t seed, double gamma)
{
    if (grid.empty())
        throw Error(ErrorCode::invalid_argument, "empty regularizer grid");
    if (repeats < 1)
        throw Error(ErrorCode::invalid_argument, "need at least one repeat");
    std::vector<int> pos, neg;
    for (std::size_t j = 0; j < labels.size(); ++j)
        (labels.sign[j] > 0 ? pos : neg).push_back(static_cast<int>(j));
    if (pos.size() < 2 || neg.size() < 2)
        throw Error(ErrorCode::insufficient_labels, "cross-validation needs two labels of each class");

    // fold[r][j] in {0, 1} for label j in repeat r, stratified by class
    std::mt19937_64 rng(seed);
    std::vector<std::vector<int>> fold(repeats, std::vector<int>(labels.size()));
    for (int r = 0; r < repeats; ++r) {
        for (auto* cls : {&pos, &neg}) {
            std::vector<int> order = *cls;
            std::shuffle(order.begin(), order.end(), rng);
            for (std::size_t t = 0; t < order.size(); ++t)
                fold[r][order[t]] = static_cast<int>(t % 2);
        }
    }

    CvResult out;
    const Matrix distY = pairwise_distances(Y.points);
    for (const auto& spec : grid) {
        const PointCloud Ybar = regularize(Y, spec, &distY);
        const Matrix dist = spec.kind == RegularizerKind::identity ? distY : pairwise_distances(Ybar.points);
        const ProbitBasis basis = probit_basis(build_graph(dist, graph));

        CvRow row;
        row.spec = spec;
        for (int r = 0; r < repeats; ++r) {
            int errors = 0;
            for (int held = 0; held < 2; ++held) {
                LabelSet train;
                for (std::size_t j = 0; j < labels.size(); ++j)
                    if (fold[r][j] != held) {
                        train.index.push_back(labels.index[j]);
                        train.sign.push_back(labels.sign[j]);
                    }
                const ClassifierResult fit = fit_probit(make_probit_problem(basis, train, gamma));
                for (std::size_t j = 0; j < labels.size(); ++j)
                    if (fold[r][j] == held)
                        errors += fit.predictions[labels.index[j]] != labels.sign[j];
            }
            row.repeat_errors.push_back(errors);
        }
        row.mean_error = std::accumulate(row.repeat_errors.begin(), row.repeat_errors.end(), 0.0) / repeats;
        out.table.push_back(std::move(row));
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < out.table.size(); ++i) {
        const auto& a = out.table[i];
        const auto& b = out.table[best];
        if (a.mean_error < b.mean_error || (a.mean_error == b.mean_error && a.spec.value < b.spec.value))
            best = i;
    }
    out.best = out.table[best].spec;
    return out;
}

void write_cv_csv(const std::string& path, const CvResult& cv)
{
    std::ofstream out(path);
    if (!out)
        throw Error(ErrorCode::io_error, "cannot write " + path);
    out << "regularizer,mean_cv_error,repeat_errors,selected\n";
    for (const auto& row : cv.table) {
        out << row.spec.describe() << ',' << format_double(row.mean_error) << ',';
        for (std::size_t r = 0; r < row.repeat_errors.size(); ++r)
            out << (r ? ";" : "") << row.repeat_errors[r];
        const bool selected = row.spec.kind == cv.best.kind && row.spec.value == cv.best.value;
        out << ',' << (selected ? 1 : 0) << '\n';
    }
}

void write_predictions_csv(const std::string& path, const ClassifierResult& res, const std::vector<int>& truth,
                           const LabelSet& labels)
{
    std::ofstream out(path);
    if (!out)
        throw Error(ErrorCode::io_error, "cannot write " + path);
    std::vector<char> labelled(res.predictions.size(), 0);
    for (int i : labels.index)
        labelled[i] = 1;
    out << "index,u,prediction,truth,labelled\n";
    for (std::size_t i = 0; i < res.predictions.size(); ++i) {
        out << i << ',' << format_double(res.u(static_cast<Eigen::Index>(i))) << ',' << res.predictions[i] << ',';
        if (i < truth.size())
            out << truth[i];
        out << ',' << static_cast<int>(labelled[i]) << '\n';
    }
}

}  // namespace locreg

#include "locreg/spectral.hpp"

#include "lapack_runtime.hpp"

#include "locreg/error.hpp"
#include "locreg/textio.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace locreg {

namespace {

struct Eigenpairs {
    Vector values;
    Matrix vectors;
};

// k smallest eigenpairs of a dense symmetric matrix.
Eigenpairs lapack_smallest(Matrix a, int k, bool want_vectors)
{
    const auto n = static_cast<int>(a.rows());
    Eigenpairs out;
    Vector w(n);
    if (k == n) {
        const int info = detail::dsyevd(want_vectors, n, a.data(), n, w.data());
        if (info != 0)
            throw Error(ErrorCode::no_convergence, "dsyevd failed with info=" + std::to_string(info));
        out.values = w;
        if (want_vectors)
            out.vectors = std::move(a);
        return out;
    }
    int found = 0;
    Matrix z(n, want_vectors ? k : 1);
    const int info = detail::dsyevr_smallest(want_vectors, n, a.data(), n, k, &found, w.data(), z.data(), n);
    if (info != 0 || found != k)
        throw Error(ErrorCode::no_convergence, "dsyevr failed with info=" + std::to_string(info));
    out.values = w.head(k);
    if (want_vectors)
        out.vectors = std::move(z);
    return out;
}

// Orthonormalizes the columns of V against Q and among themselves. Columns
// that vanish are replaced by fresh random directions.
void orthonormalize_block(const Matrix& Q, Matrix& V, std::mt19937_64& rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index c = 0; c < V.cols(); ++c) {
        for (int attempt = 0;; ++attempt) {
            const double before = V.col(c).norm();
            for (int pass = 0; pass < 2; ++pass) {
                if (Q.cols() > 0)
                    V.col(c) -= Q * (Q.transpose() * V.col(c));
                if (c > 0)
                    V.col(c) -= V.leftCols(c) * (V.leftCols(c).transpose() * V.col(c));
            }
            const double after = V.col(c).norm();
            if (after > 1e-10 * before && after > 0.0) {
                V.col(c) /= after;
                break;
            }
            if (attempt > 8)
                throw Error(ErrorCode::no_convergence, "Krylov basis cannot be extended");
            for (Eigen::Index r = 0; r < V.rows(); ++r)
                V(r, c) = normal(rng);
        }
    }
}

Eigenpairs krylov_smallest(const SparseMatrix& L, int k, const EigenOptions& opts)
{
    const Eigen::Index n = L.rows();
    const double diag_mean = L.diagonal().mean();
    const double shift = diag_mean > 0.0 ? 1e-3 * diag_mean : 1e-3;
    SparseMatrix shifted = L;
    for (Eigen::Index i = 0; i < n; ++i)
        shifted.coeffRef(i, i) += shift;
    Eigen::SimplicialLDLT<SparseMatrix> solver(shifted);
    if (solver.info() != Eigen::Success)
        throw Error(ErrorCode::no_convergence, "factorization of the shifted operator failed");

    const double scale = std::max(1.0, SymmetricOperator{L}.norm_bound());
    const double target = opts.tol * scale;
    const Eigen::Index block = std::min<Eigen::Index>(n, std::clamp(k, 4, 24));
    const int max_blocks = opts.max_blocks > 0 ? opts.max_blocks : 50 * k;

    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix V(n, block);
    for (Eigen::Index c = 0; c < block; ++c)
        for (Eigen::Index r = 0; r < n; ++r)
            V(r, c) = normal(rng);

    Matrix Q(n, 0);
    Matrix AQ(n, 0);
    Eigen::Index next_check = std::min<Eigen::Index>(n, std::max<Eigen::Index>(2 * k, 2 * block));
    double worst = 0.0;
    for (int step = 0; step < max_blocks; ++step) {
        const Eigen::Index room = n - Q.cols();
        if (V.cols() > room)
            V.conservativeResize(Eigen::NoChange, room);
        orthonormalize_block(Q, V, rng);
        const Matrix AV = solver.solve(V);
        const Eigen::Index old = Q.cols();
        Q.conservativeResize(Eigen::NoChange, old + V.cols());
        Q.rightCols(V.cols()) = V;
        AQ.conservativeResize(Eigen::NoChange, old + V.cols());
        AQ.rightCols(V.cols()) = AV;

        if (Q.cols() >= next_check || Q.cols() == n) {
            Matrix H = Q.transpose() * AQ;
            H = 0.5 * (H + H.transpose()).eval();
            Eigen::SelfAdjointEigenSolver<Matrix> ritz(H);
            const Eigen::Index m = H.rows();
            const int want = static_cast<int>(std::min<Eigen::Index>(k, m));
            // largest θ of (L+sI)^{-1} are the smallest λ of L
            Matrix X = Q * ritz.eigenvectors().rightCols(want).rowwise().reverse();
            Eigenpairs out;
            out.values.resize(want);
            worst = 0.0;
            for (int c = 0; c < want; ++c) {
                const Vector lx = L * X.col(c);
                out.values(c) = X.col(c).dot(lx);
                worst = std::max(worst, (lx - out.values(c) * X.col(c)).norm());
            }
            if ((want == k && worst <= target) || Q.cols() == n) {
                // sort by Rayleigh quotient; Ritz order can swap within tight clusters
                std::vector<int> order(want);
                std::iota(order.begin(), order.end(), 0);
                std::stable_sort(order.begin(), order.end(),
                                 [&](int a, int b) { return out.values(a) < out.values(b); });
                Eigenpairs sorted;
                sorted.values.resize(want);
                sorted.vectors.resize(n, want);
                for (int c = 0; c < want; ++c) {
                    sorted.values(c) = out.values(order[c]);
                    sorted.vectors.col(c) = X.col(order[c]);
                }
                if (worst > target)
                    throw Error(ErrorCode::no_convergence,
                                "residual " + format_double(worst) + " above " + format_double(target));
                return sorted;
            }
            next_check = std::min<Eigen::Index>(n, Q.cols() + std::max<Eigen::Index>(k / 2, block));
        }
        V = AV;
    }
    throw Error(ErrorCode::no_convergence,
                "Krylov iteration hit its cap; last residual " + format_double(worst));
}

// Connected components of the off-diagonal sparsity pattern.
std::vector<std::vector<int>> components(const SymmetricOperator& L)
{
    const auto n = static_cast<int>(L.n());
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    auto unite = [&](int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b)
            parent[std::max(a, b)] = std::min(a, b);
    };
    if (L.is_dense()) {
        const Matrix& d = L.dense();
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < j; ++i)
                if (d(i, j) != 0.0)
                    unite(i, j);
    } else {
        const SparseMatrix& s = L.sparse();
        for (int k = 0; k < s.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(s, k); it; ++it)
                if (it.row() != it.col() && it.value() != 0.0)
                    unite(static_cast<int>(it.row()), static_cast<int>(it.col()));
    }
    std::vector<std::vector<int>> groups;
    std::vector<int> slot(n, -1);
    for (int i = 0; i < n; ++i) {
        const int root = find(i);
        if (slot[root] < 0) {
            slot[root] = static_cast<int>(groups.size());
            groups.emplace_back();
        }
        groups[slot[root]].push_back(i);
    }
    return groups;
}

}  // namespace

Spectrum smallest_eigs(const SymmetricOperator& L, int k, const EigenOptions& opts)
{
    const Eigen::Index n = L.n();
    if (k < 1 || k > n)
        throw Error(ErrorCode::invalid_argument, "need 1 <= k <= n eigenpairs");

    Spectrum spec;
    spec.nodes = n;
    if (opts.method == EigenMethod::dense || (opts.method == EigenMethod::automatic && n <= opts.dense_limit)) {
        auto pairs = lapack_smallest(L.to_dense(), k, opts.want_vectors);
        spec.values = std::move(pairs.values);
        if (opts.want_vectors)
            spec.vectors = std::move(pairs.vectors);
        return spec;
    }

    struct Candidate {
        double value;
        int group;
        int column;
    };
    const auto groups = components(L);
    std::vector<Eigenpairs> solved(groups.size());
    std::vector<Candidate> pool;
    const Matrix* dense = L.is_dense() ? &L.dense() : nullptr;
    SparseMatrix sparse_copy;
    if (dense)
        sparse_copy = dense->sparseView();
    const SparseMatrix& S = dense ? sparse_copy : L.sparse();

    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto& idx = groups[g];
        const auto size = static_cast<Eigen::Index>(idx.size());
        const int want = static_cast<int>(std::min<Eigen::Index>(k, size));
        if (size == 1) {
            solved[g].values = Vector::Constant(1, L.is_dense() ? L.dense()(idx[0], idx[0])
                                                                : L.sparse().coeff(idx[0], idx[0]));
            solved[g].vectors = Matrix::Ones(1, 1);
        } else {
            std::vector<int> local(n, -1);
            for (Eigen::Index a = 0; a < size; ++a)
                local[idx[a]] = static_cast<int>(a);
            std::vector<Eigen::Triplet<double>> trip;
            for (int col : idx)
                for (SparseMatrix::InnerIterator it(S, col); it; ++it)
                    trip.emplace_back(local[it.row()], local[col], it.value());
            SparseMatrix sub(size, size);
            sub.setFromTriplets(trip.begin(), trip.end());
            const bool iterative = opts.method == EigenMethod::iterative || size > opts.dense_limit;
            solved[g] = iterative ? krylov_smallest(sub, want, opts)
                                  : lapack_smallest(Matrix(sub), want, true);
        }
        for (int c = 0; c < solved[g].values.size(); ++c)
            pool.push_back({solved[g].values(c), static_cast<int>(g), c});
    }

    std::stable_sort(pool.begin(), pool.end(),
                     [](const Candidate& a, const Candidate& b) { return a.value < b.value; });
    spec.values.resize(k);
    Matrix vecs;
    if (opts.want_vectors)
        vecs = Matrix::Zero(n, k);
    for (int c = 0; c < k; ++c) {
        const auto& cand = pool[c];
        spec.values(c) = cand.value;
        if (opts.want_vectors) {
            const auto& idx = groups[cand.group];
            for (std::size_t a = 0; a < idx.size(); ++a)
                vecs(idx[a], c) = solved[cand.group].vectors(static_cast<Eigen::Index>(a), cand.column);
        }
    }
    if (opts.want_vectors)
        spec.vectors = std::move(vecs);
    return spec;
}

std::vector<double> sphere_spectrum(int count)
{
    if (count < 1)
        throw Error(ErrorCode::invalid_argument, "need at least one eigenvalue");
    std::vector<double> out;
    out.reserve(count);
    for (int l = 0; static_cast<int>(out.size()) < count; ++l)
        for (int mult = 0; mult < 2 * l + 1 && static_cast<int>(out.size()) < count; ++mult)
            out.push_back(static_cast<double>(l) * (l + 1));
    return out;
}

std::vector<double> spectral_error(const std::vector<double>& computed, const std::vector<double>& reference)
{
    if (computed.size() != reference.size())
        throw Error(ErrorCode::length_mismatch, "spectra have different lengths");
    std::vector<double> out(computed.size());
    for (std::size_t i = 0; i < computed.size(); ++i) {
        const double diff = std::abs(computed[i] - reference[i]);
        if (i == 0) {
            out[i] = diff;
            continue;
        }
        if (!(reference[i] > 0.0))
            throw Error(ErrorCode::domain_error, "reference eigenvalues beyond the first must be positive");
        out[i] = diff / reference[i];
    }
    return out;
}

double sandwich_eta(const Matrix& distX, const Matrix& distY, double eps, int* iterations)
{
    if (distX.rows() != distY.rows() || distX.cols() != distY.cols())
        throw Error(ErrorCode::shape_mismatch, "distance matrices differ in shape");
    const Eigen::Index n = distX.rows();
    double eta = (distX - distY).cwiseAbs().maxCoeff();
    int it = 0;
    for (;;) {
        ++it;
        double restricted = 0.0;
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index i = 0; i < j; ++i)
                if (std::min(distX(i, j), distY(i, j)) < eps + eta)
                    restricted = std::max(restricted, std::abs(distX(i, j) - distY(i, j)));
        if (restricted == eta)
            break;
        eta = restricted;
    }
    if (iterations)
        *iterations = it;
    return eta;
}

bool SandwichReport::all_pass() const
{
    return std::all_of(pass.begin(), pass.end(), [](bool b) { return b; });
}

SandwichReport sandwich_check(const Matrix& distX, const Matrix& distYbar, double eps, int m, int k,
                              double rel_slack)
{
    SandwichReport rep;
    rep.eps = eps;
    rep.eta = sandwich_eta(distX, distYbar, eps, &rep.eta_iterations);
    if (eps <= rep.eta)
        throw Error(ErrorCode::eta_too_large,
                    "eta=" + format_double(rep.eta) + " is not below eps=" + format_double(eps));

    EigenOptions opts;
    opts.want_vectors = false;
    auto quotient_eigs = [&](const Matrix& dist, double e) {
        const SymmetricOperator L = laplacian(epsilon_graph(dist, e, m));
        return smallest_eigs(L, k, opts).scaled_values();
    };
    const double lo_factor = std::pow((eps - rep.eta) / eps, m + 2);
    const double hi_factor = std::pow((eps + rep.eta) / eps, m + 2);
    const Vector lo = rep.eta > 0.0 ? quotient_eigs(distX, eps - rep.eta) : quotient_eigs(distX, eps);
    const Vector mid = quotient_eigs(distYbar, eps);
    const Vector hi = rep.eta > 0.0 ? quotient_eigs(distX, eps + rep.eta) : lo;
    for (int l = 0; l < k; ++l) {
        rep.lower.push_back(lo_factor * lo(l));
        rep.middle.push_back(mid(l));
        rep.upper.push_back(hi_factor * hi(l));
        const double slack = rel_slack * std::max({1.0, std::abs(rep.upper.back()), std::abs(mid(l))});
        rep.pass.push_back(rep.lower.back() <= mid(l) + slack && mid(l) <= rep.upper.back() + slack);
    }
    return rep;
}

void write_spectrum_csv(const std::filesystem::path& path, const Spectrum& s,
                        const std::vector<double>& reference)
{
    std::ofstream out(path);
    if (!out)
        throw Error(ErrorCode::io_error, "cannot write " + path.string());
    const Vector scaled = s.scaled_values();
    std::vector<double> matrix(s.values.data(), s.values.data() + s.values.size());
    std::vector<double> err;
    const bool have_ref = reference.size() == matrix.size();
    if (have_ref)
        err = spectral_error(matrix, reference);
    out << "index,value_paper_convention,value_matrix_convention,reference,relative_error\n";
    for (std::size_t i = 0; i < matrix.size(); ++i) {
        out << i + 1 << ',' << format_double(scaled(static_cast<Eigen::Index>(i))) << ','
            << format_double(matrix[i]) << ',';
        if (have_ref)
            out << format_double(reference[i]) << ',' << format_double(err[i]);
        else
            out << ',';
        out << '\n';
    }
}

}  // namespace locreg

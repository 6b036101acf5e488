#include "locreg/pointcloud.hpp"

#include "locreg/error.hpp"
#include "locreg/textio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

namespace locreg {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream)
{
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::string to_string(NoiseMode mode)
{
    switch (mode) {
    case NoiseMode::ambient_ball: return "ambient-ball";
    case NoiseMode::ambient_cube: return "ambient-cube";
    case NoiseMode::normal_space: return "normal-space";
    }
    return "unknown";
}

NoiseMode parse_noise_mode(const std::string& text)
{
    if (text == "ambient-ball")
        return NoiseMode::ambient_ball;
    if (text == "ambient-cube")
        return NoiseMode::ambient_cube;
    if (text == "normal-space")
        return NoiseMode::normal_space;
    throw Error(ErrorCode::unsupported_mode, "unknown noise mode '" + text + "'");
}

namespace {

std::string manifold_name(ManifoldKind kind)
{
    switch (kind) {
    case ManifoldKind::sphere: return "sphere";
    case ManifoldKind::two_moons: return "two-moons";
    case ManifoldKind::none: break;
    }
    return "none";
}

ManifoldKind parse_manifold(const std::string& text)
{
    if (text == "sphere")
        return ManifoldKind::sphere;
    if (text == "two-moons")
        return ManifoldKind::two_moons;
    return ManifoldKind::none;
}

// Unit vector with a uniformly random direction in R^dim.
Vector random_direction(int dim, std::mt19937_64& rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector g(dim);
    double norm = 0.0;
    while (norm == 0.0) {
        for (int k = 0; k < dim; ++k)
            g(k) = normal(rng);
        norm = g.norm();
    }
    return g / norm;
}

}  // namespace

void PointCloud::validate() const
{
    if (points.rows() < 1 || points.cols() < 1)
        throw Error(ErrorCode::invalid_dimension, "point cloud must have n >= 1 and d >= 1");
    if (m < 1 || m > points.cols())
        throw Error(ErrorCode::invalid_dimension, "intrinsic dimension must satisfy 0 < m <= d");
    if (clean && (clean->rows() != points.rows() || clean->cols() != points.cols()))
        throw Error(ErrorCode::shape_mismatch, "clean reference must have the same shape as points");
}

PointCloud sample_sphere(int n, int m, int d, std::uint64_t seed)
{
    if (m < 1 || m + 1 > d)
        throw Error(ErrorCode::invalid_dimension, "sphere sampler needs 1 <= m and m+1 <= d");
    if (n < 1)
        throw Error(ErrorCode::invalid_argument, "sphere sampler needs n >= 1");

    std::mt19937_64 rng(seed);
    PointCloud cloud;
    cloud.points = Matrix::Zero(n, d);
    for (int i = 0; i < n; ++i)
        cloud.points.row(i).head(m + 1) = random_direction(m + 1, rng).transpose();
    cloud.m = m;
    cloud.manifold = ManifoldKind::sphere;
    cloud.seed = seed;
    return cloud;
}

LabeledCloud sample_two_moons(int n, int d, std::uint64_t seed)
{
    if (d < 2)
        throw Error(ErrorCode::invalid_dimension, "two moons need d >= 2");
    if (n < 2)
        throw Error(ErrorCode::invalid_argument, "two moons need n >= 2");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
    const int upper = n - n / 2;

    LabeledCloud out;
    out.cloud.points = Matrix::Zero(n, d);
    out.labels.resize(n);
    for (int i = 0; i < n; ++i) {
        const double t = angle(rng);
        if (i < upper) {
            out.cloud.points(i, 0) = std::cos(t);
            out.cloud.points(i, 1) = std::sin(t);
            out.labels[i] = 1;
        } else {
            // angle in [pi, 2pi] around (1, 0.5)
            out.cloud.points(i, 0) = 1.0 + std::cos(t + std::numbers::pi);
            out.cloud.points(i, 1) = 0.5 + std::sin(t + std::numbers::pi);
            out.labels[i] = -1;
        }
    }
    out.cloud.m = 1;
    out.cloud.manifold = ManifoldKind::two_moons;
    out.cloud.seed = seed;
    return out;
}

Matrix sphere_tangent_basis(const Vector& x, int m)
{
    // Gram-Schmidt of the first m+1 axes against x, skipping near-parallel ones.
    const Eigen::Index d = x.size();
    Matrix basis(d, m);
    int found = 0;
    Vector unit = x.normalized();
    std::vector<Vector> kept{unit};
    for (int axis = 0; axis <= m && found < m; ++axis) {
        Vector e = Vector::Zero(d);
        e(axis) = 1.0;
        for (const auto& q : kept)
            e -= q.dot(e) * q;
        const double len = e.norm();
        if (len < 1e-6)
            continue;
        e /= len;
        kept.push_back(e);
        basis.col(found++) = e;
    }
    return basis;
}

PointCloud add_noise(const PointCloud& cloud, const NoiseSpec& spec, std::uint64_t seed)
{
    cloud.validate();
    if (!(spec.sigma >= 0.0))
        throw Error(ErrorCode::invalid_argument, "noise level must be non-negative");
    if (spec.mode == NoiseMode::normal_space && cloud.manifold != ManifoldKind::sphere)
        throw Error(ErrorCode::unsupported_mode,
                    "normal-space noise needs an analytic normal space (sphere sampler only)");

    const Eigen::Index n = cloud.n();
    const Eigen::Index d = cloud.d();
    const int m = cloud.m;

    PointCloud out = cloud;
    out.clean = cloud.points;
    out.sigma = spec.sigma;
    out.noise_mode = spec.mode;
    out.seed = seed;
    if (spec.sigma == 0.0)
        return out;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        Vector z(d);
        switch (spec.mode) {
        case NoiseMode::ambient_ball: {
            const double radius = spec.sigma * std::pow(unit(rng), 1.0 / static_cast<double>(d));
            z = radius * random_direction(static_cast<int>(d), rng);
            break;
        }
        case NoiseMode::ambient_cube: {
            const double half = spec.sigma / std::sqrt(static_cast<double>(d));
            for (Eigen::Index k = 0; k < d; ++k)
                z(k) = half * (2.0 * unit(rng) - 1.0);
            break;
        }
        case NoiseMode::normal_space: {
            // normal space at x: span{x} + the padded axes m+1..d-1
            const Vector x = cloud.points.row(i).transpose();
            const Vector g = random_direction(static_cast<int>(d), rng);
            Vector normal = g;
            const double along = x.head(m + 1).dot(g.head(m + 1));
            normal.head(m + 1) = along * x.head(m + 1);
            const double len = normal.norm();
            const double radius =
                spec.sigma * std::pow(unit(rng), 1.0 / static_cast<double>(d - m));
            z = len > 0.0 ? Vector(radius * normal / len) : Vector::Zero(d);
            break;
        }
        }
        // rounding can push |z| a few ulps past sigma
        const double norm = z.norm();
        if (norm > spec.sigma)
            z *= spec.sigma / norm;
        out.points.row(i) += z.transpose();
    }
    return out;
}

double sphere_geodesic(const Vector& x, const Vector& y)
{
    if (std::abs(x.norm() - 1.0) > 1e-8 || std::abs(y.norm() - 1.0) > 1e-8)
        throw Error(ErrorCode::not_unit_norm, "geodesic distance needs unit vectors");
    return std::acos(std::clamp(x.dot(y), -1.0, 1.0));
}

// -- persistence ---------------------------------------------------------------

void write_matrix_csv(const std::filesystem::path& path, const Matrix& matrix)
{
    std::ofstream out(path);
    if (!out)
        throw Error(ErrorCode::io_error, "cannot write " + path.string());
    for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
        for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
            if (j)
                out << ',';
            out << format_double(matrix(i, j));
        }
        out << '\n';
    }
}

Matrix read_matrix_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::io_error, "cannot read " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        rows.push_back(parse_double_list(line, ','));
        if (rows.back().size() != rows.front().size())
            throw Error(ErrorCode::shape_mismatch, "ragged CSV " + path.string());
    }
    Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(i, j) = rows[i][j];
    return m;
}

void save_cloud(const std::filesystem::path& stem, const PointCloud& cloud)
{
    cloud.validate();
    write_matrix_csv(stem.string() + ".csv", cloud.points);
    if (cloud.clean)
        write_matrix_csv(stem.string() + ".clean.csv", *cloud.clean);

    KeyValues meta;
    meta.set("n", std::to_string(cloud.n()));
    meta.set("d", std::to_string(cloud.d()));
    meta.set("m", std::to_string(cloud.m));
    meta.set("sigma", format_double(cloud.sigma));
    meta.set("mode", cloud.noise_mode ? to_string(*cloud.noise_mode) : "none");
    meta.set("seed", std::to_string(cloud.seed));
    meta.set("manifold", manifold_name(cloud.manifold));
    meta.set("clean", cloud.clean ? "1" : "0");
    meta.write(stem.string() + ".meta");
}

PointCloud load_cloud(const std::filesystem::path& stem)
{
    const KeyValues meta = KeyValues::read(stem.string() + ".meta");
    PointCloud cloud;
    cloud.points = read_matrix_csv(stem.string() + ".csv");
    cloud.m = std::stoi(meta.get("m"));
    cloud.sigma = std::stod(meta.get("sigma", "0"));
    const std::string mode = meta.get("mode", "none");
    if (mode != "none")
        cloud.noise_mode = parse_noise_mode(mode);
    cloud.seed = std::stoull(meta.get("seed", "0"));
    cloud.manifold = parse_manifold(meta.get("manifold", "none"));
    if (meta.get("clean", "0") == "1")
        cloud.clean = read_matrix_csv(stem.string() + ".clean.csv");
    if (cloud.n() != std::stoll(meta.get("n")) || cloud.d() != std::stoll(meta.get("d")))
        throw Error(ErrorCode::shape_mismatch, "metadata disagrees with " + stem.string() + ".csv");
    cloud.validate();
    return cloud;
}

void save_labels(const std::filesystem::path& path, const std::vector<int>& labels)
{
    std::ofstream out(path);
    if (!out)
        throw Error(ErrorCode::io_error, "cannot write " + path.string());
    out << "index,label\n";
    for (std::size_t i = 0; i < labels.size(); ++i)
        out << i << ',' << labels[i] << '\n';
}

std::vector<int> load_labels(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::io_error, "cannot read " + path.string());
    std::string line;
    std::getline(in, line);
    std::vector<int> labels;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        const auto comma = line.find(',');
        labels.push_back(std::stoi(line.substr(comma + 1)));
    }
    return labels;
}

}  // namespace locreg

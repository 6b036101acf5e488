#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace locreg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Mixes a base seed with a stream tag (splitmix64) so independent stages of a
/// run draw from decorrelated generators.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// Which analytic manifold generated the clean points, if any. Only the
/// sphere carries enough structure for normal-space noise.
enum class ManifoldKind { none, sphere, two_moons };

enum class NoiseMode {
    ambient_ball,  ///< uniform in the d-ball of radius sigma (volume measure)
    ambient_cube,  ///< i.i.d. U(-sigma/sqrt(d), sigma/sqrt(d)) per coordinate
    normal_space,  ///< uniform in the (d-m)-ball of the normal space at x
};

std::string to_string(NoiseMode mode);
NoiseMode parse_noise_mode(const std::string& text);

struct NoiseSpec {
    double sigma = 0.0;
    NoiseMode mode = NoiseMode::ambient_cube;
};

/// n points in R^d near an m-dimensional manifold. `clean` holds the
/// unperturbed positions when they are known.
struct PointCloud {
    Matrix points;
    int m = 1;
    std::optional<Matrix> clean;
    ManifoldKind manifold = ManifoldKind::none;

    // provenance, carried into the metadata sidecar
    double sigma = 0.0;
    std::optional<NoiseMode> noise_mode;
    std::uint64_t seed = 0;

    Eigen::Index n() const { return points.rows(); }
    Eigen::Index d() const { return points.cols(); }

    /// Throws invalid-dimension / shape-mismatch when an invariant is broken.
    void validate() const;
};

/// Uniform sample of S^m embedded in the first m+1 coordinates of R^d.
PointCloud sample_sphere(int n, int m, int d, std::uint64_t seed);

struct LabeledCloud {
    PointCloud cloud;
    std::vector<int> labels;  ///< +1 for the upper moon, -1 for the lower one
};

/// Two unit semicircles: upper one centred at (0,0), lower one at (1,0.5).
/// The first ceil(n/2) rows belong to the upper moon.
LabeledCloud sample_two_moons(int n, int d, std::uint64_t seed);

/// Returns y = x + z with `clean` set to the input points.
PointCloud add_noise(const PointCloud& cloud, const NoiseSpec& spec, std::uint64_t seed);

/// Great-circle distance between two unit vectors.
double sphere_geodesic(const Vector& x, const Vector& y);

/// Orthonormal basis (columns) of the tangent space of the embedded sphere
/// at a clean point. Used to check normal-space noise.
Matrix sphere_tangent_basis(const Vector& x, int m);

// -- persistence -------------------------------------------------------------

void write_matrix_csv(const std::filesystem::path& path, const Matrix& matrix);
Matrix read_matrix_csv(const std::filesystem::path& path);

/// Writes `<stem>.csv`, `<stem>.meta` and, when present, `<stem>.clean.csv`.
void save_cloud(const std::filesystem::path& stem, const PointCloud& cloud);
PointCloud load_cloud(const std::filesystem::path& stem);

void save_labels(const std::filesystem::path& path, const std::vector<int>& labels);
std::vector<int> load_labels(const std::filesystem::path& path);

}  // namespace locreg

#pragma once

#include "locreg/classify.hpp"
#include "locreg/graph.hpp"
#include "locreg/mnist.hpp"
#include "locreg/pointcloud.hpp"
#include "locreg/regularize.hpp"
#include "locreg/spectral.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace locreg {

// -- masked distance matrices ------------------------------------------------------

struct DistanceMask {
    enum class Kind { epsilon, mutual_knn } kind = Kind::epsilon;
    double eps = 0.0;
    int K = 0;

    static DistanceMask epsilon(double e) { return {Kind::epsilon, e, 0}; }
    static DistanceMask mutual_knn(int k) { return {Kind::mutual_knn, 0.0, k}; }
    std::string describe() const;
};

struct MaskedDistanceReport {
    double frob_raw = 0.0;  ///< ‖D_X − D_Y‖_F over the full n×n masked matrices
    double frob_reg = 0.0;  ///< ‖D_X − D_Ȳ‖_F
    DistanceMask mask;
    std::size_t pair_count = 0;  ///< unordered pairs i < j inside the mask
};

/// The mask is built from the clean distances only and applied to all three
/// matrices.
MaskedDistanceReport masked_distance_report(const Matrix& distX, const Matrix& distY, const Matrix& distYbar,
                                            const DistanceMask& mask);
MaskedDistanceReport masked_distance_report(const PointCloud& X, const PointCloud& Y, const PointCloud& Ybar,
                                            const DistanceMask& mask);

// -- protocols -------------------------------------------------------------------------

/// r = √σ/3 at σ = 0.1 and √σ otherwise.
double sphere_radius_schedule(double sigma);

/// 2 n^{-1/4}
double sphere_epsilon(long long n);

struct SphereSetup {
    int n = 3000;
    int d = 100;
    int m = 2;
    NoiseMode mode = NoiseMode::ambient_cube;
    std::optional<double> r;  ///< overrides the schedule
};

struct SphereClouds {
    PointCloud X, Y, Ybar;
    double r = 0.0;
};

/// Sample, perturb and ball-average; each stage has its own derived seed.
SphereClouds sphere_clouds(double sigma, std::uint64_t seed, const SphereSetup& setup);

struct DistanceTableRow {
    double sigma = 0.0;
    double r = 0.0;
    double eps = 0.0;
    MaskedDistanceReport report;
};

DistanceTableRow sphere_distance_row(double sigma, std::uint64_t seed, const SphereSetup& setup);

struct SphereSpectra {
    double sigma = 0.0;
    double r = 0.0;
    double eps = 0.0;
    Spectrum X, Y, Ybar;
    std::vector<double> reference;
};

/// ε-graphs with vol = 4π and ε = 2n^{-1/4} on X, Y and Ȳ.
SphereSpectra sphere_spectra(double sigma, std::uint64_t seed, const SphereSetup& setup, int count = 100);

/// Mean of matrix-convention eigenvalues with 1-based indices lo..hi.
double spectrum_window_mean(const Spectrum& s, int lo, int hi);

/// max(|mean(λ_2..λ_4) − 2|/2, |mean(λ_5..λ_9) − 6|/6)
double sphere_low_mode_deviation(const Spectrum& s);

struct DistanceBoundPoint {
    double sigma = 0.0;
    double r = 0.0;
    double measured = 0.0;  ///< max |δ_X − δ_Ȳ| over pairs with d_M(x_i, x_j) ≤ r
    double raw = 0.0;       ///< same for δ_Y
    double shape = 0.0;     ///< r³ + rσ + σ²/r
    std::size_t pairs = 0;
};

/// Sphere with normal-space noise, ball average with radius r.
DistanceBoundPoint distance_bound_point(double sigma, double r, std::uint64_t seed, int n = 3000, int d = 100, int m = 2);

struct MoonsSetup {
    int n = 1000;
    int d = 100;
    int K = 10;
    double label_fraction = 0.01;
    NoiseMode mode = NoiseMode::ambient_cube;
    std::optional<double> r;  ///< defaults to σ
    double gamma = 0.1;
    bool stratified_labels = false;
};

struct MoonsRow {
    double sigma = 0.0;
    double r = 0.0;
    int labels = 0;
    int error_raw = 0;
    int error_reg = 0;
    MaskedDistanceReport report;  ///< mutual-kNN mask under δ_X
};

MoonsRow two_moons_row(double sigma, std::uint64_t seed, const MoonsSetup& setup);

struct MnistSetup {
    int a = 4;
    int b = 9;
    int n = 1000;
    int K = 20;
    double label_fraction = 0.04;
    int cv_repeats = 5;
    std::vector<double> radius_factors = {0.8, 1.0, 1.2, 1.4, 1.6};  ///< × median 1-NN distance
    double gamma = 0.1;
    bool stratified_labels = false;
};

struct MnistRow {
    int a = 0;
    int b = 0;
    std::uint64_t seed = 0;
    int labels = 0;
    double selected_r = 0.0;
    int fc_raw = 0;
    int fc_reg = 0;
    int knn_raw = 0;
    int knn_reg = 0;
    CvResult cv;
};

MnistRow mnist_pair_row(const MnistDataset& data, std::uint64_t seed, const MnistSetup& setup);

// -- configuration and runs -----------------------------------------------------------

struct ExperimentConfig {
    std::string task = "distance-table";  ///< distance-table | spectrum | classify
    std::filesystem::path output = "out";
    std::vector<std::uint64_t> seeds = {1};

    std::string sampler = "sphere";  ///< sphere | two-moons | mnist
    int n = 3000;
    int d = 100;
    int m = 2;
    int digit_a = 4;
    int digit_b = 9;
    std::filesystem::path mnist_dir;

    std::vector<double> sigmas = {0.5};
    NoiseMode noise_mode = NoiseMode::ambient_cube;

    std::vector<RegularizerSpec> regularizers;  ///< empty: protocol default

    GraphRecipe graph;
    bool eps_auto = true;

    int eigenvalues = 100;
    double label_fraction = 0.01;
    int cv_repeats = 5;
    double gamma = 0.1;
    bool stratified_labels = false;
    std::string mask = "epsilon";  ///< epsilon | mutual-knn

    /// Checks module preconditions; throws config-error.
    void validate() const;
};

/// INI file with sections [run], [sampler], [noise], [regularizer], [graph],
/// [task].
ExperimentConfig load_config(const std::filesystem::path& path);

/// Runs every (σ, seed) pair, writes CSVs, manifest.txt and run.log into
/// cfg.output. Errors are re-thrown tagged with the failing stage.
void run_experiment(const ExperimentConfig& cfg);

// -- CSV writers shared by the CLI ------------------------------------------------------

void write_distance_table_csv(const std::filesystem::path& path, const std::vector<DistanceTableRow>& rows);
void write_moons_csv(const std::filesystem::path& path, const std::vector<MoonsRow>& rows);
void write_mnist_csv(const std::filesystem::path& path, const std::vector<MnistRow>& rows);
void write_spectra_csv(const std::filesystem::path& path, const SphereSpectra& s);

/// index,label,x0,x1,y0,y1,ybar0,ybar1
void write_scatter_csv(const std::filesystem::path& path, const PointCloud& X, const PointCloud& Y,
                       const PointCloud& Ybar, const std::vector<int>& labels);

/// index,digit,which,p0..p783 with which ∈ {raw, regularized}
void write_image_grid_csv(const std::filesystem::path& path, const Matrix& raw, const Matrix& reg,
                          const std::vector<int>& digits, int count);

}  // namespace locreg

#include "locreg/error.hpp"
#include "locreg/experiments.hpp"
#include "locreg/textio.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

using namespace locreg;
using testing_support::line_cloud;

namespace {

std::string read_text(const std::filesystem::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines_of(const std::filesystem::path& p)
{
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);)
        out.push_back(line);
    return out;
}

std::filesystem::path write_ini(const std::filesystem::path& dir, const std::string& name, const std::string& body)
{
    const auto p = dir / name;
    std::ofstream(p) << body;
    return p;
}

}  // namespace

TEST_CASE("masked_distance_report: hand instance with one masked pair")
{
    const PointCloud X = line_cloud({0.0, 1.0, 3.0});
    const PointCloud Y = line_cloud({0.0, 1.2, 3.0});
    const PointCloud Ybar = line_cloud({0.1, 1.0, 3.0});
    const auto rep = masked_distance_report(X, Y, Ybar, DistanceMask::epsilon(1.5));
    CHECK(rep.pair_count == 1);
    CHECK(rep.frob_raw == doctest::Approx(std::sqrt(2.0 * 0.04)).epsilon(1e-14));
    CHECK(rep.frob_reg == doctest::Approx(std::sqrt(2.0 * 0.01)).epsilon(1e-12));

    const auto knn = masked_distance_report(X, Y, Ybar, DistanceMask::mutual_knn(1));
    CHECK(knn.pair_count == 1);
    CHECK(knn.frob_raw == rep.frob_raw);
}

TEST_CASE("masked_distance_report: exact clouds give zero")
{
    const PointCloud X = sample_sphere(60, 2, 5, 1);
    const PointCloud Y = add_noise(X, {0.2, NoiseMode::ambient_cube}, 2);
    const auto a = masked_distance_report(X, Y, X, DistanceMask::epsilon(1.0));
    CHECK(a.frob_reg == 0.0);
    CHECK(a.frob_raw > 0.0);
    const auto b = masked_distance_report(X, X, Y, DistanceMask::epsilon(1.0));
    CHECK(b.frob_raw == 0.0);
    CHECK_THROWS_AS(masked_distance_report(X, sample_sphere(10, 2, 5, 1), X, DistanceMask::epsilon(1.0)), Error);
}

TEST_CASE("masked_distance_report: invariant under a common row permutation")
{
    const PointCloud X = sample_sphere(80, 2, 6, 3);
    const PointCloud Y = add_noise(X, {0.3, NoiseMode::ambient_cube}, 4);
    const PointCloud Ybar = ball_average(Y, 0.4);
    std::vector<int> perm(80);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(9));
    auto permute = [&](const PointCloud& c) {
        PointCloud out = c;
        for (int i = 0; i < 80; ++i)
            out.points.row(i) = c.points.row(perm[i]);
        return out;
    };
    for (const DistanceMask& mask : {DistanceMask::epsilon(0.8), DistanceMask::mutual_knn(6)}) {
        const auto a = masked_distance_report(X, Y, Ybar, mask);
        const auto b = masked_distance_report(permute(X), permute(Y), permute(Ybar), mask);
        CHECK(a.pair_count == b.pair_count);
        CHECK(a.frob_raw == doctest::Approx(b.frob_raw).epsilon(1e-12));
        CHECK(a.frob_reg == doctest::Approx(b.frob_reg).epsilon(1e-12));
    }
}

TEST_CASE("protocol parameter schedules")
{
    CHECK(sphere_epsilon(3000) == doctest::Approx(0.27025).epsilon(1e-4));
    CHECK(sphere_radius_schedule(0.1) == doctest::Approx(std::sqrt(0.1) / 3.0));
    CHECK(sphere_radius_schedule(0.5) == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("sphere_low_mode_deviation on the exact spectrum is zero")
{
    Spectrum s;
    const auto ref = sphere_spectrum(9);
    s.values = Eigen::Map<const Vector>(ref.data(), 9);
    s.nodes = 100;
    CHECK(sphere_low_mode_deviation(s) == 0.0);
    CHECK(spectrum_window_mean(s, 5, 9) == 6.0);
}

TEST_CASE("load_config: parses every section")
{
    const auto dir = testing_support::scratch_dir("config");
    const auto p = write_ini(dir, "c.ini",
                             "[run]\ntask = classify\noutput = " + (dir / "out").string() +
                                 "\nseeds = 3, 4\n"
                                 "[sampler]\nkind = two-moons\nn = 120\nd = 8\n"
                                 "[noise]\nsigma = 0.2, 0.4\nmode = ambient-ball\n"
                                 "[regularizer]\ngrid = identity, ball:0.3\n"
                                 "[graph]\nkind = knn-self-tuning\nK = 7\nrule = mutual\n"
                                 "[task]\nlabel_fraction = 0.1\nrepeats = 2\ngamma = 0.2\n");
    const ExperimentConfig cfg = load_config(p);
    CHECK(cfg.task == "classify");
    CHECK(cfg.seeds == std::vector<std::uint64_t>{3, 4});
    CHECK(cfg.sampler == "two-moons");
    CHECK(cfg.n == 120);
    CHECK(cfg.sigmas == std::vector<double>{0.2, 0.4});
    CHECK(cfg.noise_mode == NoiseMode::ambient_ball);
    REQUIRE(cfg.regularizers.size() == 2);
    CHECK(cfg.regularizers[1].value == 0.3);
    CHECK(cfg.graph.kind == GraphKind::knn_self_tuning);
    CHECK(cfg.graph.K == 7);
    CHECK(cfg.graph.rule == KnnRule::mutual_rule);
    CHECK(cfg.label_fraction == 0.1);
    CHECK(cfg.cv_repeats == 2);
    CHECK(cfg.gamma == 0.2);
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("load_config: malformed values are config errors")
{
    const auto dir = testing_support::scratch_dir("config_bad");
    for (const char* body : {"[sampler]\nn = many\n", "[noise]\nmode = gaussian\n", "[run]\ntask = plot\n",
                             "[run]\nseeds = 1,x\n", "not an ini [\n"}) {
        CAPTURE(body);
        try {
            load_config(write_ini(dir, "c.ini", body)).validate();
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::config_error);
        }
    }
}

TEST_CASE("run_experiment: distance table is reproducible and fully recorded")
{
    const auto dir = testing_support::scratch_dir("run_table");
    ExperimentConfig cfg;
    cfg.task = "distance-table";
    cfg.n = 400;
    cfg.d = 20;
    cfg.sigmas = {0.2, 0.5};
    cfg.seeds = {1, 2};
    cfg.output = dir / "a";
    run_experiment(cfg);
    cfg.output = dir / "b";
    run_experiment(cfg);
    CHECK(read_text(dir / "a" / "distance_table.csv") == read_text(dir / "b" / "distance_table.csv"));
    CHECK(read_text(dir / "a" / "run.log") == read_text(dir / "b" / "run.log"));

    const auto rows = lines_of(dir / "a" / "distance_table.csv");
    CHECK(rows.size() == 5);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        std::vector<std::string> f;
        std::stringstream ss(rows[i]);
        for (std::string cell; std::getline(ss, cell, ',');)
            f.push_back(cell);
        REQUIRE(f.size() == 8);
        CHECK(std::stod(f[5]) > 0.0);
        CHECK(std::stod(f[6]) > 0.0);
    }

    const KeyValues manifest = KeyValues::read(dir / "a" / "manifest.txt");
    CHECK(manifest.get("run.seeds") == "1,2");
    CHECK(manifest.get("noise.mode") == "ambient-cube");
    CHECK(manifest.has("seed.1.sample"));
    CHECK(manifest.has("seed.2.noise.sigma:0.5"));
}

TEST_CASE("run_experiment: spectrum task writes eigenvalues with a reference column")
{
    const auto dir = testing_support::scratch_dir("run_spectrum");
    ExperimentConfig cfg;
    cfg.task = "spectrum";
    cfg.n = 600;
    cfg.d = 10;
    cfg.sigmas = {0.3};
    cfg.eigenvalues = 100;
    cfg.graph.vol = 4.0 * 3.141592653589793;
    cfg.output = dir;
    run_experiment(cfg);
    const auto rows = lines_of(dir / "spectrum_seed1_sigma0.3_Y.csv");
    REQUIRE(rows.size() == 101);
    CHECK(rows[0] == "index,value_paper_convention,value_matrix_convention,reference,relative_error");
    CHECK(parse_double_list(rows[100], ',')[3] == 90.0);
    CHECK(std::filesystem::exists(dir / "spectrum_seed1_X.csv"));
}

TEST_CASE("run_experiment: classify task and its failure modes")
{
    const auto dir = testing_support::scratch_dir("run_classify");
    ExperimentConfig cfg;
    cfg.task = "classify";
    cfg.sampler = "two-moons";
    cfg.n = 150;
    cfg.d = 10;
    cfg.sigmas = {0.3};
    cfg.graph.kind = GraphKind::self_tuning;
    cfg.graph.K = 10;
    cfg.label_fraction = 0.1;
    cfg.cv_repeats = 2;
    cfg.regularizers = {RegularizerSpec::identity(), RegularizerSpec::ball(0.3)};
    cfg.output = dir / "ok";
    run_experiment(cfg);
    CHECK(std::filesystem::exists(dir / "ok" / "cv_seed1_sigma0.3.csv"));
    CHECK(lines_of(dir / "ok" / "classify.csv").size() >= 2);

    cfg.label_fraction = 0.0;
    cfg.output = dir / "none";
    try {
        run_experiment(cfg);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::insufficient_labels);
    }

    cfg.label_fraction = 0.02;  // 3 labels: cross-validation lacks a second label per class
    cfg.output = dir / "few";
    try {
        run_experiment(cfg);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::insufficient_labels);
        CHECK(e.stage() == "cross-validate");
    }
}

TEST_CASE("CSV writers used by the figure scripts")
{
    const auto dir = testing_support::scratch_dir("writers");
    const LabeledCloud moons = sample_two_moons(20, 4, 1);
    const PointCloud Y = add_noise(moons.cloud, {0.2, NoiseMode::ambient_cube}, 2);
    write_scatter_csv(dir / "scatter.csv", moons.cloud, Y, ball_average(Y, 0.2), moons.labels);
    const auto scatter = lines_of(dir / "scatter.csv");
    CHECK(scatter.size() == 21);
    CHECK(scatter[0] == "index,label,x0,x1,y0,y1,ybar0,ybar1");

    const Matrix raw = Matrix::Constant(3, 784, 0.5);
    write_image_grid_csv(dir / "grid.csv", raw, raw, {4, 9, 4}, 2);
    const auto grid = lines_of(dir / "grid.csv");
    CHECK(grid.size() == 5);
    CHECK(grid[0].rfind("index,digit,which,p0,", 0) == 0);
    std::stringstream ss(grid[1]);
    int fields = 0;
    for (std::string cell; std::getline(ss, cell, ',');)
        ++fields;
    CHECK(fields == 787);
}

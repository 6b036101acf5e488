// Command-line front end: data generation, single-stage tools, reproduction
// protocols and config-driven runs.
#include "locreg/bounds.hpp"
#include "locreg/classify.hpp"
#include "locreg/error.hpp"
#include "locreg/experiments.hpp"
#include "locreg/graph.hpp"
#include "locreg/mnist.hpp"
#include "locreg/regularize.hpp"
#include "locreg/spectral.hpp"
#include "locreg/textio.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>

namespace fs = std::filesystem;
using namespace locreg;

namespace {

struct GraphArgs {
    std::string kind = "epsilon";
    double eps = 0.0;
    int K = 10;
    int m = 2;
    double vol = 1.0;
    std::string rule = "union";

    void add(CLI::App* app)
    {
        app->add_option("--kind", kind, "epsilon | self-tuning | knn-self-tuning")->capture_default_str();
        app->add_option("--eps", eps, "epsilon (default 2 n^-1/4)");
        app->add_option("--K", K, "neighbour count for self-tuning graphs")->capture_default_str();
        app->add_option("--m", m, "intrinsic dimension for epsilon weights")->capture_default_str();
        app->add_option("--vol", vol, "volume factor for epsilon weights")->capture_default_str();
        app->add_option("--rule", rule, "union | mutual")->capture_default_str();
    }

    GraphRecipe recipe(Eigen::Index n) const
    {
        GraphRecipe r;
        if (kind == "epsilon")
            r.kind = GraphKind::epsilon;
        else if (kind == "self-tuning")
            r.kind = GraphKind::self_tuning;
        else if (kind == "knn-self-tuning")
            r.kind = GraphKind::knn_self_tuning;
        else
            throw Error(ErrorCode::unsupported_mode, "unknown graph kind '" + kind + "'");
        r.eps = eps > 0.0 ? eps : sphere_epsilon(n);
        r.K = K;
        r.m = m;
        r.vol = vol;
        r.rule = parse_knn_rule(rule);
        return r;
    }
};

std::vector<std::uint64_t> seed_range(int count)
{
    std::vector<std::uint64_t> out;
    for (int s = 0; s < count; ++s)
        out.push_back(static_cast<std::uint64_t>(s + 1));
    return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

MnistDataset load_default_mnist(const std::string& dir)
{
    const auto base = mnist_dir(dir.empty() ? fs::path("data/mnist") : fs::path(dir));
    const auto [img, lab] = find_mnist_files(base);
    return load_mnist_idx(img, lab);
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Local regularization of noisy point clouds and graph-based learning"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "sample a sphere or two-moons cloud and add noise");
    std::string gen_sampler = "sphere", gen_mode = "ambient-cube", gen_out = "cloud";
    int gen_n = 3000, gen_d = 100, gen_m = 2;
    double gen_sigma = 0.0;
    std::uint64_t gen_seed = 1;
    gen->add_option("--sampler", gen_sampler, "sphere | two-moons")->capture_default_str();
    gen->add_option("--n", gen_n)->capture_default_str();
    gen->add_option("--d", gen_d)->capture_default_str();
    gen->add_option("--m", gen_m, "sphere dimension")->capture_default_str();
    gen->add_option("--sigma", gen_sigma)->capture_default_str();
    gen->add_option("--noise-mode", gen_mode, "ambient-ball | ambient-cube | normal-space")->capture_default_str();
    gen->add_option("--seed", gen_seed)->capture_default_str();
    gen->add_option("--out", gen_out, "output stem")->capture_default_str();

    // regularize
    auto* reg = app.add_subcommand("regularize", "denoise a saved cloud");
    std::string reg_in, reg_out, reg_spec;
    reg->add_option("--in", reg_in, "input stem")->required();
    reg->add_option("--out", reg_out, "output stem")->required();
    reg->add_option("--spec", reg_spec, "ball:<r> | knn:<k> | self-tuning:<K>")->required();

    // graph
    auto* graph = app.add_subcommand("graph", "build a similarity graph and write its edge list");
    std::string graph_in, graph_out;
    GraphArgs graph_args;
    graph->add_option("--in", graph_in, "input stem")->required();
    graph->add_option("--out", graph_out, "edge list path")->required();
    graph_args.add(graph);

    // spectrum
    auto* spec = app.add_subcommand("spectrum", "smallest Laplacian eigenvalues of a saved cloud");
    std::string spec_in, spec_out;
    int spec_k = 100;
    bool spec_sphere = false, spec_normalized = false;
    GraphArgs spec_args;
    spec->add_option("--in", spec_in, "input stem")->required();
    spec->add_option("--out", spec_out, "CSV path")->required();
    spec->add_option("--count", spec_k)->capture_default_str();
    spec->add_flag("--sphere-reference", spec_sphere, "compare with l(l+1)");
    spec->add_flag("--normalized", spec_normalized, "symmetric-normalized Laplacian");
    spec_args.add(spec);

    // classify
    auto* cls = app.add_subcommand("classify", "probit classification with cross-validated regularization");
    std::string cls_in, cls_labels, cls_outdir = "classify_out", cls_grid = "identity";
    double cls_fraction = 0.01, cls_gamma = 0.1;
    int cls_repeats = 5;
    std::uint64_t cls_seed = 1;
    GraphArgs cls_args;
    cls_args.kind = "self-tuning";
    cls->add_option("--in", cls_in, "input stem")->required();
    cls->add_option("--labels", cls_labels, "ground-truth labels CSV")->required();
    cls->add_option("--out-dir", cls_outdir)->capture_default_str();
    cls->add_option("--grid", cls_grid, "comma-separated regularizers")->capture_default_str();
    cls->add_option("--label-fraction", cls_fraction)->capture_default_str();
    cls->add_option("--repeats", cls_repeats)->capture_default_str();
    cls->add_option("--seed", cls_seed)->capture_default_str();
    bool cls_stratified = false;
    cls->add_flag("--stratified", cls_stratified, "reveal labels per class in proportion to class size");
    cls->add_option("--gamma", cls_gamma)->capture_default_str();
    cls_args.add(cls);

    // bounds
    auto* bnd = app.add_subcommand("bounds", "theory calculator over a parameter grid");
    std::vector<double> bnd_r{0.05, 0.1, 0.2}, bnd_sigma{0.0, 0.005, 0.01};
    GeometryParams geo = GeometryParams::unit_sphere(2);
    double bnd_C = 1.0;
    long long bnd_n = 3000;
    bnd->add_option("--r", bnd_r)->capture_default_str();
    bnd->add_option("--sigma", bnd_sigma)->capture_default_str();
    bnd->add_option("--m", geo.m)->capture_default_str();
    bnd->add_option("--R", geo.R, "reach")->capture_default_str();
    bnd->add_option("--i0", geo.i0, "injectivity radius")->capture_default_str();
    bnd->add_option("--K", geo.K_curv, "curvature bound")->capture_default_str();
    bnd->add_option("--pmin", geo.p_min)->capture_default_str();
    bnd->add_option("--CM", geo.C_M)->capture_default_str();
    bnd->add_option("--C", bnd_C, "constant in the curvature clause")->capture_default_str();
    bnd->add_option("--n", bnd_n)->capture_default_str();

    // repro
    auto* repro = app.add_subcommand("repro", "reproduce a table or figure protocol");
    std::string repro_what, repro_out = "repro_out", repro_mode = "ambient-cube", repro_mnist;
    int repro_seeds = 5;
    repro->add_option("what", repro_what, "table1 | table3 | table4 | fig1 | fig2 | fig3")
        ->required()
        ->check(CLI::IsMember({"table1", "table3", "table4", "fig1", "fig2", "fig3"}));
    repro->add_option("--out", repro_out)->capture_default_str();
    repro->add_option("--seeds", repro_seeds, "number of seeds (1..N)")->capture_default_str();
    repro->add_option("--noise-mode", repro_mode)->capture_default_str();
    repro->add_option("--mnist-dir", repro_mnist, "overrides $MNIST_DIR and data/mnist");

    // run
    auto* run = app.add_subcommand("run", "execute an experiment config file");
    std::string run_config;
    run->add_option("config", run_config)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            NoiseSpec noise{gen_sigma, parse_noise_mode(gen_mode)};
            if (gen_sampler == "sphere") {
                const PointCloud X = sample_sphere(gen_n, gen_m, gen_d, derive_seed(gen_seed, 1));
                save_cloud(gen_out, add_noise(X, noise, derive_seed(gen_seed, 2)));
            } else if (gen_sampler == "two-moons") {
                const LabeledCloud moons = sample_two_moons(gen_n, gen_d, derive_seed(gen_seed, 1));
                save_cloud(gen_out, add_noise(moons.cloud, noise, derive_seed(gen_seed, 2)));
                save_labels(gen_out + ".labels.csv", moons.labels);
            } else {
                throw Error(ErrorCode::unsupported_mode, "unknown sampler '" + gen_sampler + "'");
            }
            std::cout << "wrote " << gen_out << ".csv\n";
        } else if (*reg) {
            const PointCloud Y = load_cloud(reg_in);
            save_cloud(reg_out, regularize(Y, parse_regularizer(reg_spec)));
            std::cout << "wrote " << reg_out << ".csv\n";
        } else if (*graph) {
            const PointCloud Y = load_cloud(graph_in);
            const SimilarityGraph g = build_graph(pairwise_distances(Y.points), graph_args.recipe(Y.n()));
            std::ofstream out(graph_out);
            g.write_edge_list(out);
            std::cout << g.edge_count() << " edges written to " << graph_out << '\n';
        } else if (*spec) {
            const PointCloud Y = load_cloud(spec_in);
            const SimilarityGraph g = build_graph(pairwise_distances(Y.points), spec_args.recipe(Y.n()));
            EigenOptions opts;
            opts.want_vectors = false;
            const Spectrum s = smallest_eigs(
                laplacian(g, spec_normalized ? LaplacianKind::symmetric_normalized : LaplacianKind::unnormalized),
                spec_k, opts);
            write_spectrum_csv(spec_out, s, spec_sphere ? sphere_spectrum(spec_k) : std::vector<double>{});
            std::cout << "wrote " << spec_out << '\n';
        } else if (*cls) {
            const PointCloud Y = load_cloud(cls_in);
            const std::vector<int> truth = load_labels(cls_labels);
            std::vector<RegularizerSpec> grid;
            std::stringstream ss(cls_grid);
            for (std::string item; std::getline(ss, item, ',');)
                grid.push_back(parse_regularizer(item));
            const int count = static_cast<int>(std::lround(cls_fraction * static_cast<double>(Y.n())));
            const LabelSet labels = reveal_labels(truth, count, derive_seed(cls_seed, 3), cls_stratified);
            const GraphRecipe recipe = cls_args.recipe(Y.n());
            fs::create_directories(cls_outdir);
            RegularizerSpec chosen = grid.front();
            if (grid.size() > 1) {
                const CvResult cv = cross_validate(Y, labels, grid, recipe, cls_repeats, derive_seed(cls_seed, 4), cls_gamma);
                write_cv_csv((fs::path(cls_outdir) / "cv.csv").string(), cv);
                chosen = cv.best;
            }
            const ClassifierResult res = classify_cloud(Y, chosen, recipe, labels, truth, cls_gamma);
            write_predictions_csv((fs::path(cls_outdir) / "predictions.csv").string(), res, truth, labels);
            std::cout << "regularizer " << chosen.describe() << ": " << res.error_unlabeled
                      << " unlabelled errors\n";
        } else if (*bnd) {
            std::cout << "r,sigma,r_minus,r_plus,eta,assumption3,failure_probability\n";
            for (double r : bnd_r) {
                for (double s : bnd_sigma) {
                    const AssumptionReport a = assumption3_check(r, s, geo, bnd_C);
                    std::string rm = "nan", rp = "nan";
                    try {
                        const RBounds b = r_bounds(r, s, geo);
                        rm = format_double(b.r_minus);
                        rp = format_double(b.r_plus);
                    } catch (const Error&) {
                    }
                    std::string verdict = a.pass ? "pass" : "fail:";
                    for (std::size_t i = 0; i < a.violated.size(); ++i)
                        verdict += (i ? "; " : " ") + a.violated[i];
                    std::cout << format_double(r) << ',' << format_double(s) << ',' << rm << ',' << rp << ','
                              << format_double(eta_bound(r, s, geo.C_M)) << ",\"" << verdict << "\","
                              << format_double(failure_probability(bnd_n, r, geo.m, geo.p_min)) << '\n';
                }
            }
        } else if (*repro) {
            fs::create_directories(repro_out);
            const NoiseMode mode = parse_noise_mode(repro_mode);
            const auto seeds = seed_range(repro_seeds);
            const auto t0 = std::chrono::steady_clock::now();
            if (repro_what == "table1") {
                SphereSetup setup;
                setup.mode = mode;
                for (auto seed : seeds) {
                    std::vector<DistanceTableRow> rows;
                    for (int k = 1; k <= 9; ++k)
                        rows.push_back(sphere_distance_row(k / 10.0, seed, setup));
                    write_distance_table_csv(fs::path(repro_out) / ("table1_seed" + std::to_string(seed) + ".csv"), rows);
                }
            } else if (repro_what == "table3") {
                MoonsSetup setup;
                setup.mode = mode;
                for (auto seed : seeds) {
                    std::vector<MoonsRow> rows;
                    for (int k = 1; k <= 7; ++k)
                        rows.push_back(two_moons_row(k / 10.0, seed, setup));
                    write_moons_csv(fs::path(repro_out) / ("table3_seed" + std::to_string(seed) + ".csv"), rows);
                }
            } else if (repro_what == "table4") {
                const MnistDataset data = load_default_mnist(repro_mnist);
                std::vector<MnistRow> rows;
                for (auto [a, b] : {std::pair{3, 8}, {5, 8}, {4, 9}, {7, 9}}) {
                    MnistSetup setup;
                    setup.a = a;
                    setup.b = b;
                    for (auto seed : seeds)
                        rows.push_back(mnist_pair_row(data, seed, setup));
                }
                write_mnist_csv(fs::path(repro_out) / "table4.csv", rows);
            } else if (repro_what == "fig1") {
                SphereSetup setup;
                setup.mode = mode;
                for (double sigma : {0.1, 0.3, 0.5})
                    write_spectra_csv(fs::path(repro_out) / ("fig1_sigma" + format_double(sigma) + ".csv"),
                                      sphere_spectra(sigma, seeds.front(), setup));
            } else if (repro_what == "fig2") {
                const double sigma = 0.5;
                const auto seed = seeds.front();
                const LabeledCloud moons = sample_two_moons(1000, 100, derive_seed(seed, 1));
                const PointCloud Y = add_noise(moons.cloud, {sigma, mode}, derive_seed(derive_seed(seed, 2), 500000));
                write_scatter_csv(fs::path(repro_out) / "fig2_scatter.csv", moons.cloud, Y, ball_average(Y, sigma),
                                  moons.labels);
            } else if (repro_what == "fig3") {
                // digits 4 and 9 before and after ball averaging at the cross-validated radius
                const MnistDataset data = load_default_mnist(repro_mnist);
                const auto seed = seeds.front();
                const MnistRow row = mnist_pair_row(data, seed, MnistSetup{});
                const MnistSubset sub = select_pair(data, 4, 9, 1000, derive_seed(seed, 5));
                PointCloud Y;
                Y.points = sub.images;
                const PointCloud Ybar = ball_average(Y, row.selected_r);
                write_image_grid_csv(fs::path(repro_out) / "fig3_grid.csv", Y.points, Ybar.points, sub.digits, 16);
            }
            std::cerr << repro_what << " finished in " << std::fixed << std::setprecision(1) << seconds_since(t0)
                      << " s\n";
        } else if (*run) {
            run_experiment(load_config(run_config));
        }
    } catch (const Error& e) {
        std::cerr << "error";
        if (!e.stage().empty())
            std::cerr << " [" << e.stage() << "]";
        std::cerr << ": " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

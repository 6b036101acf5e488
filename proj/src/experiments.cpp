#include "locreg/experiments.hpp"

#include "locreg/bounds.hpp"
#include "locreg/error.hpp"
#include "locreg/log.hpp"
#include "locreg/textio.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace locreg {

namespace {

// stream tags for derive_seed
enum Stream : std::uint64_t {
    kSample = 1,
    kNoise = 2,
    kLabels = 3,
    kFolds = 4,
    kSubset = 5,
};

std::uint64_t sigma_tag(double sigma)
{
    return static_cast<std::uint64_t>(std::llround(sigma * 1e6));
}

template <class F>
auto staged(const char* stage, F&& f) -> decltype(f())
{
    try {
        return f();
    } catch (const Error& e) {
        if (!e.stage().empty())
            throw;
        throw e.with_stage(stage);
    }
}

}  // namespace

// -- masked distance matrices ------------------------------------------------------

std::string DistanceMask::describe() const
{
    if (kind == Kind::epsilon)
        return "epsilon:" + format_double(eps);
    return "mutual-knn:" + std::to_string(K);
}

MaskedDistanceReport masked_distance_report(const Matrix& distX, const Matrix& distY, const Matrix& distYbar,
                                            const DistanceMask& mask)
{
    const Eigen::Index n = distX.rows();
    if (distY.rows() != n || distYbar.rows() != n || distX.cols() != n || distY.cols() != n ||
        distYbar.cols() != n)
        throw Error(ErrorCode::shape_mismatch, "distance matrices must all be n×n for the same n");

    std::vector<std::vector<char>> nb;
    if (mask.kind == DistanceMask::Kind::mutual_knn) {
        const auto nn = knn_indices(distX, mask.K);
        nb.assign(n, std::vector<char>(n, 0));
        for (Eigen::Index i = 0; i < n; ++i)
            for (int j : nn[i])
                nb[i][j] = 1;
    } else if (!(mask.eps > 0.0)) {
        throw Error(ErrorCode::invalid_argument, "epsilon mask needs eps > 0");
    }

    MaskedDistanceReport rep;
    rep.mask = mask;
    double raw = 0.0, reg = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const bool keep = mask.kind == DistanceMask::Kind::epsilon ? distX(i, j) < mask.eps
                                                                       : (nb[i][j] && nb[j][i]);
            if (!keep)
                continue;
            ++rep.pair_count;
            const double a = distX(i, j) - distY(i, j);
            const double b = distX(i, j) - distYbar(i, j);
            raw += a * a;
            reg += b * b;
        }
    }
    // both triangles of the symmetric matrices
    rep.frob_raw = std::sqrt(2.0 * raw);
    rep.frob_reg = std::sqrt(2.0 * reg);
    return rep;
}

MaskedDistanceReport masked_distance_report(const PointCloud& X, const PointCloud& Y, const PointCloud& Ybar,
                                            const DistanceMask& mask)
{
    if (X.n() != Y.n() || X.n() != Ybar.n())
        throw Error(ErrorCode::shape_mismatch, "clouds differ in size");
    return masked_distance_report(pairwise_distances(X.points), pairwise_distances(Y.points),
                                  pairwise_distances(Ybar.points), mask);
}

// -- sphere protocols ----------------------------------------------------------------

double sphere_radius_schedule(double sigma)
{
    if (std::abs(sigma - 0.1) < 1e-12)
        return std::sqrt(sigma) / 3.0;
    return std::sqrt(sigma);
}

double sphere_epsilon(long long n)
{
    return 2.0 * std::pow(static_cast<double>(n), -0.25);
}

SphereClouds sphere_clouds(double sigma, std::uint64_t seed, const SphereSetup& setup)
{
    SphereClouds c;
    c.X = staged("sample", [&] { return sample_sphere(setup.n, setup.m, setup.d, derive_seed(seed, kSample)); });
    c.Y = staged("noise", [&] {
        return add_noise(c.X, {sigma, setup.mode}, derive_seed(derive_seed(seed, kNoise), sigma_tag(sigma)));
    });
    c.r = setup.r ? *setup.r : sphere_radius_schedule(sigma);
    c.Ybar = staged("regularize", [&] { return ball_average(c.Y, c.r); });
    return c;
}

DistanceTableRow sphere_distance_row(double sigma, std::uint64_t seed, const SphereSetup& setup)
{
    const SphereClouds c = sphere_clouds(sigma, seed, setup);
    DistanceTableRow row;
    row.sigma = sigma;
    row.r = c.r;
    row.eps = sphere_epsilon(setup.n);
    row.report = staged("metrics",
                        [&] { return masked_distance_report(c.X, c.Y, c.Ybar, DistanceMask::epsilon(row.eps)); });
    return row;
}

SphereSpectra sphere_spectra(double sigma, std::uint64_t seed, const SphereSetup& setup, int count)
{
    const SphereClouds c = sphere_clouds(sigma, seed, setup);
    SphereSpectra s;
    s.sigma = sigma;
    s.r = c.r;
    s.eps = sphere_epsilon(setup.n);
    const double vol = 4.0 * std::numbers::pi;
    EigenOptions opts;
    opts.want_vectors = false;
    auto spectrum_of = [&](const PointCloud& cloud) {
        const SimilarityGraph g =
            staged("graph", [&] { return epsilon_graph(pairwise_distances(cloud.points), s.eps, setup.m, vol); });
        return staged("spectrum", [&] { return smallest_eigs(laplacian(g), count, opts); });
    };
    s.X = spectrum_of(c.X);
    s.Y = spectrum_of(c.Y);
    s.Ybar = spectrum_of(c.Ybar);
    s.reference = sphere_spectrum(count);
    return s;
}

double spectrum_window_mean(const Spectrum& s, int lo, int hi)
{
    if (lo < 1 || hi > s.values.size() || lo > hi)
        throw Error(ErrorCode::invalid_argument, "eigenvalue window out of range");
    return s.values.segment(lo - 1, hi - lo + 1).mean();
}

double sphere_low_mode_deviation(const Spectrum& s)
{
    const double a = std::abs(spectrum_window_mean(s, 2, 4) - 2.0) / 2.0;
    const double b = std::abs(spectrum_window_mean(s, 5, 9) - 6.0) / 6.0;
    return std::max(a, b);
}

DistanceBoundPoint distance_bound_point(double sigma, double r, std::uint64_t seed, int n, int d, int m)
{
    SphereSetup setup;
    setup.n = n;
    setup.d = d;
    setup.m = m;
    setup.mode = NoiseMode::normal_space;
    setup.r = r;
    const SphereClouds c = sphere_clouds(sigma, seed, setup);
    const Matrix dX = pairwise_distances(c.X.points);
    const Matrix dY = pairwise_distances(c.Y.points);
    const Matrix dB = pairwise_distances(c.Ybar.points);
    const Matrix gram = c.X.points * c.X.points.transpose();

    DistanceBoundPoint p;
    p.sigma = sigma;
    p.r = r;
    p.shape = eta_bound(r, sigma, 1.0);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            // geodesic distance on the unit sphere
            if (std::acos(std::clamp(gram(i, j), -1.0, 1.0)) > r)
                continue;
            ++p.pairs;
            p.measured = std::max(p.measured, std::abs(dX(i, j) - dB(i, j)));
            p.raw = std::max(p.raw, std::abs(dX(i, j) - dY(i, j)));
        }
    return p;
}

// -- two moons -----------------------------------------------------------------------

MoonsRow two_moons_row(double sigma, std::uint64_t seed, const MoonsSetup& setup)
{
    const LabeledCloud moons =
        staged("sample", [&] { return sample_two_moons(setup.n, setup.d, derive_seed(seed, kSample)); });
    const PointCloud Y = staged("noise", [&] {
        return add_noise(moons.cloud, {sigma, setup.mode}, derive_seed(derive_seed(seed, kNoise), sigma_tag(sigma)));
    });
    MoonsRow row;
    row.sigma = sigma;
    row.r = setup.r ? *setup.r : sigma;
    const Matrix dY = pairwise_distances(Y.points);
    const PointCloud Ybar = staged("regularize", [&] {
        return row.r > 0.0 ? ball_average(Y, dY, row.r) : Y;
    });
    const Matrix dB = pairwise_distances(Ybar.points);
    const Matrix dX = pairwise_distances(moons.cloud.points);

    const int count = static_cast<int>(std::lround(setup.label_fraction * setup.n));
    const LabelSet labels = reveal_labels(moons.labels, count, derive_seed(seed, kLabels), setup.stratified_labels);
    row.labels = count;

    GraphRecipe recipe;
    recipe.kind = GraphKind::self_tuning;
    recipe.K = setup.K;
    auto fit = [&](const Matrix& dist) {
        const ProbitBasis basis = staged("graph", [&] { return probit_basis(build_graph(dist, recipe)); });
        return staged("classify", [&] {
            return fit_probit(make_probit_problem(basis, labels, setup.gamma), {}, &moons.labels);
        });
    };
    row.error_raw = fit(dY).error_unlabeled;
    row.error_reg = fit(dB).error_unlabeled;
    row.report = staged("metrics", [&] { return masked_distance_report(dX, dY, dB, DistanceMask::mutual_knn(setup.K)); });
    return row;
}

// -- MNIST -----------------------------------------------------------------------------

MnistRow mnist_pair_row(const MnistDataset& data, std::uint64_t seed, const MnistSetup& setup)
{
    const MnistSubset sub =
        staged("load", [&] { return select_pair(data, setup.a, setup.b, setup.n, derive_seed(seed, kSubset)); });
    PointCloud Y;
    Y.points = sub.images;
    Y.m = 1;
    const Matrix dY = pairwise_distances(Y.points);

    MnistRow row;
    row.a = setup.a;
    row.b = setup.b;
    row.seed = seed;
    row.labels = static_cast<int>(std::lround(setup.label_fraction * setup.n));
    const LabelSet labels = reveal_labels(sub.labels, row.labels, derive_seed(seed, kLabels), setup.stratified_labels);

    GraphRecipe fc;
    fc.kind = GraphKind::self_tuning;
    fc.K = setup.K;
    GraphRecipe knn = fc;
    knn.kind = GraphKind::knn_self_tuning;

    auto errors = [&](const Matrix& dist, const GraphRecipe& recipe) {
        const ProbitBasis basis = staged("graph", [&] { return probit_basis(build_graph(dist, recipe)); });
        return staged("classify", [&] {
            return fit_probit(make_probit_problem(basis, labels, setup.gamma), {}, &sub.labels).error_unlabeled;
        });
    };
    row.fc_raw = errors(dY, fc);
    row.knn_raw = errors(dY, knn);

    std::vector<double> nearest(setup.n);
    for (int i = 0; i < setup.n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (int j = 0; j < setup.n; ++j)
            if (j != i)
                best = std::min(best, dY(i, j));
        nearest[i] = best;
    }
    std::nth_element(nearest.begin(), nearest.begin() + setup.n / 2, nearest.end());
    const double median = nearest[setup.n / 2];
    std::vector<RegularizerSpec> grid;
    for (double f : setup.radius_factors)
        grid.push_back(RegularizerSpec::ball(f * median));

    row.cv = staged("cross-validate", [&] {
        return cross_validate(Y, labels, grid, fc, setup.cv_repeats, derive_seed(seed, kFolds), setup.gamma);
    });
    row.selected_r = row.cv.best.value;
    const PointCloud Ybar = staged("regularize", [&] { return ball_average(Y, dY, row.selected_r); });
    const Matrix dB = pairwise_distances(Ybar.points);
    row.fc_reg = errors(dB, fc);
    row.knn_reg = errors(dB, knn);
    return row;
}

// -- configuration ---------------------------------------------------------------------

namespace {

std::string trimmed(std::string s)
{
    s.erase(0, s.find_first_not_of(" \t"));
    s.erase(s.find_last_not_of(" \t") + 1);
    return s;
}

// Whole-string numeric parse; trailing junk is an error.
template <class T>
T parse_value(const std::string& raw, const std::string& key)
{
    const std::string text = trimmed(raw);
    T value{};
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc() || end != text.data() + text.size())
        throw Error(ErrorCode::config_error, "bad value '" + raw + "' for " + key);
    return value;
}

template <class T>
std::vector<T> parse_list(const std::string& text, const std::string& key)
{
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (trimmed(item).empty())
            continue;
        out.push_back(parse_value<T>(item, key));
    }
    return out;
}

template <class T>
T number(const boost::property_tree::ptree& tree, const std::string& key, T fallback)
{
    const auto s = tree.get_optional<std::string>(key);
    return s ? parse_value<T>(*s, key) : fallback;
}

std::vector<RegularizerSpec> parse_regularizer_list(const std::string& text)
{
    std::vector<RegularizerSpec> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (!item.empty())
            out.push_back(parse_regularizer(item));
    }
    return out;
}

GraphKind parse_graph_kind(const std::string& text)
{
    if (text == "epsilon")
        return GraphKind::epsilon;
    if (text == "self-tuning")
        return GraphKind::self_tuning;
    if (text == "knn-self-tuning" || text == "knn")
        return GraphKind::knn_self_tuning;
    throw Error(ErrorCode::config_error, "unknown graph kind '" + text + "'");
}

}  // namespace

void ExperimentConfig::validate() const
{
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::config_error, msg); };
    if (task != "distance-table" && task != "spectrum" && task != "classify")
        fail("task must be distance-table, spectrum or classify");
    if (sampler != "sphere" && sampler != "two-moons" && sampler != "mnist")
        fail("sampler must be sphere, two-moons or mnist");
    if (seeds.empty())
        fail("at least one seed is required");
    if (n < 2)
        fail("n must be at least 2");
    if (sampler == "sphere" && (m < 1 || m + 1 > d))
        fail("sphere needs 1 <= m and m+1 <= d");
    if (sampler == "two-moons" && d < 2)
        fail("two moons need d >= 2");
    if (sampler == "mnist" && task != "classify")
        fail("MNIST has no clean reference; only the classify task is offered");
    if (task == "spectrum" && sampler != "sphere")
        fail("the spectrum task compares against the sphere spectrum");
    if (task == "classify" && sampler == "sphere")
        fail("classification needs a labelled sampler");
    for (double s : sigmas)
        if (!(s >= 0.0))
            fail("noise levels must be non-negative");
    if (sampler == "mnist" && sigmas.size() > 1)
        fail("MNIST runs take no added noise");
    for (const auto& r : regularizers)
        r.validate(n);
    if (task == "spectrum" && (eigenvalues < 1 || eigenvalues > n))
        fail("eigenvalue count must lie in 1..n");
    if (task == "classify") {
        if (!(label_fraction >= 0.0 && label_fraction <= 1.0))
            fail("label fraction must be in [0, 1]");
        if (std::lround(label_fraction * n) < 1)
            throw Error(ErrorCode::insufficient_labels, "label fraction gives no labelled points");
        if (graph.K < 1 || graph.K >= n)
            fail("graph K must satisfy 1 <= K < n");
        if (cv_repeats < 1)
            fail("cv repeats must be positive");
    }
    if (mask != "epsilon" && mask != "mutual-knn")
        fail("mask must be epsilon or mutual-knn");
    if (!(gamma > 0.0))
        fail("gamma must be positive");
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(path.string(), tree);
    } catch (const pt::ini_parser_error& e) {
        throw Error(ErrorCode::config_error, e.what());
    }
    ExperimentConfig cfg;
    try {
        cfg.task = tree.get("run.task", cfg.task);
        cfg.output = tree.get("run.output", cfg.output.string());
        if (auto s = tree.get_optional<std::string>("run.seeds"))
            cfg.seeds = parse_list<std::uint64_t>(*s, "run.seeds");

        cfg.sampler = tree.get("sampler.kind", cfg.sampler);
        if (cfg.sampler == "two-moons") {
            cfg.n = 1000;
            cfg.graph.kind = GraphKind::self_tuning;
            cfg.graph.K = 10;
            cfg.mask = "mutual-knn";
        } else if (cfg.sampler == "mnist") {
            cfg.n = 1000;
            cfg.graph.kind = GraphKind::self_tuning;
            cfg.graph.K = 20;
            cfg.label_fraction = 0.04;
            cfg.sigmas = {0.0};
        }
        cfg.n = number(tree, "sampler.n", cfg.n);
        cfg.d = number(tree, "sampler.d", cfg.d);
        cfg.m = number(tree, "sampler.m", cfg.m);
        if (auto s = tree.get_optional<std::string>("sampler.digits")) {
            const auto digits = parse_list<std::uint64_t>(*s, "sampler.digits");
            if (digits.size() != 2)
                throw Error(ErrorCode::config_error, "sampler.digits needs two digits");
            cfg.digit_a = static_cast<int>(digits[0]);
            cfg.digit_b = static_cast<int>(digits[1]);
        }
        cfg.mnist_dir = tree.get("sampler.mnist_dir", std::string());

        if (auto s = tree.get_optional<std::string>("noise.sigma"))
            cfg.sigmas = parse_list<double>(*s, "noise.sigma");
        if (auto s = tree.get_optional<std::string>("noise.mode"))
            cfg.noise_mode = parse_noise_mode(*s);

        if (auto s = tree.get_optional<std::string>("regularizer.grid"))
            cfg.regularizers = parse_regularizer_list(*s);

        if (auto s = tree.get_optional<std::string>("graph.kind"))
            cfg.graph.kind = parse_graph_kind(*s);
        if (auto s = tree.get_optional<std::string>("graph.eps"); s && *s != "auto") {
            cfg.graph.eps = parse_value<double>(*s, "graph.eps");
            cfg.eps_auto = false;
        }
        cfg.graph.K = number(tree, "graph.K", cfg.graph.K);
        cfg.graph.vol = number(tree, "graph.vol", cfg.sampler == "sphere" ? 4.0 * std::numbers::pi : 1.0);
        if (auto s = tree.get_optional<std::string>("graph.rule"))
            cfg.graph.rule = parse_knn_rule(*s);

        cfg.eigenvalues = number(tree, "task.eigenvalues", cfg.eigenvalues);
        cfg.label_fraction = number(tree, "task.label_fraction", cfg.label_fraction);
        cfg.cv_repeats = number(tree, "task.repeats", cfg.cv_repeats);
        cfg.gamma = number(tree, "task.gamma", cfg.gamma);
        if (auto s = tree.get_optional<std::string>("task.stratified_labels")) {
            if (*s != "true" && *s != "false")
                throw Error(ErrorCode::config_error, "task.stratified_labels must be true or false");
            cfg.stratified_labels = *s == "true";
        }
        cfg.mask = tree.get("task.mask", cfg.mask);
        if (cfg.mask == "mutual-knn" && cfg.graph.K == 0)
            cfg.graph.K = 10;
    } catch (const pt::ptree_bad_data& e) {
        throw Error(ErrorCode::config_error, e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::config_error)
            throw;
        throw Error(ErrorCode::config_error, e.what());
    } catch (const std::invalid_argument& e) {
        throw Error(ErrorCode::config_error, e.what());
    }
    cfg.graph.m = cfg.m;
    cfg.validate();
    return cfg;
}

// -- CSV writers -----------------------------------------------------------------------

namespace {

std::ofstream open_csv(const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw Error(ErrorCode::io_error, "cannot write " + path.string());
    return out;
}

std::string ratio(double a, double b)
{
    return b > 0.0 ? format_double(a / b) : "inf";
}

}  // namespace

void write_distance_table_csv(const std::filesystem::path& path, const std::vector<DistanceTableRow>& rows)
{
    auto out = open_csv(path);
    out << "sigma,r,mask,pairs,frob_raw,frob_reg,ratio\n";
    for (const auto& row : rows)
        out << format_double(row.sigma) << ',' << format_double(row.r) << ',' << row.report.mask.describe() << ','
            << row.report.pair_count << ',' << format_double(row.report.frob_raw) << ','
            << format_double(row.report.frob_reg) << ',' << ratio(row.report.frob_raw, row.report.frob_reg) << '\n';
}

void write_moons_csv(const std::filesystem::path& path, const std::vector<MoonsRow>& rows)
{
    auto out = open_csv(path);
    out << "sigma,r,labels,error_raw,error_reg,mask,frob_raw,frob_reg\n";
    for (const auto& row : rows)
        out << format_double(row.sigma) << ',' << format_double(row.r) << ',' << row.labels << ','
            << row.error_raw << ',' << row.error_reg << ',' << row.report.mask.describe() << ','
            << format_double(row.report.frob_raw) << ',' << format_double(row.report.frob_reg) << '\n';
}

void write_mnist_csv(const std::filesystem::path& path, const std::vector<MnistRow>& rows)
{
    auto out = open_csv(path);
    out << "pair,seed,labels,selected_r,fc_raw,fc_reg,knn_raw,knn_reg\n";
    for (const auto& row : rows)
        out << row.a << '&' << row.b << ',' << row.seed << ',' << row.labels << ','
            << format_double(row.selected_r) << ',' << row.fc_raw << ',' << row.fc_reg << ',' << row.knn_raw
            << ',' << row.knn_reg << '\n';
}

void write_spectra_csv(const std::filesystem::path& path, const SphereSpectra& s)
{
    auto out = open_csv(path);
    out << "index,reference,X,Y,Ybar\n";
    for (std::size_t i = 0; i < s.reference.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        out << i + 1 << ',' << format_double(s.reference[i]) << ',' << format_double(s.X.values(k)) << ','
            << format_double(s.Y.values(k)) << ',' << format_double(s.Ybar.values(k)) << '\n';
    }
}

void write_scatter_csv(const std::filesystem::path& path, const PointCloud& X, const PointCloud& Y,
                       const PointCloud& Ybar, const std::vector<int>& labels)
{
    auto out = open_csv(path);
    out << "index,label,x0,x1,y0,y1,ybar0,ybar1\n";
    for (Eigen::Index i = 0; i < X.n(); ++i)
        out << i << ',' << labels.at(i) << ',' << format_double(X.points(i, 0)) << ','
            << format_double(X.points(i, 1)) << ',' << format_double(Y.points(i, 0)) << ','
            << format_double(Y.points(i, 1)) << ',' << format_double(Ybar.points(i, 0)) << ','
            << format_double(Ybar.points(i, 1)) << '\n';
}

void write_image_grid_csv(const std::filesystem::path& path, const Matrix& raw, const Matrix& reg,
                          const std::vector<int>& digits, int count)
{
    auto out = open_csv(path);
    out << "index,digit,which";
    for (Eigen::Index p = 0; p < raw.cols(); ++p)
        out << ",p" << p;
    out << '\n';
    const Eigen::Index rows = std::min<Eigen::Index>(count, raw.rows());
    for (const char* which : {"raw", "regularized"}) {
        const Matrix& src = std::string(which) == "raw" ? raw : reg;
        for (Eigen::Index i = 0; i < rows; ++i) {
            out << i << ',' << digits.at(i) << ',' << which;
            for (Eigen::Index p = 0; p < src.cols(); ++p)
                out << ',' << format_double(src(i, p));
            out << '\n';
        }
    }
}

// -- runs ------------------------------------------------------------------------------

namespace {

class RunLog {
public:
    explicit RunLog(const std::filesystem::path& path) : out_(path)
    {
        if (!out_)
            throw Error(ErrorCode::io_error, "cannot write " + path.string());
    }
    void line(const std::string& text) { out_ << text << '\n' << std::flush; }

private:
    std::ofstream out_;
};

std::string join_regularizers(const std::vector<RegularizerSpec>& specs)
{
    std::string s;
    for (std::size_t i = 0; i < specs.size(); ++i)
        s += (i ? "," : "") + specs[i].describe();
    return s;
}

void write_manifest(const ExperimentConfig& cfg)
{
    KeyValues kv;
    kv.set("run.task", cfg.task);
    std::string seeds;
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
        seeds += (i ? "," : "") + std::to_string(cfg.seeds[i]);
        const std::string tag = "seed." + std::to_string(cfg.seeds[i]) + ".";
        kv.set(tag + "sample", std::to_string(derive_seed(cfg.seeds[i], kSample)));
        kv.set(tag + "labels", std::to_string(derive_seed(cfg.seeds[i], kLabels)));
        kv.set(tag + "folds", std::to_string(derive_seed(cfg.seeds[i], kFolds)));
        kv.set(tag + "subset", std::to_string(derive_seed(cfg.seeds[i], kSubset)));
        for (double s : cfg.sigmas)
            kv.set(tag + "noise.sigma:" + format_double(s),
                   std::to_string(derive_seed(derive_seed(cfg.seeds[i], kNoise), sigma_tag(s))));
    }
    kv.set("run.seeds", seeds);
    kv.set("sampler.kind", cfg.sampler);
    kv.set("sampler.n", std::to_string(cfg.n));
    kv.set("sampler.d", std::to_string(cfg.d));
    kv.set("sampler.m", std::to_string(cfg.m));
    if (cfg.sampler == "mnist") {
        kv.set("sampler.digits", std::to_string(cfg.digit_a) + "," + std::to_string(cfg.digit_b));
        kv.set("sampler.mnist_dir", cfg.mnist_dir.string());
    }
    std::string sig;
    for (std::size_t i = 0; i < cfg.sigmas.size(); ++i)
        sig += (i ? "," : "") + format_double(cfg.sigmas[i]);
    kv.set("noise.sigma", sig);
    kv.set("noise.mode", to_string(cfg.noise_mode));
    kv.set("regularizer.grid", cfg.regularizers.empty() ? "default" : join_regularizers(cfg.regularizers));
    kv.set("graph.kind", to_string(cfg.graph.kind));
    kv.set("graph.eps", cfg.eps_auto ? "auto(" + format_double(sphere_epsilon(cfg.n)) + ")"
                                     : format_double(cfg.graph.eps));
    kv.set("graph.K", std::to_string(cfg.graph.K));
    kv.set("graph.vol", format_double(cfg.graph.vol));
    kv.set("graph.rule", to_string(cfg.graph.rule));
    kv.set("task.eigenvalues", std::to_string(cfg.eigenvalues));
    kv.set("task.label_fraction", format_double(cfg.label_fraction));
    kv.set("task.repeats", std::to_string(cfg.cv_repeats));
    kv.set("task.gamma", format_double(cfg.gamma));
    kv.set("task.stratified_labels", cfg.stratified_labels ? "true" : "false");
    kv.set("task.mask", cfg.mask);
    kv.write(cfg.output / "manifest.txt");
}

std::string sigma_label(double sigma)
{
    return format_double(sigma);
}

PointCloud sample_for(const ExperimentConfig& cfg, std::uint64_t seed, std::vector<int>& labels)
{
    return staged("sample", [&] {
        if (cfg.sampler == "sphere")
            return sample_sphere(cfg.n, cfg.m, cfg.d, derive_seed(seed, kSample));
        LabeledCloud moons = sample_two_moons(cfg.n, cfg.d, derive_seed(seed, kSample));
        labels = moons.labels;
        return moons.cloud;
    });
}

RegularizerSpec default_regularizer(const ExperimentConfig& cfg, double sigma)
{
    if (cfg.sampler == "sphere")
        return RegularizerSpec::ball(sphere_radius_schedule(sigma));
    if (sigma > 0.0)
        return RegularizerSpec::ball(sigma);
    return RegularizerSpec::identity();
}

void run_distance_table(const ExperimentConfig& cfg, RunLog& log)
{
    std::ofstream out(cfg.output / "distance_table.csv");
    out << "seed,sigma,regularizer,mask,pairs,frob_raw,frob_reg,ratio\n";
    for (auto seed : cfg.seeds) {
        std::vector<int> labels;
        const PointCloud X = sample_for(cfg, seed, labels);
        const Matrix dX = pairwise_distances(X.points);
        for (double sigma : cfg.sigmas) {
            const PointCloud Y = staged("noise", [&] {
                return add_noise(X, {sigma, cfg.noise_mode}, derive_seed(derive_seed(seed, kNoise), sigma_tag(sigma)));
            });
            const Matrix dY = pairwise_distances(Y.points);
            const auto specs = cfg.regularizers.empty() ? std::vector{default_regularizer(cfg, sigma)} : cfg.regularizers;
            for (const auto& spec : specs) {
                const PointCloud Ybar = staged("regularize", [&] { return regularize(Y, spec, &dY); });
                const DistanceMask mask = cfg.mask == "epsilon"
                                              ? DistanceMask::epsilon(cfg.eps_auto ? sphere_epsilon(cfg.n) : cfg.graph.eps)
                                              : DistanceMask::mutual_knn(cfg.graph.K);
                const auto rep = staged("metrics", [&] {
                    return masked_distance_report(dX, dY, pairwise_distances(Ybar.points), mask);
                });
                out << seed << ',' << format_double(sigma) << ',' << spec.describe() << ',' << mask.describe() << ','
                    << rep.pair_count << ',' << format_double(rep.frob_raw) << ',' << format_double(rep.frob_reg)
                    << ',' << ratio(rep.frob_raw, rep.frob_reg) << '\n';
                log.line("seed=" + std::to_string(seed) + " sigma=" + sigma_label(sigma) + " " + spec.describe() +
                         " frob_raw=" + format_double(rep.frob_raw) + " frob_reg=" + format_double(rep.frob_reg));
            }
        }
    }
}

void run_spectrum(const ExperimentConfig& cfg, RunLog& log)
{
    const double eps = cfg.eps_auto ? sphere_epsilon(cfg.n) : cfg.graph.eps;
    EigenOptions opts;
    opts.want_vectors = false;
    const auto reference = sphere_spectrum(cfg.eigenvalues);
    for (auto seed : cfg.seeds) {
        std::vector<int> labels;
        const PointCloud X = sample_for(cfg, seed, labels);
        auto spectrum_of = [&](const PointCloud& c) {
            const auto g = staged("graph", [&] { return epsilon_graph(pairwise_distances(c.points), eps, cfg.m, cfg.graph.vol); });
            return staged("spectrum", [&] { return smallest_eigs(laplacian(g), cfg.eigenvalues, opts); });
        };
        const Spectrum sX = spectrum_of(X);
        const std::string stem = "spectrum_seed" + std::to_string(seed);
        write_spectrum_csv(cfg.output / (stem + "_X.csv"), sX, reference);
        for (double sigma : cfg.sigmas) {
            const PointCloud Y = staged("noise", [&] {
                return add_noise(X, {sigma, cfg.noise_mode}, derive_seed(derive_seed(seed, kNoise), sigma_tag(sigma)));
            });
            const auto specs = cfg.regularizers.empty() ? std::vector{default_regularizer(cfg, sigma)} : cfg.regularizers;
            const std::string tag = stem + "_sigma" + sigma_label(sigma);
            write_spectrum_csv(cfg.output / (tag + "_Y.csv"), spectrum_of(Y), reference);
            for (const auto& spec : specs) {
                const PointCloud Ybar = staged("regularize", [&] { return regularize(Y, spec); });
                const Spectrum s = spectrum_of(Ybar);
                write_spectrum_csv(cfg.output / (tag + "_" + spec.describe() + ".csv"), s, reference);
                log.line("seed=" + std::to_string(seed) + " sigma=" + sigma_label(sigma) + " " + spec.describe() +
                         " low-mode deviation=" + format_double(sphere_low_mode_deviation(s)));
            }
        }
    }
}

void run_classify(const ExperimentConfig& cfg, RunLog& log)
{
    std::optional<MnistDataset> mnist;
    if (cfg.sampler == "mnist") {
        mnist = staged("load", [&] {
            const auto dir = mnist_dir(cfg.mnist_dir.empty() ? std::filesystem::path("data/mnist") : cfg.mnist_dir);
            const auto [img, lab] = find_mnist_files(dir);
            return load_mnist_idx(img, lab);
        });
    }
    std::ofstream out(cfg.output / "classify.csv");
    out << "seed,sigma,regularizer,graph,labels,error_unlabeled\n";
    for (auto seed : cfg.seeds) {
        PointCloud X;
        std::vector<int> truth;
        if (mnist) {
            const MnistSubset sub = staged("load", [&] {
                return select_pair(*mnist, cfg.digit_a, cfg.digit_b, cfg.n, derive_seed(seed, kSubset));
            });
            X.points = sub.images;
            truth = sub.labels;
        } else {
            X = sample_for(cfg, seed, truth);
        }
        const int count = static_cast<int>(std::lround(cfg.label_fraction * cfg.n));
        const LabelSet labels = reveal_labels(truth, count, derive_seed(seed, kLabels), cfg.stratified_labels);
        for (double sigma : cfg.sigmas) {
            const PointCloud Y = mnist ? X : staged("noise", [&] {
                return add_noise(X, {sigma, cfg.noise_mode}, derive_seed(derive_seed(seed, kNoise), sigma_tag(sigma)));
            });
            auto specs = cfg.regularizers.empty() ? std::vector{default_regularizer(cfg, sigma)} : cfg.regularizers;
            RegularizerSpec chosen = specs.front();
            const std::string tag = "seed" + std::to_string(seed) + "_sigma" + sigma_label(sigma);
            if (specs.size() > 1) {
                const CvResult cv = staged("cross-validate", [&] {
                    return cross_validate(Y, labels, specs, cfg.graph, cfg.cv_repeats, derive_seed(seed, kFolds), cfg.gamma);
                });
                write_cv_csv((cfg.output / ("cv_" + tag + ".csv")).string(), cv);
                chosen = cv.best;
            }
            for (const auto& spec : {RegularizerSpec::identity(), chosen}) {
                const ClassifierResult res = staged("classify", [&] {
                    return classify_cloud(Y, spec, cfg.graph, labels, truth, cfg.gamma);
                });
                write_predictions_csv((cfg.output / ("predictions_" + tag + "_" + spec.describe() + ".csv")).string(),
                                      res, truth, labels);
                out << seed << ',' << format_double(sigma) << ',' << spec.describe() << ','
                    << to_string(cfg.graph.kind) << ',' << labels.size() << ',' << res.error_unlabeled << '\n';
                log.line("seed=" + std::to_string(seed) + " sigma=" + sigma_label(sigma) + " " + spec.describe() +
                         " errors=" + std::to_string(res.error_unlabeled));
                if (spec.kind == chosen.kind && spec.value == chosen.value)
                    break;  // identity was the chosen regularizer
            }
        }
    }
}

}  // namespace

void run_experiment(const ExperimentConfig& cfg)
{
    cfg.validate();
    std::filesystem::create_directories(cfg.output);
    write_manifest(cfg);
    RunLog log(cfg.output / "run.log");
    std::vector<std::string> warnings;
    const WarningSink previous = set_warning_sink([&](const std::string& msg) { warnings.push_back(msg); });
    try {
        if (cfg.task == "distance-table")
            run_distance_table(cfg, log);
        else if (cfg.task == "spectrum")
            run_spectrum(cfg, log);
        else
            run_classify(cfg, log);
    } catch (...) {
        set_warning_sink(previous);
        for (const auto& w : warnings)
            log.line("warning: " + w);
        throw;
    }
    set_warning_sink(previous);
    for (const auto& w : warnings)
        log.line("warning: " + w);
    log.line("done");
}

}  // namespace locreg

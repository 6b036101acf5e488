#include "locreg/regularize.hpp"

#include "locreg/error.hpp"
#include "locreg/textio.hpp"

#include <cmath>

namespace locreg {

PointCloud ball_average(const PointCloud& Y, double r)
{
    return ball_average(Y, pairwise_distances(Y.points), r);
}

PointCloud ball_average(const PointCloud& Y, const Matrix& dist, double r)
{
    if (!(r > 0.0))
        throw Error(ErrorCode::invalid_argument, "ball radius must be positive");
    const Eigen::Index n = Y.n();
    PointCloud out = Y;
#pragma omp parallel for schedule(dynamic, 16)
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(Y.d());
        int count = 0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (dist(i, j) < r) {
                sum += Y.points.row(j);
                ++count;
            }
        }
        out.points.row(i) = sum / count;
    }
    return out;
}

PointCloud knn_average(const PointCloud& Y, int k)
{
    return knn_average(Y, pairwise_distances(Y.points), k);
}

PointCloud knn_average(const PointCloud& Y, const Matrix& dist, int k)
{
    const auto nn = knn_indices(dist, k);
    PointCloud out = Y;
    for (Eigen::Index i = 0; i < Y.n(); ++i) {
        Eigen::RowVectorXd sum = Y.points.row(i);
        for (int j : nn[i])
            sum += Y.points.row(j);
        out.points.row(i) = sum / (k + 1);
    }
    return out;
}

PointCloud self_tuning_average(const PointCloud& Y, const SimilarityGraph& W)
{
    if (W.n() != Y.n())
        throw Error(ErrorCode::shape_mismatch, "graph and cloud sizes differ");
    PointCloud out = Y;
    if (W.is_dense()) {
        const Matrix& w = W.dense_weights();
        const Vector rows = w.rowwise().sum();
        for (Eigen::Index i = 0; i < rows.size(); ++i)
            if (!(rows(i) > 0.0))
                throw Error(ErrorCode::zero_row_sum, "row " + std::to_string(i) + " of W sums to zero");
        out.points = (w * Y.points).array().colwise() / rows.array();
        return out;
    }
    Matrix sum = Y.points;
    Vector mass = Vector::Ones(Y.n());
    for (const auto& e : W.edges()) {
        sum.row(e.i) += e.w * Y.points.row(e.j);
        sum.row(e.j) += e.w * Y.points.row(e.i);
        mass(e.i) += e.w;
        mass(e.j) += e.w;
    }
    out.points = sum.array().colwise() / mass.array();
    return out;
}

std::string RegularizerSpec::describe() const
{
    switch (kind) {
    case RegularizerKind::identity: return "identity";
    case RegularizerKind::clean_oracle: return "oracle";
    case RegularizerKind::ball: return "ball:" + format_double(value);
    case RegularizerKind::knn: return "knn:" + std::to_string(static_cast<int>(value));
    case RegularizerKind::self_tuning: return "self-tuning:" + std::to_string(static_cast<int>(value));
    }
    return "unknown";
}

void RegularizerSpec::validate(Eigen::Index n) const
{
    switch (kind) {
    case RegularizerKind::ball:
        if (!(value > 0.0))
            throw Error(ErrorCode::invalid_argument, "ball radius must be positive");
        break;
    case RegularizerKind::knn:
    case RegularizerKind::self_tuning:
        if (value != std::floor(value) || value < 1 || value >= static_cast<double>(n))
            throw Error(ErrorCode::invalid_k, "need an integer 1 <= k < n in " + describe());
        break;
    default:
        break;
    }
}

RegularizerSpec parse_regularizer(const std::string& text)
{
    if (text == "identity" || text == "none")
        return RegularizerSpec::identity();
    if (text == "oracle")
        return RegularizerSpec::clean_oracle();
    const auto colon = text.find(':');
    if (colon == std::string::npos)
        throw Error(ErrorCode::config_error, "cannot parse regularizer '" + text + "'");
    const std::string head = text.substr(0, colon);
    const std::string arg = text.substr(colon + 1);
    double value = 0.0;
    std::size_t used = 0;
    try {
        value = std::stod(arg, &used);
    } catch (const std::logic_error&) {
        used = 0;
    }
    if (used == 0 || used != arg.size() || !(value > 0.0) || !std::isfinite(value))
        throw Error(ErrorCode::config_error, "regularizer '" + text + "' needs a positive number");
    if (head == "ball")
        return RegularizerSpec::ball(value);
    if (head == "knn" || head == "self-tuning") {
        if (value != std::floor(value) || value > 1e9)
            throw Error(ErrorCode::config_error, "regularizer '" + text + "' needs an integer");
        const int k = static_cast<int>(value);
        return head == "knn" ? RegularizerSpec::knn(k) : RegularizerSpec::self_tuning(k);
    }
    throw Error(ErrorCode::config_error, "unknown regularizer '" + text + "'");
}

PointCloud regularize(const PointCloud& Y, const RegularizerSpec& spec, const Matrix* dist)
{
    spec.validate(Y.n());
    Matrix local;
    auto distances = [&]() -> const Matrix& {
        if (dist)
            return *dist;
        local = pairwise_distances(Y.points);
        return local;
    };
    switch (spec.kind) {
    case RegularizerKind::identity:
        return Y;
    case RegularizerKind::clean_oracle: {
        if (!Y.clean)
            throw Error(ErrorCode::unsupported_mode, "oracle regularizer needs clean positions");
        PointCloud out = Y;
        out.points = *Y.clean;
        return out;
    }
    case RegularizerKind::ball:
        return ball_average(Y, distances(), spec.value);
    case RegularizerKind::knn:
        return knn_average(Y, distances(), static_cast<int>(spec.value));
    case RegularizerKind::self_tuning:
        return self_tuning_average(Y, self_tuning_graph(distances(), static_cast<int>(spec.value)));
    }
    return Y;
}

}  // namespace locreg

#pragma once

#include "locreg/graph.hpp"
#include "locreg/pointcloud.hpp"

#include <string>

namespace locreg {

/// Mean of all rows strictly within distance r of each row (self included).
PointCloud ball_average(const PointCloud& Y, double r);
PointCloud ball_average(const PointCloud& Y, const Matrix& dist, double r);

/// Mean of each row and its k nearest neighbours (k+1 rows).
PointCloud knn_average(const PointCloud& Y, int k);
PointCloud knn_average(const PointCloud& Y, const Matrix& dist, int k);

/// Row-normalized global average Σ_j W(i,j) y_j / Σ_j W(i,j). The diagonal of
/// a dense W takes part; sparse graphs contribute their edges plus weight 1 on
/// self.
PointCloud self_tuning_average(const PointCloud& Y, const SimilarityGraph& W);

enum class RegularizerKind { identity, ball, knn, self_tuning, clean_oracle };

/// One regularizer choice. `value` is r for ball, k for knn and K for
/// self-tuning; unused otherwise.
struct RegularizerSpec {
    RegularizerKind kind = RegularizerKind::identity;
    double value = 0.0;

    static RegularizerSpec identity() { return {RegularizerKind::identity, 0.0}; }
    static RegularizerSpec ball(double r) { return {RegularizerKind::ball, r}; }
    static RegularizerSpec knn(int k) { return {RegularizerKind::knn, static_cast<double>(k)}; }
    static RegularizerSpec self_tuning(int K) { return {RegularizerKind::self_tuning, static_cast<double>(K)}; }
    /// Snaps every point back to its clean position; for tests and sanity runs.
    static RegularizerSpec clean_oracle() { return {RegularizerKind::clean_oracle, 0.0}; }

    std::string describe() const;
    /// Throws invalid-argument / invalid-k for a cloud with n points.
    void validate(Eigen::Index n) const;
};

/// Parses "identity", "oracle", "ball:<r>", "knn:<k>", "self-tuning:<K>".
RegularizerSpec parse_regularizer(const std::string& text);

/// Applies the regularizer. `dist` may be passed to reuse Y's distances.
PointCloud regularize(const PointCloud& Y, const RegularizerSpec& spec, const Matrix* dist = nullptr);

}  // namespace locreg

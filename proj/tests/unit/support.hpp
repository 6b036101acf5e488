#pragma once

#include "locreg/pointcloud.hpp"

#include <filesystem>
#include <initializer_list>
#include <random>
#include <string>

namespace testing_support {

/// Scalars placed on the first axis of R^d.
inline locreg::PointCloud line_cloud(std::initializer_list<double> xs, int d = 3)
{
    locreg::PointCloud c;
    c.points = locreg::Matrix::Zero(static_cast<Eigen::Index>(xs.size()), d);
    Eigen::Index i = 0;
    for (double x : xs)
        c.points(i++, 0) = x;
    return c;
}

inline locreg::PointCloud random_cloud(int n, int d, std::uint64_t seed, double scale = 1.0)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    locreg::PointCloud c;
    c.points.resize(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j)
            c.points(i, j) = u(rng);
    return c;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / ("locreg_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing_support

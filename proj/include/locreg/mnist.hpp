#pragma once

#include "locreg/pointcloud.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace locreg {

struct MnistDataset {
    Matrix images;                 ///< one row per image, pixels scaled to [0,1]
    std::vector<int> labels;       ///< digits 0..9
    int rows = 0;
    int cols = 0;
};

/// Reads an image/label IDX pair (magic 2051 and 2049). Files ending in .gz
/// are decompressed on the fly.
MnistDataset load_mnist_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

/// Writes an IDX pair; `gzip` compresses both files.
void write_mnist_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                     const MnistDataset& data, bool gzip = false);

struct MnistSubset {
    Matrix images;
    std::vector<int> digits;   ///< original digit per row
    std::vector<int> labels;   ///< a → +1, b → −1
    std::vector<int> source;   ///< row index in the full dataset
    int a = 0;
    int b = 0;
};

/// n images drawn uniformly without replacement from the union of digits a
/// and b. Throws insufficient-data when fewer exist.
MnistSubset select_pair(const MnistDataset& data, int a, int b, int n, std::uint64_t seed);

/// Image and label paths in `dir`: the standard training file names
/// (optionally .gz) are tried first, then the bundled 10k set.
std::pair<std::filesystem::path, std::filesystem::path> find_mnist_files(const std::filesystem::path& dir);

/// $MNIST_DIR if set, else `fallback`.
std::filesystem::path mnist_dir(const std::filesystem::path& fallback);

}  // namespace locreg

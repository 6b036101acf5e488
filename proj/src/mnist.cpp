#include "locreg/mnist.hpp"

#include "locreg/error.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>

namespace locreg {

namespace {

// Whole file contents; gzread passes plain files through unchanged.
std::vector<unsigned char> read_all(const std::filesystem::path& path)
{
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f)
        throw Error(ErrorCode::io_error, "cannot open " + path.string());
    std::vector<unsigned char> out;
    unsigned char buf[1 << 16];
    for (;;) {
        const int got = gzread(f, buf, sizeof buf);
        if (got < 0) {
            gzclose(f);
            throw Error(ErrorCode::truncated_file, "corrupt compressed stream in " + path.string());
        }
        if (got == 0)
            break;
        out.insert(out.end(), buf, buf + got);
    }
    gzclose(f);
    return out;
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t at)
{
    return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
           std::uint32_t{b[at + 3]};
}

void put_be32(std::vector<unsigned char>& b, std::uint32_t v)
{
    b.push_back(static_cast<unsigned char>(v >> 24));
    b.push_back(static_cast<unsigned char>(v >> 16));
    b.push_back(static_cast<unsigned char>(v >> 8));
    b.push_back(static_cast<unsigned char>(v));
}

void write_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes, bool gzip)
{
    if (gzip) {
        gzFile f = gzopen(path.c_str(), "wb9");
        if (!f || gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size())) != static_cast<int>(bytes.size()))
            throw Error(ErrorCode::io_error, "cannot write " + path.string());
        gzclose(f);
        return;
    }
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw Error(ErrorCode::io_error, "cannot write " + path.string());
}

}  // namespace

MnistDataset load_mnist_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path)
{
    const auto img = read_all(images_path);
    const auto lab = read_all(labels_path);
    if (img.size() < 16)
        throw Error(ErrorCode::truncated_file, images_path.string() + " is shorter than its header");
    if (lab.size() < 8)
        throw Error(ErrorCode::truncated_file, labels_path.string() + " is shorter than its header");
    if (be32(img, 0) != 2051)
        throw Error(ErrorCode::bad_magic, images_path.string() + " does not start with magic 2051");
    if (be32(lab, 0) != 2049)
        throw Error(ErrorCode::bad_magic, labels_path.string() + " does not start with magic 2049");

    const std::size_t count = be32(img, 4);
    const std::size_t rows = be32(img, 8);
    const std::size_t cols = be32(img, 12);
    const std::size_t label_count = be32(lab, 4);
    if (count != label_count)
        throw Error(ErrorCode::count_mismatch, std::to_string(count) + " images but " +
                                                   std::to_string(label_count) + " labels");
    const std::size_t pixels = rows * cols;
    if (img.size() < 16 + count * pixels)
        throw Error(ErrorCode::truncated_file, images_path.string() + " ends before its last image");
    if (lab.size() < 8 + count)
        throw Error(ErrorCode::truncated_file, labels_path.string() + " ends before its last label");

    MnistDataset data;
    data.rows = static_cast<int>(rows);
    data.cols = static_cast<int>(cols);
    data.images.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(pixels));
    data.labels.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t p = 0; p < pixels; ++p)
            data.images(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) =
                img[16 + i * pixels + p] / 255.0;
        data.labels[i] = lab[8 + i];
    }
    return data;
}

void write_mnist_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                     const MnistDataset& data, bool gzip)
{
    const auto count = static_cast<std::uint32_t>(data.images.rows());
    std::vector<unsigned char> img, lab;
    put_be32(img, 2051);
    put_be32(img, count);
    put_be32(img, static_cast<std::uint32_t>(data.rows));
    put_be32(img, static_cast<std::uint32_t>(data.cols));
    for (Eigen::Index i = 0; i < data.images.rows(); ++i)
        for (Eigen::Index p = 0; p < data.images.cols(); ++p)
            img.push_back(static_cast<unsigned char>(std::lround(std::clamp(data.images(i, p), 0.0, 1.0) * 255.0)));
    put_be32(lab, 2049);
    put_be32(lab, count);
    for (int l : data.labels)
        lab.push_back(static_cast<unsigned char>(l));
    write_bytes(images_path, img, gzip);
    write_bytes(labels_path, lab, gzip);
}

MnistSubset select_pair(const MnistDataset& data, int a, int b, int n, std::uint64_t seed)
{
    if (a == b)
        throw Error(ErrorCode::invalid_argument, "digit pair must be two different digits");
    std::vector<int> pool;
    for (std::size_t i = 0; i < data.labels.size(); ++i)
        if (data.labels[i] == a || data.labels[i] == b)
            pool.push_back(static_cast<int>(i));
    if (n < 1 || static_cast<std::size_t>(n) > pool.size())
        throw Error(ErrorCode::insufficient_data, "requested " + std::to_string(n) + " images but only " +
                                                      std::to_string(pool.size()) + " are available");
    std::mt19937_64 rng(seed);
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(n);
    std::sort(pool.begin(), pool.end());

    MnistSubset out;
    out.a = a;
    out.b = b;
    out.images.resize(n, data.images.cols());
    for (int r = 0; r < n; ++r) {
        out.images.row(r) = data.images.row(pool[r]);
        out.digits.push_back(data.labels[pool[r]]);
        out.labels.push_back(data.labels[pool[r]] == a ? 1 : -1);
    }
    out.source = std::move(pool);
    return out;
}

std::pair<std::filesystem::path, std::filesystem::path> find_mnist_files(const std::filesystem::path& dir)
{
    const std::pair<const char*, const char*> names[] = {
        {"train-images-idx3-ubyte", "train-labels-idx1-ubyte"},
        {"train-images.idx3-ubyte", "train-labels.idx1-ubyte"},
        {"t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"},
        {"mnist-10k-images-idx3-ubyte", "mnist-10k-labels-idx1-ubyte"},
    };
    for (const auto& [img, lab] : names) {
        for (const char* ext : {"", ".gz"}) {
            const auto ip = dir / (std::string(img) + ext);
            const auto lp = dir / (std::string(lab) + ext);
            if (std::filesystem::exists(ip) && std::filesystem::exists(lp))
                return {ip, lp};
        }
    }
    throw Error(ErrorCode::io_error, "no MNIST IDX files found in " + dir.string());
}

std::filesystem::path mnist_dir(const std::filesystem::path& fallback)
{
    if (const char* env = std::getenv("MNIST_DIR"); env && *env)
        return env;
    return fallback;
}

}  // namespace locreg

#ifndef ICAFUSION_TEST_UTIL_HPP
#define ICAFUSION_TEST_UTIL_HPP

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "icafusion/data.hpp"
#include "icafusion/rng.hpp"
#include "icafusion/tensor.hpp"

namespace testutil {

using icafusion::Raster8;
using icafusion::Rng;
using icafusion::Shape;
using icafusion::Tensor;

template <typename T>
Tensor<T> random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor<T> t(s);
    for (auto& v : t) v = static_cast<T>(lo + (hi - lo) * rng.uniform());
    return t;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    return m;
}

inline double rel_err(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-10});
    return std::abs(analytic - numeric) / denom;
}

/// Bright Gaussian blob on a dark background (synthetic infrared source).
inline Raster8 blob_image(int h, int w, double ci, double cj, double sigma, Rng& rng) {
    Raster8 img(h, w);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            const double d2 = (i - ci) * (i - ci) + (j - cj) * (j - cj);
            const double v = 20.0 + 215.0 * std::exp(-d2 / (2 * sigma * sigma)) +
                             8.0 * rng.uniform();
            img.at(i, j) = static_cast<std::uint8_t>(std::min(255.0, std::max(0.0, v)));
        }
    return img;
}

/// High-frequency texture (synthetic visible source).
inline Raster8 texture_image(int h, int w, double fi, double fj, Rng& rng) {
    Raster8 img(h, w);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            const double v = 128.0 + 60.0 * std::sin(fi * i) * std::cos(fj * j) +
                             40.0 * ((i / 2 + j / 2) % 2 ? 1.0 : -1.0) + 10.0 * rng.uniform();
            img.at(i, j) = static_cast<std::uint8_t>(std::min(255.0, std::max(0.0, v)));
        }
    return img;
}

inline Raster8 random_image(int h, int w, Rng& rng) {
    Raster8 img(h, w);
    for (auto& v : img.v) v = static_cast<std::uint8_t>(rng.next_below(256));
    return img;
}

/// Unique scratch directory under the system temp dir; removed on
/// destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("icafusion_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::string str(const std::string& sub = "") const {
        return sub.empty() ? path_.string() : (path_ / sub).string();
    }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

}  // namespace testutil

#endif

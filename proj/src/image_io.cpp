#include "icafusion/image_io.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace icafusion {

namespace {

bool extension_ok(const std::string& path) {
    const auto dot = path.find_last_of('.');
    if (dot == std::string::npos) return false;
    std::string ext = path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == "png" || ext == "bmp" || ext == "tif" || ext == "tiff";
}

}  // namespace

Raster8 read_image_gray(const std::string& path) {
    if (!extension_ok(path))
        throw IoError("unsupported image format (PNG/BMP/TIFF only): " + path);
    cv::Mat m = cv::imread(path, cv::IMREAD_UNCHANGED);
    if (m.empty()) throw IoError("cannot read image: " + path);
    if (m.depth() != CV_8U)
        throw IoError("only 8-bit images are accepted (no silent rescaling): " + path);

    Raster8 out(m.rows, m.cols);
    if (m.channels() == 1) {
        for (int i = 0; i < m.rows; ++i)
            for (int j = 0; j < m.cols; ++j) out.at(i, j) = m.at<std::uint8_t>(i, j);
    } else if (m.channels() == 3 || m.channels() == 4) {
        // OpenCV loads BGR(A); BT.601 luma, rounded to nearest.
        for (int i = 0; i < m.rows; ++i)
            for (int j = 0; j < m.cols; ++j) {
                const std::uint8_t* px = m.ptr<std::uint8_t>(i) + j * m.channels();
                const double y = 0.299 * px[2] + 0.587 * px[1] + 0.114 * px[0];
                out.at(i, j) = static_cast<std::uint8_t>(std::lround(y));
            }
    } else {
        throw IoError("unsupported channel count " + std::to_string(m.channels()) + ": " + path);
    }
    return out;
}

void write_image_gray(const std::string& path, const Raster8& img) {
    if (!extension_ok(path))
        throw IoError("unsupported output format (PNG/BMP/TIFF only): " + path);
    cv::Mat m(img.h, img.w, CV_8UC1);
    for (int i = 0; i < img.h; ++i)
        for (int j = 0; j < img.w; ++j) m.at<std::uint8_t>(i, j) = img.at(i, j);
    if (!cv::imwrite(path, m)) throw IoError("cannot write image: " + path);
}

}  // namespace icafusion

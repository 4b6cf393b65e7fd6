#ifndef ICAFUSION_IMAGE_IO_HPP
#define ICAFUSION_IMAGE_IO_HPP

#include <string>

#include "icafusion/data.hpp"

namespace icafusion {

/// Reads an 8-bit PNG/BMP/TIFF raster. RGB input is reduced to BT.601 luma
/// (round(0.299 R + 0.587 G + 0.114 B)); 16-bit input and other formats are
/// rejected with an IoError.
Raster8 read_image_gray(const std::string& path);

/// Writes an 8-bit grayscale image; format chosen by extension (PNG/BMP/TIFF).
void write_image_gray(const std::string& path, const Raster8& img);

}  // namespace icafusion

#endif

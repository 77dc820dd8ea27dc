#pragma once

#include <string>

#include "colorvar/image.hpp"

namespace colorvar {

/// Reads a PNG or JPEG file (dispatch on magic bytes) as 3-channel RGB.
Image read_image(const std::string& path);

void write_png(const std::string& path, const Image& img);

}  // namespace colorvar

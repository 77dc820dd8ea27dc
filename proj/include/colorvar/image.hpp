#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "colorvar/linalg.hpp"

namespace colorvar {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

/// 8-bit RGB raster, row-major, interleaved channels.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;  // height * width * 3

  Image() = default;
  Image(int h, int w) : height(h), width(w), data(static_cast<size_t>(h) * w * 3, 0) {}

  static Image filled(int h, int w, Rgb c);

  std::uint8_t& at(int y, int x, int c) { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  std::uint8_t at(int y, int x, int c) const { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }

  Rgb pixel(int y, int x) const { return {at(y, x, 0), at(y, x, 1), at(y, x, 2)}; }
  void set_pixel(int y, int x, Rgb c) { at(y, x, 0) = c.r; at(y, x, 1) = c.g; at(y, x, 2) = c.b; }

  bool empty() const { return height == 0 || width == 0; }
  bool operator==(const Image&) const = default;
};

struct Rect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open [x0,x1) x [y0,y1)
  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool operator==(const Rect&) const = default;
};

Image crop(const Image& img, const Rect& r);

/// Bilinear resize (half-pixel centers, PIL-style), rounded back to uint8.
Image resize_bilinear(const Image& img, int out_h, int out_w);

Image hflip(const Image& img);

/// Paste src into dst with its top-left corner at (y, x); clips at borders.
void paste(Image& dst, const Image& src, int y, int x);

void fill_rect(Image& img, const Rect& r, Rgb c);
void fill_circle(Image& img, int cy, int cx, int radius, Rgb c);
void fill_diamond(Image& img, int cy, int cx, int radius, Rgb c);

/// Channel-mean grayscale, (r+g+b)/3 with integer rounding, replicated to 3 channels.
Image to_gray_channel_mean(const Image& img);

/// ITU-R 601 luma of one pixel in [0,255].
inline double luma(Rgb c) { return 0.299 * c.r + 0.587 * c.g + 0.114 * c.b; }

/// RGB <-> HSV on doubles; h in [0,360), s,v in [0,1]; rgb channels in [0,255].
void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v);
void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b);

/// Rotates a color's hue by `degrees` about the achromatic axis. Exactly
/// preserves r+g+b before rounding; suitable for palette recoloring.
std::array<double, 3> rotate_hue_gray_axis(double r, double g, double b, double degrees);

/// Flattens to a CHW feature column scaled to [0,1].
template <class Scalar>
Vec<Scalar> image_to_chw(const Image& img) {
  const int hw = img.height * img.width;
  Vec<Scalar> v(3 * hw);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        v[c * hw + y * img.width + x] = Scalar(img.at(y, x, c)) / Scalar(255);
  return v;
}

}  // namespace colorvar

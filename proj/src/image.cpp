#include "colorvar/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace colorvar {

Image Image::filled(int h, int w, Rgb c) {
  Image img(h, w);
  for (size_t i = 0; i < img.data.size(); i += 3) {
    img.data[i] = c.r;
    img.data[i + 1] = c.g;
    img.data[i + 2] = c.b;
  }
  return img;
}

Image crop(const Image& img, const Rect& r) {
  if (r.x0 < 0 || r.y0 < 0 || r.x1 > img.width || r.y1 > img.height || r.width() <= 0 ||
      r.height() <= 0)
    throw std::invalid_argument("crop: rect out of bounds or degenerate");
  Image out(r.height(), r.width());
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(r.y0 + y, r.x0 + x, c);
  return out;
}

Image resize_bilinear(const Image& img, int out_h, int out_w) {
  if (img.empty() || out_h <= 0 || out_w <= 0)
    throw std::invalid_argument("resize_bilinear: empty input or non-positive target size");
  if (out_h == img.height && out_w == img.width) return img;
  Image out(out_h, out_w);
  const double sy = static_cast<double>(img.height) / out_h;
  const double sx = static_cast<double>(img.width) / out_w;
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(img.height - 1));
    int y0 = static_cast<int>(std::floor(fy));
    int y1 = std::min(y0 + 1, img.height - 1);
    double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(img.width - 1));
      int x0 = static_cast<int>(std::floor(fx));
      int x1 = std::min(x0 + 1, img.width - 1);
      double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        double top = (1.0 - wx) * img.at(y0, x0, c) + wx * img.at(y0, x1, c);
        double bot = (1.0 - wx) * img.at(y1, x0, c) + wx * img.at(y1, x1, c);
        double v = (1.0 - wy) * top + wy * bot;
        out.at(y, x, c) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
      }
    }
  }
  return out;
}

Image hflip(const Image& img) {
  Image out(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
  return out;
}

void paste(Image& dst, const Image& src, int y, int x) {
  for (int sy = 0; sy < src.height; ++sy) {
    int dy = y + sy;
    if (dy < 0 || dy >= dst.height) continue;
    for (int sx = 0; sx < src.width; ++sx) {
      int dx = x + sx;
      if (dx < 0 || dx >= dst.width) continue;
      for (int c = 0; c < 3; ++c) dst.at(dy, dx, c) = src.at(sy, sx, c);
    }
  }
}

void fill_rect(Image& img, const Rect& r, Rgb c) {
  int y0 = std::max(0, r.y0), y1 = std::min(img.height, r.y1);
  int x0 = std::max(0, r.x0), x1 = std::min(img.width, r.x1);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) img.set_pixel(y, x, c);
}

void fill_circle(Image& img, int cy, int cx, int radius, Rgb c) {
  for (int y = std::max(0, cy - radius); y <= std::min(img.height - 1, cy + radius); ++y)
    for (int x = std::max(0, cx - radius); x <= std::min(img.width - 1, cx + radius); ++x)
      if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= radius * radius) img.set_pixel(y, x, c);
}

void fill_diamond(Image& img, int cy, int cx, int radius, Rgb c) {
  for (int y = std::max(0, cy - radius); y <= std::min(img.height - 1, cy + radius); ++y)
    for (int x = std::max(0, cx - radius); x <= std::min(img.width - 1, cx + radius); ++x)
      if (std::abs(y - cy) + std::abs(x - cx) <= radius) img.set_pixel(y, x, c);
}

Image to_gray_channel_mean(const Image& img) {
  Image out(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      int sum = img.at(y, x, 0) + img.at(y, x, 1) + img.at(y, x, 2);
      auto g = static_cast<std::uint8_t>((sum + 1) / 3);
      out.set_pixel(y, x, {g, g, g});
    }
  return out;
}

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
  r /= 255.0; g /= 255.0; b /= 255.0;
  double mx = std::max({r, g, b}), mn = std::min({r, g, b});
  double d = mx - mn;
  v = mx;
  s = mx > 0 ? d / mx : 0.0;
  if (d == 0) {
    h = 0.0;
    return;
  }
  if (mx == r) h = 60.0 * std::fmod((g - b) / d, 6.0);
  else if (mx == g) h = 60.0 * ((b - r) / d + 2.0);
  else h = 60.0 * ((r - g) / d + 4.0);
  if (h < 0) h += 360.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  h = std::fmod(h, 360.0);
  if (h < 0) h += 360.0;
  double c = v * s;
  double x = c * (1.0 - std::fabs(std::fmod(h / 60.0, 2.0) - 1.0));
  double m = v - c;
  double rp, gp, bp;
  if (h < 60) { rp = c; gp = x; bp = 0; }
  else if (h < 120) { rp = x; gp = c; bp = 0; }
  else if (h < 180) { rp = 0; gp = c; bp = x; }
  else if (h < 240) { rp = 0; gp = x; bp = c; }
  else if (h < 300) { rp = x; gp = 0; bp = c; }
  else { rp = c; gp = 0; bp = x; }
  r = (rp + m) * 255.0;
  g = (gp + m) * 255.0;
  b = (bp + m) * 255.0;
}

std::array<double, 3> rotate_hue_gray_axis(double r, double g, double b, double degrees) {
  // Orthonormal basis of the plane orthogonal to (1,1,1)/sqrt(3).
  static const double u[3] = {2.0 / std::sqrt(6.0), -1.0 / std::sqrt(6.0), -1.0 / std::sqrt(6.0)};
  static const double w[3] = {0.0, 1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0)};
  const double mean = (r + g + b) / 3.0;
  const double d[3] = {r - mean, g - mean, b - mean};
  const double cu = d[0] * u[0] + d[1] * u[1] + d[2] * u[2];
  const double cw = d[0] * w[0] + d[1] * w[1] + d[2] * w[2];
  const double th = degrees * M_PI / 180.0;
  const double cu2 = cu * std::cos(th) - cw * std::sin(th);
  const double cw2 = cu * std::sin(th) + cw * std::cos(th);
  return {mean + cu2 * u[0] + cw2 * w[0], mean + cu2 * u[1] + cw2 * w[1],
          mean + cu2 * u[2] + cw2 * w[2]};
}

}  // namespace colorvar

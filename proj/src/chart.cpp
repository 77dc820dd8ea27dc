#include "colorvar/chart.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <unordered_map>

namespace colorvar {

namespace {

using Glyph = std::array<std::uint8_t, 7>;  // 7 rows of 5 bits, MSB = left column

const std::unordered_map<char, Glyph>& font() {
  static const std::unordered_map<char, Glyph> f = {
      {'A', {0b01110, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001}},
      {'B', {0b11110, 0b10001, 0b10001, 0b11110, 0b10001, 0b10001, 0b11110}},
      {'C', {0b01110, 0b10001, 0b10000, 0b10000, 0b10000, 0b10001, 0b01110}},
      {'D', {0b11110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b11110}},
      {'E', {0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b11111}},
      {'F', {0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b10000}},
      {'G', {0b01110, 0b10001, 0b10000, 0b10111, 0b10001, 0b10001, 0b01111}},
      {'H', {0b10001, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001}},
      {'I', {0b01110, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110}},
      {'J', {0b00111, 0b00010, 0b00010, 0b00010, 0b00010, 0b10010, 0b01100}},
      {'K', {0b10001, 0b10010, 0b10100, 0b11000, 0b10100, 0b10010, 0b10001}},
      {'L', {0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b11111}},
      {'M', {0b10001, 0b11011, 0b10101, 0b10101, 0b10001, 0b10001, 0b10001}},
      {'N', {0b10001, 0b11001, 0b10101, 0b10011, 0b10001, 0b10001, 0b10001}},
      {'O', {0b01110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110}},
      {'P', {0b11110, 0b10001, 0b10001, 0b11110, 0b10000, 0b10000, 0b10000}},
      {'Q', {0b01110, 0b10001, 0b10001, 0b10001, 0b10101, 0b10010, 0b01101}},
      {'R', {0b11110, 0b10001, 0b10001, 0b11110, 0b10100, 0b10010, 0b10001}},
      {'S', {0b01111, 0b10000, 0b10000, 0b01110, 0b00001, 0b00001, 0b11110}},
      {'T', {0b11111, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100}},
      {'U', {0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110}},
      {'V', {0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01010, 0b00100}},
      {'W', {0b10001, 0b10001, 0b10001, 0b10101, 0b10101, 0b11011, 0b10001}},
      {'X', {0b10001, 0b10001, 0b01010, 0b00100, 0b01010, 0b10001, 0b10001}},
      {'Y', {0b10001, 0b10001, 0b01010, 0b00100, 0b00100, 0b00100, 0b00100}},
      {'Z', {0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b10000, 0b11111}},
      {'0', {0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110}},
      {'1', {0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110}},
      {'2', {0b01110, 0b10001, 0b00001, 0b00110, 0b01000, 0b10000, 0b11111}},
      {'3', {0b11110, 0b00001, 0b00001, 0b01110, 0b00001, 0b00001, 0b11110}},
      {'4', {0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010}},
      {'5', {0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110}},
      {'6', {0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110}},
      {'7', {0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000}},
      {'8', {0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110}},
      {'9', {0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100}},
      {'.', {0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b00110, 0b00110}},
      {',', {0b00000, 0b00000, 0b00000, 0b00000, 0b00110, 0b00100, 0b01000}},
      {'-', {0b00000, 0b00000, 0b00000, 0b01110, 0b00000, 0b00000, 0b00000}},
      {'_', {0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b11111}},
      {':', {0b00000, 0b00110, 0b00110, 0b00000, 0b00110, 0b00110, 0b00000}},
      {'/', {0b00001, 0b00010, 0b00010, 0b00100, 0b01000, 0b01000, 0b10000}},
      {'=', {0b00000, 0b01110, 0b00000, 0b01110, 0b00000, 0b00000, 0b00000}},
      {'%', {0b11001, 0b11010, 0b00010, 0b00100, 0b01000, 0b01011, 0b10011}},
      {'(', {0b00010, 0b00100, 0b01000, 0b01000, 0b01000, 0b00100, 0b00010}},
      {')', {0b01000, 0b00100, 0b00010, 0b00010, 0b00010, 0b00100, 0b01000}},
      {' ', {0, 0, 0, 0, 0, 0, 0}},
  };
  return f;
}

}  // namespace

int draw_text(Image& img, int x, int y, const std::string& text, Rgb color, int scale) {
  if (scale < 1) scale = 1;
  const auto& f = font();
  for (char raw : text) {
    const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(raw)));
    auto it = f.find(c);
    if (it != f.end()) {
      const Glyph& g = it->second;
      for (int row = 0; row < 7; ++row) {
        for (int col = 0; col < 5; ++col) {
          if ((g[row] >> (4 - col)) & 1) {
            for (int dy = 0; dy < scale; ++dy) {
              for (int dx = 0; dx < scale; ++dx) {
                const int py = y + row * scale + dy, px = x + col * scale + dx;
                if (py < 0 || py >= img.height || px < 0 || px >= img.width) continue;
                img.set_pixel(py, px, color);
              }
            }
          }
        }
      }
    }
    x += 6 * scale;
  }
  return x;
}

int text_width(const std::string& text, int scale) {
  if (scale < 1) scale = 1;
  return static_cast<int>(text.size()) * 6 * scale;
}

Image render_bar_chart(const std::vector<std::string>& group_names,
                       const std::vector<std::string>& series_names, const Matd& values) {
  const int groups = static_cast<int>(group_names.size());
  const int series = static_cast<int>(series_names.size());
  if (groups == 0 || series == 0) throw std::invalid_argument("bar chart: nothing to draw");
  if (values.rows() != groups || values.cols() != series) {
    throw std::invalid_argument("bar chart: values shape does not match labels");
  }

  const Rgb kWhite{255, 255, 255}, kBlack{20, 20, 20}, kGrid{210, 210, 210};
  const std::vector<Rgb> palette = {
      {68, 119, 170}, {238, 102, 119}, {34, 136, 51}, {204, 187, 68},
      {102, 204, 238}, {170, 51, 119}, {187, 187, 187},
  };

  const int bar_w = 18, bar_gap = 3, group_gap = 26;
  const int group_w = series * (bar_w + bar_gap) - bar_gap;
  const int margin_l = 46, margin_r = 14, margin_top = 30, margin_bottom = 26;
  const int plot_h = 240;
  const int plot_w = groups * (group_w + group_gap) - group_gap;

  int width = margin_l + plot_w + margin_r;
  // Leave room for the legend row along the top.
  int legend_w = 10;
  for (const std::string& s : series_names) legend_w += 14 + text_width(s) + 14;
  width = std::max(width, legend_w + margin_l);
  const int height = margin_top + plot_h + margin_bottom;

  Image img = Image::filled(height, width, kWhite);
  const int base_y = margin_top + plot_h;

  double vmax = 1.0;
  for (int g = 0; g < groups; ++g) {
    for (int s = 0; s < series; ++s) vmax = std::max(vmax, values(g, s));
  }

  // Horizontal gridlines with axis labels at quarter steps of the range.
  for (int q = 0; q <= 4; ++q) {
    const double frac = q / 4.0;
    const int y = base_y - static_cast<int>(std::lround(frac * plot_h));
    for (int x = margin_l; x < margin_l + plot_w; ++x) img.set_pixel(y, x, kGrid);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.2f", frac * vmax);
    draw_text(img, 4, y - 3, buf, kBlack);
  }

  // Legend.
  int lx = margin_l;
  for (int s = 0; s < series; ++s) {
    const Rgb c = palette[s % palette.size()];
    fill_rect(img, Rect{lx, 8, lx + 10, 18}, c);
    lx = draw_text(img, lx + 14, 9, series_names[s], kBlack) + 14;
  }

  for (int g = 0; g < groups; ++g) {
    const int gx = margin_l + g * (group_w + group_gap);
    for (int s = 0; s < series; ++s) {
      const double v = std::clamp(values(g, s), 0.0, vmax);
      const int h = static_cast<int>(std::lround(v / vmax * plot_h));
      const int x0 = gx + s * (bar_w + bar_gap);
      fill_rect(img, Rect{x0, base_y - h, x0 + bar_w, base_y}, palette[s % palette.size()]);
    }
    const int name_w = text_width(group_names[g]);
    int tx = gx + (group_w - name_w) / 2;
    if (tx < 0) tx = 0;
    draw_text(img, tx, base_y + 6, group_names[g], kBlack);
  }

  // Axis line on top of the gridlines.
  for (int x = margin_l; x < margin_l + plot_w; ++x) img.set_pixel(base_y, x, kBlack);
  for (int y = margin_top; y <= base_y; ++y) img.set_pixel(y, margin_l, kBlack);
  return img;
}

}  // namespace colorvar

#pragma once

#include <string>
#include <vector>

#include "colorvar/image.hpp"
#include "colorvar/linalg.hpp"

namespace colorvar {

/// Draws 5x7 bitmap text (uppercased; unknown glyphs become blanks). Returns
/// the x coordinate just past the rendered string.
int draw_text(Image& img, int x, int y, const std::string& text, Rgb color, int scale = 1);

int text_width(const std::string& text, int scale = 1);

/// Grouped bar chart: one group per row of `values`, one bar per column.
/// Values are clamped at 0; the y-axis spans [0, max(1, data max)].
Image render_bar_chart(const std::vector<std::string>& group_names,
                       const std::vector<std::string>& series_names, const Matd& values);

}  // namespace colorvar

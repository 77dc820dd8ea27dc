#include "colorvar/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace colorvar {

namespace {

using json = nlohmann::json;

std::uint8_t clamp8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

double rand_real(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int rand_int(std::mt19937_64& rng, int lo, int hi) {  // inclusive
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

bool coin(std::mt19937_64& rng, double p) { return rand_real(rng, 0.0, 1.0) < p; }

// Blend toward a per-pixel (or constant) target:  out = f*img + (1-f)*target.
template <class TargetFn>
Image blend(const Image& img, double factor, TargetFn target) {
  Image out(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c)
        out.at(y, x, c) = clamp8(factor * img.at(y, x, c) + (1.0 - factor) * target(y, x, c));
  return out;
}

Image random_resized_crop(const Image& img, const AugmentOp& op, int target, std::mt19937_64& rng) {
  const double area = static_cast<double>(img.height) * img.width;
  const double log_lo = std::log(op.ratio_lo), log_hi = std::log(op.ratio_hi);
  int h = -1, w = -1, i = 0, j = 0;
  for (int attempt = 0; attempt < 10; ++attempt) {
    double target_area = area * rand_real(rng, op.scale_lo, op.scale_hi);
    double aspect = std::exp(rand_real(rng, log_lo, log_hi));
    int cw = static_cast<int>(std::lround(std::sqrt(target_area * aspect)));
    int ch = static_cast<int>(std::lround(std::sqrt(target_area / aspect)));
    if (cw > 0 && ch > 0 && cw <= img.width && ch <= img.height) {
      h = ch;
      w = cw;
      i = rand_int(rng, 0, img.height - ch);
      j = rand_int(rng, 0, img.width - cw);
      break;
    }
  }
  if (h < 0) {  // fall back to the largest centered crop with a legal ratio
    double in_ratio = static_cast<double>(img.width) / img.height;
    if (in_ratio < op.ratio_lo) {
      w = img.width;
      h = static_cast<int>(std::lround(w / op.ratio_lo));
    } else if (in_ratio > op.ratio_hi) {
      h = img.height;
      w = static_cast<int>(std::lround(h * op.ratio_hi));
    } else {
      h = img.height;
      w = img.width;
    }
    i = (img.height - h) / 2;
    j = (img.width - w) / 2;
  }
  Image cropped = crop(img, Rect{j, i, j + w, i + h});
  if (target > 0) return resize_bilinear(cropped, target, target);
  return resize_bilinear(cropped, img.height, img.width);  // keep-dims mode
}

}  // namespace

Image adjust_brightness(const Image& img, double factor) {
  return blend(img, factor, [](int, int, int) { return 0.0; });
}

Image adjust_contrast(const Image& img, double factor) {
  double sum = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) sum += std::lround(luma(img.pixel(y, x)));
  double mean = sum / (static_cast<double>(img.height) * img.width);
  return blend(img, factor, [mean](int, int, int) { return mean; });
}

Image adjust_saturation(const Image& img, double factor) {
  return blend(img, factor,
               [&img](int y, int x, int) { return double(std::lround(luma(img.pixel(y, x)))); });
}

Image adjust_hue(const Image& img, double turns) {
  Image out(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      Rgb p = img.pixel(y, x);
      double h, s, v;
      rgb_to_hsv(p.r, p.g, p.b, h, s, v);
      h = std::fmod(h + turns * 360.0 + 360.0, 360.0);
      double r, g, b;
      hsv_to_rgb(h, s, v, r, g, b);
      out.set_pixel(y, x, {clamp8(r), clamp8(g), clamp8(b)});
    }
  return out;
}

Image to_gray_luma(const Image& img) {
  Image out(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      std::uint8_t g = clamp8(luma(img.pixel(y, x)));
      out.set_pixel(y, x, {g, g, g});
    }
  return out;
}

Image gaussian_blur3(const Image& img, double sigma) {
  if (sigma <= 0) throw std::invalid_argument("gaussian_blur3: sigma must be positive");
  double k1 = std::exp(-1.0 / (2.0 * sigma * sigma));
  double norm = 1.0 + 2.0 * k1;
  double w0 = 1.0 / norm, w1 = k1 / norm;
  auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi); };
  // Separable 3-tap passes with replicated edges; rounding happens once at
  // the end so the two passes do not compound quantization error.
  std::vector<double> tmp(img.data.size());
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = w1 * img.at(y, clampi(x - 1, img.width - 1), c) + w0 * img.at(y, x, c) +
                     w1 * img.at(y, clampi(x + 1, img.width - 1), c);
        tmp[(static_cast<size_t>(y) * img.width + x) * 3 + c] = acc;
      }
  Image out(img.height, img.width);
  auto t = [&](int y, int x, int c) {
    return tmp[(static_cast<size_t>(y) * img.width + x) * 3 + c];
  };
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c)
        out.at(y, x, c) = clamp8(w1 * t(clampi(y - 1, img.height - 1), x, c) + w0 * t(y, x, c) +
                                 w1 * t(clampi(y + 1, img.height - 1), x, c));
  return out;
}

Image apply_recipe(const Image& img, const AugmentRecipe& recipe, std::mt19937_64& rng) {
  if (img.height < 8 || img.width < 8)
    throw std::invalid_argument("apply_recipe: image must be at least 8x8");
  if (recipe.resize_to < 0) throw std::invalid_argument("apply_recipe: negative resize_to");
  for (const auto& op : recipe.ops)
    if (op.prob < 0 || op.prob > 1)
      throw std::invalid_argument("apply_recipe: op probability outside [0,1]");
  Image cur = img;
  bool cropped = false;
  for (const auto& op : recipe.ops) {
    if (op.kind == "color_jitter") {
      if (coin(rng, op.prob)) {
        double b = rand_real(rng, std::max(0.0, 1.0 - op.brightness), 1.0 + op.brightness);
        double c = rand_real(rng, std::max(0.0, 1.0 - op.contrast), 1.0 + op.contrast);
        double s = rand_real(rng, std::max(0.0, 1.0 - op.saturation), 1.0 + op.saturation);
        double h = rand_real(rng, -op.hue, op.hue);
        cur = adjust_brightness(cur, b);
        cur = adjust_contrast(cur, c);
        cur = adjust_saturation(cur, s);
        cur = adjust_hue(cur, h);
      }
    } else if (op.kind == "random_grayscale") {
      if (coin(rng, op.prob)) cur = to_gray_luma(cur);
    } else if (op.kind == "hflip") {
      if (coin(rng, op.prob)) cur = hflip(cur);
    } else if (op.kind == "gaussian_blur") {
      if (coin(rng, op.prob)) cur = gaussian_blur3(cur, rand_real(rng, op.sigma_lo, op.sigma_hi));
    } else if (op.kind == "random_resized_crop") {
      cur = random_resized_crop(cur, op, recipe.resize_to, rng);
      cropped = true;
    } else {
      throw std::invalid_argument("apply_recipe: unknown op kind '" + op.kind + "'");
    }
  }
  if (recipe.resize_to > 0 && !cropped &&
      (cur.height != recipe.resize_to || cur.width != recipe.resize_to))
    cur = resize_bilinear(cur, recipe.resize_to, recipe.resize_to);
  return cur;
}

AugmentRecipe standard_ssl_recipe(int resize_to) {
  if (resize_to < 8) throw std::invalid_argument("standard_ssl_recipe: resize_to must be >= 8");
  AugmentRecipe r = color_distort_recipe();
  r.resize_to = resize_to;
  // Flip goes between grayscale and blur; the resized crop closes the chain.
  AugmentOp flip;
  flip.kind = "hflip";
  flip.prob = 0.5;
  r.ops.insert(r.ops.begin() + 2, flip);
  AugmentOp rrc;
  rrc.kind = "random_resized_crop";
  rrc.scale_lo = 0.08;
  rrc.scale_hi = 1.0;
  rrc.ratio_lo = 3.0 / 4.0;
  rrc.ratio_hi = 4.0 / 3.0;
  r.ops.push_back(rrc);
  return r;
}

AugmentRecipe color_distort_recipe() {
  AugmentRecipe r;
  r.resize_to = 0;
  AugmentOp jitter;
  jitter.kind = "color_jitter";
  jitter.prob = 0.8;
  jitter.brightness = 0.8;
  jitter.contrast = 0.8;
  jitter.saturation = 0.8;
  jitter.hue = 0.2;
  r.ops.push_back(jitter);
  AugmentOp gray;
  gray.kind = "random_grayscale";
  gray.prob = 0.2;
  r.ops.push_back(gray);
  AugmentOp blur;
  blur.kind = "gaussian_blur";
  blur.prob = 0.5;
  blur.sigma_lo = 1.0;
  blur.sigma_hi = 2.0;
  r.ops.push_back(blur);
  return r;
}

Image standard_ssl_augment(const Image& img, int resize_to, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return apply_recipe(img, standard_ssl_recipe(resize_to), rng);
}

Image color_distort(const Image& img, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return apply_recipe(img, color_distort_recipe(), rng);
}

void to_json(json& j, const AugmentOp& op) {
  j = json{{"kind", op.kind}, {"prob", op.prob}};
  if (op.kind == "random_resized_crop") {
    j["scale"] = {op.scale_lo, op.scale_hi};
    j["ratio"] = {op.ratio_lo, op.ratio_hi};
  } else if (op.kind == "color_jitter") {
    j["brightness"] = op.brightness;
    j["contrast"] = op.contrast;
    j["saturation"] = op.saturation;
    j["hue"] = op.hue;
  } else if (op.kind == "gaussian_blur") {
    j["sigma"] = {op.sigma_lo, op.sigma_hi};
  }
}

void from_json(const json& j, AugmentOp& op) {
  op = AugmentOp{};
  j.at("kind").get_to(op.kind);
  op.prob = j.value("prob", 1.0);
  if (j.contains("scale")) {
    op.scale_lo = j["scale"][0];
    op.scale_hi = j["scale"][1];
  }
  if (j.contains("ratio")) {
    op.ratio_lo = j["ratio"][0];
    op.ratio_hi = j["ratio"][1];
  }
  op.brightness = j.value("brightness", 0.0);
  op.contrast = j.value("contrast", 0.0);
  op.saturation = j.value("saturation", 0.0);
  op.hue = j.value("hue", 0.0);
  if (j.contains("sigma")) {
    op.sigma_lo = j["sigma"][0];
    op.sigma_hi = j["sigma"][1];
  }
}

void to_json(json& j, const AugmentRecipe& r) {
  j = json{{"resize_to", r.resize_to}, {"ops", r.ops}};
}

void from_json(const json& j, AugmentRecipe& r) {
  r.resize_to = j.at("resize_to").get<int>();
  r.ops = j.at("ops").get<std::vector<AugmentOp>>();
}

SliceMode slice_mode_from_string(const std::string& s) {
  if (s == "both") return SliceMode::both;
  if (s == "horiz") return SliceMode::horiz;
  if (s == "vert") return SliceMode::vert;
  throw std::invalid_argument("slice mode: expected both|horiz|vert, got '" + s + "'");
}

std::string to_string(SliceMode m) {
  switch (m) {
    case SliceMode::both: return "both";
    case SliceMode::horiz: return "horiz";
    default: return "vert";
  }
}

std::vector<SliceView> slice4(const Image& img, SliceMode mode, int resize_to) {
  if (img.height < 2 || img.width < 2)
    throw std::invalid_argument("slice4: image must be at least 2x2 to split");
  const int mx = img.width / 2, my = img.height / 2;
  std::vector<SliceView> out;
  if (mode == SliceMode::both || mode == SliceMode::vert) {
    out.push_back({"left", Rect{0, 0, mx, img.height}, {}});
    out.push_back({"right", Rect{mx, 0, img.width, img.height}, {}});
  }
  if (mode == SliceMode::both || mode == SliceMode::horiz) {
    out.push_back({"top", Rect{0, 0, img.width, my}, {}});
    out.push_back({"bottom", Rect{0, my, img.width, img.height}, {}});
  }
  for (auto& s : out) {
    Image v = crop(img, s.region);
    s.view = resize_to > 0 ? resize_bilinear(v, resize_to, resize_to) : std::move(v);
  }
  return out;
}

}  // namespace colorvar

#pragma once

#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "colorvar/image.hpp"

namespace colorvar {

/// One augmentation stage. `kind` selects which parameter block applies:
///   color_jitter        : brightness/contrast/saturation (max strength around 1)
///                         and hue (max offset in turns); applied b->c->s->h
///   random_grayscale    : prob only (601 luma, replicated)
///   hflip               : prob only
///   gaussian_blur       : sigma_lo/hi, 3x3 kernel, replicate edges
///   random_resized_crop : scale_lo/hi, ratio_lo/hi (crop then resize to target)
struct AugmentOp {
  std::string kind;
  double prob = 1.0;
  double scale_lo = 0, scale_hi = 0;
  double ratio_lo = 0, ratio_hi = 0;
  double brightness = 0, contrast = 0, saturation = 0, hue = 0;
  double sigma_lo = 0, sigma_hi = 0;
};

/// Ordered op list. resize_to > 0 resizes the final image to a square of that
/// side (random_resized_crop also targets it); 0 keeps the input dimensions,
/// which is how the photometric-only chain preserves its raster shape.
struct AugmentRecipe {
  std::vector<AugmentOp> ops;
  int resize_to = 0;
};

void to_json(nlohmann::json& j, const AugmentOp& op);
void from_json(const nlohmann::json& j, AugmentOp& op);
void to_json(nlohmann::json& j, const AugmentRecipe& r);
void from_json(const nlohmann::json& j, AugmentRecipe& r);

/// Applies the recipe with all randomness drawn from `rng` in op order, so a
/// fixed seed reproduces the exact raster. Each op rounds back to uint8.
/// Inputs under 8x8 are rejected.
Image apply_recipe(const Image& img, const AugmentRecipe& recipe, std::mt19937_64& rng);

/// Jitter -> grayscale -> hflip -> blur -> random resized crop, in that order.
AugmentRecipe standard_ssl_recipe(int resize_to);

/// Photometric-only chain (jitter -> grayscale -> blur); keeps dimensions.
AugmentRecipe color_distort_recipe();

/// Seed-parameterized one-shot forms of the two recipes.
Image standard_ssl_augment(const Image& img, int resize_to, std::uint64_t seed);
Image color_distort(const Image& img, std::uint64_t seed);

// Single-op transforms, exposed for direct use and for composing recipes.
Image adjust_brightness(const Image& img, double factor);
Image adjust_contrast(const Image& img, double factor);
Image adjust_saturation(const Image& img, double factor);
Image adjust_hue(const Image& img, double turns);  // turns in [-0.5, 0.5]
Image to_gray_luma(const Image& img);
Image gaussian_blur3(const Image& img, double sigma);

enum class SliceMode { both, horiz, vert };

SliceMode slice_mode_from_string(const std::string& s);
std::string to_string(SliceMode m);

struct SliceView {
  std::string tag;  // "left" | "right" | "top" | "bottom"
  Rect region;      // half-open region in source coordinates
  Image view;       // the slice, resized to resize_to if requested
};

/// Deterministic half-slices. mode=both gives {left, right, top, bottom} in
/// that fixed order; horiz gives {top, bottom}; vert gives {left, right}.
/// Left/right split at floor(W/2), top/bottom at floor(H/2), so each pair
/// partitions the source exactly. Inputs under 2x2 cannot be split.
std::vector<SliceView> slice4(const Image& img, SliceMode mode = SliceMode::both,
                              int resize_to = 0);

}  // namespace colorvar

#include <doctest.h>

#include <cmath>
#include <random>

#include "colorvar/augment.hpp"

using namespace colorvar;

namespace {

Image noise_image(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> d(0, 255);
  Image img(h, w);
  for (auto& b : img.data) b = static_cast<std::uint8_t>(d(rng));
  return img;
}

double pixel_variance(const Image& img) {
  double mean = 0;
  for (auto b : img.data) mean += b;
  mean /= static_cast<double>(img.data.size());
  double var = 0;
  for (auto b : img.data) var += (b - mean) * (b - mean);
  return var / static_cast<double>(img.data.size());
}

}  // namespace

TEST_CASE("standard ssl augmentation is deterministic in the seed") {
  const Image img = noise_image(48, 40, 1);
  const Image a = standard_ssl_augment(img, 32, 7);
  const Image b = standard_ssl_augment(img, 32, 7);
  CHECK(a == b);
  CHECK(a.height == 32);
  CHECK(a.width == 32);
  const Image c = standard_ssl_augment(img, 32, 8);
  CHECK(!(a == c));
}

TEST_CASE("rasters under 8x8 are rejected") {
  const Image tiny = noise_image(7, 9, 2);
  CHECK_THROWS(standard_ssl_augment(tiny, 32, 0));
  CHECK_THROWS(color_distort(tiny, 0));
}

TEST_CASE("zeroed probabilities with a full-frame crop reduce to a plain resize") {
  const Image img = noise_image(64, 64, 3);
  AugmentRecipe recipe = standard_ssl_recipe(24);
  for (auto& op : recipe.ops) {
    if (op.kind == "random_resized_crop") {
      op.scale_lo = op.scale_hi = 1.0;
      op.ratio_lo = op.ratio_hi = 1.0;
    } else {
      op.prob = 0.0;
    }
  }
  std::mt19937_64 rng(4);
  CHECK(apply_recipe(img, recipe, rng) == resize_bilinear(img, 24, 24));
}

TEST_CASE("forced grayscale yields r=g=b everywhere") {
  const Image img = noise_image(32, 32, 5);
  AugmentRecipe recipe = standard_ssl_recipe(32);
  for (auto& op : recipe.ops) op.prob = (op.kind == "random_grayscale") ? 1.0 : 0.0;
  std::mt19937_64 rng(6);
  const Image out = apply_recipe(img, recipe, rng);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const Rgb p = out.pixel(y, x);
      CHECK(p.r == p.g);
      CHECK(p.g == p.b);
    }
  }
}

TEST_CASE("color distortion keeps dimensions and is reproducible") {
  const Image img = noise_image(37, 51, 7);
  const Image a = color_distort(img, 11);
  CHECK(a.height == 37);
  CHECK(a.width == 51);
  CHECK(a == color_distort(img, 11));
}

TEST_CASE("color distortion with zeroed probabilities returns the input unchanged") {
  const Image img = noise_image(24, 24, 8);
  AugmentRecipe recipe = color_distort_recipe();
  for (auto& op : recipe.ops) op.prob = 0.0;
  std::mt19937_64 rng(9);
  CHECK(apply_recipe(img, recipe, rng) == img);
}

TEST_CASE("blur branch cannot increase variance on a noise raster") {
  const Image img = noise_image(64, 64, 10);
  AugmentRecipe recipe = color_distort_recipe();
  for (auto& op : recipe.ops) op.prob = (op.kind == "gaussian_blur") ? 1.0 : 0.0;
  std::mt19937_64 rng(12);
  const Image out = apply_recipe(img, recipe, rng);
  CHECK(pixel_variance(out) <= pixel_variance(img));
}

TEST_CASE("gaussian blur leaves constant rasters unchanged") {
  const Image img = Image::filled(16, 16, Rgb{90, 140, 10});
  CHECK(gaussian_blur3(img, 1.5) == img);
}

TEST_CASE("brightness factor scales channels toward black") {
  Image img(1, 1);
  img.set_pixel(0, 0, Rgb{100, 200, 40});
  const Image half = adjust_brightness(img, 0.5);
  CHECK(half.pixel(0, 0) == Rgb{50, 100, 20});
  CHECK(adjust_brightness(img, 0.0).pixel(0, 0) == Rgb{0, 0, 0});
  CHECK(adjust_brightness(img, 1.0) == img);
}

TEST_CASE("contrast/saturation/hue identity factors are no-ops") {
  const Image img = noise_image(16, 16, 13);
  CHECK(adjust_contrast(img, 1.0) == img);
  CHECK(adjust_saturation(img, 1.0) == img);
  CHECK(adjust_hue(img, 0.0) == img);
}

TEST_CASE("grayscale op output agrees with the 601 luma") {
  Image img(1, 1);
  img.set_pixel(0, 0, Rgb{200, 30, 120});
  const double expected = 0.299 * 200 + 0.587 * 30 + 0.114 * 120;
  const Image g = to_gray_luma(img);
  CHECK(static_cast<double>(g.pixel(0, 0).r) == doctest::Approx(expected).epsilon(0.01));
  CHECK(g.pixel(0, 0).r == g.pixel(0, 0).g);
  CHECK(g.pixel(0, 0).g == g.pixel(0, 0).b);
}

TEST_CASE("recipes serialize to json and back") {
  const AugmentRecipe recipe = standard_ssl_recipe(224);
  nlohmann::json j = recipe;
  const auto back = j.get<AugmentRecipe>();
  REQUIRE(back.ops.size() == recipe.ops.size());
  CHECK(back.resize_to == 224);
  for (size_t i = 0; i < recipe.ops.size(); ++i) {
    CHECK(back.ops[i].kind == recipe.ops[i].kind);
    CHECK(back.ops[i].prob == recipe.ops[i].prob);
  }
  // A serialized recipe behaves identically.
  const Image img = noise_image(48, 48, 14);
  std::mt19937_64 r1(3), r2(3);
  CHECK(apply_recipe(img, recipe, r1) == apply_recipe(img, back, r2));
}

TEST_CASE("standard recipe lists the five ops in order") {
  const AugmentRecipe recipe = standard_ssl_recipe(224);
  REQUIRE(recipe.ops.size() == 5);
  CHECK(recipe.ops[0].kind == "color_jitter");
  CHECK(recipe.ops[1].kind == "random_grayscale");
  CHECK(recipe.ops[2].kind == "hflip");
  CHECK(recipe.ops[3].kind == "gaussian_blur");
  CHECK(recipe.ops[4].kind == "random_resized_crop");
  const AugmentRecipe distort = color_distort_recipe();
  REQUIRE(distort.ops.size() == 3);
  CHECK(distort.ops[0].kind == "color_jitter");
  CHECK(distort.ops[1].kind == "random_grayscale");
  CHECK(distort.ops[2].kind == "gaussian_blur");
  CHECK(distort.resize_to == 0);
}

TEST_CASE("slice4 both mode gives the four half views in fixed order") {
  const Image img = noise_image(224, 224, 15);
  const auto views = slice4(img, SliceMode::both);
  REQUIRE(views.size() == 4);
  CHECK(views[0].tag == "left");
  CHECK(views[1].tag == "right");
  CHECK(views[2].tag == "top");
  CHECK(views[3].tag == "bottom");
  CHECK(views[0].view.height == 224);
  CHECK(views[0].view.width == 112);
  CHECK(views[1].view.width == 112);
  CHECK(views[2].view.height == 112);
  CHECK(views[2].view.width == 224);
  CHECK(views[3].view.height == 112);
}

TEST_CASE("slice4 horiz/vert restrict to one direction") {
  const Image img = noise_image(20, 20, 16);
  const auto h = slice4(img, SliceMode::horiz);
  REQUIRE(h.size() == 2);
  CHECK(h[0].tag == "top");
  CHECK(h[1].tag == "bottom");
  const auto v = slice4(img, SliceMode::vert);
  REQUIRE(v.size() == 2);
  CHECK(v[0].tag == "left");
  CHECK(v[1].tag == "right");
}

TEST_CASE("slices partition the source exactly, odd sizes included") {
  for (int h : {2, 9, 16}) {
    for (int w : {2, 7, 24}) {
      const Image img = noise_image(h, w, 100 + h * 31 + w);
      const auto views = slice4(img, SliceMode::both);
      // left|right reassembly
      Image lr(h, w);
      paste(lr, views[0].view, 0, 0);
      paste(lr, views[1].view, 0, views[0].view.width);
      CHECK(lr == img);
      // top/bottom reassembly
      Image tb(h, w);
      paste(tb, views[2].view, 0, 0);
      paste(tb, views[3].view, views[2].view.height, 0);
      CHECK(tb == img);
      // regions match the floor-split contract
      CHECK(views[0].region == Rect{0, 0, w / 2, h});
      CHECK(views[1].region == Rect{w / 2, 0, w, h});
      CHECK(views[2].region == Rect{0, 0, w, h / 2});
      CHECK(views[3].region == Rect{0, h / 2, w, h});
    }
  }
}

TEST_CASE("slice4 resizes views when asked and rejects sub-2x2 rasters") {
  const Image img = noise_image(30, 50, 17);
  const auto views = slice4(img, SliceMode::both, 24);
  for (const auto& v : views) {
    CHECK(v.view.height == 24);
    CHECK(v.view.width == 24);
  }
  CHECK_THROWS(slice4(noise_image(1, 10, 18)));
  CHECK_THROWS(slice4(noise_image(10, 1, 19)));
}

TEST_CASE("slice4 is deterministic") {
  const Image img = noise_image(33, 21, 20);
  const auto a = slice4(img, SliceMode::both, 16);
  const auto b = slice4(img, SliceMode::both, 16);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].view == b[i].view);
}

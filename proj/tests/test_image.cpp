#include <doctest.h>

#include <cmath>
#include <random>

#include "colorvar/image.hpp"
#include "colorvar/image_io.hpp"

using namespace colorvar;

namespace {

Image noise_image(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> d(0, 255);
  Image img(h, w);
  for (auto& b : img.data) b = static_cast<std::uint8_t>(d(rng));
  return img;
}

}  // namespace

TEST_CASE("crop uses half-open rectangles") {
  Image img = noise_image(10, 12, 1);
  Image c = crop(img, Rect{2, 3, 7, 9});
  CHECK(c.width == 5);
  CHECK(c.height == 6);
  CHECK(c.pixel(0, 0) == img.pixel(3, 2));
  CHECK(c.pixel(5, 4) == img.pixel(8, 6));
}

TEST_CASE("paste then crop roundtrips bitwise") {
  Image dst = Image::filled(20, 20, Rgb{7, 8, 9});
  Image src = noise_image(6, 5, 2);
  paste(dst, src, 4, 11);
  CHECK(crop(dst, Rect{11, 4, 16, 10}) == src);
}

TEST_CASE("resize_bilinear at the same size is the identity") {
  Image img = noise_image(9, 13, 3);
  CHECK(resize_bilinear(img, 9, 13) == img);
}

TEST_CASE("resize_bilinear keeps constant images constant") {
  Image img = Image::filled(8, 8, Rgb{41, 180, 220});
  Image out = resize_bilinear(img, 19, 5);
  CHECK(out.height == 19);
  CHECK(out.width == 5);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) CHECK(out.pixel(y, x) == Rgb{41, 180, 220});
  }
}

TEST_CASE("hflip is an involution and mirrors columns") {
  Image img = noise_image(7, 10, 4);
  Image f = hflip(img);
  CHECK(f.pixel(0, 0) == img.pixel(0, 9));
  CHECK(f.pixel(6, 3) == img.pixel(6, 6));
  CHECK(hflip(f) == img);
}

TEST_CASE("channel-mean grayscale replicates the rounded mean") {
  Image img(1, 2);
  img.set_pixel(0, 0, Rgb{10, 20, 40});   // mean 23.33 -> 23
  img.set_pixel(0, 1, Rgb{10, 20, 41});   // mean 23.67 -> 24
  Image g = to_gray_channel_mean(img);
  CHECK(g.pixel(0, 0) == Rgb{23, 23, 23});
  CHECK(g.pixel(0, 1) == Rgb{24, 24, 24});
}

TEST_CASE("rgb/hsv roundtrip") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(0.0, 255.0);
  for (int t = 0; t < 200; ++t) {
    const double r = d(rng), g = d(rng), b = d(rng);
    double h, s, v, r2, g2, b2;
    rgb_to_hsv(r, g, b, h, s, v);
    hsv_to_rgb(h, s, v, r2, g2, b2);
    CHECK(std::abs(r - r2) < 1e-9);
    CHECK(std::abs(g - g2) < 1e-9);
    CHECK(std::abs(b - b2) < 1e-9);
  }
}

TEST_CASE("hue rotation about the gray axis preserves the channel sum") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> ch(20.0, 200.0), deg(0.0, 360.0);
  for (int t = 0; t < 200; ++t) {
    const double r = ch(rng), g = ch(rng), b = ch(rng), a = deg(rng);
    const auto out = rotate_hue_gray_axis(r, g, b, a);
    CHECK(std::abs((out[0] + out[1] + out[2]) - (r + g + b)) < 1e-9);
  }
}

TEST_CASE("hue rotation by 0 and 360 degrees is the identity") {
  const auto same = rotate_hue_gray_axis(120.0, 60.0, 30.0, 0.0);
  CHECK(std::abs(same[0] - 120.0) < 1e-9);
  const auto full = rotate_hue_gray_axis(120.0, 60.0, 30.0, 360.0);
  CHECK(std::abs(full[0] - 120.0) < 1e-9);
  CHECK(std::abs(full[1] - 60.0) < 1e-9);
  CHECK(std::abs(full[2] - 30.0) < 1e-9);
}

TEST_CASE("gray colors are fixed points of hue rotation") {
  const auto out = rotate_hue_gray_axis(77.0, 77.0, 77.0, 123.0);
  CHECK(std::abs(out[0] - 77.0) < 1e-9);
  CHECK(std::abs(out[1] - 77.0) < 1e-9);
  CHECK(std::abs(out[2] - 77.0) < 1e-9);
}

TEST_CASE("png write/read roundtrips losslessly") {
  Image img = noise_image(14, 11, 7);
  const std::string path = "/tmp/colorvar_test_roundtrip.png";
  write_png(path, img);
  CHECK(read_image(path) == img);
}

TEST_CASE("image_to_chw lays out channel planes") {
  Image img(2, 2);
  img.set_pixel(0, 0, Rgb{255, 0, 0});
  img.set_pixel(1, 1, Rgb{0, 0, 255});
  auto v = image_to_chw<double>(img);
  REQUIRE(v.size() == 12);
  CHECK(v[0] == doctest::Approx(1.0));   // R plane, (0,0)
  CHECK(v[4] == doctest::Approx(0.0));   // G plane
  CHECK(v[11] == doctest::Approx(1.0));  // B plane, (1,1)
}

#include "colorvar/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "colorvar/image_io.hpp"

namespace colorvar {

namespace {

using json = nlohmann::json;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Per-style palette entry: position in the plane orthogonal to the gray axis.
struct PaletteColor {
  double gray;    // mean channel level
  double chroma;  // distance from the gray axis
  double hue;     // base angle, degrees
};

// Rounds a palette color to uint8 while forcing the channel sum to `target_sum`,
// so every hue-rotated variant of the same entry has an identical channel mean.
Rgb quantize_to_sum(const std::array<double, 3>& rgb, int target_sum) {
  int ch[3];
  double frac[3];
  for (int i = 0; i < 3; ++i) {
    double clamped = std::clamp(rgb[i], 0.0, 255.0);
    ch[i] = static_cast<int>(std::lround(clamped));
    frac[i] = clamped - ch[i];
  }
  int diff = target_sum - (ch[0] + ch[1] + ch[2]);
  while (diff != 0) {
    int step = diff > 0 ? 1 : -1;
    int best = -1;
    double best_frac = -2.0;
    for (int i = 0; i < 3; ++i) {
      int candidate = ch[i] + step;
      if (candidate < 0 || candidate > 255) continue;
      double f = step > 0 ? frac[i] : -frac[i];
      if (f > best_frac) {
        best_frac = f;
        best = i;
      }
    }
    if (best < 0) break;
    ch[best] += step;
    frac[best] -= step;
    diff -= step;
  }
  return {static_cast<std::uint8_t>(ch[0]), static_cast<std::uint8_t>(ch[1]),
          static_cast<std::uint8_t>(ch[2])};
}

constexpr Rgb kBackground{225, 225, 225};

struct IndexMap {
  int h = 0, w = 0;
  std::vector<std::uint8_t> v;
  IndexMap(int h_, int w_) : h(h_), w(w_), v(static_cast<size_t>(h_) * w_, 0) {}
  std::uint8_t& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
};

void map_fill_rect(IndexMap& m, int y0, int x0, int y1, int x1, std::uint8_t idx) {
  for (int y = std::max(0, y0); y < std::min(m.h, y1); ++y)
    for (int x = std::max(0, x0); x < std::min(m.w, x1); ++x) m.at(y, x) = idx;
}

void map_fill_diamond(IndexMap& m, int cy, int cx, int r, std::uint8_t idx) {
  for (int y = std::max(0, cy - r); y <= std::min(m.h - 1, cy + r); ++y)
    for (int x = std::max(0, cx - r); x <= std::min(m.w - 1, cx + r); ++x)
      if (std::abs(y - cy) + std::abs(x - cx) <= r) m.at(y, x) = idx;
}

void map_fill_circle(IndexMap& m, int cy, int cx, int r, std::uint8_t idx) {
  for (int y = std::max(0, cy - r); y <= std::min(m.h - 1, cy + r); ++y)
    for (int x = std::max(0, cx - r); x <= std::min(m.w - 1, cx + r); ++x)
      if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r) m.at(y, x) = idx;
}

int rand_int(std::mt19937_64& rng, int lo, int hi) {  // inclusive
  return static_cast<int>(std::uniform_int_distribution<int>(lo, hi)(rng));
}

double rand_real(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

void render_stripes(IndexMap& m, const Rect& g, int ordinal, std::mt19937_64& rng) {
  int w = 5 + 3 * ordinal;
  int orient = rand_int(rng, 0, 3);
  int phase = rand_int(rng, 0, 2 * w - 1);
  for (int y = g.y0; y < g.y1; ++y)
    for (int x = g.x0; x < g.x1; ++x) {
      int coord;
      switch (orient) {
        case 0: coord = x - g.x0; break;
        case 1: coord = y - g.y0; break;
        case 2: coord = (x - g.x0) + (y - g.y0); break;
        default: coord = (x - g.x0) - (y - g.y0) + 4 * m.w; break;
      }
      if (((coord + phase) / w) % 2 == 0) m.at(y, x) = 2;
    }
}

void render_diamonds(IndexMap& m, const Rect& g, int ordinal, std::mt19937_64& rng) {
  int r = 3 + ordinal;
  int pitch = 3 * r + 2;
  int band_h = std::max(g.height() / 3, 2 * r + 2);
  int band_slot = rand_int(rng, 0, 2);
  int band_y0 = g.y0 + band_slot * (g.height() - band_h) / 2;
  int off = rand_int(rng, 0, pitch - 1);
  for (int cy = band_y0 + r; cy + r < band_y0 + band_h; cy += pitch)
    for (int cx = g.x0 + r + off; cx + r < g.x1; cx += pitch) map_fill_diamond(m, cy, cx, r, 2);
}

void render_split_panel(IndexMap& m, const Rect& g, int ordinal, std::mt19937_64& rng) {
  double base = 0.30 + 0.12 * ordinal;
  double xb = rand_real(rng, 0.25, 0.75);
  double amp = rand_real(rng, 0.08, 0.16) * g.height();
  double sign = rand_int(rng, 0, 1) ? 1.0 : -1.0;
  double y_base = g.y0 + base * g.height();
  double y_left = y_base - sign * amp;
  double y_right = y_base + sign * amp;
  int xb_px = g.x0 + static_cast<int>(xb * g.width());
  for (int x = g.x0; x < g.x1; ++x) {
    double boundary;
    if (x < xb_px)
      boundary = y_left + (y_base - y_left) * (x - g.x0) / std::max(1, xb_px - g.x0);
    else
      boundary = y_base + (y_right - y_base) * (x - xb_px) / std::max(1, g.x1 - 1 - xb_px);
    int yb = std::clamp(static_cast<int>(std::lround(boundary)), g.y0 + 2, g.y1 - 2);
    for (int y = yb; y < g.y1; ++y) m.at(y, x) = 2;
  }
}

void render_floral(IndexMap& m, const Rect& g, int ordinal, std::mt19937_64& rng) {
  int n = 3 + ordinal;
  for (int i = 0; i < n; ++i) {
    int rf = 5 + rand_int(rng, 0, 2);
    int pad = 2 * rf + 2;
    int cy = rand_int(rng, g.y0 + pad, g.y1 - 1 - pad);
    int cx = rand_int(rng, g.x0 + pad, g.x1 - 1 - pad);
    int rp = (2 * rf) / 3;
    map_fill_circle(m, cy - rf, cx, rp, 2);
    map_fill_circle(m, cy + rf, cx, rp, 2);
    map_fill_circle(m, cy, cx - rf, rp, 2);
    map_fill_circle(m, cy, cx + rf, rp, 2);
    map_fill_circle(m, cy, cx, rp, 3);
  }
}

void render_text_band(IndexMap& m, const Rect& g, int ordinal, std::mt19937_64& rng) {
  int bw = 12 + 2 * rand_int(rng, 0, 2);
  double xfrac = 0.12 + 0.21 * ordinal;
  int bx0 = g.x0 + static_cast<int>(xfrac * (g.width() - bw));
  map_fill_rect(m, g.y0, bx0, g.y1, bx0 + bw, 2);
  // Column of glyph-like cells inside the band.
  int cell = 9;
  for (int cy0 = g.y0 + 2; cy0 + cell - 2 < g.y1; cy0 += cell) {
    int gx0 = bx0 + 3, gx1 = bx0 + bw - 3;
    int gy0 = cy0, gy1 = cy0 + cell - 3;
    std::uint64_t bits = rng();
    if (bits & 1) map_fill_rect(m, gy0, gx0, gy0 + 2, gx1, 3);               // top bar
    if (bits & 2) map_fill_rect(m, gy1 - 2, gx0, gy1, gx1, 3);               // bottom bar
    if (bits & 4) map_fill_rect(m, gy0, gx0, gy1, gx0 + 2, 3);               // left stroke
    if (bits & 8) map_fill_rect(m, gy0, gx1 - 2, gy1, gx1, 3);               // right stroke
    if ((bits & 15) == 0) map_fill_rect(m, (gy0 + gy1) / 2 - 1, gx0, (gy0 + gy1) / 2 + 1, gx1, 3);
  }
}

}  // namespace

std::string to_string(Split s) { return s == Split::train ? "train" : "eval"; }

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "eval") return Split::eval;
  throw std::invalid_argument("split: expected 'train' or 'eval', got '" + s + "'");
}

void validate(const SyntheticSpec& spec) {
  if (spec.n_styles < 1) throw std::invalid_argument("synthetic spec: n_styles must be >= 1");
  if (spec.variants_per_style < 1)
    throw std::invalid_argument("synthetic spec: variants_per_style must be >= 1");
  int margin = std::max(6, spec.canvas / 12);
  if (spec.canvas - 2 * margin < 32)
    throw std::invalid_argument("synthetic spec: canvas too small (crop would be under 32px)");
  if (spec.pattern_families.empty())
    throw std::invalid_argument("synthetic spec: pattern_families must be non-empty");
  static const std::set<std::string> known = {"stripes", "diamonds", "split-panel", "floral-motif",
                                              "vertical-text-band"};
  for (const auto& f : spec.pattern_families)
    if (!known.count(f))
      throw std::invalid_argument("synthetic spec: pattern_families has unknown family '" + f + "'");
  if (spec.hue_set.empty()) throw std::invalid_argument("synthetic spec: hue_set must be non-empty");
  std::set<double> hs(spec.hue_set.begin(), spec.hue_set.end());
  if (hs.size() != spec.hue_set.size())
    throw std::invalid_argument("synthetic spec: hue_set entries must be distinct");
  if (spec.variants_per_style > static_cast<int>(spec.hue_set.size()))
    throw std::invalid_argument(
        "synthetic spec: variants_per_style exceeds hue_set size (no hue left for a variant)");
}

void to_json(json& j, const SyntheticSpec& spec) {
  j = json{{"n_styles", spec.n_styles},
           {"variants_per_style", spec.variants_per_style},
           {"canvas", spec.canvas},
           {"pattern_families", spec.pattern_families},
           {"hue_set", spec.hue_set},
           {"seed", spec.seed}};
}

void from_json(const json& j, SyntheticSpec& spec) {
  SyntheticSpec d;
  spec.n_styles = j.value("n_styles", d.n_styles);
  spec.variants_per_style = j.value("variants_per_style", d.variants_per_style);
  spec.canvas = j.value("canvas", d.canvas);
  spec.pattern_families = j.value("pattern_families", d.pattern_families);
  spec.hue_set = j.value("hue_set", d.hue_set);
  spec.seed = j.value("seed", d.seed);
}

std::vector<ImageRecord> generate_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  std::vector<ImageRecord> records;
  records.reserve(static_cast<size_t>(spec.n_styles) * spec.variants_per_style);
  const int margin = std::max(6, spec.canvas / 12);
  const Rect garment{margin, margin, spec.canvas - margin, spec.canvas - margin};
  const int n_families = static_cast<int>(spec.pattern_families.size());
  const int n_train_styles = (spec.n_styles + 1) / 2;

  for (int s = 0; s < spec.n_styles; ++s) {
    std::mt19937_64 rng(splitmix64(spec.seed ^ splitmix64(static_cast<std::uint64_t>(s) + 1)));
    const std::string& family = spec.pattern_families[s % n_families];
    int ordinal = s / n_families;

    // Three pattern colors with well-separated gray levels. Chroma is kept
    // small enough that every hue rotation stays inside the RGB cube.
    PaletteColor pal[3] = {
        {rand_real(rng, 75, 108), rand_real(rng, 45, 78), rand_real(rng, 0, 360)},
        {rand_real(rng, 150, 180), rand_real(rng, 45, 78), rand_real(rng, 0, 360)},
        {rand_real(rng, 118, 137), rand_real(rng, 45, 78), rand_real(rng, 0, 360)},
    };
    if (rand_int(rng, 0, 1)) std::swap(pal[0], pal[1]);

    IndexMap map(spec.canvas, spec.canvas);
    map_fill_rect(map, garment.y0, garment.x0, garment.y1, garment.x1, 1);
    if (family == "stripes") render_stripes(map, garment, ordinal, rng);
    else if (family == "diamonds") render_diamonds(map, garment, ordinal, rng);
    else if (family == "split-panel") render_split_panel(map, garment, ordinal, rng);
    else if (family == "floral-motif") render_floral(map, garment, ordinal, rng);
    else render_text_band(map, garment, ordinal, rng);

    for (int v = 0; v < spec.variants_per_style; ++v) {
      Rgb colors[4];
      colors[0] = kBackground;
      for (int j = 0; j < 3; ++j) {
        const PaletteColor& p = pal[j];
        // Base color lies at angle p.hue in the chroma plane; all variants of
        // one entry differ only by the rotation angle, so their exact channel
        // sums agree and quantize_to_sum pins the rounded sums to each other.
        std::array<double, 3> base = rotate_hue_gray_axis(
            p.gray + p.chroma * std::sqrt(2.0 / 3.0), p.gray - p.chroma / std::sqrt(6.0),
            p.gray - p.chroma / std::sqrt(6.0), p.hue + spec.hue_set[v]);
        colors[j + 1] = quantize_to_sum(base, static_cast<int>(std::lround(3.0 * p.gray)));
      }
      Image img(spec.canvas, spec.canvas);
      for (int y = 0; y < spec.canvas; ++y)
        for (int x = 0; x < spec.canvas; ++x) img.set_pixel(y, x, colors[map.at(y, x)]);

      char id[32];
      std::snprintf(id, sizeof(id), "s%03d_v%d", s, v);
      char group[32];
      std::snprintf(group, sizeof(group), "style-%03d", s);
      ImageRecord rec;
      rec.id = id;
      rec.pixels = std::move(img);
      rec.bbox = BoundingBox{garment.x0, garment.y0, garment.x1, garment.y1};
      rec.group_id = group;
      rec.split = s < n_train_styles ? Split::train : Split::eval;
      records.push_back(std::move(rec));
    }
  }
  return records;
}

std::vector<ImageRecord> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_manifest: cannot open '" + path + "'");
  std::filesystem::path base = std::filesystem::path(path).parent_path();
  std::vector<ImageRecord> records;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error("load_manifest: line " + std::to_string(lineno) + ": " + e.what());
    }
    ImageRecord rec;
    rec.id = j.at("id").get<std::string>();
    if (!seen.insert(rec.id).second)
      throw std::runtime_error("load_manifest: duplicate id '" + rec.id + "'");
    std::string img_path = j.at("path").get<std::string>();
    std::filesystem::path full = std::filesystem::path(img_path).is_absolute()
                                     ? std::filesystem::path(img_path)
                                     : base / img_path;
    try {
      rec.pixels = read_image(full.string());
    } catch (const std::exception& e) {
      throw std::runtime_error("load_manifest: unreadable image for id '" + rec.id +
                               "': " + e.what());
    }
    if (j.contains("bbox") && !j["bbox"].is_null()) {
      auto b = j["bbox"];
      if (!b.is_array() || b.size() != 4)
        throw std::runtime_error("load_manifest: id '" + rec.id + "': bbox must be [x0,y0,x1,y1]");
      BoundingBox box{b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()};
      if (box.x0 < 0 || box.y0 < 0 || box.x0 >= box.x1 || box.y0 >= box.y1 ||
          box.x1 > rec.pixels.width || box.y1 > rec.pixels.height)
        throw std::runtime_error("load_manifest: id '" + rec.id + "': bbox violates 0<=x0<x1<=W, 0<=y0<y1<=H");
      rec.bbox = box;
    }
    if (j.contains("group_id") && !j["group_id"].is_null())
      rec.group_id = j["group_id"].get<std::string>();
    if (j.contains("split") && !j["split"].is_null())
      rec.split = split_from_string(j["split"].get<std::string>());
    int crop_w = rec.bbox ? rec.bbox->x1 - rec.bbox->x0 : rec.pixels.width;
    int crop_h = rec.bbox ? rec.bbox->y1 - rec.bbox->y0 : rec.pixels.height;
    if (crop_w < 32 || crop_h < 32)
      throw std::runtime_error("load_manifest: id '" + rec.id + "': crop under 32px (" +
                               std::to_string(crop_w) + "x" + std::to_string(crop_h) + ")");
    records.push_back(std::move(rec));
  }
  return records;
}

Image crop_primary(const ImageRecord& record) {
  if (record.pixels.empty()) throw std::invalid_argument("crop_primary: record has no pixels");
  if (!record.bbox) return record.pixels;
  Rect r{std::max(0, record.bbox->x0), std::max(0, record.bbox->y0),
         std::min(record.pixels.width, record.bbox->x1),
         std::min(record.pixels.height, record.bbox->y1)};
  if (r.width() <= 0 || r.height() <= 0)
    throw std::runtime_error("crop_primary: id '" + record.id + "': degenerate box after clamping");
  return crop(record.pixels, r);
}

std::string write_dataset(const std::vector<ImageRecord>& records, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::filesystem::path d(dir);
  std::ofstream manifest(d / "manifest.jsonl");
  if (!manifest) throw std::runtime_error("write_dataset: cannot write manifest in '" + dir + "'");
  for (const auto& rec : records) {
    std::string file = rec.id + ".png";
    write_png((d / file).string(), rec.pixels);
    json j;
    j["id"] = rec.id;
    j["path"] = file;
    if (rec.bbox)
      j["bbox"] = {rec.bbox->x0, rec.bbox->y0, rec.bbox->x1, rec.bbox->y1};
    else
      j["bbox"] = nullptr;
    j["group_id"] = rec.group_id ? json(*rec.group_id) : json(nullptr);
    j["split"] = to_string(rec.split);
    manifest << j.dump() << "\n";
  }
  return (d / "manifest.jsonl").string();
}

}  // namespace colorvar

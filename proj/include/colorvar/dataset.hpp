#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "colorvar/image.hpp"

namespace colorvar {

struct BoundingBox {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool operator==(const BoundingBox&) const = default;
};

enum class Split { train, eval };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

/// One catalog image with an optional primary-object box and ground-truth
/// color-variant group.
struct ImageRecord {
  std::string id;
  Image pixels;
  std::optional<BoundingBox> bbox;
  std::optional<std::string> group_id;
  Split split = Split::train;
};

struct SyntheticSpec {
  int n_styles = 20;
  int variants_per_style = 4;
  int canvas = 96;
  std::vector<std::string> pattern_families = {"stripes", "diamonds", "split-panel",
                                               "floral-motif", "vertical-text-band"};
  std::vector<double> hue_set = {0.0, 90.0, 180.0, 270.0};  // degrees
  std::uint64_t seed = 0;
};

void validate(const SyntheticSpec& spec);
void to_json(nlohmann::json& j, const SyntheticSpec& spec);
void from_json(const nlohmann::json& j, SyntheticSpec& spec);

/// Procedural color-variant corpus. Records of one style share their base
/// pattern exactly and differ only by recoloring; group_id is the style.
/// The first ceil(n_styles/2) styles are the train split, the rest eval.
std::vector<ImageRecord> generate_synthetic(const SyntheticSpec& spec);

/// JSON-lines manifest ingest; one record per line with keys
/// {"id", "path", "bbox", "group_id", "split"}. Paths resolve relative to
/// the manifest's directory.
std::vector<ImageRecord> load_manifest(const std::string& path);

/// Pixels restricted to the record's box (the whole image when absent).
Image crop_primary(const ImageRecord& record);

/// Writes records as PNG files plus a manifest.jsonl into `dir`.
/// Returns the manifest path.
std::string write_dataset(const std::vector<ImageRecord>& records, const std::string& dir);

}  // namespace colorvar

#include "colorvar/model.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace colorvar {

Matd chw_batch(const std::vector<Image>& images) {
  if (images.empty()) throw std::invalid_argument("chw_batch: no images");
  Matd x(images[0].height * images[0].width * 3, static_cast<Eigen::Index>(images.size()));
  for (size_t i = 0; i < images.size(); ++i)
    x.col(static_cast<Eigen::Index>(i)) = image_to_chw<double>(images[i]);
  return x;
}

namespace {

using json = nlohmann::json;

void normalize_rows_or_throw(EmbeddingMatrix& emb) {
  for (Eigen::Index i = 0; i < emb.values.rows(); ++i) {
    double n = emb.values.row(i).norm();
    if (n == 0.0)
      throw std::runtime_error("embed: zero-norm embedding for id '" + emb.ids[i] +
                               "', cannot normalize");
    emb.values.row(i) /= n;
  }
  emb.normalized = true;
}

void write_tensors(std::ofstream& out, const std::vector<Matd*>& tensors) {
  std::uint64_t n = tensors.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  for (const Matd* t : tensors) {
    std::uint64_t rows = static_cast<std::uint64_t>(t->rows());
    std::uint64_t cols = static_cast<std::uint64_t>(t->cols());
    out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
    out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
    out.write(reinterpret_cast<const char*>(t->data()),
              static_cast<std::streamsize>(sizeof(double) * t->size()));
  }
}

void read_tensors(std::ifstream& in, const std::vector<Matd*>& tensors, const char* what) {
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (n != tensors.size())
    throw std::runtime_error(std::string("checkpoint: ") + what + " tensor count mismatch");
  for (Matd* t : tensors) {
    std::uint64_t rows = 0, cols = 0;
    in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
    in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
    if (rows != static_cast<std::uint64_t>(t->rows()) ||
        cols != static_cast<std::uint64_t>(t->cols()))
      throw std::runtime_error(std::string("checkpoint: ") + what + " tensor shape mismatch");
    in.read(reinterpret_cast<char*>(t->data()),
            static_cast<std::streamsize>(sizeof(double) * t->size()));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
  }
}

}  // namespace

HeadKind head_from_string(const std::string& s) {
  if (s == "none") return HeadKind::none;
  if (s == "projector_mlp") return HeadKind::projector_mlp;
  if (s == "projector_plus_predictor") return HeadKind::projector_plus_predictor;
  throw std::invalid_argument("encoder config: unknown head '" + s + "'");
}

std::string to_string(HeadKind h) {
  switch (h) {
    case HeadKind::none: return "none";
    case HeadKind::projector_mlp: return "projector_mlp";
    default: return "projector_plus_predictor";
  }
}

void to_json(json& j, const EncoderConfig& c) {
  j = json{{"backbone", c.backbone},
           {"input_side", c.input_side},
           {"embed_dim", c.embed_dim},
           {"head", to_string(c.head)},
           {"head_dims", c.head_dims}};
}

void from_json(const json& j, EncoderConfig& c) {
  c = EncoderConfig{};
  c.backbone = j.value("backbone", std::string("tiny_cnn"));
  c.input_side = j.value("input_side", 224);
  c.embed_dim = j.value("embed_dim", c.backbone == "resnet34" ? 512 : 64);
  c.head = head_from_string(j.value("head", std::string("none")));
  c.head_dims = j.value("head_dims", std::vector<int>{});
}

void validate(const EncoderConfig& c) {
  if (c.backbone != "tiny_cnn" && c.backbone != "resnet34")
    throw std::invalid_argument("encoder config: unknown backbone '" + c.backbone + "'");
  if (c.embed_dim <= 0) throw std::invalid_argument("encoder config: embed_dim must be positive");
  if (c.backbone == "resnet34" && c.embed_dim != 512)
    throw std::invalid_argument("encoder config: resnet34 embeddings are 512-dimensional");
  int min_side = c.backbone == "resnet34" ? 32 : 16;
  if (c.input_side < min_side)
    throw std::invalid_argument("encoder config: input_side too small for backbone");
  if (c.head == HeadKind::none) {
    if (!c.head_dims.empty())
      throw std::invalid_argument("encoder config: head_dims given but head is none");
  } else {
    if (c.head_dims.empty())
      throw std::invalid_argument("encoder config: head requires non-empty head_dims");
    for (int d : c.head_dims)
      if (d <= 0) throw std::invalid_argument("encoder config: head_dims must be positive");
  }
}

EmbeddingMatrix embed_dataset(Encoderd& encoder, const std::vector<ImageRecord>& records,
                              bool bbox_crop, bool normalize) {
  if (records.empty()) throw std::invalid_argument("embed_dataset: no records");
  const int side = encoder.cfg.input_side;
  EmbeddingMatrix emb;
  emb.values.resize(static_cast<Eigen::Index>(records.size()), encoder.cfg.embed_dim);
  const size_t chunk = 32;
  std::vector<Image> batch;
  size_t done = 0;
  for (size_t i = 0; i < records.size(); ++i) {
    emb.ids.push_back(records[i].id);
    Image img = bbox_crop ? crop_primary(records[i]) : records[i].pixels;
    batch.push_back(resize_bilinear(img, side, side));
    if (batch.size() == chunk || i + 1 == records.size()) {
      Matd out = encoder.embed(chw_batch(batch));
      for (Eigen::Index c = 0; c < out.cols(); ++c)
        emb.values.row(static_cast<Eigen::Index>(done + c)) = out.col(c).transpose();
      done += batch.size();
      batch.clear();
    }
  }
  if (normalize) normalize_rows_or_throw(emb);
  return emb;
}

Vecd embed_sliced(Encoderd& encoder, const Image& raster, SliceMode mode) {
  std::vector<SliceView> views = slice4(raster, mode, encoder.cfg.input_side);
  std::vector<Image> imgs;
  for (auto& v : views) imgs.push_back(std::move(v.view));
  Matd out = encoder.embed(chw_batch(imgs));
  return out.rowwise().sum();
}

EmbeddingMatrix embed_dataset_sliced(Encoderd& encoder, const std::vector<ImageRecord>& records,
                                     bool bbox_crop, bool normalize, SliceMode mode) {
  if (records.empty()) throw std::invalid_argument("embed_dataset_sliced: no records");
  EmbeddingMatrix emb;
  emb.values.resize(static_cast<Eigen::Index>(records.size()), encoder.cfg.embed_dim);
  for (size_t i = 0; i < records.size(); ++i) {
    emb.ids.push_back(records[i].id);
    Image img = bbox_crop ? crop_primary(records[i]) : records[i].pixels;
    emb.values.row(static_cast<Eigen::Index>(i)) = embed_sliced(encoder, img, mode).transpose();
  }
  if (normalize) normalize_rows_or_throw(emb);
  return emb;
}

void round_to_export_precision(EmbeddingMatrix& emb) {
  emb.values = emb.values.cast<float>().cast<double>();
}

void save_embeddings(const EmbeddingMatrix& emb, const std::string& base_path) {
  if (emb.ids.size() != static_cast<size_t>(emb.values.rows()))
    throw std::invalid_argument("save_embeddings: ids/rows misaligned");
  std::ofstream ids(base_path + ".ids");
  if (!ids) throw std::runtime_error("save_embeddings: cannot write '" + base_path + ".ids'");
  ids << "COLORVAR-EMB v1 " << emb.values.rows() << " " << emb.values.cols() << " normalized="
      << (emb.normalized ? 1 : 0) << "\n";
  for (const auto& id : emb.ids) ids << id << "\n";
  std::ofstream bin(base_path + ".f32", std::ios::binary);
  if (!bin) throw std::runtime_error("save_embeddings: cannot write '" + base_path + ".f32'");
  for (Eigen::Index i = 0; i < emb.values.rows(); ++i)
    for (Eigen::Index j = 0; j < emb.values.cols(); ++j) {
      float f = static_cast<float>(emb.values(i, j));
      bin.write(reinterpret_cast<const char*>(&f), sizeof(f));
    }
}

EmbeddingMatrix load_embeddings(const std::string& base_path) {
  std::ifstream ids(base_path + ".ids");
  if (!ids) throw std::runtime_error("load_embeddings: cannot open '" + base_path + ".ids'");
  std::string magic, version, norm_field;
  Eigen::Index n = 0, d = 0;
  ids >> magic >> version >> n >> d >> norm_field;
  if (magic != "COLORVAR-EMB" || version != "v1" || n <= 0 || d <= 0 ||
      (norm_field != "normalized=0" && norm_field != "normalized=1"))
    throw std::runtime_error("load_embeddings: bad header in '" + base_path + ".ids'");
  ids.ignore();  // rest of header line
  EmbeddingMatrix emb;
  emb.normalized = norm_field == "normalized=1";
  std::string line;
  while (std::getline(ids, line))
    if (!line.empty()) emb.ids.push_back(line);
  if (emb.ids.size() != static_cast<size_t>(n))
    throw std::runtime_error("load_embeddings: id count does not match header");
  std::ifstream bin(base_path + ".f32", std::ios::binary);
  if (!bin) throw std::runtime_error("load_embeddings: cannot open '" + base_path + ".f32'");
  emb.values.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      float f = 0;
      bin.read(reinterpret_cast<char*>(&f), sizeof(f));
      if (!bin) throw std::runtime_error("load_embeddings: binary file truncated");
      emb.values(i, j) = f;
    }
  return emb;
}

void save_checkpoint(Encoderd& encoder, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot write '" + path + "'");
  out << "COLORVAR-CKPT v1\n";
  std::string cfg = json(encoder.cfg).dump();
  std::uint64_t len = cfg.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  write_tensors(out, encoder.parameters(true));
  write_tensors(out, encoder.buffers());
}

Encoderd load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open '" + path + "'");
  std::string magic;
  std::getline(in, magic);
  if (magic != "COLORVAR-CKPT v1") throw std::runtime_error("load_checkpoint: bad magic");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string cfg_str(len, '\0');
  in.read(cfg_str.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("load_checkpoint: truncated config");
  EncoderConfig cfg = json::parse(cfg_str).get<EncoderConfig>();
  std::mt19937_64 rng(0);  // layout only; tensors are overwritten below
  Encoderd enc = build_encoder<double>(cfg, rng);
  read_tensors(in, enc.parameters(true), "parameter");
  read_tensors(in, enc.buffers(), "buffer");
  return enc;
}

}  // namespace colorvar

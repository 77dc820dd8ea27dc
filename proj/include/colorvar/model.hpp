#pragma once

#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "colorvar/augment.hpp"
#include "colorvar/dataset.hpp"
#include "colorvar/nn.hpp"

namespace colorvar {

enum class HeadKind { none, projector_mlp, projector_plus_predictor };

HeadKind head_from_string(const std::string& s);
std::string to_string(HeadKind h);

struct EncoderConfig {
  std::string backbone = "tiny_cnn";  // or "resnet34"
  int input_side = 224;
  int embed_dim = 512;         // backbone embedding width; fixed at 512 for resnet34
  HeadKind head = HeadKind::none;
  std::vector<int> head_dims;  // projector widths after embed_dim, e.g. {4096, 123}

  int head_out() const { return head == HeadKind::none ? embed_dim : head_dims.back(); }
};

void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);
void validate(const EncoderConfig& c);

/// Backbone (image -> pooled embedding) plus optional projector/predictor
/// heads. Trainers drive the three stages with explicit tapes; inference
/// helpers below use the backbone output only, which is what gets clustered.
template <class Scalar>
struct Encoder {
  EncoderConfig cfg;
  Sequential<Scalar> backbone;
  Sequential<Scalar> projector;  // empty when head == none
  Sequential<Scalar> predictor;  // empty unless head == projector_plus_predictor

  /// Backbone embedding, embed_dim x B.
  Mat<Scalar> embed(const Mat<Scalar>& x, Tape<Scalar>* tape = nullptr, bool training = false) {
    return backbone.forward(x, tape, training);
  }

  /// Backbone + projector (head output), head_out x B.
  Mat<Scalar> project(const Mat<Scalar>& x, Tape<Scalar>* tape = nullptr, bool training = false) {
    Mat<Scalar> e = backbone.forward(x, tape, training);
    return projector.empty() ? e : projector.forward(e, tape, training);
  }

  /// Backward through projector then backbone, consuming a project() tape.
  Mat<Scalar> backward_project(const Mat<Scalar>& g, Tape<Scalar>& tape) {
    Mat<Scalar> gi = projector.empty() ? g : projector.backward(g, tape);
    return backbone.backward(gi, tape);
  }

  /// Backward through the backbone alone, consuming an embed() tape.
  Mat<Scalar> backward_embed(const Mat<Scalar>& g, Tape<Scalar>& tape) {
    return backbone.backward(g, tape);
  }

  void collect(bool with_predictor, std::vector<Mat<Scalar>*>& params,
               std::vector<Mat<Scalar>*>& grads) {
    backbone.collect(params, grads);
    projector.collect(params, grads);
    if (with_predictor) predictor.collect(params, grads);
  }

  std::vector<Mat<Scalar>*> parameters(bool with_predictor = true) {
    std::vector<Mat<Scalar>*> p, g;
    collect(with_predictor, p, g);
    return p;
  }

  std::vector<Mat<Scalar>*> gradients(bool with_predictor = true) {
    std::vector<Mat<Scalar>*> p, g;
    collect(with_predictor, p, g);
    return g;
  }

  std::vector<Mat<Scalar>*> buffers() {
    std::vector<Mat<Scalar>*> b;
    backbone.collect_buffers(b);
    projector.collect_buffers(b);
    predictor.collect_buffers(b);
    return b;
  }

  void zero_grads() {
    for (Mat<Scalar>* g : gradients(true)) g->setZero();
  }
};

namespace detail {

template <class Scalar>
Sequential<Scalar> make_tiny_cnn(int input_side, int embed_dim, std::mt19937_64& rng) {
  Sequential<Scalar> seq;
  int side = input_side;
  int chans[5] = {3, 16, 32, 64, embed_dim};
  for (int i = 0; i < 4; ++i) {
    auto conv = std::make_unique<Conv2d<Scalar>>(chans[i], chans[i + 1], 3, 2, 1, side, side, rng);
    side = conv->out_h();
    seq.add(std::move(conv));
    // Without per-channel normalization a freshly initialized stack maps every
    // input to nearly the same direction, which leaves contrastive losses at
    // their uniform plateau on short runs.
    seq.add(std::make_unique<BatchNorm2d<Scalar>>(chans[i + 1], side * side));
    seq.add(std::make_unique<ReLU<Scalar>>());
  }
  seq.add(std::make_unique<GlobalAvgPool<Scalar>>(embed_dim, side * side));
  return seq;
}

template <class Scalar>
Sequential<Scalar> resnet_basic_body(int in_ch, int out_ch, int stride, int h, int w,
                                     std::mt19937_64& rng) {
  Sequential<Scalar> body;
  auto c1 = std::make_unique<Conv2d<Scalar>>(in_ch, out_ch, 3, stride, 1, h, w, rng);
  int oh = c1->out_h(), ow = c1->out_w();
  body.add(std::move(c1));
  body.add(std::make_unique<BatchNorm2d<Scalar>>(out_ch, oh * ow));
  body.add(std::make_unique<ReLU<Scalar>>());
  body.add(std::make_unique<Conv2d<Scalar>>(out_ch, out_ch, 3, 1, 1, oh, ow, rng));
  body.add(std::make_unique<BatchNorm2d<Scalar>>(out_ch, oh * ow));
  return body;
}

template <class Scalar>
Sequential<Scalar> make_resnet34(int input_side, std::mt19937_64& rng) {
  Sequential<Scalar> seq;
  auto stem = std::make_unique<Conv2d<Scalar>>(3, 64, 7, 2, 3, input_side, input_side, rng);
  int side = stem->out_h();
  seq.add(std::move(stem));
  seq.add(std::make_unique<BatchNorm2d<Scalar>>(64, side * side));
  seq.add(std::make_unique<ReLU<Scalar>>());
  auto pool = std::make_unique<MaxPool2d<Scalar>>(64, 3, 2, 1, side, side);
  side = pool->out_h();
  seq.add(std::move(pool));

  const int widths[4] = {64, 128, 256, 512};
  const int depths[4] = {3, 4, 6, 3};
  int in_ch = 64;
  for (int stage = 0; stage < 4; ++stage) {
    for (int block = 0; block < depths[stage]; ++block) {
      int stride = (stage > 0 && block == 0) ? 2 : 1;
      int out_ch = widths[stage];
      Sequential<Scalar> body = resnet_basic_body<Scalar>(in_ch, out_ch, stride, side, side, rng);
      std::unique_ptr<Sequential<Scalar>> shortcut;
      int oside = (side + 2 - 3) / stride + 1;
      if (stride != 1 || in_ch != out_ch) {
        shortcut = std::make_unique<Sequential<Scalar>>();
        auto sc = std::make_unique<Conv2d<Scalar>>(in_ch, out_ch, 1, stride, 0, side, side, rng);
        oside = sc->out_h();
        shortcut->add(std::move(sc));
        shortcut->add(std::make_unique<BatchNorm2d<Scalar>>(out_ch, oside * oside));
      }
      seq.add(std::make_unique<Residual<Scalar>>(std::move(body), std::move(shortcut)));
      side = oside;
      in_ch = out_ch;
    }
  }
  seq.add(std::make_unique<GlobalAvgPool<Scalar>>(512, side * side));
  return seq;
}

}  // namespace detail

template <class Scalar>
Encoder<Scalar> build_encoder(const EncoderConfig& cfg, std::mt19937_64& rng) {
  validate(cfg);
  Encoder<Scalar> enc;
  enc.cfg = cfg;
  if (cfg.backbone == "tiny_cnn")
    enc.backbone = detail::make_tiny_cnn<Scalar>(cfg.input_side, cfg.embed_dim, rng);
  else
    enc.backbone = detail::make_resnet34<Scalar>(cfg.input_side, rng);
  if (cfg.head != HeadKind::none) {
    std::vector<int> dims = {cfg.embed_dim};
    dims.insert(dims.end(), cfg.head_dims.begin(), cfg.head_dims.end());
    enc.projector = make_mlp<Scalar>(dims, rng);
  }
  if (cfg.head == HeadKind::projector_plus_predictor) {
    int out = cfg.head_dims.back();
    enc.predictor = make_mlp<Scalar>({out, cfg.head_dims.front(), out}, rng);
  }
  return enc;
}

using Encoderd = Encoder<double>;

/// Stacks images into a CHW feature matrix, one column per image.
Matd chw_batch(const std::vector<Image>& images);

/// N x D embeddings with row-aligned record ids.
struct EmbeddingMatrix {
  std::vector<std::string> ids;
  Matd values;
  bool normalized = false;
};

/// Plain-resize inference through the backbone, one row per record in input
/// order. normalize divides each row by its Euclidean norm (zero rows error,
/// naming the record id).
EmbeddingMatrix embed_dataset(Encoderd& encoder, const std::vector<ImageRecord>& records,
                              bool bbox_crop, bool normalize);

/// Sum of per-view backbone embeddings over slice4(raster, mode).
Vecd embed_sliced(Encoderd& encoder, const Image& raster, SliceMode mode);

/// embed_dataset's counterpart with embed_sliced rows (sliced-training models).
EmbeddingMatrix embed_dataset_sliced(Encoderd& encoder, const std::vector<ImageRecord>& records,
                                     bool bbox_crop, bool normalize, SliceMode mode);

/// Rounds values through IEEE float32 so in-memory numbers match what the
/// binary export stores; downstream clustering then reproduces exactly from
/// the artifact files.
void round_to_export_precision(EmbeddingMatrix& emb);

/// Writes <base>.f32 (row-major float32) and <base>.ids (header + ids).
void save_embeddings(const EmbeddingMatrix& emb, const std::string& base_path);
EmbeddingMatrix load_embeddings(const std::string& base_path);

void save_checkpoint(Encoderd& encoder, const std::string& path);
Encoderd load_checkpoint(const std::string& path);

}  // namespace colorvar

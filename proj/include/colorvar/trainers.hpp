#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "colorvar/dataset.hpp"
#include "colorvar/model.hpp"

namespace colorvar {

enum class Method {
  triplet,
  simsiam_v0,
  simsiam_v1,
  simsiam_v2,
  byol,
  mocov2,
  pbcnet,
  pbcnet_horiz,
  pbcnet_vert
};

Method method_from_string(const std::string& s);
std::string to_string(Method m);

inline bool uses_queue(Method m) {
  return m == Method::mocov2 || m == Method::pbcnet || m == Method::pbcnet_horiz ||
         m == Method::pbcnet_vert;
}

inline bool is_pbcnet(Method m) {
  return m == Method::pbcnet || m == Method::pbcnet_horiz || m == Method::pbcnet_vert;
}

inline SliceMode slice_mode_of(Method m) {
  if (m == Method::pbcnet_horiz) return SliceMode::horiz;
  if (m == Method::pbcnet_vert) return SliceMode::vert;
  return SliceMode::both;
}

struct TrainConfig {
  Method method = Method::pbcnet;
  int epochs = 30;
  int batch_size = 0;  // 0 picks the method default (12 / 128 / 32)
  double lr = 0.001;
  double momentum = 0.9;
  double weight_decay = 1e-6;
  double temperature = 0.05;  // NT-Xent
  double ema_m = 0.999;       // momentum-encoder coefficient
  int queue_capacity = 5000;  // queue methods only
  double margin = 0.2;        // triplet only
  std::uint64_t seed = 0;

  int effective_batch() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct RunManifest {
  TrainConfig config;
  EncoderConfig encoder;
  std::vector<double> epoch_losses;
  double wall_seconds = 0;
};

void to_json(nlohmann::json& j, const RunManifest& m);
void from_json(const nlohmann::json& j, RunManifest& m);

/// Query/key (or online/target) parameter pairing for EMA tracking. The key
/// side is never touched by an optimizer; it only moves through ema_update.
template <class Scalar>
struct MomentumPair {
  std::vector<Mat<Scalar>*> query_params;
  std::vector<Mat<Scalar>*> key_params;
  Scalar m = Scalar(0.999);
};

/// key <- m*key + (1-m)*query, elementwise; query untouched.
template <class Scalar>
void ema_update(MomentumPair<Scalar>& pair) {
  if (pair.m < Scalar(0) || pair.m > Scalar(1))
    throw std::invalid_argument("ema_update: m must lie in [0,1]");
  if (pair.query_params.size() != pair.key_params.size())
    throw std::invalid_argument("ema_update: parameter list sizes differ");
  for (size_t i = 0; i < pair.key_params.size(); ++i) {
    Mat<Scalar>& key = *pair.key_params[i];
    const Mat<Scalar>& query = *pair.query_params[i];
    if (key.rows() != query.rows() || key.cols() != query.cols())
      throw std::invalid_argument("ema_update: parameter shape mismatch");
    key = pair.m * key + (Scalar(1) - pair.m) * query;
  }
}

/// SGD with classical momentum and decoupled-from-nothing weight decay folded
/// into the gradient (g += wd*p; v = mu*v + g; p -= lr*v).
template <class Scalar>
class Sgd {
 public:
  Sgd(std::vector<Mat<Scalar>*> params, std::vector<Mat<Scalar>*> grads, Scalar lr,
      Scalar momentum, Scalar weight_decay)
      : params_(std::move(params)), grads_(std::move(grads)), lr_(lr), mu_(momentum),
        wd_(weight_decay) {
    if (params_.size() != grads_.size())
      throw std::invalid_argument("sgd: parameter/gradient list sizes differ");
    velocities_.reserve(params_.size());
    for (Mat<Scalar>* p : params_) velocities_.push_back(Mat<Scalar>::Zero(p->rows(), p->cols()));
  }

  void step() {
    for (size_t i = 0; i < params_.size(); ++i) {
      Mat<Scalar> g = *grads_[i] + wd_ * *params_[i];
      velocities_[i] = mu_ * velocities_[i] + g;
      *params_[i] -= lr_ * velocities_[i];
    }
  }

 private:
  std::vector<Mat<Scalar>*> params_, grads_;
  std::vector<Mat<Scalar>> velocities_;
  Scalar lr_, mu_, wd_;
};

struct TrainResult {
  Encoderd encoder;  // the query/online branch — the one inference uses
  RunManifest manifest;
};

/// Runs the per-method training loop over the train-split records.
/// Head requirements: triplet and pbcnet* expect head=none; mocov2 expects
/// projector_mlp; simsiam*/byol expect projector_plus_predictor.
TrainResult train(const TrainConfig& config, const std::vector<ImageRecord>& records,
                  const EncoderConfig& encoder_config);

}  // namespace colorvar

#include "colorvar/trainers.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <numeric>

#include "colorvar/augment.hpp"
#include "colorvar/losses.hpp"
#include "colorvar/memory_queue.hpp"

namespace colorvar {

namespace {

using json = nlohmann::json;

int rand_int(std::mt19937_64& rng, int lo, int hi) {  // inclusive
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// In-house Fisher-Yates so the draw sequence is pinned by this code, not by
// the standard library's unspecified std::shuffle internals.
std::vector<size_t> shuffled_indices(size_t n, std::mt19937_64& rng) {
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  for (size_t i = n; i > 1; --i) {
    size_t j = static_cast<size_t>(rand_int(rng, 0, static_cast<int>(i) - 1));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

struct Ctx {
  const TrainConfig& cfg;
  std::vector<Image> crops;  // bbox-cropped training rasters, record order
  std::mt19937_64 rng;
  int batch = 0;
};

AugmentRecipe plain_resize_recipe(int side) {
  AugmentRecipe r;
  r.resize_to = side;
  return r;
}

AugmentRecipe jitter_only_recipe(int side) {
  AugmentRecipe r = color_distort_recipe();
  r.ops.resize(1);  // keep the color_jitter op only
  r.resize_to = side;
  return r;
}

std::vector<Image> make_views(const Ctx& c, std::mt19937_64& rng, const std::vector<size_t>& order,
                              size_t first, const AugmentRecipe& recipe) {
  std::vector<Image> out;
  out.reserve(static_cast<size_t>(c.batch));
  for (int b = 0; b < c.batch; ++b)
    out.push_back(apply_recipe(c.crops[order[first + static_cast<size_t>(b)]], recipe, rng));
  return out;
}

// ---- simsiam_v0/v1/v2 ------------------------------------------------------

std::vector<double> run_simsiam(Encoderd& enc, Ctx& c, Method method) {
  const int side = enc.cfg.input_side;
  AugmentRecipe r1, r2;
  if (method == Method::simsiam_v0) {
    r1 = plain_resize_recipe(side);  // the untouched image is the query view
    r2 = jitter_only_recipe(side);
  } else {
    r1 = standard_ssl_recipe(side);
    r2 = standard_ssl_recipe(side);
  }
  Sgd<double> opt(enc.parameters(true), enc.gradients(true), c.cfg.lr, c.cfg.momentum,
                  c.cfg.weight_decay);
  const size_t steps = c.crops.size() / static_cast<size_t>(c.batch);
  std::vector<double> losses;
  for (int epoch = 0; epoch < c.cfg.epochs; ++epoch) {
    std::vector<size_t> order = shuffled_indices(c.crops.size(), c.rng);
    double total = 0;
    for (size_t s = 0; s < steps; ++s) {
      Matd x1 = chw_batch(make_views(c, c.rng, order, s * c.batch, r1));
      Matd x2 = chw_batch(make_views(c, c.rng, order, s * c.batch, r2));
      Tape<double> t1, t2, tp1, tp2;
      Matd z1 = enc.project(x1, &t1, true);
      Matd z2 = enc.project(x2, &t2, true);
      Matd p1 = enc.predictor.forward(z1, &tp1, true);
      Matd p2 = enc.predictor.forward(z2, &tp2, true);
      auto g1 = negcos_loss_grad<double>(p1.transpose(), z2.transpose());
      auto g2 = negcos_loss_grad<double>(p2.transpose(), z1.transpose());
      total += 0.5 * (g1.loss + g2.loss);
      enc.zero_grads();
      Matd dz1 = enc.predictor.backward(0.5 * g1.d_predicted.transpose(), tp1);
      Matd dz2 = enc.predictor.backward(0.5 * g2.d_predicted.transpose(), tp2);
      enc.backward_project(dz1, t1);
      enc.backward_project(dz2, t2);
      opt.step();
    }
    losses.push_back(total / static_cast<double>(steps));
  }
  return losses;
}

// ---- byol ------------------------------------------------------------------

std::vector<double> run_byol(Encoderd& enc, Ctx& c) {
  const int side = enc.cfg.input_side;
  AugmentRecipe recipe = standard_ssl_recipe(side);
  Encoderd target = enc;  // deep copy; tracks the online branch by EMA only
  Sgd<double> opt(enc.parameters(true), enc.gradients(true), c.cfg.lr, c.cfg.momentum,
                  c.cfg.weight_decay);
  MomentumPair<double> pair{enc.parameters(false), target.parameters(false), c.cfg.ema_m};
  MomentumPair<double> buf_pair{enc.buffers(), target.buffers(), c.cfg.ema_m};
  const size_t steps = c.crops.size() / static_cast<size_t>(c.batch);
  std::vector<double> losses;
  for (int epoch = 0; epoch < c.cfg.epochs; ++epoch) {
    std::vector<size_t> order = shuffled_indices(c.crops.size(), c.rng);
    double total = 0;
    for (size_t s = 0; s < steps; ++s) {
      Matd x1 = chw_batch(make_views(c, c.rng, order, s * c.batch, recipe));
      Matd x2 = chw_batch(make_views(c, c.rng, order, s * c.batch, recipe));
      Tape<double> t1, t2, tp1, tp2;
      Matd q1 = enc.predictor.forward(enc.project(x1, &t1, true), &tp1, true);
      Matd q2 = enc.predictor.forward(enc.project(x2, &t2, true), &tp2, true);
      Matd z1 = target.project(x1, nullptr, true);
      Matd z2 = target.project(x2, nullptr, true);
      auto g1 = negcos_loss_grad<double>(q1.transpose(), z2.transpose());
      auto g2 = negcos_loss_grad<double>(q2.transpose(), z1.transpose());
      total += 0.5 * (g1.loss + g2.loss);
      enc.zero_grads();
      Matd dz1 = enc.predictor.backward(0.5 * g1.d_predicted.transpose(), tp1);
      Matd dz2 = enc.predictor.backward(0.5 * g2.d_predicted.transpose(), tp2);
      enc.backward_project(dz1, t1);
      enc.backward_project(dz2, t2);
      opt.step();
      ema_update(pair);
      ema_update(buf_pair);
    }
    losses.push_back(total / static_cast<double>(steps));
  }
  return losses;
}

// ---- mocov2 ----------------------------------------------------------------

std::vector<double> run_moco(Encoderd& enc, Ctx& c) {
  const int side = enc.cfg.input_side;
  AugmentRecipe recipe = standard_ssl_recipe(side);
  Encoderd key = enc;  // the key branch starts as an exact copy
  Sgd<double> opt(enc.parameters(true), enc.gradients(true), c.cfg.lr, c.cfg.momentum,
                  c.cfg.weight_decay);
  MomentumPair<double> pair{enc.parameters(true), key.parameters(true), c.cfg.ema_m};
  MomentumPair<double> buf_pair{enc.buffers(), key.buffers(), c.cfg.ema_m};
  MemoryQueue<double> queue(c.cfg.queue_capacity, enc.cfg.head_out());
  const size_t steps = c.crops.size() / static_cast<size_t>(c.batch);
  std::vector<double> losses;
  for (int epoch = 0; epoch < c.cfg.epochs; ++epoch) {
    std::vector<size_t> order = shuffled_indices(c.crops.size(), c.rng);
    double total = 0;
    for (size_t s = 0; s < steps; ++s) {
      Matd x_q = chw_batch(make_views(c, c.rng, order, s * c.batch, recipe));
      Matd x_k = chw_batch(make_views(c, c.rng, order, s * c.batch, recipe));
      Tape<double> tq;
      Matd q_raw = enc.project(x_q, &tq, true).transpose();  // B x Dh
      Matd q_hat = l2_normalize_rows(q_raw);
      Matd k_hat = l2_normalize_rows(key.project(x_k, nullptr, true).transpose());
      ContrastiveBatch<double> cb;
      cb.queries = q_hat;
      cb.positive_keys = k_hat;
      cb.negative_keys = queue.snapshot();
      cb.temperature = c.cfg.temperature;
      cb.in_batch_negatives = queue.fill() == 0;
      auto g = ntxent_loss_grad(cb);
      total += g.loss;
      Matd dq_raw = normalize_rows_backward(q_raw, g.d_queries);
      enc.zero_grads();
      enc.backward_project(dq_raw.transpose(), tq);
      opt.step();
      ema_update(pair);
      ema_update(buf_pair);
      queue.push(k_hat);
    }
    losses.push_back(total / static_cast<double>(steps));
  }
  return losses;
}

// ---- pbcnet / pbcnet_horiz / pbcnet_vert ------------------------------------

std::vector<double> run_pbcnet(Encoderd& enc, Ctx& c, SliceMode mode) {
  const int side = enc.cfg.input_side;
  const AugmentRecipe distort = color_distort_recipe();
  const size_t n_views = mode == SliceMode::both ? 4 : 2;
  Encoderd key = enc;
  Sgd<double> opt(enc.parameters(true), enc.gradients(true), c.cfg.lr, c.cfg.momentum,
                  c.cfg.weight_decay);
  MomentumPair<double> pair{enc.parameters(true), key.parameters(true), c.cfg.ema_m};
  MomentumPair<double> buf_pair{enc.buffers(), key.buffers(), c.cfg.ema_m};
  MemoryQueue<double> queue(c.cfg.queue_capacity, enc.cfg.embed_dim);
  const size_t steps = c.crops.size() / static_cast<size_t>(c.batch);
  std::vector<double> losses;
  for (int epoch = 0; epoch < c.cfg.epochs; ++epoch) {
    std::vector<size_t> order = shuffled_indices(c.crops.size(), c.rng);
    double total = 0;
    for (size_t s = 0; s < steps; ++s) {
      // Color-distort two copies of each raster, then slice deterministically.
      std::vector<std::vector<Image>> q_views(n_views), k_views(n_views);
      for (int b = 0; b < c.batch; ++b) {
        const Image& src = c.crops[order[s * c.batch + static_cast<size_t>(b)]];
        auto sq = slice4(apply_recipe(src, distort, c.rng), mode, side);
        auto sk = slice4(apply_recipe(src, distort, c.rng), mode, side);
        for (size_t v = 0; v < n_views; ++v) {
          q_views[v].push_back(std::move(sq[v].view));
          k_views[v].push_back(std::move(sk[v].view));
        }
      }
      std::vector<Tape<double>> tapes(n_views);
      Matd q_sum = Matd::Zero(enc.cfg.embed_dim, c.batch);
      Matd k_sum = Matd::Zero(enc.cfg.embed_dim, c.batch);
      for (size_t v = 0; v < n_views; ++v) {
        q_sum += enc.embed(chw_batch(q_views[v]), &tapes[v], true);
        k_sum += key.embed(chw_batch(k_views[v]), nullptr, true);
      }
      Matd q_raw = q_sum.transpose();
      Matd q_hat = l2_normalize_rows(q_raw);
      Matd k_hat = l2_normalize_rows(Matd(k_sum.transpose()));
      ContrastiveBatch<double> cb;
      cb.queries = q_hat;
      cb.positive_keys = k_hat;
      cb.negative_keys = queue.snapshot();
      cb.temperature = c.cfg.temperature;
      cb.in_batch_negatives = queue.fill() == 0;
      auto g = ntxent_loss_grad(cb);
      total += g.loss;
      // q = sum over views, so each view's branch receives the same upstream.
      Matd dq_cols = normalize_rows_backward(q_raw, g.d_queries).transpose();
      enc.zero_grads();
      for (size_t v = 0; v < n_views; ++v) enc.backward_embed(dq_cols, tapes[v]);
      opt.step();
      ema_update(pair);
      ema_update(buf_pair);
      queue.push(k_hat);
    }
    losses.push_back(total / static_cast<double>(steps));
  }
  return losses;
}

// ---- triplet ----------------------------------------------------------------

std::vector<double> run_triplet(Encoderd& enc, Ctx& c,
                                const std::vector<const ImageRecord*>& recs) {
  // Group structure over the training records.
  std::map<std::string, std::vector<size_t>> by_group;
  for (size_t i = 0; i < recs.size(); ++i)
    if (recs[i]->group_id) by_group[*recs[i]->group_id].push_back(i);
  if (by_group.empty())
    throw std::invalid_argument("train: triplet method needs group labels, none present");
  if (by_group.size() < 2)
    throw std::invalid_argument("train: triplet method needs at least two groups");
  std::vector<std::vector<size_t>> groups;
  std::map<size_t, size_t> group_of;
  for (auto& [name, members] : by_group) {
    for (size_t m : members) group_of[m] = groups.size();
    groups.push_back(members);
  }
  std::vector<size_t> anchors;
  for (size_t i = 0; i < recs.size(); ++i)
    if (recs[i]->group_id && by_group[*recs[i]->group_id].size() >= 2) anchors.push_back(i);
  if (anchors.empty())
    throw std::invalid_argument("train: triplet method needs a group with two or more members");
  if (anchors.size() < static_cast<size_t>(c.batch))
    throw std::invalid_argument("train: batch_size exceeds the available anchors");

  const int side = enc.cfg.input_side;
  std::vector<Image> resized;
  resized.reserve(c.crops.size());
  for (const Image& img : c.crops) resized.push_back(resize_bilinear(img, side, side));

  Sgd<double> opt(enc.parameters(true), enc.gradients(true), c.cfg.lr, c.cfg.momentum,
                  c.cfg.weight_decay);
  const size_t steps = anchors.size() / static_cast<size_t>(c.batch);
  std::vector<double> losses;
  for (int epoch = 0; epoch < c.cfg.epochs; ++epoch) {
    std::vector<size_t> order = shuffled_indices(anchors.size(), c.rng);
    double total = 0;
    for (size_t s = 0; s < steps; ++s) {
      std::vector<Image> xa, xp, xn;
      for (int b = 0; b < c.batch; ++b) {
        size_t a = anchors[order[s * c.batch + static_cast<size_t>(b)]];
        const std::vector<size_t>& own = groups[group_of[a]];
        size_t p = a;
        while (p == a) p = own[static_cast<size_t>(rand_int(c.rng, 0, static_cast<int>(own.size()) - 1))];
        size_t og = group_of[a];
        while (og == group_of[a])
          og = static_cast<size_t>(rand_int(c.rng, 0, static_cast<int>(groups.size()) - 1));
        size_t n = groups[og][static_cast<size_t>(
            rand_int(c.rng, 0, static_cast<int>(groups[og].size()) - 1))];
        xa.push_back(resized[a]);
        xp.push_back(resized[p]);
        xn.push_back(resized[n]);
      }
      Tape<double> ta, tp, tn;
      TripletBatch<double> tb;
      tb.anchors = enc.embed(chw_batch(xa), &ta, true).transpose();
      tb.positives = enc.embed(chw_batch(xp), &tp, true).transpose();
      tb.negatives = enc.embed(chw_batch(xn), &tn, true).transpose();
      auto g = triplet_loss_grad(tb, c.cfg.margin);
      total += g.loss;
      enc.zero_grads();
      enc.backward_embed(g.d_anchors.transpose(), ta);
      enc.backward_embed(g.d_positives.transpose(), tp);
      enc.backward_embed(g.d_negatives.transpose(), tn);
      opt.step();
    }
    losses.push_back(total / static_cast<double>(steps));
  }
  return losses;
}

void check_head_pairing(Method m, const EncoderConfig& ec) {
  HeadKind need = HeadKind::none;
  if (m == Method::mocov2) need = HeadKind::projector_mlp;
  if (m == Method::simsiam_v0 || m == Method::simsiam_v1 || m == Method::simsiam_v2 ||
      m == Method::byol)
    need = HeadKind::projector_plus_predictor;
  if (ec.head != need)
    throw std::invalid_argument("train: method " + to_string(m) + " requires head " +
                                to_string(need) + ", got " + to_string(ec.head));
}

}  // namespace

Method method_from_string(const std::string& s) {
  static const std::map<std::string, Method> table = {
      {"triplet", Method::triplet},       {"simsiam_v0", Method::simsiam_v0},
      {"simsiam_v1", Method::simsiam_v1}, {"simsiam_v2", Method::simsiam_v2},
      {"byol", Method::byol},             {"mocov2", Method::mocov2},
      {"pbcnet", Method::pbcnet},         {"pbcnet_horiz", Method::pbcnet_horiz},
      {"pbcnet_vert", Method::pbcnet_vert}};
  auto it = table.find(s);
  if (it == table.end()) throw std::invalid_argument("unknown method '" + s + "'");
  return it->second;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::triplet: return "triplet";
    case Method::simsiam_v0: return "simsiam_v0";
    case Method::simsiam_v1: return "simsiam_v1";
    case Method::simsiam_v2: return "simsiam_v2";
    case Method::byol: return "byol";
    case Method::mocov2: return "mocov2";
    case Method::pbcnet: return "pbcnet";
    case Method::pbcnet_horiz: return "pbcnet_horiz";
    default: return "pbcnet_vert";
  }
}

int TrainConfig::effective_batch() const {
  if (batch_size > 0) return batch_size;
  switch (method) {
    case Method::triplet:
    case Method::simsiam_v0:
    case Method::simsiam_v1: return 12;
    case Method::simsiam_v2:
    case Method::byol:
    case Method::mocov2: return 128;
    default: return 32;  // pbcnet family
  }
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"method", to_string(c.method)},
           {"epochs", c.epochs},
           {"batch_size", c.batch_size},
           {"lr", c.lr},
           {"momentum", c.momentum},
           {"weight_decay", c.weight_decay},
           {"temperature", c.temperature},
           {"ema_m", c.ema_m},
           {"queue_capacity", c.queue_capacity},
           {"margin", c.margin},
           {"seed", c.seed}};
}

void from_json(const json& j, TrainConfig& c) {
  c = TrainConfig{};
  if (j.contains("method")) c.method = method_from_string(j["method"].get<std::string>());
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.momentum = j.value("momentum", c.momentum);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.temperature = j.value("temperature", c.temperature);
  c.ema_m = j.value("ema_m", c.ema_m);
  c.queue_capacity = j.value("queue_capacity", c.queue_capacity);
  c.margin = j.value("margin", c.margin);
  c.seed = j.value("seed", c.seed);
}

void to_json(json& j, const RunManifest& m) {
  j = json{{"config", m.config},
           {"encoder", m.encoder},
           {"epoch_losses", m.epoch_losses},
           {"wall_seconds", m.wall_seconds}};
}

void from_json(const json& j, RunManifest& m) {
  m.config = j.at("config").get<TrainConfig>();
  m.encoder = j.at("encoder").get<EncoderConfig>();
  m.epoch_losses = j.at("epoch_losses").get<std::vector<double>>();
  m.wall_seconds = j.value("wall_seconds", 0.0);
}

TrainResult train(const TrainConfig& config, const std::vector<ImageRecord>& records,
                  const EncoderConfig& encoder_config) {
  if (config.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (config.lr <= 0) throw std::invalid_argument("train: lr must be positive");
  if (config.momentum < 0 || config.momentum >= 1)
    throw std::invalid_argument("train: momentum must lie in [0,1)");
  if (config.ema_m < 0 || config.ema_m > 1)
    throw std::invalid_argument("train: ema_m must lie in [0,1]");
  if (config.method == Method::triplet && config.margin <= 0)
    throw std::invalid_argument("train: triplet margin must be positive");
  check_head_pairing(config.method, encoder_config);

  std::vector<const ImageRecord*> recs;
  for (const auto& r : records)
    if (r.split == Split::train) recs.push_back(&r);
  if (recs.empty()) throw std::invalid_argument("train: no records in the train split");

  const int batch = config.effective_batch();
  if (batch < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (uses_queue(config.method)) {
    if (config.queue_capacity < 1)
      throw std::invalid_argument("train: queue_capacity must be >= 1");
    if (config.queue_capacity < batch)
      throw std::invalid_argument("train: queue_capacity smaller than batch_size");
    if (config.temperature <= 0)
      throw std::invalid_argument("train: temperature must be positive");
  }
  if (config.method != Method::triplet && recs.size() < static_cast<size_t>(batch))
    throw std::invalid_argument("train: batch_size exceeds the training set");

  Ctx ctx{config, {}, std::mt19937_64(config.seed), batch};
  ctx.crops.reserve(recs.size());
  for (const ImageRecord* r : recs) ctx.crops.push_back(crop_primary(*r));

  auto t0 = std::chrono::steady_clock::now();
  TrainResult result;
  result.encoder = build_encoder<double>(encoder_config, ctx.rng);
  switch (config.method) {
    case Method::triplet:
      result.manifest.epoch_losses = run_triplet(result.encoder, ctx, recs);
      break;
    case Method::simsiam_v0:
    case Method::simsiam_v1:
    case Method::simsiam_v2:
      result.manifest.epoch_losses = run_simsiam(result.encoder, ctx, config.method);
      break;
    case Method::byol:
      result.manifest.epoch_losses = run_byol(result.encoder, ctx);
      break;
    case Method::mocov2:
      result.manifest.epoch_losses = run_moco(result.encoder, ctx);
      break;
    default:
      result.manifest.epoch_losses = run_pbcnet(result.encoder, ctx, slice_mode_of(config.method));
      break;
  }
  auto t1 = std::chrono::steady_clock::now();
  result.manifest.config = config;
  result.manifest.encoder = encoder_config;
  result.manifest.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
  return result;
}

}  // namespace colorvar

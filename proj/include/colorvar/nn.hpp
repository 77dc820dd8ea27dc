#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "colorvar/linalg.hpp"

namespace colorvar {

/// LIFO store of forward-pass intermediates. Each layer pushes what its
/// backward pass needs; running backward in reverse layer order pops the
/// entries in exactly the push order. Multi-view training keeps one tape per
/// view, so several forwards can be in flight against shared parameters and
/// their backwards accumulate into the same gradient buffers.
template <class Scalar>
struct Tape {
  std::vector<Mat<Scalar>> stack;
  void push(Mat<Scalar> m) { stack.push_back(std::move(m)); }
  Mat<Scalar> pop() {
    if (stack.empty()) throw std::logic_error("tape: pop on empty tape");
    Mat<Scalar> m = std::move(stack.back());
    stack.pop_back();
    return m;
  }
  bool empty() const { return stack.empty(); }
};

/// Batch convention throughout: columns are samples (features x B).
/// Image features are CHW-flattened: index = c*H*W + y*W + x.
template <class Scalar>
class Layer {
 public:
  virtual ~Layer() = default;
  /// If `tape` is null the pass is inference-only and records nothing.
  /// `training` switches batch-stat behaviour (BatchNorm2d); it is independent
  /// of whether gradients are recorded.
  virtual Mat<Scalar> forward(const Mat<Scalar>& x, Tape<Scalar>* tape, bool training) = 0;
  /// Consumes this layer's tape entries, accumulates parameter gradients, and
  /// returns the gradient with respect to the layer input.
  virtual Mat<Scalar> backward(const Mat<Scalar>& gout, Tape<Scalar>& tape) = 0;
  virtual void collect(std::vector<Mat<Scalar>*>& params, std::vector<Mat<Scalar>*>& grads) {}
  /// Non-learned state that still belongs to a checkpoint (BN running stats).
  virtual void collect_buffers(std::vector<Mat<Scalar>*>& buffers) {}
  virtual std::unique_ptr<Layer<Scalar>> clone() const = 0;
};

template <class Scalar>
void uniform_init(Mat<Scalar>& m, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = Scalar(dist(rng));
}

template <class Scalar>
class Linear : public Layer<Scalar> {
 public:
  Linear(int in, int out, std::mt19937_64& rng) : in_(in), out_(out) {
    W_.resize(out, in);
    b_.resize(out, 1);
    double bound = 1.0 / std::sqrt(static_cast<double>(in));
    uniform_init(W_, bound, rng);
    uniform_init(b_, bound, rng);
    gW_ = Mat<Scalar>::Zero(out, in);
    gb_ = Mat<Scalar>::Zero(out, 1);
  }

  Mat<Scalar> forward(const Mat<Scalar>& x, Tape<Scalar>* tape, bool) override {
    if (x.rows() != in_) throw std::invalid_argument("linear: input has wrong feature count");
    Mat<Scalar> y = W_ * x;
    y.colwise() += b_.col(0);
    if (tape) tape->push(x);
    return y;
  }

  Mat<Scalar> backward(const Mat<Scalar>& gout, Tape<Scalar>& tape) override {
    Mat<Scalar> x = tape.pop();
    gW_.noalias() += gout * x.transpose();
    gb_.col(0) += gout.rowwise().sum();
    return W_.transpose() * gout;
  }

  void collect(std::vector<Mat<Scalar>*>& params, std::vector<Mat<Scalar>*>& grads) override {
    params.push_back(&W_);
    params.push_back(&b_);
    grads.push_back(&gW_);
    grads.push_back(&gb_);
  }

  std::unique_ptr<Layer<Scalar>> clone() const override {
    return std::make_unique<Linear>(*this);
  }

 private:
  int in_, out_;
  Mat<Scalar> W_, b_, gW_, gb_;
};

template <class Scalar>
class ReLU : public Layer<Scalar> {
 public:
  Mat<Scalar> forward(const Mat<Scalar>& x, Tape<Scalar>* tape, bool) override {
    if (tape) tape->push(x);
    return x.cwiseMax(Scalar(0));
  }
  Mat<Scalar> backward(const Mat<Scalar>& gout, Tape<Scalar>& tape) override {
    Mat<Scalar> x = tape.pop();
    return (x.array() > Scalar(0)).template cast<Scalar>() * gout.array();
  }
  std::unique_ptr<Layer<Scalar>> clone() const override { return std::make_unique<ReLU>(*this); }
};

/// 2D convolution on CHW columns with static input shape, implemented as
/// per-sample im2col + GEMM. The patch matrix is rebuilt in backward rather
/// than taped, trading FLOPs for a much smaller activation footprint.
template <class Scalar>
class Conv2d : public Layer<Scalar> {
 public:
  Conv2d(int in_ch, int out_ch, int k, int stride, int pad, int in_h, int in_w,
         std::mt19937_64& rng)
      : in_ch_(in_ch), out_ch_(out_ch), k_(k), stride_(stride), pad_(pad), in_h_(in_h),
        in_w_(in_w) {
    out_h_ = (in_h + 2 * pad - k) / stride + 1;
    out_w_ = (in_w + 2 * pad - k) / stride + 1;
    if (out_h_ <= 0 || out_w_ <= 0) throw std::invalid_argument("conv2d: output would be empty");
    W_.resize(out_ch, in_ch * k * k);
    b_.resize(out_ch, 1);
    double bound = 1.0 / std::sqrt(static_cast<double>(in_ch) * k * k);
    uniform_init(W_, bound, rng);
    uniform_init(b_, bound, rng);
    gW_ = Mat<Scalar>::Zero(W_.rows(), W_.cols());
    gb_ = Mat<Scalar>::Zero(out_ch, 1);
  }

  int out_h() const { return out_h_; }
  int out_w() const { return out_w_; }

  Mat<Scalar> forward(const Mat<Scalar>& x, Tape<Scalar>* tape, bool) override {
    check_input(x);
    const Eigen::Index B = x.cols();
    Mat<Scalar> y(static_cast<Eigen::Index>(out_ch_) * out_h_ * out_w_, B);
    Mat<Scalar> P(static_cast<Eigen::Index>(in_ch_) * k_ * k_,
                  static_cast<Eigen::Index>(out_h_) * out_w_);
    for (Eigen::Index bcol = 0; bcol < B; ++bcol) {
      im2col(x.col(bcol), P);
      Mat<Scalar> yb = W_ * P;
      yb.colwise() += b_.col(0);
      // CHW flattening of (out_ch x oh*ow) is its row-major storage.
      Eigen::Map<RowMat>(y.col(bcol).data(), out_ch_,
                         static_cast<Eigen::Index>(out_h_) * out_w_) = yb;
    }
    if (tape) tape->push(x);
    return y;
  }

  Mat<Scalar> backward(const Mat<Scalar>& gout, Tape<Scalar>& tape) override {
    Mat<Scalar> x = tape.pop();
    const Eigen::Index B = x.cols();
    Mat<Scalar> dx = Mat<Scalar>::Zero(x.rows(), B);
    Mat<Scalar> P(static_cast<Eigen::Index>(in_ch_) * k_ * k_,
                  static_cast<Eigen::Index>(out_h_) * out_w_);
    for (Eigen::Index bcol = 0; bcol < B; ++bcol) {
      Eigen::Map<const RowMat> G(gout.col(bcol).data(), out_ch_,
                                 static_cast<Eigen::Index>(out_h_) * out_w_);
      im2col(x.col(bcol), P);
      gW_.noalias() += G * P.transpose();
      gb_.col(0) += G.rowwise().sum();
      Mat<Scalar> dP = W_.transpose() * G;
      col2im_add(dP, dx.col(bcol));
    }
    return dx;
  }

  void collect(std::vector<Mat<Scalar>*>& params, std::vector<Mat<Scalar>*>& grads) override {
    params.push_back(&W_);
    params.push_back(&b_);
    grads.push_back(&gW_);
    grads.push_back(&gb_);
  }

  std::unique_ptr<Layer<Scalar>> clone() const override { return std::make_unique<Conv2d>(*this); }

 private:
  using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  void check_input(const Mat<Scalar>& x) const {
    if (x.rows() != static_cast<Eigen::Index>(in_ch_) * in_h_ * in_w_)
      throw std::invalid_argument("conv2d: input rows do not match configured C*H*W");
  }

  template <class Col>
  void im2col(const Col& xc, Mat<Scalar>& P) const {
    const int hw = in_h_ * in_w_;
    for (int oy = 0; oy < out_h_; ++oy)
      for (int ox = 0; ox < out_w_; ++ox) {
        const Eigen::Index pcol = static_cast<Eigen::Index>(oy) * out_w_ + ox;
        for (int c = 0; c < in_ch_; ++c)
          for (int ky = 0; ky < k_; ++ky) {
            const int iy = oy * stride_ - pad_ + ky;
            for (int kx = 0; kx < k_; ++kx) {
              const int ix = ox * stride_ - pad_ + kx;
              const Eigen::Index prow = (static_cast<Eigen::Index>(c) * k_ + ky) * k_ + kx;
              P(prow, pcol) = (iy >= 0 && iy < in_h_ && ix >= 0 && ix < in_w_)
                                  ? xc[static_cast<Eigen::Index>(c) * hw + iy * in_w_ + ix]
                                  : Scalar(0);
            }
          }
      }
  }

  template <class Col>
  void col2im_add(const Mat<Scalar>& dP, Col&& dxc) const {
    const int hw = in_h_ * in_w_;
    for (int oy = 0; oy < out_h_; ++oy)
      for (int ox = 0; ox < out_w_; ++ox) {
        const Eigen::Index pcol = static_cast<Eigen::Index>(oy) * out_w_ + ox;
        for (int c = 0; c < in_ch_; ++c)
          for (int ky = 0; ky < k_; ++ky) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= in_h_) continue;
            for (int kx = 0; kx < k_; ++kx) {
              const int ix = ox * stride_ - pad_ + kx;
              if (ix < 0 || ix >= in_w_) continue;
              const Eigen::Index prow = (static_cast<Eigen::Index>(c) * k_ + ky) * k_ + kx;
              dxc[static_cast<Eigen::Index>(c) * hw + iy * in_w_ + ix] += dP(prow, pcol);
            }
          }
      }
  }

  int in_ch_, out_ch_, k_, stride_, pad_, in_h_, in_w_, out_h_ = 0, out_w_ = 0;
  Mat<Scalar> W_, b_, gW_, gb_;
};

template <class Scalar>
class MaxPool2d : public Layer<Scalar> {
 public:
  MaxPool2d(int channels, int k, int stride, int pad, int in_h, int in_w)
      : ch_(channels), k_(k), stride_(stride), pad_(pad), in_h_(in_h), in_w_(in_w) {
    out_h_ = (in_h + 2 * pad - k) / stride + 1;
    out_w_ = (in_w + 2 * pad - k) / stride + 1;
    if (out_h_ <= 0 || out_w_ <= 0) throw std::invalid_argument("maxpool: output would be empty");
    if (pad >= k) throw std::invalid_argument("maxpool: pad must be smaller than kernel");
  }

  int out_h() const { return out_h_; }
  int out_w() const { return out_w_; }

  Mat<Scalar> forward(const Mat<Scalar>& x, Tape<Scalar>* tape, bool) override {
    const Eigen::Index B = x.cols();
    const int hw = in_h_ * in_w_;
    Mat<Scalar> y(static_cast<Eigen::Index>(ch_) * out_h_ * out_w_, B);
    Mat<Scalar> idx(y.rows(), B);  // winning flat input index, stored exactly
    for (Eigen::Index bcol = 0; bcol < B; ++bcol)
      for (int c = 0; c < ch_; ++c)
        for (int oy = 0; oy < out_h_; ++oy)
          for (int ox = 0; ox < out_w_; ++ox) {
            Scalar best = -std::numeric_limits<Scalar>::infinity();
            Eigen::Index best_idx = -1;
            for (int ky = 0; ky < k_; ++ky) {
              const int iy = oy * stride_ - pad_ + ky;
              if (iy < 0 || iy >= in_h_) continue;
              for (int kx = 0; kx < k_; ++kx) {
                const int ix = ox * stride_ - pad_ + kx;
                if (ix < 0 || ix >= in_w_) continue;
                const Eigen::Index fi = static_cast<Eigen::Index>(c) * hw + iy * in_w_ + ix;
                if (x(fi, bcol) > best) {
                  best = x(fi, bcol);
                  best_idx = fi;
                }
              }
            }
            const Eigen::Index fo =
                (static_cast<Eigen::Index>(c) * out_h_ + oy) * out_w_ + ox;
            y(fo, bcol) = best;
            idx(fo, bcol) = Scalar(best_idx);
          }
    if (tape) tape->push(std::move(idx));
    return y;
  }

  Mat<Scalar> backward(const Mat<Scalar>& gout, Tape<Scalar>& tape) override {
    Mat<Scalar> idx = tape.pop();
    Mat<Scalar> dx = Mat<Scalar>::Zero(static_cast<Eigen::Index>(ch_) * in_h_ * in_w_, gout.cols());
    for (Eigen::Index bcol = 0; bcol < gout.cols(); ++bcol)
      for (Eigen::Index r = 0; r < gout.rows(); ++r)
        dx(static_cast<Eigen::Index>(idx(r, bcol)), bcol) += gout(r, bcol);
    return dx;
  }

  std::unique_ptr<Layer<Scalar>> clone() const override {
    return std::make_unique<MaxPool2d>(*this);
  }

 private:
  int ch_, k_, stride_, pad_, in_h_, in_w_, out_h_ = 0, out_w_ = 0;
};

/// Per-channel batch normalization over (B, H, W). Training-mode forwards use
/// batch statistics and update the running buffers; eval-mode forwards use the
/// running buffers and treat them as constants in backward.
template <class Scalar>
class BatchNorm2d : public Layer<Scalar> {
 public:
  BatchNorm2d(int channels, int hw, Scalar eps = Scalar(1e-5), Scalar momentum = Scalar(0.1))
      : ch_(channels), hw_(hw), eps_(eps), momentum_(momentum) {
    gamma_ = Mat<Scalar>::Ones(channels, 1);
    beta_ = Mat<Scalar>::Zero(channels, 1);
    g_gamma_ = Mat<Scalar>::Zero(channels, 1);
    g_beta_ = Mat<Scalar>::Zero(channels, 1);
    running_mean_ = Mat<Scalar>::Zero(channels, 1);
    running_var_ = Mat<Scalar>::Ones(channels, 1);
  }

  Mat<Scalar> forward(const Mat<Scalar>& x, Tape<Scalar>* tape, bool training) override {
    if (x.rows() != static_cast<Eigen::Index>(ch_) * hw_)
      throw std::invalid_argument("batchnorm: input rows do not match configured C*H*W");
    const Eigen::Index B = x.cols();
    Mat<Scalar> xhat(x.rows(), B);
    Mat<Scalar> inv_std(ch_, 1);
    for (int c = 0; c < ch_; ++c) {
      auto block = x.middleRows(static_cast<Eigen::Index>(c) * hw_, hw_);
      Scalar mean, var;
      if (training) {
        const Scalar n = Scalar(hw_) * Scalar(B);
        mean = block.sum() / n;
        var = (block.array() - mean).square().sum() / n;
        running_mean_(c, 0) = (Scalar(1) - momentum_) * running_mean_(c, 0) + momentum_ * mean;
        Scalar unbiased = n > Scalar(1) ? var * n / (n - Scalar(1)) : var;
        running_var_(c, 0) = (Scalar(1) - momentum_) * running_var_(c, 0) + momentum_ * unbiased;
      } else {
        mean = running_mean_(c, 0);
        var = running_var_(c, 0);
      }
      inv_std(c, 0) = Scalar(1) / std::sqrt(var + eps_);
      xhat.middleRows(static_cast<Eigen::Index>(c) * hw_, hw_) =
          (block.array() - mean) * inv_std(c, 0);
    }
    Mat<Scalar> y(x.rows(), B);
    for (int c = 0; c < ch_; ++c)
      y.middleRows(static_cast<Eigen::Index>(c) * hw_, hw_) =
          gamma_(c, 0) * xhat.middleRows(static_cast<Eigen::Index>(c) * hw_, hw_).array() +
          beta_(c, 0);
    if (tape) {
      tape->push(xhat);
      tape->push(inv_std);
      Mat<Scalar> flag(1, 1);
      flag(0, 0) = training ? Scalar(1) : Scalar(0);
      tape->push(flag);
    }
    return y;
  }

  Mat<Scalar> backward(const Mat<Scalar>& gout, Tape<Scalar>& tape) override {
    const bool training = tape.pop()(0, 0) != Scalar(0);
    Mat<Scalar> inv_std = tape.pop();
    Mat<Scalar> xhat = tape.pop();
    const Eigen::Index B = gout.cols();
    Mat<Scalar> dx(gout.rows(), B);
    for (int c = 0; c < ch_; ++c) {
      auto g = gout.middleRows(static_cast<Eigen::Index>(c) * hw_, hw_);
      auto xh = xhat.middleRows(static_cast<Eigen::Index>(c) * hw_, hw_);
      const Scalar sum_g = g.sum();
      const Scalar sum_gx = (g.array() * xh.array()).sum();
      g_gamma_(c, 0) += sum_gx;
      g_beta_(c, 0) += sum_g;
      if (training) {
        const Scalar n = Scalar(hw_) * Scalar(B);
        dx.middleRows(static_cast<Eigen::Index>(c) * hw_, hw_) =
            (gamma_(c, 0) * inv_std(c, 0) / n) *
            (n * g.array() - sum_g - xh.array() * sum_gx);
      } else {
        dx.middleRows(static_cast<Eigen::Index>(c) * hw_, hw_) =
            gamma_(c, 0) * inv_std(c, 0) * g.array();
      }
    }
    return dx;
  }

  void collect(std::vector<Mat<Scalar>*>& params, std::vector<Mat<Scalar>*>& grads) override {
    params.push_back(&gamma_);
    params.push_back(&beta_);
    grads.push_back(&g_gamma_);
    grads.push_back(&g_beta_);
  }

  void collect_buffers(std::vector<Mat<Scalar>*>& buffers) override {
    buffers.push_back(&running_mean_);
    buffers.push_back(&running_var_);
  }

  std::unique_ptr<Layer<Scalar>> clone() const override {
    return std::make_unique<BatchNorm2d>(*this);
  }

 private:
  int ch_, hw_;
  Scalar eps_, momentum_;
  Mat<Scalar> gamma_, beta_, g_gamma_, g_beta_, running_mean_, running_var_;
};

template <class Scalar>
class GlobalAvgPool : public Layer<Scalar> {
 public:
  GlobalAvgPool(int channels, int hw) : ch_(channels), hw_(hw) {}

  Mat<Scalar> forward(const Mat<Scalar>& x, Tape<Scalar>*, bool) override {
    if (x.rows() != static_cast<Eigen::Index>(ch_) * hw_)
      throw std::invalid_argument("gap: input rows do not match configured C*H*W");
    Mat<Scalar> y(ch_, x.cols());
    for (int c = 0; c < ch_; ++c)
      y.row(c) = x.middleRows(static_cast<Eigen::Index>(c) * hw_, hw_).colwise().mean();
    return y;
  }

  Mat<Scalar> backward(const Mat<Scalar>& gout, Tape<Scalar>&) override {
    Mat<Scalar> dx(static_cast<Eigen::Index>(ch_) * hw_, gout.cols());
    for (int c = 0; c < ch_; ++c)
      dx.middleRows(static_cast<Eigen::Index>(c) * hw_, hw_) =
          (gout.row(c) / Scalar(hw_)).colwise().replicate(hw_);
    return dx;
  }

  std::unique_ptr<Layer<Scalar>> clone() const override {
    return std::make_unique<GlobalAvgPool>(*this);
  }

 private:
  int ch_, hw_;
};

template <class Scalar>
class Sequential : public Layer<Scalar> {
 public:
  Sequential() = default;
  Sequential(const Sequential& other) {
    layers_.reserve(other.layers_.size());
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
  }
  Sequential& operator=(const Sequential& other) {
    if (this != &other) {
      layers_.clear();
      for (const auto& l : other.layers_) layers_.push_back(l->clone());
    }
    return *this;
  }
  Sequential(Sequential&&) = default;
  Sequential& operator=(Sequential&&) = default;

  void add(std::unique_ptr<Layer<Scalar>> layer) { layers_.push_back(std::move(layer)); }
  bool empty() const { return layers_.empty(); }

  Mat<Scalar> forward(const Mat<Scalar>& x, Tape<Scalar>* tape, bool training) override {
    Mat<Scalar> cur = x;
    for (auto& l : layers_) cur = l->forward(cur, tape, training);
    return cur;
  }

  Mat<Scalar> backward(const Mat<Scalar>& gout, Tape<Scalar>& tape) override {
    Mat<Scalar> g = gout;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g, tape);
    return g;
  }

  void collect(std::vector<Mat<Scalar>*>& params, std::vector<Mat<Scalar>*>& grads) override {
    for (auto& l : layers_) l->collect(params, grads);
  }
  void collect_buffers(std::vector<Mat<Scalar>*>& buffers) override {
    for (auto& l : layers_) l->collect_buffers(buffers);
  }

  std::unique_ptr<Layer<Scalar>> clone() const override {
    return std::make_unique<Sequential>(*this);
  }

 private:
  std::vector<std::unique_ptr<Layer<Scalar>>> layers_;
};

/// y = relu(body(x) + shortcut(x)); the shortcut defaults to identity.
template <class Scalar>
class Residual : public Layer<Scalar> {
 public:
  Residual(Sequential<Scalar> body, std::unique_ptr<Sequential<Scalar>> shortcut = nullptr)
      : body_(std::move(body)), shortcut_(std::move(shortcut)) {}
  Residual(const Residual& other)
      : body_(other.body_),
        shortcut_(other.shortcut_ ? std::make_unique<Sequential<Scalar>>(*other.shortcut_)
                                  : nullptr) {}

  Mat<Scalar> forward(const Mat<Scalar>& x, Tape<Scalar>* tape, bool training) override {
    Mat<Scalar> y = body_.forward(x, tape, training);
    if (shortcut_)
      y += shortcut_->forward(x, tape, training);
    else
      y += x;
    if (tape) tape->push(y);
    return y.cwiseMax(Scalar(0));
  }

  Mat<Scalar> backward(const Mat<Scalar>& gout, Tape<Scalar>& tape) override {
    Mat<Scalar> pre = tape.pop();
    Mat<Scalar> g = (pre.array() > Scalar(0)).template cast<Scalar>() * gout.array();
    Mat<Scalar> dx_short = shortcut_ ? shortcut_->backward(g, tape) : g;
    Mat<Scalar> dx_body = body_.backward(g, tape);
    return dx_body + dx_short;
  }

  void collect(std::vector<Mat<Scalar>*>& params, std::vector<Mat<Scalar>*>& grads) override {
    body_.collect(params, grads);
    if (shortcut_) shortcut_->collect(params, grads);
  }
  void collect_buffers(std::vector<Mat<Scalar>*>& buffers) override {
    body_.collect_buffers(buffers);
    if (shortcut_) shortcut_->collect_buffers(buffers);
  }

  std::unique_ptr<Layer<Scalar>> clone() const override {
    return std::make_unique<Residual>(*this);
  }

 private:
  Sequential<Scalar> body_;
  std::unique_ptr<Sequential<Scalar>> shortcut_;
};

/// Plain MLP: Linear(+ReLU) per hop, no activation after the last layer.
template <class Scalar>
Sequential<Scalar> make_mlp(const std::vector<int>& dims, std::mt19937_64& rng) {
  if (dims.size() < 2) throw std::invalid_argument("make_mlp: need at least input and output dims");
  Sequential<Scalar> seq;
  for (size_t i = 0; i + 1 < dims.size(); ++i) {
    seq.add(std::make_unique<Linear<Scalar>>(dims[i], dims[i + 1], rng));
    if (i + 2 < dims.size()) seq.add(std::make_unique<ReLU<Scalar>>());
  }
  return seq;
}

}  // namespace colorvar

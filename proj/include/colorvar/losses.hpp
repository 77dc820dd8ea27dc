#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "colorvar/linalg.hpp"

namespace colorvar {

/// Aligned anchor/positive/negative rows; row i of each matrix is one triplet.
template <class Scalar>
struct TripletBatch {
  Mat<Scalar> anchors, positives, negatives;
};

/// Query/key rows plus a pool of negative keys. Rows are expected to be
/// l2-normalized (checked loosely so finite-difference probes stay legal).
/// `in_batch_negatives` additionally scores each query against the other
/// positions' keys — the warm-up mode used while the memory queue is empty.
template <class Scalar>
struct ContrastiveBatch {
  Mat<Scalar> queries;        // B x D
  Mat<Scalar> positive_keys;  // B x D
  Mat<Scalar> negative_keys;  // K x D (K may be 0)
  Scalar temperature = Scalar(0.05);
  bool in_batch_negatives = false;
};

template <class Scalar>
struct TripletGrads {
  Scalar loss;
  Mat<Scalar> d_anchors, d_positives, d_negatives;
};

template <class Scalar>
struct NtxentGrads {
  Scalar loss;
  Mat<Scalar> d_queries;  // keys and queue are constants (stop-gradient)
};

template <class Scalar>
struct NegcosGrads {
  Scalar loss;
  Mat<Scalar> d_predicted;  // target is a constant (stop-gradient)
};

namespace detail {

template <class Scalar>
void check_triplet(const TripletBatch<Scalar>& b, Scalar margin) {
  if (margin <= Scalar(0)) throw std::invalid_argument("triplet_loss: margin must be positive");
  if (b.anchors.rows() == 0) throw std::invalid_argument("triplet_loss: empty batch");
  if (b.positives.rows() != b.anchors.rows() || b.negatives.rows() != b.anchors.rows() ||
      b.positives.cols() != b.anchors.cols() || b.negatives.cols() != b.anchors.cols())
    throw std::invalid_argument("triplet_loss: anchor/positive/negative shapes differ");
}

template <class Scalar>
void check_rows_normalized(const Mat<Scalar>& m, const char* what) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Scalar n = m.row(i).norm();
    if (std::abs(n - Scalar(1)) > Scalar(1e-2))
      throw std::invalid_argument(std::string("ntxent_loss: ") + what +
                                  " rows must be l2-normalized");
  }
}

template <class Scalar>
void check_contrastive(const ContrastiveBatch<Scalar>& b) {
  if (b.temperature <= Scalar(0))
    throw std::invalid_argument("ntxent_loss: temperature must be positive");
  if (b.queries.rows() == 0) throw std::invalid_argument("ntxent_loss: empty batch");
  if (b.positive_keys.rows() != b.queries.rows() || b.positive_keys.cols() != b.queries.cols())
    throw std::invalid_argument("ntxent_loss: query/key shapes differ");
  if (b.negative_keys.rows() > 0 && b.negative_keys.cols() != b.queries.cols())
    throw std::invalid_argument("ntxent_loss: negative key width differs");
  check_rows_normalized(b.queries, "query");
  check_rows_normalized(b.positive_keys, "key");
  check_rows_normalized(b.negative_keys, "negative");
}

// Shared NT-Xent core; accumulates d/d queries when dq is non-null.
template <class Scalar>
Scalar ntxent_impl(const ContrastiveBatch<Scalar>& b, Mat<Scalar>* dq) {
  check_contrastive(b);
  const Eigen::Index B = b.queries.rows();
  const Eigen::Index K = b.negative_keys.rows();
  const Scalar tau = b.temperature;
  Mat<Scalar> qk = b.queries * b.positive_keys.transpose();  // B x B
  Mat<Scalar> qn;
  if (K > 0) qn = b.queries * b.negative_keys.transpose();  // B x K
  if (dq) *dq = Mat<Scalar>::Zero(B, b.queries.cols());

  Scalar total = Scalar(0);
  std::vector<Scalar> logits;
  for (Eigen::Index i = 0; i < B; ++i) {
    logits.clear();
    logits.push_back(qk(i, i) / tau);  // slot 0: the positive
    if (b.in_batch_negatives)
      for (Eigen::Index j = 0; j < B; ++j)
        if (j != i) logits.push_back(qk(i, j) / tau);
    for (Eigen::Index r = 0; r < K; ++r) logits.push_back(qn(i, r) / tau);

    Scalar mx = logits[0];
    for (Scalar v : logits) mx = std::max(mx, v);
    Scalar sum = Scalar(0);
    for (Scalar v : logits) sum += std::exp(v - mx);
    const Scalar lse = mx + std::log(sum);
    total += lse - logits[0];

    if (dq) {
      // d loss_i / d q_i = (1/tau) sum_t (softmax_t - [t==0]) * vec_t
      size_t t = 0;
      auto prob = [&](size_t idx) { return std::exp(logits[idx] - mx) / sum; };
      dq->row(i) += (prob(t) - Scalar(1)) / tau * b.positive_keys.row(i);
      ++t;
      if (b.in_batch_negatives)
        for (Eigen::Index j = 0; j < B; ++j)
          if (j != i) {
            dq->row(i) += prob(t) / tau * b.positive_keys.row(j);
            ++t;
          }
      for (Eigen::Index r = 0; r < K; ++r) {
        dq->row(i) += prob(t) / tau * b.negative_keys.row(r);
        ++t;
      }
    }
  }
  if (dq) *dq /= Scalar(B);
  return total / Scalar(B);
}

}  // namespace detail

/// Mean over the batch of max(0, margin + ||a-p||^2 - ||a-n||^2).
template <class Scalar>
Scalar triplet_loss(const TripletBatch<Scalar>& b, Scalar margin) {
  detail::check_triplet(b, margin);
  const Eigen::Index B = b.anchors.rows();
  Scalar total = Scalar(0);
  for (Eigen::Index i = 0; i < B; ++i) {
    Scalar d_ap = (b.anchors.row(i) - b.positives.row(i)).squaredNorm();
    Scalar d_an = (b.anchors.row(i) - b.negatives.row(i)).squaredNorm();
    total += std::max(Scalar(0), margin + d_ap - d_an);
  }
  return total / Scalar(B);
}

template <class Scalar>
TripletGrads<Scalar> triplet_loss_grad(const TripletBatch<Scalar>& b, Scalar margin) {
  detail::check_triplet(b, margin);
  const Eigen::Index B = b.anchors.rows();
  TripletGrads<Scalar> out;
  out.d_anchors = Mat<Scalar>::Zero(B, b.anchors.cols());
  out.d_positives = Mat<Scalar>::Zero(B, b.anchors.cols());
  out.d_negatives = Mat<Scalar>::Zero(B, b.anchors.cols());
  Scalar total = Scalar(0);
  for (Eigen::Index i = 0; i < B; ++i) {
    auto ap = b.anchors.row(i) - b.positives.row(i);
    auto an = b.anchors.row(i) - b.negatives.row(i);
    Scalar hinge = margin + ap.squaredNorm() - an.squaredNorm();
    if (hinge > Scalar(0)) {
      total += hinge;
      out.d_anchors.row(i) = Scalar(2) / Scalar(B) * (ap - an);
      out.d_positives.row(i) = Scalar(-2) / Scalar(B) * ap;
      out.d_negatives.row(i) = Scalar(2) / Scalar(B) * an;
    }
  }
  out.loss = total / Scalar(B);
  return out;
}

/// Mean over queries of -log( exp(q.k_q/tau) / sum over {positive, negatives} )
/// computed with a max-subtraction guard. With no negatives at all the loss is
/// exactly zero (the denominator equals the numerator).
template <class Scalar>
Scalar ntxent_loss(const ContrastiveBatch<Scalar>& b) {
  return detail::ntxent_impl<Scalar>(b, nullptr);
}

template <class Scalar>
NtxentGrads<Scalar> ntxent_loss_grad(const ContrastiveBatch<Scalar>& b) {
  NtxentGrads<Scalar> out;
  out.loss = detail::ntxent_impl<Scalar>(b, &out.d_queries);
  return out;
}

/// Mean of -cos(p_i, z_i); the target matrix never receives gradient.
template <class Scalar>
Scalar negcos_loss(const Mat<Scalar>& predicted, const Mat<Scalar>& target) {
  if (predicted.rows() == 0) throw std::invalid_argument("negcos_loss: empty batch");
  if (predicted.rows() != target.rows() || predicted.cols() != target.cols())
    throw std::invalid_argument("negcos_loss: shape mismatch");
  Scalar total = Scalar(0);
  for (Eigen::Index i = 0; i < predicted.rows(); ++i) {
    Scalar np = predicted.row(i).norm(), nz = target.row(i).norm();
    if (np == Scalar(0) || nz == Scalar(0))
      throw std::invalid_argument("negcos_loss: zero-norm row " + std::to_string(i));
    total -= predicted.row(i).dot(target.row(i)) / (np * nz);
  }
  return total / Scalar(predicted.rows());
}

template <class Scalar>
NegcosGrads<Scalar> negcos_loss_grad(const Mat<Scalar>& predicted, const Mat<Scalar>& target) {
  NegcosGrads<Scalar> out;
  out.loss = negcos_loss(predicted, target);  // also validates
  const Eigen::Index B = predicted.rows();
  out.d_predicted = Mat<Scalar>::Zero(B, predicted.cols());
  for (Eigen::Index i = 0; i < B; ++i) {
    Scalar np = predicted.row(i).norm();
    Vec<Scalar> ph = predicted.row(i).transpose() / np;
    Vec<Scalar> zh = target.row(i).transpose().normalized();
    // d(-p_hat . z_hat)/dp = -(z_hat - p_hat (p_hat . z_hat)) / ||p||
    out.d_predicted.row(i) = (-(zh - ph * ph.dot(zh)) / np / Scalar(B)).transpose();
  }
  return out;
}

}  // namespace colorvar

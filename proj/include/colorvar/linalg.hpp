#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace colorvar {

template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matd = Mat<double>;
using Vecd = Vec<double>;

/// Row-wise l2 normalization. Rows with norm below `min_norm` throw.
template <class Derived>
Mat<typename Derived::Scalar> l2_normalize_rows(const Eigen::MatrixBase<Derived>& m,
                                                typename Derived::Scalar min_norm = 0) {
  using Scalar = typename Derived::Scalar;
  Mat<Scalar> out = m;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    Scalar n = out.row(i).norm();
    if (n <= min_norm)
      throw std::runtime_error("l2_normalize_rows: zero-norm row " + std::to_string(i));
    out.row(i) /= n;
  }
  return out;
}

/// Gradient of u = x/||x|| given upstream du: dx = (du - u*(u.du)) / ||x||.
template <class Scalar>
Vec<Scalar> normalize_backward(const Vec<Scalar>& x_raw, const Vec<Scalar>& du) {
  Scalar n = x_raw.norm();
  if (n <= Scalar(0)) throw std::runtime_error("normalize_backward: zero-norm vector");
  Vec<Scalar> u = x_raw / n;
  return (du - u * u.dot(du)) / n;
}

/// Row-wise variant: grads of l2_normalize_rows.
template <class Scalar>
Mat<Scalar> normalize_rows_backward(const Mat<Scalar>& x_raw, const Mat<Scalar>& du) {
  Mat<Scalar> dx(x_raw.rows(), x_raw.cols());
  for (Eigen::Index i = 0; i < x_raw.rows(); ++i) {
    Vec<Scalar> xi = x_raw.row(i).transpose();
    Vec<Scalar> di = du.row(i).transpose();
    dx.row(i) = normalize_backward<Scalar>(xi, di).transpose();
  }
  return dx;
}

/// N x N matrix of squared Euclidean distances between rows of X.
template <class Derived>
Mat<typename Derived::Scalar> pairwise_sq_dists(const Eigen::MatrixBase<Derived>& X) {
  using Scalar = typename Derived::Scalar;
  Vec<Scalar> sq = X.rowwise().squaredNorm();
  Mat<Scalar> D = sq.replicate(1, X.rows()) + sq.transpose().replicate(X.rows(), 1)
                  - Scalar(2) * (X * X.transpose());
  return D.cwiseMax(Scalar(0));
}

}  // namespace colorvar

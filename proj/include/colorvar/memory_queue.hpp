#pragma once

#include <cmath>
#include <stdexcept>

#include "colorvar/linalg.hpp"

namespace colorvar {

/// Fixed-capacity FIFO of l2-normalized key embeddings, stored as a ring over
/// a K x D matrix. Oldest entries are evicted first once the queue is full.
template <class Scalar>
class MemoryQueue {
 public:
  MemoryQueue(Eigen::Index capacity, Eigen::Index dim) : storage_(capacity, dim) {
    if (capacity <= 0) throw std::invalid_argument("memory queue: capacity must be positive");
    if (dim <= 0) throw std::invalid_argument("memory queue: dim must be positive");
  }

  Eigen::Index capacity() const { return storage_.rows(); }
  Eigen::Index dim() const { return storage_.cols(); }
  Eigen::Index fill() const { return fill_; }

  /// Appends B rows in order. Rows must be unit-norm within 1e-4.
  void push(const Mat<Scalar>& keys) {
    if (keys.cols() != dim()) throw std::invalid_argument("memory queue: key width mismatch");
    if (keys.rows() > capacity())
      throw std::invalid_argument("memory queue: batch exceeds capacity");
    for (Eigen::Index i = 0; i < keys.rows(); ++i)
      if (std::abs(keys.row(i).norm() - Scalar(1)) > Scalar(1e-4))
        throw std::invalid_argument("memory queue: keys must be l2-normalized");
    for (Eigen::Index i = 0; i < keys.rows(); ++i) {
      storage_.row(head_) = keys.row(i);
      head_ = (head_ + 1) % capacity();
      if (fill_ < capacity()) ++fill_;
    }
  }

  /// Current contents, oldest first: a fill x D matrix.
  Mat<Scalar> snapshot() const {
    Mat<Scalar> out(fill_, dim());
    Eigen::Index start = (head_ - fill_ + capacity()) % capacity();
    for (Eigen::Index i = 0; i < fill_; ++i) out.row(i) = storage_.row((start + i) % capacity());
    return out;
  }

 private:
  Mat<Scalar> storage_;
  Eigen::Index head_ = 0;
  Eigen::Index fill_ = 0;
};

}  // namespace colorvar

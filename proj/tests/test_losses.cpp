#include <doctest.h>

#include <colorvar/losses.hpp>

#include <cmath>
#include <random>

#include "oracles.hpp"

using colorvar::ContrastiveBatch;
using colorvar::Matd;
using colorvar::TripletBatch;

namespace {

Matd random_rows(Eigen::Index rows, Eigen::Index cols, unsigned seed, bool normalize) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = u(rng);
  if (normalize)
    for (Eigen::Index i = 0; i < rows; ++i) m.row(i).normalize();
  return m;
}

}  // namespace

TEST_CASE("triplet loss on hand-built batches") {
  Matd a = Matd::Zero(1, 3), p = Matd::Zero(1, 3), n = Matd::Zero(1, 3);

  SUBCASE("anchor equals positive and the negative is far: zero loss") {
    n(0, 0) = 2.0;  // squared distance 4 >> margin
    TripletBatch<double> b{a, p, n};
    CHECK(colorvar::triplet_loss(b, 0.2) == 0.0);
  }
  SUBCASE("squared distances 0.5 and 0.3 with margin 0.2 give 0.4") {
    p(0, 0) = std::sqrt(0.5);
    n(0, 1) = std::sqrt(0.3);
    TripletBatch<double> b{a, p, n};
    CHECK(colorvar::triplet_loss(b, 0.2) == doctest::Approx(0.4).epsilon(1e-12));
  }
  SUBCASE("all three points coincide: loss equals the margin") {
    TripletBatch<double> b{a, p, n};
    CHECK(colorvar::triplet_loss(b, 0.35) == doctest::Approx(0.35).epsilon(1e-12));
  }
  SUBCASE("batch mean over mixed active/inactive rows") {
    Matd a2 = Matd::Zero(2, 3), p2 = Matd::Zero(2, 3), n2 = Matd::Zero(2, 3);
    n2(0, 0) = 3.0;           // row 0 inactive
    p2(1, 0) = 1.0;           // row 1: d_ap = 1, d_an = 0 -> margin + 1
    TripletBatch<double> b{a2, p2, n2};
    CHECK(colorvar::triplet_loss(b, 0.2) == doctest::Approx(0.5 * 1.2).epsilon(1e-12));
  }
}

TEST_CASE("triplet loss validation") {
  Matd m = random_rows(2, 4, 1, false);
  TripletBatch<double> b{m, m, m};
  CHECK_THROWS_AS(colorvar::triplet_loss(b, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(colorvar::triplet_loss(b, -0.1), std::invalid_argument);
  TripletBatch<double> empty{Matd(0, 4), Matd(0, 4), Matd(0, 4)};
  CHECK_THROWS_AS(colorvar::triplet_loss(empty, 0.2), std::invalid_argument);
  TripletBatch<double> ragged{m, random_rows(3, 4, 2, false), m};
  CHECK_THROWS_AS(colorvar::triplet_loss(ragged, 0.2), std::invalid_argument);
  TripletBatch<double> thin{m, random_rows(2, 3, 3, false), m};
  CHECK_THROWS_AS(colorvar::triplet_loss(thin, 0.2), std::invalid_argument);
}

TEST_CASE("triplet gradients match finite differences") {
  const double margin = 0.5;
  TripletBatch<double> b{random_rows(4, 6, 10, false), random_rows(4, 6, 11, false),
                         random_rows(4, 6, 12, false)};
  // Keep every row comfortably away from the hinge kink so the FD probe is valid.
  for (Eigen::Index i = 0; i < 4; ++i) {
    double hinge = margin + (b.anchors.row(i) - b.positives.row(i)).squaredNorm() -
                   (b.anchors.row(i) - b.negatives.row(i)).squaredNorm();
    REQUIRE(std::abs(hinge) > 1e-2);
  }

  auto g = colorvar::triplet_loss_grad(b, margin);
  CHECK(g.loss == doctest::Approx(colorvar::triplet_loss(b, margin)).epsilon(1e-12));

  const double h = 1e-6;
  auto fd_check = [&](Matd& target, const Matd& analytic) {
    for (Eigen::Index j = 0; j < target.cols(); ++j)
      for (Eigen::Index i = 0; i < target.rows(); ++i) {
        const double keep = target(i, j);
        target(i, j) = keep + h;
        const double fp = colorvar::triplet_loss(b, margin);
        target(i, j) = keep - h;
        const double fm = colorvar::triplet_loss(b, margin);
        target(i, j) = keep;
        CHECK(oracles::max_rel_err((fp - fm) / (2 * h), analytic(i, j)) < 1e-5);
      }
  };
  fd_check(b.anchors, g.d_anchors);
  fd_check(b.positives, g.d_positives);
  fd_check(b.negatives, g.d_negatives);
}

TEST_CASE("triplet gradient is zero on inactive rows") {
  Matd a = Matd::Zero(1, 3), p = Matd::Zero(1, 3), n = Matd::Zero(1, 3);
  n(0, 0) = 5.0;
  TripletBatch<double> b{a, p, n};
  auto g = colorvar::triplet_loss_grad(b, 0.2);
  CHECK(g.loss == 0.0);
  CHECK(g.d_anchors.cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.d_positives.cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.d_negatives.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("ntxent with no negatives at all is exactly zero") {
  ContrastiveBatch<double> b;
  b.queries = random_rows(5, 8, 20, true);
  b.positive_keys = random_rows(5, 8, 21, true);
  b.negative_keys = Matd(0, 8);
  b.temperature = 0.05;
  b.in_batch_negatives = false;
  CHECK(colorvar::ntxent_loss(b) == 0.0);  // exact, not approximate
  auto g = colorvar::ntxent_loss_grad(b);
  CHECK(g.loss == 0.0);
  CHECK(g.d_queries.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("ntxent with orthogonal negatives matches the closed form") {
  // Aligned positive (q = k), K orthogonal unit negatives, tau = 0.05:
  // loss = log(1 + K * exp(-1/tau)).
  const int K = 10, D = 16;
  ContrastiveBatch<double> b;
  b.queries = Matd::Zero(1, D);
  b.queries(0, 0) = 1.0;
  b.positive_keys = b.queries;
  b.negative_keys = Matd::Zero(K, D);
  for (int r = 0; r < K; ++r) b.negative_keys(r, 1 + r) = 1.0;
  b.temperature = 0.05;
  const double expected = std::log1p(K * std::exp(-20.0));
  CHECK(colorvar::ntxent_loss(b) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("ntxent with uniform logits is log(K+1) for any temperature") {
  const int K = 7, D = 5;
  ContrastiveBatch<double> b;
  b.queries = Matd::Zero(1, D);
  b.queries(0, 0) = 1.0;
  Matd v = Matd::Zero(1, D);
  v(0, 1) = 1.0;  // every key identical -> all logits equal
  b.positive_keys = v;
  b.negative_keys = v.colwise().replicate(K);
  b.temperature = 0.05;
  const double l1 = colorvar::ntxent_loss(b);
  b.temperature = 0.1;
  const double l2 = colorvar::ntxent_loss(b);
  CHECK(l1 == doctest::Approx(std::log(double(K + 1))).epsilon(1e-12));
  CHECK(l2 == doctest::Approx(std::log(double(K + 1))).epsilon(1e-12));
}

TEST_CASE("ntxent is non-negative and decreases as the positive aligns") {
  ContrastiveBatch<double> b;
  b.queries = Matd::Zero(1, 4);
  b.queries(0, 0) = 1.0;
  b.negative_keys = random_rows(6, 4, 22, true);
  b.temperature = 0.1;

  double prev = -1.0;
  bool first = true;
  // Sweep the positive key from aligned to anti-aligned; loss must rise.
  for (double theta : {0.0, 0.5, 1.0, 1.8, 2.6, 3.1}) {
    b.positive_keys = Matd::Zero(1, 4);
    b.positive_keys(0, 0) = std::cos(theta);
    b.positive_keys(0, 1) = std::sin(theta);
    const double l = colorvar::ntxent_loss(b);
    CHECK(l >= 0.0);
    if (!first) CHECK(l > prev);
    prev = l;
    first = false;
  }
}

TEST_CASE("ntxent is invariant to batch and negative-pool permutations") {
  ContrastiveBatch<double> b;
  b.queries = random_rows(6, 8, 30, true);
  b.positive_keys = random_rows(6, 8, 31, true);
  b.negative_keys = random_rows(9, 8, 32, true);
  b.temperature = 0.07;
  b.in_batch_negatives = true;
  const double base = colorvar::ntxent_loss(b);

  // Reverse the batch rows (queries and their keys together).
  ContrastiveBatch<double> perm = b;
  perm.queries = b.queries.colwise().reverse();
  perm.positive_keys = b.positive_keys.colwise().reverse();
  CHECK(colorvar::ntxent_loss(perm) == doctest::Approx(base).epsilon(1e-12));

  // Shuffle the negative pool.
  ContrastiveBatch<double> shuf = b;
  shuf.negative_keys = b.negative_keys.colwise().reverse();
  CHECK(colorvar::ntxent_loss(shuf) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("ntxent hand-computed two-sample in-batch case") {
  ContrastiveBatch<double> b;
  b.queries = Matd::Zero(2, 2);
  b.queries << 1.0, 0.0, 0.0, 1.0;
  b.positive_keys = Matd::Zero(2, 2);
  const double s = std::sqrt(0.5);
  b.positive_keys << s, s, s, -s;
  b.negative_keys = Matd(0, 2);
  b.temperature = 0.5;
  b.in_batch_negatives = true;

  // Row 0: logits {q0.k0, q0.k1}/tau = {2s, 2s} -> log 2.
  // Row 1: logits {q1.k1, q1.k0}/tau = {-2s, 2s} -> softmax on gap 4s.
  const double l0 = std::log(2.0);
  const double l1 = std::log(std::exp(-2 * s) + std::exp(2 * s)) - (-2 * s);
  CHECK(colorvar::ntxent_loss(b) == doctest::Approx(0.5 * (l0 + l1)).epsilon(1e-12));
}

TEST_CASE("ntxent query gradients match finite differences") {
  auto run = [](bool in_batch, int K, unsigned seed) {
    ContrastiveBatch<double> b;
    b.queries = random_rows(4, 8, seed, true);
    b.positive_keys = random_rows(4, 8, seed + 1, true);
    b.negative_keys = K > 0 ? random_rows(K, 8, seed + 2, true) : Matd(0, 8);
    b.temperature = 0.2;
    b.in_batch_negatives = in_batch;

    auto g = colorvar::ntxent_loss_grad(b);
    CHECK(g.loss == doctest::Approx(colorvar::ntxent_loss(b)).epsilon(1e-12));
    const double h = 1e-6;
    for (Eigen::Index j = 0; j < b.queries.cols(); ++j)
      for (Eigen::Index i = 0; i < b.queries.rows(); ++i) {
        const double keep = b.queries(i, j);
        b.queries(i, j) = keep + h;
        const double fp = colorvar::ntxent_loss(b);
        b.queries(i, j) = keep - h;
        const double fm = colorvar::ntxent_loss(b);
        b.queries(i, j) = keep;
        CHECK(oracles::max_rel_err((fp - fm) / (2 * h), g.d_queries(i, j)) < 1e-4);
      }
  };
  run(false, 12, 40);  // queue negatives only
  run(true, 0, 50);    // in-batch warm-up mode
  run(true, 5, 60);    // both sources at once
}

TEST_CASE("ntxent validation") {
  ContrastiveBatch<double> b;
  b.queries = random_rows(3, 4, 70, true);
  b.positive_keys = random_rows(3, 4, 71, true);
  b.negative_keys = Matd(0, 4);

  SUBCASE("temperature must be positive") {
    b.temperature = 0.0;
    CHECK_THROWS_AS(colorvar::ntxent_loss(b), std::invalid_argument);
  }
  SUBCASE("empty batch") {
    b.queries = Matd(0, 4);
    b.positive_keys = Matd(0, 4);
    CHECK_THROWS_AS(colorvar::ntxent_loss(b), std::invalid_argument);
  }
  SUBCASE("query/key shape mismatch") {
    b.positive_keys = random_rows(2, 4, 72, true);
    CHECK_THROWS_AS(colorvar::ntxent_loss(b), std::invalid_argument);
  }
  SUBCASE("negative key width mismatch") {
    b.negative_keys = random_rows(2, 5, 73, true);
    CHECK_THROWS_AS(colorvar::ntxent_loss(b), std::invalid_argument);
  }
  SUBCASE("rows must be l2-normalized") {
    b.queries.row(0) *= 3.0;
    CHECK_THROWS_AS(colorvar::ntxent_loss(b), std::invalid_argument);
  }
}

TEST_CASE("negative cosine on aligned, opposed, and orthogonal pairs") {
  Matd p(1, 3), z(1, 3);
  p << 2.0, 0.0, 0.0;

  z << 5.0, 0.0, 0.0;
  CHECK(colorvar::negcos_loss(p, z) == doctest::Approx(-1.0).epsilon(1e-12));
  z << -1.0, 0.0, 0.0;
  CHECK(colorvar::negcos_loss(p, z) == doctest::Approx(1.0).epsilon(1e-12));
  z << 0.0, 4.0, 0.0;
  CHECK(colorvar::negcos_loss(p, z) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("negative cosine validation") {
  Matd p = random_rows(2, 3, 80, false);
  CHECK_THROWS_AS(colorvar::negcos_loss(Matd(0, 3), Matd(0, 3)), std::invalid_argument);
  CHECK_THROWS_AS(colorvar::negcos_loss(p, random_rows(3, 3, 81, false)), std::invalid_argument);
  Matd z = p;
  z.row(1).setZero();
  CHECK_THROWS_WITH_AS(colorvar::negcos_loss(p, z), doctest::Contains("row 1"),
                       std::invalid_argument);
}

TEST_CASE("negative cosine gradients match finite differences") {
  Matd p = random_rows(5, 6, 90, false);
  Matd z = random_rows(5, 6, 91, false);
  auto g = colorvar::negcos_loss_grad(p, z);
  CHECK(g.loss == doctest::Approx(colorvar::negcos_loss(p, z)).epsilon(1e-12));

  const double h = 1e-6;
  for (Eigen::Index j = 0; j < p.cols(); ++j)
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      const double keep = p(i, j);
      p(i, j) = keep + h;
      const double fp = colorvar::negcos_loss(p, z);
      p(i, j) = keep - h;
      const double fm = colorvar::negcos_loss(p, z);
      p(i, j) = keep;
      CHECK(oracles::max_rel_err((fp - fm) / (2 * h), g.d_predicted(i, j)) < 1e-5);
    }
}

TEST_CASE("negative cosine gradient is orthogonal to the prediction") {
  // -cos depends on the direction of p only, so d/dp must have no radial part.
  Matd p = random_rows(3, 5, 92, false);
  Matd z = random_rows(3, 5, 93, false);
  auto g = colorvar::negcos_loss_grad(p, z);
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    CHECK(std::abs(g.d_predicted.row(i).dot(p.row(i))) < 1e-12);
}

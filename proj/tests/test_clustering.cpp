#include <doctest.h>

#include <colorvar/clustering.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "oracles.hpp"

using colorvar::Matd;

namespace {

Matd random_points(int n, int d, unsigned seed, double spread = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-spread, spread);
  Matd X(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) X(i, j) = u(rng);
  return X;
}

// Partition equality irrespective of label names.
bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  return oracles::relabel_first_appearance(a) == oracles::relabel_first_appearance(b);
}

std::filesystem::path temp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "colorvar_cluster_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("ward: a single point is a single cluster") {
  Matd X = random_points(1, 3, 1);
  auto labels = colorvar::ward_labels(X, 0.5);
  REQUIRE(labels.size() == 1);
  CHECK(labels[0] == 0);
}

TEST_CASE("ward: two tight far-apart groups split at an in-between threshold") {
  Matd X(6, 2);
  X << 0.0, 0.0, 0.01, 0.0, 0.0, 0.01,    // group near the origin
      10.0, 10.0, 10.01, 10.0, 10.0, 10.01;  // group far away
  auto labels = colorvar::ward_labels(X, 1.0);
  REQUIRE(labels.size() == 6);
  CHECK(labels[0] == labels[1]);
  CHECK(labels[1] == labels[2]);
  CHECK(labels[3] == labels[4]);
  CHECK(labels[4] == labels[5]);
  CHECK(labels[0] != labels[3]);
  // Canonical labels: first-appearance order.
  CHECK(labels[0] == 0);
  CHECK(labels[3] == 1);
}

TEST_CASE("ward: threshold limits give one cluster or all singletons") {
  Matd X = random_points(12, 3, 2);
  auto one = colorvar::ward_labels(X, 1e9);
  for (int l : one) CHECK(l == 0);

  auto apart = colorvar::ward_labels(X, 1e-12);
  std::set<int> distinct(apart.begin(), apart.end());
  CHECK(distinct.size() == 12);
}

TEST_CASE("ward matches the naive oracle across random sets and thresholds") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> n_dist(2, 20), d_dist(1, 4);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = n_dist(rng), d = d_dist(rng);
    Matd X = random_points(n, d, 1000 + trial, 2.0);

    // Probe thresholds away from the merge knife-edges: midpoints between
    // consecutive oracle merge heights, plus both extremes.
    auto heights = oracles::ward_merge_heights(X);
    std::vector<double> thresholds = {heights.front() * 0.5, heights.back() + 1.0};
    for (size_t i = 0; i + 1 < heights.size(); ++i)
      if (heights[i + 1] - heights[i] > 1e-9)
        thresholds.push_back(0.5 * (heights[i] + heights[i + 1]));

    for (double thr : thresholds) {
      auto lib = colorvar::ward_labels(X, thr);
      auto ref = oracles::naive_ward(X, thr);
      CAPTURE(trial);
      CAPTURE(thr);
      REQUIRE(same_partition(lib, ref));
    }
  }
}

TEST_CASE("ward is invariant to the input ordering") {
  Matd X = random_points(10, 2, 4, 3.0);
  auto base = colorvar::ward_labels(X, 1.5);

  std::vector<int> perm(10);
  for (int i = 0; i < 10; ++i) perm[i] = i;
  std::mt19937_64 rng(5);
  std::shuffle(perm.begin(), perm.end(), rng);
  Matd Y(10, 2);
  for (int i = 0; i < 10; ++i) Y.row(i) = X.row(perm[i]);
  auto shuffled = colorvar::ward_labels(Y, 1.5);

  // Mapping the shuffled labels back must reproduce the same partition.
  std::vector<int> unshuffled(10);
  for (int i = 0; i < 10; ++i) unshuffled[perm[i]] = shuffled[i];
  CHECK(same_partition(base, unshuffled));
}

TEST_CASE("ward validation") {
  CHECK_THROWS_AS(colorvar::ward_labels(Matd(0, 3), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(colorvar::ward_labels(random_points(3, 2, 6), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(colorvar::ward_labels(random_points(3, 2, 6), -1.0), std::invalid_argument);
}

TEST_CASE("dbscan: identical points form one cluster") {
  Matd X = Matd::Zero(5, 3);
  auto labels = colorvar::dbscan_labels(X, 0.1, 2);
  for (int l : labels) CHECK(l == 0);
}

TEST_CASE("dbscan: all points farther apart than eps become noise") {
  Matd X(4, 1);
  X << 0.0, 10.0, 20.0, 30.0;
  auto labels = colorvar::dbscan_labels(X, 1.0, 2);
  for (int l : labels) CHECK(l == -1);
}

TEST_CASE("dbscan: two blobs separate and the eps boundary is inclusive") {
  Matd X(7, 1);
  X << 0.0, 0.5, 1.0, 50.0, 50.5, 51.0, 200.0;
  auto labels = colorvar::dbscan_labels(X, 0.5, 2);
  CHECK(labels[0] == 0);
  CHECK(labels[1] == 0);
  CHECK(labels[2] == 0);  // reachable through the chain, exactly at eps
  CHECK(labels[3] == 1);
  CHECK(labels[4] == 1);
  CHECK(labels[5] == 1);
  CHECK(labels[6] == -1);  // isolated point stays noise
}

TEST_CASE("dbscan matches an independent reference on random data") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> n_dist(1, 25);
  std::uniform_real_distribution<double> eps_dist(0.2, 1.5);
  std::uniform_int_distribution<int> mp_dist(1, 4);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = n_dist(rng);
    Matd X = random_points(n, 2, 2000 + trial, 1.5);
    const double eps = eps_dist(rng);
    const int min_pts = mp_dist(rng);
    auto lib = colorvar::dbscan_labels(X, eps, min_pts);
    auto ref = oracles::naive_dbscan(X, eps, min_pts);
    CAPTURE(trial);
    // Core clusters must agree exactly; noise flags too. Border points can
    // legitimately differ only when two clusters both reach them, which the
    // reference resolves the same way (first cluster in index order), so we
    // demand full equality.
    REQUIRE(oracles::relabel_first_appearance(lib) == oracles::relabel_first_appearance(ref));
  }
}

TEST_CASE("dbscan validation") {
  Matd X = random_points(3, 2, 8);
  CHECK_THROWS_AS(colorvar::dbscan_labels(Matd(0, 2), 0.5, 2), std::invalid_argument);
  CHECK_THROWS_AS(colorvar::dbscan_labels(X, 0.0, 2), std::invalid_argument);
  CHECK_THROWS_AS(colorvar::dbscan_labels(X, -0.5, 2), std::invalid_argument);
  CHECK_THROWS_AS(colorvar::dbscan_labels(X, 0.5, 0), std::invalid_argument);
}

TEST_CASE("affinity propagation: a single point converges to itself") {
  Matd X = random_points(1, 4, 9);
  auto res = colorvar::affinity_labels(X, 0.5, 200);
  REQUIRE(res.labels.size() == 1);
  CHECK(res.labels[0] == 0);
  CHECK(res.converged);
}

TEST_CASE("affinity propagation: five copies of one point form one cluster") {
  Matd X = Matd::Constant(5, 3, 0.7);
  auto res = colorvar::affinity_labels(X, 0.5, 200);
  for (int l : res.labels) CHECK(l == 0);
}

TEST_CASE("affinity propagation: three separated blobs of five are recovered") {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> jitter(0.0, 0.05);
  Matd X(15, 2);
  const double centers[3][2] = {{0.0, 0.0}, {8.0, 0.0}, {0.0, 8.0}};
  for (int b = 0; b < 3; ++b)
    for (int i = 0; i < 5; ++i) {
      X(b * 5 + i, 0) = centers[b][0] + jitter(rng);
      X(b * 5 + i, 1) = centers[b][1] + jitter(rng);
    }
  auto res = colorvar::affinity_labels(X, 0.5, 500);
  CHECK(res.converged);
  std::set<int> distinct(res.labels.begin(), res.labels.end());
  CHECK(distinct.size() == 3);
  for (int b = 0; b < 3; ++b)
    for (int i = 1; i < 5; ++i) CHECK(res.labels[b * 5] == res.labels[b * 5 + i]);

  // Brute-force exemplar check: no subset of exemplars scores better than
  // one per blob, under similarity -||.||^2 and median-offdiagonal preference.
  Matd S(15, 15);
  for (int i = 0; i < 15; ++i)
    for (int j = 0; j < 15; ++j) S(i, j) = -(X.row(i) - X.row(j)).squaredNorm();
  std::vector<double> off;
  for (int i = 0; i < 15; ++i)
    for (int j = 0; j < 15; ++j)
      if (i != j) off.push_back(S(i, j));
  std::sort(off.begin(), off.end());
  const double pref = 0.5 * (off[off.size() / 2 - 1] + off[off.size() / 2]);

  auto net_score = [&](unsigned mask) {
    double score = 0.0;
    for (int i = 0; i < 15; ++i) {
      if (mask & (1u << i)) {
        score += pref;
        continue;
      }
      double best = -1e300;
      for (int e = 0; e < 15; ++e)
        if (mask & (1u << e)) best = std::max(best, S(i, e));
      score += best;
    }
    return score;
  };

  double best_score = -1e300;
  unsigned best_mask = 0;
  for (unsigned mask = 1; mask < (1u << 15); ++mask) {
    double s = net_score(mask);
    if (s > best_score) {
      best_score = s;
      best_mask = mask;
    }
  }
  // The optimum must pick exactly one exemplar in each blob; the returned
  // partition groups blobs accordingly.
  for (int b = 0; b < 3; ++b) {
    int count = 0;
    for (int i = 0; i < 5; ++i) count += (best_mask >> (b * 5 + i)) & 1u;
    CHECK(count == 1);
  }
}

TEST_CASE("affinity propagation is deterministic") {
  Matd X = random_points(12, 3, 11, 2.0);
  auto a = colorvar::affinity_labels(X, 0.5, 300);
  auto b = colorvar::affinity_labels(X, 0.5, 300);
  CHECK(a.labels == b.labels);
  CHECK(a.converged == b.converged);
}

TEST_CASE("affinity propagation validation") {
  Matd X = random_points(4, 2, 12);
  CHECK_THROWS_AS(colorvar::affinity_labels(Matd(0, 2), 0.5, 100), std::invalid_argument);
  CHECK_THROWS_AS(colorvar::affinity_labels(X, 0.4, 100), std::invalid_argument);
  CHECK_THROWS_AS(colorvar::affinity_labels(X, 1.0, 100), std::invalid_argument);
  CHECK_THROWS_AS(colorvar::affinity_labels(X, 0.5, 0), std::invalid_argument);
}

TEST_CASE("canonicalize_labels renames by first appearance and keeps noise") {
  std::vector<int> raw = {7, 3, 7, -1, 3, 9};
  auto canon = colorvar::canonicalize_labels(raw);
  CHECK(canon == std::vector<int>{0, 1, 0, -1, 1, 2});
}

TEST_CASE("cluster assignment helpers wrap the embedding matrix") {
  colorvar::EmbeddingMatrix emb;
  emb.ids = {"a", "b", "c", "d"};
  emb.values = Matd(4, 2);
  emb.values << 0.0, 0.0, 0.1, 0.0, 5.0, 5.0, 5.1, 5.0;

  auto ward = colorvar::agglomerative_ward(emb, 1.0);
  CHECK(ward.algorithm == "ward");
  CHECK(ward.ids == emb.ids);
  CHECK(ward.labels[0] == ward.labels[1]);
  CHECK(ward.labels[2] == ward.labels[3]);
  CHECK(ward.labels[0] != ward.labels[2]);
  CHECK(ward.parameters.at("distance_threshold").get<double>() == 1.0);
  CHECK(ward.converged);

  auto db = colorvar::dbscan(emb, 0.2, 2);
  CHECK(db.algorithm == "dbscan");
  CHECK(db.parameters.at("eps").get<double>() == 0.2);
  CHECK(db.parameters.at("min_pts").get<int>() == 2);
  CHECK(db.labels[0] == db.labels[1]);
  CHECK(db.labels[2] == db.labels[3]);

  auto ap = colorvar::affinity_propagation(emb);
  CHECK(ap.algorithm == "affinity");
  CHECK(ap.labels.size() == 4);
}

TEST_CASE("assignment jsonl roundtrip and ingest validation") {
  colorvar::ClusterAssignment asg;
  asg.ids = {"x1", "x2", "x3"};
  asg.labels = {0, -1, 1};
  asg.algorithm = "dbscan";
  asg.parameters = {{"eps", 0.3}, {"min_pts", 2}};
  asg.converged = true;

  const auto path = (temp_dir() / "assignment.jsonl").string();
  colorvar::save_assignment(asg, path);
  auto back = colorvar::load_assignment(path);
  CHECK(back.ids == asg.ids);
  CHECK(back.labels == asg.labels);

  // Each line is a standalone JSON object with id and cluster.
  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  auto j = nlohmann::json::parse(line);
  CHECK(j.at("id").get<std::string>() == "x1");
  CHECK(j.at("cluster").get<int>() == 0);

  CHECK_THROWS_AS(colorvar::load_assignment((temp_dir() / "absent.jsonl").string()),
                  std::runtime_error);
}

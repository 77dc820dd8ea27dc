#include "colorvar/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace colorvar {

namespace {

void check_points(const Matd& X, const char* who) {
  if (X.rows() == 0) {
    throw std::invalid_argument(std::string(who) + ": no points to cluster");
  }
}

}  // namespace

std::vector<int> canonicalize_labels(std::vector<int> labels) {
  std::unordered_map<int, int> remap;
  int next = 0;
  for (int& l : labels) {
    if (l < 0) continue;  // noise stays -1
    auto it = remap.find(l);
    if (it == remap.end()) it = remap.emplace(l, next++).first;
    l = it->second;
  }
  return labels;
}

// Lance-Williams recurrence for Ward's method, maintained on squared
// distances. The reported linkage height is the square root, which for a
// pair of singletons equals their plain Euclidean distance.
std::vector<int> ward_labels(const Matd& X, double distance_threshold) {
  check_points(X, "ward");
  if (!(distance_threshold > 0.0) || !std::isfinite(distance_threshold)) {
    throw std::invalid_argument("ward: distance_threshold must be positive and finite");
  }
  const int n = static_cast<int>(X.rows());
  std::vector<int> parent(n);
  for (int i = 0; i < n; ++i) parent[i] = i;

  if (n == 1) return {0};

  Matd d2 = pairwise_sq_dists(X);
  std::vector<double> size(n, 1.0);
  std::vector<bool> active(n, true);
  const double thr2 = distance_threshold * distance_threshold;

  int remaining = n;
  while (remaining > 1) {
    int bi = -1, bj = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (!active[i]) continue;
      for (int j = i + 1; j < n; ++j) {
        if (!active[j]) continue;
        if (d2(i, j) < best) {
          best = d2(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    if (best > thr2) break;  // next merge would exceed the threshold

    // Merge bj into bi; bi keeps the union, bj goes inactive.
    const double ni = size[bi], nj = size[bj], dij = d2(bi, bj);
    for (int k = 0; k < n; ++k) {
      if (!active[k] || k == bi || k == bj) continue;
      const double nk = size[k];
      const double upd =
          ((ni + nk) * d2(bi, k) + (nj + nk) * d2(bj, k) - nk * dij) / (ni + nj + nk);
      d2(bi, k) = upd;
      d2(k, bi) = upd;
    }
    size[bi] += size[bj];
    active[bj] = false;
    parent[bj] = bi;
    --remaining;
  }

  // Resolve each point to its active representative.
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    int r = i;
    while (parent[r] != r) r = parent[r];
    labels[i] = r;
  }
  return canonicalize_labels(std::move(labels));
}

std::vector<int> dbscan_labels(const Matd& X, double eps, int min_pts) {
  check_points(X, "dbscan");
  if (!(eps > 0.0) || !std::isfinite(eps)) {
    throw std::invalid_argument("dbscan: eps must be positive and finite");
  }
  if (min_pts < 1) throw std::invalid_argument("dbscan: min_pts must be >= 1");

  const int n = static_cast<int>(X.rows());
  const Matd d2 = pairwise_sq_dists(X);
  const double eps2 = eps * eps;

  std::vector<std::vector<int>> neigh(n);
  std::vector<bool> core(n, false);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (d2(i, j) <= eps2) neigh[i].push_back(j);  // includes i itself
    }
    core[i] = static_cast<int>(neigh[i].size()) >= min_pts;
  }

  std::vector<int> labels(n, -1);
  int next = 0;
  for (int i = 0; i < n; ++i) {
    if (!core[i] || labels[i] != -1) continue;
    // Grow a new cluster from this core point, expanding through cores only.
    labels[i] = next;
    std::deque<int> frontier{i};
    while (!frontier.empty()) {
      const int p = frontier.front();
      frontier.pop_front();
      for (int q : neigh[p]) {
        if (labels[q] != -1) continue;
        labels[q] = next;
        if (core[q]) frontier.push_back(q);
      }
    }
    ++next;
  }
  return canonicalize_labels(std::move(labels));
}

AffinityResult affinity_labels(const Matd& X, double damping, int max_iter) {
  check_points(X, "affinity");
  if (!(damping >= 0.5 && damping < 1.0)) {
    throw std::invalid_argument("affinity: damping must lie in [0.5, 1)");
  }
  if (max_iter < 1) throw std::invalid_argument("affinity: max_iter must be >= 1");

  const int n = static_cast<int>(X.rows());
  if (n == 1) return {{0}, true};

  Matd S = -pairwise_sq_dists(X);
  // Preference: median of the off-diagonal similarities.
  std::vector<double> off;
  off.reserve(static_cast<size_t>(n) * (n - 1));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j) off.push_back(S(i, j));
    }
  }
  std::sort(off.begin(), off.end());
  const size_t m = off.size();
  const double pref = (m % 2 == 1) ? off[m / 2] : 0.5 * (off[m / 2 - 1] + off[m / 2]);
  for (int k = 0; k < n; ++k) S(k, k) = pref;

  Matd R = Matd::Zero(n, n);
  Matd A = Matd::Zero(n, n);
  const int kStableIters = 15;

  std::vector<char> exemplar(n, 0), prev(n, 0);
  int stable = 0;
  bool converged = false;

  for (int iter = 0; iter < max_iter; ++iter) {
    // Responsibilities: r(i,k) = s(i,k) - max_{k' != k} (a(i,k') + s(i,k')).
    Matd AS = A + S;
    for (int i = 0; i < n; ++i) {
      double max1 = -std::numeric_limits<double>::infinity();
      double max2 = max1;
      int arg1 = -1;
      for (int k = 0; k < n; ++k) {
        const double v = AS(i, k);
        if (v > max1) {
          max2 = max1;
          max1 = v;
          arg1 = k;
        } else if (v > max2) {
          max2 = v;
        }
      }
      for (int k = 0; k < n; ++k) {
        const double cap = (k == arg1) ? max2 : max1;
        R(i, k) = damping * R(i, k) + (1.0 - damping) * (S(i, k) - cap);
      }
    }

    // Availabilities from the positive responsibilities column-wise.
    for (int k = 0; k < n; ++k) {
      double pos_sum = 0.0;
      for (int i = 0; i < n; ++i) {
        if (i != k) pos_sum += std::max(0.0, R(i, k));
      }
      for (int i = 0; i < n; ++i) {
        double a;
        if (i == k) {
          a = pos_sum;
        } else {
          a = std::min(0.0, R(k, k) + pos_sum - std::max(0.0, R(i, k)));
        }
        A(i, k) = damping * A(i, k) + (1.0 - damping) * a;
      }
    }

    for (int k = 0; k < n; ++k) exemplar[k] = (A(k, k) + R(k, k) > 0.0) ? 1 : 0;
    if (exemplar == prev) {
      if (++stable >= kStableIters && iter >= kStableIters) {
        converged = true;
        break;
      }
    } else {
      stable = 0;
      prev = exemplar;
    }
  }

  std::vector<int> ex;
  for (int k = 0; k < n; ++k) {
    if (exemplar[k]) ex.push_back(k);
  }
  if (ex.empty()) {
    // Degenerate evidence (e.g. all points identical): fall back to the
    // best-scoring point so everything lands in one cluster.
    int best = 0;
    for (int k = 1; k < n; ++k) {
      if (A(k, k) + R(k, k) > A(best, best) + R(best, best)) best = k;
    }
    ex.push_back(best);
  }

  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    int best = ex[0];
    for (int e : ex) {
      if (S(i, e) > S(i, best)) best = e;
    }
    labels[i] = best;
  }
  for (int e : ex) labels[e] = e;  // exemplars claim themselves
  return {canonicalize_labels(std::move(labels)), converged};
}

namespace {

ClusterAssignment wrap(const EmbeddingMatrix& emb, std::vector<int> labels, std::string algorithm,
                       nlohmann::json parameters, bool converged = true) {
  if (emb.ids.size() != static_cast<size_t>(emb.values.rows())) {
    throw std::invalid_argument("clustering: embedding ids do not match rows");
  }
  ClusterAssignment a;
  a.ids = emb.ids;
  a.labels = std::move(labels);
  a.algorithm = std::move(algorithm);
  a.parameters = std::move(parameters);
  a.converged = converged;
  return a;
}

}  // namespace

ClusterAssignment agglomerative_ward(const EmbeddingMatrix& emb, double distance_threshold) {
  return wrap(emb, ward_labels(emb.values, distance_threshold), "ward",
              {{"distance_threshold", distance_threshold}});
}

ClusterAssignment dbscan(const EmbeddingMatrix& emb, double eps, int min_pts) {
  return wrap(emb, dbscan_labels(emb.values, eps, min_pts), "dbscan",
              {{"eps", eps}, {"min_pts", min_pts}});
}

ClusterAssignment affinity_propagation(const EmbeddingMatrix& emb, double damping, int max_iter) {
  AffinityResult r = affinity_labels(emb.values, damping, max_iter);
  return wrap(emb, std::move(r.labels), "affinity",
              {{"damping", damping}, {"max_iter", max_iter}}, r.converged);
}

void save_assignment(const ClusterAssignment& assignment, const std::string& path) {
  if (assignment.ids.size() != assignment.labels.size()) {
    throw std::invalid_argument("save_assignment: ids and labels differ in length");
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("save_assignment: cannot open " + path);
  for (size_t i = 0; i < assignment.ids.size(); ++i) {
    nlohmann::json line = {{"id", assignment.ids[i]}, {"cluster", assignment.labels[i]}};
    out << line.dump() << "\n";
  }
  if (!out) throw std::runtime_error("save_assignment: write failed for " + path);
}

ClusterAssignment load_assignment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_assignment: cannot open " + path);
  ClusterAssignment a;
  a.algorithm = "loaded";
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error("load_assignment: bad JSON at line " + std::to_string(lineno) +
                               ": " + e.what());
    }
    a.ids.push_back(j.at("id").get<std::string>());
    a.labels.push_back(j.at("cluster").get<int>());
  }
  if (a.ids.empty()) throw std::runtime_error("load_assignment: no records in " + path);
  return a;
}

}  // namespace colorvar

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "colorvar/linalg.hpp"
#include "colorvar/model.hpp"

namespace colorvar {

/// A predicted partition over named records. Labels are canonicalized to
/// first-appearance order (0, 1, 2, ...); -1 marks DBSCAN noise.
struct ClusterAssignment {
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::string algorithm;
  nlohmann::json parameters;
  bool converged = true;  // affinity propagation may flip this
};

/// Relabels to first-appearance order, preserving -1.
std::vector<int> canonicalize_labels(std::vector<int> labels);

/// Agglomerative clustering with Ward's criterion over Euclidean geometry.
/// Merging proceeds while the cheapest merge's linkage distance is <= the
/// threshold; ties pick the lowest cluster indices. Thresholds at the two
/// extremes give one cluster / all singletons.
std::vector<int> ward_labels(const Matd& X, double distance_threshold);

/// Classic density clustering; returns -1 for noise. A point is core when its
/// eps-ball (inclusive, counting itself) holds at least min_pts points. Border
/// points join the first cluster that reaches them in index order.
std::vector<int> dbscan_labels(const Matd& X, double eps, int min_pts);

struct AffinityResult {
  std::vector<int> labels;
  bool converged = true;
};

/// Frey-Dueck message passing on negative squared Euclidean similarities with
/// median-off-diagonal preference. Converges when the exemplar set is stable
/// for 15 consecutive iterations; otherwise returns best-effort labels with
/// converged=false. An empty exemplar set falls back to the best-scoring point.
AffinityResult affinity_labels(const Matd& X, double damping, int max_iter);

// EmbeddingMatrix wrappers echoing algorithm + parameters into the assignment.
ClusterAssignment agglomerative_ward(const EmbeddingMatrix& emb, double distance_threshold);
ClusterAssignment dbscan(const EmbeddingMatrix& emb, double eps, int min_pts);
ClusterAssignment affinity_propagation(const EmbeddingMatrix& emb, double damping = 0.5,
                                       int max_iter = 200);

/// JSON-lines {"id": ..., "cluster": ...} per record.
void save_assignment(const ClusterAssignment& assignment, const std::string& path);
ClusterAssignment load_assignment(const std::string& path);

}  // namespace colorvar

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "colorvar/clustering.hpp"

namespace colorvar {

/// Fraction of multi-item clusters (size >= 2) whose members all share one
/// ground-truth group. When no cluster has two or more members the score is 0
/// and, if provided, *no_multi_cluster is set.
double cluster_group_accuracy(const std::vector<int>& truth, const std::vector<int>& predicted,
                              bool* no_multi_cluster = nullptr);

/// Adjusted Rand index from the contingency table. Needs N >= 2. When the
/// adjustment denominator vanishes (both partitions trivial in the same way)
/// the result is 1 for identical partitions and 0 otherwise.
double adjusted_rand_index(const std::vector<int>& truth, const std::vector<int>& predicted);

/// Fowlkes-Mallows: TP / sqrt((TP+FP) * (TP+FN)) over item pairs; 0 when the
/// denominator vanishes.
double fowlkes_mallows(const std::vector<int>& truth, const std::vector<int>& predicted);

/// Harmonic mean of ARI and FMS; 0 when their sum is 0. Both inputs must be
/// non-negative.
double cscore(double ari, double fms);

struct EvalReport {
  double cgacc = 0.0;
  double ari = 0.0;  // clamped to [0, 1] for reporting
  double fms = 0.0;
  double cscore = 0.0;
  int n_predicted_clusters = 0;
  int n_true_groups = 0;
  bool no_multi_cluster = false;
};

nlohmann::json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& j);

/// Aligns the prediction to the ground-truth id order and computes every
/// metric. DBSCAN noise points (-1) become fresh singleton clusters first.
/// Throws when the id sets disagree or a truth group label is missing.
EvalReport evaluate_assignment(const std::vector<std::string>& truth_ids,
                               const std::vector<std::string>& truth_groups,
                               const ClusterAssignment& predicted);

}  // namespace colorvar

#include "colorvar/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace colorvar {

namespace {

void check_aligned(const std::vector<int>& truth, const std::vector<int>& predicted,
                   const char* who) {
  if (truth.empty()) throw std::invalid_argument(std::string(who) + ": empty labeling");
  if (truth.size() != predicted.size()) {
    throw std::invalid_argument(std::string(who) + ": label vectors differ in length");
  }
}

double pairs2(double n) { return n * (n - 1.0) / 2.0; }

struct PairCounts {
  double tp = 0.0;        // same cluster in both
  double sum_truth = 0.0;  // pairs within truth groups
  double sum_pred = 0.0;   // pairs within predicted clusters
  double total = 0.0;      // C(N, 2)
};

PairCounts count_pairs(const std::vector<int>& truth, const std::vector<int>& predicted) {
  std::map<std::pair<int, int>, double> cells;
  std::unordered_map<int, double> rows, cols;
  for (size_t i = 0; i < truth.size(); ++i) {
    cells[{truth[i], predicted[i]}] += 1.0;
    rows[truth[i]] += 1.0;
    cols[predicted[i]] += 1.0;
  }
  PairCounts pc;
  for (const auto& [key, n] : cells) pc.tp += pairs2(n);
  for (const auto& [lbl, n] : rows) pc.sum_truth += pairs2(n);
  for (const auto& [lbl, n] : cols) pc.sum_pred += pairs2(n);
  pc.total = pairs2(static_cast<double>(truth.size()));
  return pc;
}

// True when both labelings induce the same partition (same co-membership
// relation), regardless of the label values used.
bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  std::unordered_map<int, int> fwd, rev;
  for (size_t i = 0; i < a.size(); ++i) {
    auto f = fwd.find(a[i]);
    if (f == fwd.end()) {
      fwd.emplace(a[i], b[i]);
    } else if (f->second != b[i]) {
      return false;
    }
    auto r = rev.find(b[i]);
    if (r == rev.end()) {
      rev.emplace(b[i], a[i]);
    } else if (r->second != a[i]) {
      return false;
    }
  }
  return true;
}

}  // namespace

double cluster_group_accuracy(const std::vector<int>& truth, const std::vector<int>& predicted,
                              bool* no_multi_cluster) {
  check_aligned(truth, predicted, "cgacc");
  std::unordered_map<int, std::vector<int>> members;
  for (size_t i = 0; i < predicted.size(); ++i) {
    members[predicted[i]].push_back(static_cast<int>(i));
  }
  int multi = 0, pure = 0;
  for (const auto& [lbl, idx] : members) {
    if (idx.size() < 2) continue;
    ++multi;
    bool ok = true;
    for (size_t k = 1; k < idx.size(); ++k) {
      if (truth[idx[k]] != truth[idx[0]]) {
        ok = false;
        break;
      }
    }
    if (ok) ++pure;
  }
  if (no_multi_cluster != nullptr) *no_multi_cluster = (multi == 0);
  if (multi == 0) return 0.0;
  return static_cast<double>(pure) / static_cast<double>(multi);
}

double adjusted_rand_index(const std::vector<int>& truth, const std::vector<int>& predicted) {
  check_aligned(truth, predicted, "ari");
  if (truth.size() < 2) throw std::invalid_argument("ari: needs at least two items");
  const PairCounts pc = count_pairs(truth, predicted);
  const double expected = pc.sum_truth * pc.sum_pred / pc.total;
  const double maximum = 0.5 * (pc.sum_truth + pc.sum_pred);
  const double denom = maximum - expected;
  if (denom == 0.0) return same_partition(truth, predicted) ? 1.0 : 0.0;
  return (pc.tp - expected) / denom;
}

double fowlkes_mallows(const std::vector<int>& truth, const std::vector<int>& predicted) {
  check_aligned(truth, predicted, "fms");
  const PairCounts pc = count_pairs(truth, predicted);
  // sum_pred = TP + FP, sum_truth = TP + FN.
  const double denom = std::sqrt(pc.sum_pred) * std::sqrt(pc.sum_truth);
  if (denom == 0.0) return 0.0;
  return pc.tp / denom;
}

double cscore(double ari, double fms) {
  if (ari < 0.0 || fms < 0.0) throw std::invalid_argument("cscore: inputs must be non-negative");
  const double sum = ari + fms;
  if (sum == 0.0) return 0.0;
  return 2.0 * ari * fms / sum;
}

nlohmann::json to_json(const EvalReport& report) {
  return {{"cgacc", report.cgacc},
          {"ari", report.ari},
          {"fms", report.fms},
          {"cscore", report.cscore},
          {"n_predicted_clusters", report.n_predicted_clusters},
          {"n_true_groups", report.n_true_groups},
          {"no_multi_cluster", report.no_multi_cluster}};
}

EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.cgacc = j.at("cgacc").get<double>();
  r.ari = j.at("ari").get<double>();
  r.fms = j.at("fms").get<double>();
  r.cscore = j.at("cscore").get<double>();
  r.n_predicted_clusters = j.at("n_predicted_clusters").get<int>();
  r.n_true_groups = j.at("n_true_groups").get<int>();
  r.no_multi_cluster = j.value("no_multi_cluster", false);
  return r;
}

EvalReport evaluate_assignment(const std::vector<std::string>& truth_ids,
                               const std::vector<std::string>& truth_groups,
                               const ClusterAssignment& predicted) {
  if (truth_ids.size() != truth_groups.size()) {
    throw std::invalid_argument("evaluate: truth ids and groups differ in length");
  }
  if (truth_ids.empty()) throw std::invalid_argument("evaluate: no ground-truth records");
  if (predicted.ids.size() != predicted.labels.size()) {
    throw std::invalid_argument("evaluate: assignment ids and labels differ in length");
  }
  for (const std::string& g : truth_groups) {
    if (g.empty()) throw std::invalid_argument("evaluate: a record is missing its group label");
  }

  std::unordered_map<std::string, int> pred_of;
  pred_of.reserve(predicted.ids.size());
  for (size_t i = 0; i < predicted.ids.size(); ++i) {
    if (!pred_of.emplace(predicted.ids[i], predicted.labels[i]).second) {
      throw std::invalid_argument("evaluate: duplicate id in assignment: " + predicted.ids[i]);
    }
  }
  if (pred_of.size() != truth_ids.size()) {
    throw std::invalid_argument("evaluate: assignment and ground truth cover different ids");
  }

  std::unordered_map<std::string, int> group_code;
  std::vector<int> truth(truth_ids.size());
  std::vector<int> pred(truth_ids.size());
  int max_label = -1;
  for (size_t i = 0; i < truth_ids.size(); ++i) {
    auto it = pred_of.find(truth_ids[i]);
    if (it == pred_of.end()) {
      throw std::invalid_argument("evaluate: assignment is missing id " + truth_ids[i]);
    }
    pred[i] = it->second;
    max_label = std::max(max_label, pred[i]);
    truth[i] = group_code.emplace(truth_groups[i], static_cast<int>(group_code.size()))
                   .first->second;
  }

  // Noise points count as singleton clusters for scoring purposes.
  int fresh = max_label + 1;
  for (int& p : pred) {
    if (p < 0) p = fresh++;
  }

  EvalReport r;
  r.cgacc = cluster_group_accuracy(truth, pred, &r.no_multi_cluster);
  r.ari = std::clamp(adjusted_rand_index(truth, pred), 0.0, 1.0);
  r.fms = fowlkes_mallows(truth, pred);
  r.cscore = colorvar::cscore(r.ari, r.fms);
  r.n_true_groups = static_cast<int>(group_code.size());
  r.n_predicted_clusters = static_cast<int>(std::unordered_set<int>(pred.begin(), pred.end()).size());
  return r;
}

}  // namespace colorvar

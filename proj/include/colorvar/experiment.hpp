#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "colorvar/clustering.hpp"
#include "colorvar/dataset.hpp"
#include "colorvar/metrics.hpp"
#include "colorvar/trainers.hpp"

namespace colorvar {

struct ClusteringPlan {
  std::string algorithm = "ward";  // ward | dbscan | affinity
  std::vector<double> sweep;       // ward thresholds, dbscan eps or affinity damping
  int min_pts = 2;                 // dbscan
  int max_iter = 200;              // affinity
};

void to_json(nlohmann::json& j, const ClusteringPlan& p);
void from_json(const nlohmann::json& j, ClusteringPlan& p);

/// One end-to-end pipeline run: dataset -> train -> embed -> cluster sweep ->
/// evaluate. Exactly one of `synthetic` / `manifest_path` supplies the data.
/// `seed` is the master seed and overrides the nested dataset/train seeds.
struct ExperimentConfig {
  std::string name;  // table label; defaults to the method name
  bool has_synthetic = true;
  SyntheticSpec synthetic;
  std::string manifest_path;
  TrainConfig train;
  EncoderConfig encoder;
  ClusteringPlan clustering;
  bool normalize = true;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);
void validate(const ExperimentConfig& c);
ExperimentConfig load_experiment_config(const std::string& path);

struct SweepPoint {
  double parameter = 0;
  EvalReport report;
  bool converged = true;
};

struct ExperimentResult {
  ExperimentConfig config;
  RunManifest manifest;
  EvalReport best_report;
  double best_parameter = 0;
  std::vector<SweepPoint> sweep;
  std::vector<std::string> eval_ids;
};

/// Runs every stage and writes the artifact tree under config.out_dir:
/// config.json, run_manifest.json, encoder.ckpt, embeddings.{f32,ids},
/// sweep/point_NN_{assignment.jsonl,report.json}, report.json (best point by
/// CScore, ties by ARI then lower parameter), clusters/cluster_NNN.png.
/// Stage failures rethrow with a [stage] prefix; earlier artifacts remain.
ExperimentResult run_experiment(const ExperimentConfig& config);
ExperimentResult run_experiment_file(const std::string& config_path);

/// Runs each config, checks they share one eval split, and writes
/// comparison.txt (aligned metric table) plus comparison.png (bar chart)
/// under out_dir. Returns the table text.
std::string compare_methods(const std::vector<ExperimentConfig>& configs,
                            const std::string& out_dir);
std::string compare_method_files(const std::vector<std::string>& config_paths,
                                 const std::string& out_dir);

}  // namespace colorvar

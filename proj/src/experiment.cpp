#include "colorvar/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "colorvar/chart.hpp"
#include "colorvar/image_io.hpp"

namespace colorvar {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

template <class F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("[") + name + "] " + e.what());
  }
}

std::vector<double> default_sweep(const std::string& algorithm) {
  if (algorithm == "ward") {
    return {0.02, 0.05, 0.1, 0.15, 0.2, 0.35, 0.5, 0.65, 0.8, 0.95, 1.1,
            1.25, 1.4,  1.6, 1.8,  2.0, 2.3,  2.6, 3.0,  3.5};
  }
  if (algorithm == "dbscan") {
    return {0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2};
  }
  return {0.5, 0.6, 0.7, 0.8, 0.9};  // affinity damping grid
}

HeadKind required_head(Method m) {
  switch (m) {
    case Method::mocov2:
      return HeadKind::projector_mlp;
    case Method::simsiam_v0:
    case Method::simsiam_v1:
    case Method::simsiam_v2:
    case Method::byol:
      return HeadKind::projector_plus_predictor;
    default:
      return HeadKind::none;  // triplet, pbcnet*
  }
}

void write_json_file(const json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string dataset_name(const ExperimentConfig& c) {
  if (c.has_synthetic) {
    return "synthetic-" + std::to_string(c.synthetic.n_styles) + "x" +
           std::to_string(c.synthetic.variants_per_style);
  }
  return fs::path(c.manifest_path).stem().string();
}

std::string fmt(double v, const char* spec = "%.3f") {
  char buf[32];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

}  // namespace

void to_json(json& j, const ClusteringPlan& p) {
  j = json{{"algorithm", p.algorithm},
           {"sweep", p.sweep},
           {"min_pts", p.min_pts},
           {"max_iter", p.max_iter}};
}

void from_json(const json& j, ClusteringPlan& p) {
  ClusteringPlan d;
  p.algorithm = j.value("algorithm", d.algorithm);
  p.sweep = j.value("sweep", std::vector<double>{});
  p.min_pts = j.value("min_pts", d.min_pts);
  p.max_iter = j.value("max_iter", d.max_iter);
  if (p.sweep.empty()) p.sweep = default_sweep(p.algorithm);
}

void to_json(json& j, const ExperimentConfig& c) {
  json dataset;
  if (c.has_synthetic) {
    dataset = json{{"synthetic", c.synthetic}};
  } else {
    dataset = json{{"manifest", c.manifest_path}};
  }
  j = json{{"name", c.name},      {"dataset", dataset},
           {"train", c.train},    {"encoder", c.encoder},
           {"clustering", c.clustering}, {"normalize", c.normalize},
           {"out_dir", c.out_dir}, {"seed", c.seed}};
}

void from_json(const json& j, ExperimentConfig& c) {
  c = ExperimentConfig{};
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    const bool syn = d.contains("synthetic");
    const bool man = d.contains("manifest");
    if (syn == man) {
      throw std::invalid_argument(
          "experiment config: dataset needs exactly one of 'synthetic' or 'manifest'");
    }
    if (syn) {
      c.has_synthetic = true;
      c.synthetic = d.at("synthetic").get<SyntheticSpec>();
    } else {
      c.has_synthetic = false;
      c.manifest_path = d.at("manifest").get<std::string>();
    }
  }
  c.train = j.value("train", json::object()).get<TrainConfig>();

  const json ej = j.value("encoder", json::object());
  c.encoder = ej.get<EncoderConfig>();
  if (!ej.contains("head")) {
    // Pair the head with what the training method expects.
    c.encoder.head = required_head(c.train.method);
    if (c.encoder.head == HeadKind::none) {
      c.encoder.head_dims.clear();
    } else if (c.encoder.head_dims.empty()) {
      if (c.encoder.backbone == "resnet34") {
        c.encoder.head_dims = {4096, 123};
      } else {
        c.encoder.head_dims = {4 * c.encoder.embed_dim, std::max(8, c.encoder.embed_dim / 4)};
      }
    }
  }

  c.clustering = j.value("clustering", json::object()).get<ClusteringPlan>();
  c.normalize = j.value("normalize", true);
  c.out_dir = j.value("out_dir", std::string("out"));
  c.name = j.value("name", to_string(c.train.method));
  c.seed = j.value("seed", std::uint64_t{0});
  // One master seed drives the whole pipeline.
  c.synthetic.seed = c.seed;
  c.train.seed = c.seed;
}

void validate(const ExperimentConfig& c) {
  if (!c.has_synthetic && c.manifest_path.empty()) {
    throw std::invalid_argument("experiment config: no dataset source given");
  }
  if (c.has_synthetic) validate(c.synthetic);
  if (c.clustering.algorithm != "ward" && c.clustering.algorithm != "dbscan" &&
      c.clustering.algorithm != "affinity") {
    throw std::invalid_argument("experiment config: unknown clustering algorithm '" +
                                c.clustering.algorithm + "'");
  }
  if (c.clustering.sweep.empty()) {
    throw std::invalid_argument("experiment config: clustering sweep grid is empty");
  }
  if (c.clustering.min_pts < 1) {
    throw std::invalid_argument("experiment config: min_pts must be >= 1");
  }
  if (c.clustering.max_iter < 1) {
    throw std::invalid_argument("experiment config: max_iter must be >= 1");
  }
  if (c.out_dir.empty()) throw std::invalid_argument("experiment config: out_dir is empty");
  if (c.name.empty()) throw std::invalid_argument("experiment config: name is empty");
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const std::exception& e) {
    throw std::runtime_error("config " + path + " is not valid JSON: " + e.what());
  }
  ExperimentConfig c = j.get<ExperimentConfig>();
  // Manifest paths resolve relative to the config file, like image paths
  // resolve relative to the manifest.
  if (!c.has_synthetic && !c.manifest_path.empty()) {
    const fs::path mp(c.manifest_path);
    if (mp.is_relative()) c.manifest_path = (fs::path(path).parent_path() / mp).string();
  }
  return c;
}

namespace {

ClusterAssignment run_sweep_point(const EmbeddingMatrix& emb, const ClusteringPlan& plan,
                                  double parameter) {
  if (plan.algorithm == "ward") return agglomerative_ward(emb, parameter);
  if (plan.algorithm == "dbscan") return dbscan(emb, parameter, plan.min_pts);
  return affinity_propagation(emb, parameter, plan.max_iter);
}

Image contact_sheet(const std::vector<const ImageRecord*>& members, const std::string& title) {
  const int tile = 64, gap = 2, per_row = 8, band = 14;
  const int n = static_cast<int>(members.size());
  const int cols = std::min(n, per_row);
  const int rows = (n + per_row - 1) / per_row;
  const int width = std::max(cols * (tile + gap) + gap, text_width(title) + 8);
  const int height = band + rows * (tile + gap) + gap;
  Image sheet = Image::filled(height, width, Rgb{245, 245, 245});
  draw_text(sheet, 4, 3, title, Rgb{20, 20, 20});
  for (int i = 0; i < n; ++i) {
    const int r = i / per_row, c = i % per_row;
    Image t = resize_bilinear(crop_primary(*members[i]), tile, tile);
    paste(sheet, t, band + gap + r * (tile + gap), gap + c * (tile + gap));
  }
  return sheet;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  stage("config", [&] { validate(config); });
  const fs::path out(config.out_dir);
  stage("config", [&] {
    fs::create_directories(out / "sweep");
    fs::create_directories(out / "clusters");
    write_json_file(json(config), out / "config.json");
  });

  std::cerr << "[dataset] preparing " << dataset_name(config) << "\n";
  std::vector<ImageRecord> records = stage("dataset", [&] {
    return config.has_synthetic ? generate_synthetic(config.synthetic)
                                : load_manifest(config.manifest_path);
  });

  std::cerr << "[train] method=" << to_string(config.train.method)
            << " epochs=" << config.train.epochs << "\n";
  TrainResult trained = stage("train", [&] { return train(config.train, records, config.encoder); });
  stage("train", [&] {
    write_json_file(json(trained.manifest), out / "run_manifest.json");
    save_checkpoint(trained.encoder, (out / "encoder.ckpt").string());
  });

  std::cerr << "[embed] extracting eval embeddings\n";
  std::vector<ImageRecord> eval_records;
  for (const ImageRecord& r : records) {
    if (r.split == Split::eval) eval_records.push_back(r);
  }
  EmbeddingMatrix emb = stage("embed", [&] {
    if (eval_records.empty()) throw std::runtime_error("no eval-split records to embed");
    EmbeddingMatrix e =
        is_pbcnet(config.train.method)
            ? embed_dataset_sliced(trained.encoder, eval_records, /*bbox_crop=*/true,
                                   config.normalize, slice_mode_of(config.train.method))
            : embed_dataset(trained.encoder, eval_records, /*bbox_crop=*/true, config.normalize);
    round_to_export_precision(e);
    save_embeddings(e, (out / "embeddings").string());
    return e;
  });

  std::cerr << "[cluster] sweeping " << config.clustering.algorithm << " over "
            << config.clustering.sweep.size() << " points\n";
  std::vector<std::string> truth_ids, truth_groups;
  stage("evaluate", [&] {
    for (const ImageRecord& r : eval_records) {
      if (!r.group_id.has_value()) {
        throw std::runtime_error("record " + r.id + " has no group label; cannot evaluate");
      }
      truth_ids.push_back(r.id);
      truth_groups.push_back(*r.group_id);
    }
  });

  ExperimentResult result;
  result.config = config;
  result.manifest = trained.manifest;
  result.eval_ids = emb.ids;

  json sweep_json = json::array();
  ClusterAssignment best_assignment;
  int best_idx = -1;
  for (size_t i = 0; i < config.clustering.sweep.size(); ++i) {
    const double p = config.clustering.sweep[i];
    char tag[32];
    std::snprintf(tag, sizeof(tag), "point_%03zu", i);
    ClusterAssignment a =
        stage("cluster", [&] { return run_sweep_point(emb, config.clustering, p); });
    stage("cluster",
          [&] { save_assignment(a, (out / "sweep" / (std::string(tag) + "_assignment.jsonl")).string()); });
    EvalReport rep =
        stage("evaluate", [&] { return evaluate_assignment(truth_ids, truth_groups, a); });
    stage("evaluate", [&] {
      json pj{{"parameter", p},
              {"converged", a.converged},
              {"report", to_json(rep)},
              {"config", json(config)}};
      write_json_file(pj, out / "sweep" / (std::string(tag) + "_report.json"));
      sweep_json.push_back(json{{"parameter", p}, {"converged", a.converged},
                                {"report", to_json(rep)}});
    });
    result.sweep.push_back({p, rep, a.converged});

    const bool better =
        best_idx < 0 || rep.cscore > result.best_report.cscore ||
        (rep.cscore == result.best_report.cscore &&
         (rep.ari > result.best_report.ari ||
          (rep.ari == result.best_report.ari && p < result.best_parameter)));
    if (better) {
      best_idx = static_cast<int>(i);
      result.best_report = rep;
      result.best_parameter = p;
      best_assignment = a;
    }
  }

  stage("evaluate", [&] {
    json rj{{"config", json(config)},
            {"algorithm", config.clustering.algorithm},
            {"best", json{{"parameter", result.best_parameter},
                          {"report", to_json(result.best_report)}}},
            {"sweep", sweep_json}};
    write_json_file(rj, out / "report.json");
  });

  std::cerr << "[figures] rendering cluster contact sheets\n";
  stage("figures", [&] {
    std::map<int, std::vector<const ImageRecord*>> by_cluster;
    std::map<std::string, const ImageRecord*> by_id;
    for (const ImageRecord& r : eval_records) by_id[r.id] = &r;
    for (size_t i = 0; i < best_assignment.ids.size(); ++i) {
      by_cluster[best_assignment.labels[i]].push_back(by_id.at(best_assignment.ids[i]));
    }
    for (const auto& [label, members] : by_cluster) {
      std::string name, title;
      if (label < 0) {
        name = "noise.png";
        title = "NOISE N=" + std::to_string(members.size());
      } else {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "cluster_%03d.png", label);
        name = buf;
        title = "CLUSTER " + std::to_string(label) + " N=" + std::to_string(members.size());
      }
      write_png((out / "clusters" / name).string(), contact_sheet(members, title));
    }
  });

  std::cerr << "[done] best " << config.clustering.algorithm << " parameter "
            << result.best_parameter << " cscore " << result.best_report.cscore << "\n";
  return result;
}

ExperimentResult run_experiment_file(const std::string& config_path) {
  return run_experiment(load_experiment_config(config_path));
}

std::string compare_methods(const std::vector<ExperimentConfig>& configs,
                            const std::string& out_dir) {
  if (configs.size() < 2) {
    throw std::invalid_argument("compare: need at least two experiment configs");
  }
  std::vector<ExperimentResult> results;
  results.reserve(configs.size());
  for (const ExperimentConfig& c : configs) results.push_back(run_experiment(c));

  std::vector<std::string> sorted0 = results[0].eval_ids;
  std::sort(sorted0.begin(), sorted0.end());
  for (size_t i = 1; i < results.size(); ++i) {
    std::vector<std::string> s = results[i].eval_ids;
    std::sort(s.begin(), s.end());
    if (s != sorted0) {
      throw std::invalid_argument("compare: configs disagree on the eval split (" +
                                  results[0].config.name + " vs " + results[i].config.name + ")");
    }
  }

  const std::string row_name = dataset_name(configs[0]);
  std::vector<std::string> methods;
  for (const ExperimentResult& r : results) methods.push_back(r.config.name);

  // Main grid: one dataset row, one column per method, cells carrying all
  // four scores in CGacc/ARI/FMS/CScore order.
  std::ostringstream table;
  size_t name_w = std::max<size_t>(row_name.size(), 8);
  table << std::string(name_w, ' ') << "  ";
  const size_t cell_w = 24;
  for (const std::string& m : methods) {
    table << m << std::string(m.size() < cell_w ? cell_w - m.size() : 1, ' ');
  }
  table << "\n" << row_name << std::string(name_w - row_name.size(), ' ') << "  ";
  for (const ExperimentResult& r : results) {
    const EvalReport& b = r.best_report;
    std::string cell = fmt(b.cgacc) + "/" + fmt(b.ari) + "/" + fmt(b.fms) + "/" + fmt(b.cscore);
    table << cell << std::string(cell.size() < cell_w ? cell_w - cell.size() : 1, ' ');
  }
  table << "\n  (cells: CGacc/ARI/FMS/CScore at each method's best sweep point)\n\n";

  table << "method            norm  param    CGacc    ARI      FMS      CScore\n";
  for (const ExperimentResult& r : results) {
    const EvalReport& b = r.best_report;
    std::string m = r.config.name;
    if (m.size() < 18) m += std::string(18 - m.size(), ' ');
    table << m << (r.config.normalize ? "on  " : "off ") << "  " << fmt(r.best_parameter)
          << "    " << fmt(b.cgacc) << "    " << fmt(b.ari) << "    " << fmt(b.fms) << "    "
          << fmt(b.cscore) << "\n";
  }
  for (const ExperimentResult& r : results) {
    table << "# " << r.config.name << ": seed=" << r.config.seed
          << " out=" << r.config.out_dir << "\n";
  }

  const fs::path out(out_dir);
  fs::create_directories(out);
  {
    std::ofstream f(out / "comparison.txt", std::ios::trunc);
    if (!f) throw std::runtime_error("compare: cannot open " + (out / "comparison.txt").string());
    f << table.str();
  }

  Matd values(static_cast<int>(results.size()), 4);
  for (size_t i = 0; i < results.size(); ++i) {
    const EvalReport& b = results[i].best_report;
    values(static_cast<int>(i), 0) = b.cgacc;
    values(static_cast<int>(i), 1) = b.ari;
    values(static_cast<int>(i), 2) = b.fms;
    values(static_cast<int>(i), 3) = b.cscore;
  }
  write_png((out / "comparison.png").string(),
            render_bar_chart(methods, {"CGACC", "ARI", "FMS", "CSCORE"}, values));
  return table.str();
}

std::string compare_method_files(const std::vector<std::string>& config_paths,
                                 const std::string& out_dir) {
  std::vector<ExperimentConfig> configs;
  configs.reserve(config_paths.size());
  for (const std::string& p : config_paths) configs.push_back(load_experiment_config(p));
  return compare_methods(configs, out_dir);
}

}  // namespace colorvar

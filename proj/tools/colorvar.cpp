// Command-line entry point for the color-variant pipeline: dataset
// generation, training, embedding export, clustering, evaluation, and the
// end-to-end experiment runner.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "colorvar/experiment.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace colorvar;

namespace {

void apply_overrides(ExperimentConfig& cfg, const std::optional<std::uint64_t>& seed,
                     const std::string& out, const std::string& method) {
  if (!method.empty()) {
    cfg.train.method = method_from_string(method);
    // Keep the encoder head paired with what the new method trains.
    switch (cfg.train.method) {
      case Method::mocov2:
        cfg.encoder.head = HeadKind::projector_mlp;
        break;
      case Method::simsiam_v0:
      case Method::simsiam_v1:
      case Method::simsiam_v2:
      case Method::byol:
        cfg.encoder.head = HeadKind::projector_plus_predictor;
        break;
      default:
        cfg.encoder.head = HeadKind::none;
        cfg.encoder.head_dims.clear();
        break;
    }
    if (cfg.encoder.head != HeadKind::none && cfg.encoder.head_dims.empty()) {
      if (cfg.encoder.backbone == "resnet34") {
        cfg.encoder.head_dims = {4096, 123};
      } else {
        cfg.encoder.head_dims = {4 * cfg.encoder.embed_dim,
                                 std::max(8, cfg.encoder.embed_dim / 4)};
      }
    }
    if (cfg.name == to_string(Method::pbcnet) || cfg.name.empty()) {
      cfg.name = to_string(cfg.train.method);
    }
  }
  if (seed.has_value()) {
    cfg.seed = *seed;
    cfg.synthetic.seed = *seed;
    cfg.train.seed = *seed;
  }
  if (!out.empty()) cfg.out_dir = out;
}

std::vector<ImageRecord> pick_split(std::vector<ImageRecord> records, const std::string& split) {
  if (split == "all") return records;
  const Split want = split_from_string(split);
  std::vector<ImageRecord> out;
  for (auto& r : records) {
    if (r.split == want) out.push_back(std::move(r));
  }
  if (out.empty()) throw std::runtime_error("no records in split '" + split + "'");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"color-variant identification pipeline"};
  app.require_subcommand(1);

  // generate ---------------------------------------------------------------
  auto* gen = app.add_subcommand("generate", "render a synthetic color-variant dataset");
  std::string gen_out = "dataset";
  SyntheticSpec gen_spec;
  std::string gen_config;
  gen->add_option("--config", gen_config, "JSON file with the synthetic spec");
  gen->add_option("--styles", gen_spec.n_styles, "number of garment styles");
  gen->add_option("--variants", gen_spec.variants_per_style, "color variants per style");
  gen->add_option("--canvas", gen_spec.canvas, "square canvas side in px");
  gen->add_option("--seed", gen_spec.seed, "generator seed");
  gen->add_option("--out", gen_out, "output directory");

  // train ------------------------------------------------------------------
  auto* tr = app.add_subcommand("train", "train an encoder from an experiment config");
  std::string tr_config, tr_out, tr_method;
  std::optional<std::uint64_t> tr_seed;
  tr->add_option("--config", tr_config, "experiment config JSON")->required();
  tr->add_option("--seed", tr_seed, "override the master seed");
  tr->add_option("--out", tr_out, "override the output directory");
  tr->add_option("--method", tr_method, "override the training method");

  // embed ------------------------------------------------------------------
  auto* em = app.add_subcommand("embed", "export embeddings for a manifest");
  std::string em_ckpt, em_manifest, em_out = "embeddings", em_split = "eval", em_mode = "plain";
  bool em_no_norm = false;
  em->add_option("--checkpoint", em_ckpt, "encoder checkpoint")->required();
  em->add_option("--manifest", em_manifest, "dataset manifest JSONL")->required();
  em->add_option("--out", em_out, "output base path (writes .f32/.ids)");
  em->add_option("--split", em_split, "train|eval|all")->check(CLI::IsMember({"train", "eval", "all"}));
  em->add_option("--mode", em_mode, "plain or slice mode both|horiz|vert")
      ->check(CLI::IsMember({"plain", "both", "horiz", "vert"}));
  em->add_flag("--no-normalize", em_no_norm, "skip row normalization");

  // cluster ----------------------------------------------------------------
  auto* cl = app.add_subcommand("cluster", "cluster an embedding export");
  std::string cl_emb, cl_algo = "ward", cl_out = "assignment.jsonl";
  double cl_param = 0.5;
  int cl_min_pts = 2, cl_max_iter = 200;
  cl->add_option("--embeddings", cl_emb, "embedding base path (expects .f32/.ids)")->required();
  cl->add_option("--algorithm", cl_algo, "ward|dbscan|affinity")
      ->check(CLI::IsMember({"ward", "dbscan", "affinity"}));
  cl->add_option("--parameter", cl_param, "ward threshold / dbscan eps / affinity damping");
  cl->add_option("--min-pts", cl_min_pts, "dbscan core-point neighborhood size");
  cl->add_option("--max-iter", cl_max_iter, "affinity propagation iteration cap");
  cl->add_option("--out", cl_out, "assignment JSONL path");

  // evaluate ---------------------------------------------------------------
  auto* ev = app.add_subcommand("evaluate", "score an assignment against manifest groups");
  std::string ev_assignment, ev_manifest, ev_out;
  ev->add_option("--assignment", ev_assignment, "assignment JSONL")->required();
  ev->add_option("--manifest", ev_manifest, "dataset manifest JSONL with group ids")->required();
  ev->add_option("--out", ev_out, "also write the report JSON here");

  // run --------------------------------------------------------------------
  auto* rn = app.add_subcommand("run", "end-to-end experiment from a config file");
  std::string rn_config, rn_out, rn_method;
  std::optional<std::uint64_t> rn_seed;
  rn->add_option("--config", rn_config, "experiment config JSON")->required();
  rn->add_option("--seed", rn_seed, "override the master seed");
  rn->add_option("--out", rn_out, "override the output directory");
  rn->add_option("--method", rn_method, "override the training method");

  // compare ----------------------------------------------------------------
  auto* cp = app.add_subcommand("compare", "run several configs and tabulate them");
  std::vector<std::string> cp_configs;
  std::string cp_out = "compare";
  std::optional<std::uint64_t> cp_seed;
  cp->add_option("--config", cp_configs, "experiment config JSON (repeat per method)")
      ->required()
      ->expected(-2);
  cp->add_option("--out", cp_out, "comparison output directory");
  cp->add_option("--seed", cp_seed, "override every config's master seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      if (!gen_config.empty()) {
        std::ifstream in(gen_config);
        if (!in) throw std::runtime_error("cannot open config " + gen_config);
        SyntheticSpec file_spec = json::parse(in).get<SyntheticSpec>();
        // The file supplies anything not given explicitly on the command line.
        if (gen->count("--styles") == 0) gen_spec.n_styles = file_spec.n_styles;
        if (gen->count("--variants") == 0) gen_spec.variants_per_style = file_spec.variants_per_style;
        if (gen->count("--canvas") == 0) gen_spec.canvas = file_spec.canvas;
        if (gen->count("--seed") == 0) gen_spec.seed = file_spec.seed;
        gen_spec.pattern_families = file_spec.pattern_families;
        gen_spec.hue_set = file_spec.hue_set;
      }
      validate(gen_spec);
      std::vector<ImageRecord> records = generate_synthetic(gen_spec);
      const std::string manifest = write_dataset(records, gen_out);
      std::cout << manifest << "\n";
      return 0;
    }

    if (tr->parsed()) {
      ExperimentConfig cfg = load_experiment_config(tr_config);
      apply_overrides(cfg, tr_seed, tr_out, tr_method);
      validate(cfg);
      std::vector<ImageRecord> records = cfg.has_synthetic ? generate_synthetic(cfg.synthetic)
                                                           : load_manifest(cfg.manifest_path);
      TrainResult result = train(cfg.train, records, cfg.encoder);
      fs::create_directories(cfg.out_dir);
      {
        std::ofstream f(fs::path(cfg.out_dir) / "run_manifest.json", std::ios::trunc);
        f << json(result.manifest).dump(2) << "\n";
      }
      {
        std::ofstream f(fs::path(cfg.out_dir) / "config.json", std::ios::trunc);
        f << json(cfg).dump(2) << "\n";
      }
      save_checkpoint(result.encoder, (fs::path(cfg.out_dir) / "encoder.ckpt").string());
      std::cout << (fs::path(cfg.out_dir) / "encoder.ckpt").string() << "\n";
      return 0;
    }

    if (em->parsed()) {
      Encoderd enc = load_checkpoint(em_ckpt);
      std::vector<ImageRecord> records = pick_split(load_manifest(em_manifest), em_split);
      EmbeddingMatrix emb =
          em_mode == "plain"
              ? embed_dataset(enc, records, true, !em_no_norm)
              : embed_dataset_sliced(enc, records, true, !em_no_norm, slice_mode_from_string(em_mode));
      round_to_export_precision(emb);
      save_embeddings(emb, em_out);
      std::cout << em_out << ".f32\n";
      return 0;
    }

    if (cl->parsed()) {
      EmbeddingMatrix emb = load_embeddings(cl_emb);
      ClusterAssignment a;
      if (cl_algo == "ward") {
        a = agglomerative_ward(emb, cl_param);
      } else if (cl_algo == "dbscan") {
        a = dbscan(emb, cl_param, cl_min_pts);
      } else {
        a = affinity_propagation(emb, cl_param, cl_max_iter);
      }
      save_assignment(a, cl_out);
      std::cout << cl_out << "\n";
      return 0;
    }

    if (ev->parsed()) {
      ClusterAssignment a = load_assignment(ev_assignment);
      std::vector<ImageRecord> records = load_manifest(ev_manifest);
      std::unordered_map<std::string, std::string> group_of;
      for (const ImageRecord& r : records) {
        if (r.group_id.has_value()) group_of[r.id] = *r.group_id;
      }
      std::vector<std::string> ids, groups;
      for (const std::string& id : a.ids) {
        auto it = group_of.find(id);
        if (it == group_of.end()) {
          throw std::runtime_error("manifest has no group label for id " + id);
        }
        ids.push_back(id);
        groups.push_back(it->second);
      }
      EvalReport rep = evaluate_assignment(ids, groups, a);
      const std::string text = to_json(rep).dump(2) + "\n";
      std::cout << text;
      if (!ev_out.empty()) {
        std::ofstream f(ev_out, std::ios::trunc);
        f << text;
      }
      return 0;
    }

    if (rn->parsed()) {
      ExperimentConfig cfg = load_experiment_config(rn_config);
      apply_overrides(cfg, rn_seed, rn_out, rn_method);
      ExperimentResult result = run_experiment(cfg);
      std::cout << to_json(result.best_report).dump(2) << "\n";
      return 0;
    }

    if (cp->parsed()) {
      std::vector<ExperimentConfig> configs;
      for (const std::string& p : cp_configs) {
        ExperimentConfig cfg = load_experiment_config(p);
        apply_overrides(cfg, cp_seed, "", "");
        configs.push_back(std::move(cfg));
      }
      std::cout << compare_methods(configs, cp_out);
      return 0;
    }
  } catch (const std::exception& e) {
    const std::string what = e.what();
    // run_experiment already tags its stages; tag everything else here.
    if (!what.empty() && what.front() == '[') {
      std::cerr << what << "\n";
    } else {
      std::cerr << "[cli] " << what << "\n";
    }
    return 1;
  }
  return 0;
}

#include <fstream>
#include <set>
#include <stdexcept>

#include "mmpoint/trainer.hpp"

namespace mmpoint::train {

nlohmann::json run_config_to_json(const RunConfig& cfg) {
  return nlohmann::json{
      {"dataset", cfg.dataset},
      {"m", cfg.m},
      {"batch_size", cfg.batch_size},
      {"epochs", cfg.epochs},
      {"learning_rate", cfg.learning_rate},
      {"weight_decay", cfg.weight_decay},
      {"tau", cfg.tau},
      {"lambda_intra", cfg.lambda_intra},
      {"lambda_inter", cfg.lambda_inter},
      {"seed", cfg.seed},
      {"multi_mlp", cfg.multi_mlp},
      {"multi_level_aug", cfg.multi_level_aug},
      {"decoupled_intra", cfg.decoupled_intra},
      {"cosine_lr", cfg.cosine_lr},
      {"point_knn", cfg.point_knn},
      {"aug_mode", cfg.aug_mode},
      {"projection",
       {{"d_in", cfg.projection.d_in},
        {"d_intra", cfg.projection.d_intra},
        {"d_cross", cfg.projection.d_cross}}},
  };
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {
      "dataset",     "m",           "batch_size",      "epochs",
      "learning_rate", "weight_decay", "tau",           "lambda_intra",
      "lambda_inter",  "seed",        "multi_mlp",      "multi_level_aug",
      "decoupled_intra", "cosine_lr", "point_knn",      "projection",
      "aug_mode"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key))
      throw std::invalid_argument("run config: unknown key '" + key + "'");

  RunConfig cfg;
  cfg.dataset = j.value("dataset", cfg.dataset);
  cfg.m = j.value("m", cfg.m);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
  cfg.tau = j.value("tau", cfg.tau);
  cfg.lambda_intra = j.value("lambda_intra", cfg.lambda_intra);
  cfg.lambda_inter = j.value("lambda_inter", cfg.lambda_inter);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.multi_mlp = j.value("multi_mlp", cfg.multi_mlp);
  cfg.multi_level_aug = j.value("multi_level_aug", cfg.multi_level_aug);
  cfg.decoupled_intra = j.value("decoupled_intra", cfg.decoupled_intra);
  cfg.cosine_lr = j.value("cosine_lr", cfg.cosine_lr);
  cfg.point_knn = j.value("point_knn", cfg.point_knn);
  cfg.aug_mode = j.value("aug_mode", cfg.aug_mode);
  if (j.contains("projection")) {
    const auto& p = j.at("projection");
    for (const auto& [key, value] : p.items())
      if (key != "d_in" && key != "d_intra" && key != "d_cross")
        throw std::invalid_argument("run config: unknown projection key '" + key + "'");
    cfg.projection.d_in = p.value("d_in", cfg.projection.d_in);
    cfg.projection.d_intra = p.value("d_intra", cfg.projection.d_intra);
    cfg.projection.d_cross = p.value("d_cross", cfg.projection.d_cross);
  }
  return cfg;
}

void save_run_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write run config to " + path);
  out << run_config_to_json(cfg).dump(2) << "\n";
  if (!out) throw std::runtime_error("short write to " + path);
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read run config from " + path);
  nlohmann::json j;
  in >> j;
  return run_config_from_json(j);
}

void validate_run_config(RunConfig& cfg) {
  if (cfg.m < 1 || cfg.m > 24)
    throw std::invalid_argument("run config: m must lie in [1, 24], got " +
                                std::to_string(cfg.m));
  if (cfg.batch_size < 2)
    throw std::invalid_argument("run config: batch_size must be at least 2");
  if (cfg.epochs < 1) throw std::invalid_argument("run config: epochs must be at least 1");
  if (cfg.learning_rate <= 0.0)
    throw std::invalid_argument("run config: learning_rate must be positive");
  if (cfg.weight_decay < 0.0)
    throw std::invalid_argument("run config: weight_decay must be non-negative");
  if (cfg.tau <= 0.0) throw std::invalid_argument("run config: tau must be positive");
  if (cfg.lambda_intra < 0.0 || cfg.lambda_inter < 0.0)
    throw std::invalid_argument("run config: loss weights must be non-negative");
  if (cfg.point_knn < 1)
    throw std::invalid_argument("run config: point_knn must be at least 1");
  if (cfg.aug_mode.empty())
    cfg.aug_mode = cfg.multi_level_aug ? "multi-level" : "unified";
  if (cfg.aug_mode != "unified" && cfg.aug_mode != "multi" && cfg.aug_mode != "multi-level")
    throw std::invalid_argument("run config: aug_mode must be unified, multi, or multi-level, got '" + cfg.aug_mode + "'");
  cfg.multi_level_aug = cfg.aug_mode == "multi-level";
  if (cfg.projection.d_cross.empty())
    cfg.projection = heads::default_projection(cfg.m, cfg.projection.d_in,
                                               cfg.projection.d_intra);
  if (static_cast<int>(cfg.projection.d_cross.size()) != cfg.m)
    throw std::invalid_argument("run config: projection lists " +
                                std::to_string(cfg.projection.d_cross.size()) +
                                " cross spaces for m = " + std::to_string(cfg.m));
  heads::validate_config(cfg.projection);
}

}  // namespace mmpoint::train

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmpoint/augment.hpp"
#include "mmpoint/dataset.hpp"
#include "mmpoint/encoders.hpp"
#include "mmpoint/heads.hpp"
#include "mmpoint/params.hpp"
#include "mmpoint/rng.hpp"

namespace mmpoint::train {

// Full pretraining configuration. Every field round-trips through
// run-config.json.
struct RunConfig {
  std::string dataset;
  int m = 4;
  int batch_size = 32;
  int epochs = 30;
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  double tau = 0.1;
  double lambda_intra = 1.0;
  double lambda_inter = 1.0;
  std::uint64_t seed = 0;
  bool multi_mlp = true;
  bool multi_level_aug = true;
  bool decoupled_intra = true;
  bool cosine_lr = false;
  int point_knn = 16;
  // View-augmentation wiring: "unified" sends every view through the level-1
  // pipeline, "multi" gives each view a distinct stage without the level
  // hierarchy, "multi-level" uses the full incremental chain. Empty derives
  // from multi_level_aug at validation; when set it overrides the flag.
  std::string aug_mode;
  heads::ProjectionConfig projection;  // d_cross defaults per m when empty
};

nlohmann::json run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);
void save_run_config(const std::string& path, const RunConfig& cfg);
RunConfig load_run_config(const std::string& path);

// Fills defaults that depend on other fields and rejects invalid settings.
void validate_run_config(RunConfig& cfg);

struct TrainExample {
  PointCloud p1, p2;
  std::vector<ViewImage> views;  // slot j holds the view augmented at level j+1
};

struct Batch {
  int epoch = 0;
  int step_in_epoch = 0;
  std::vector<TrainExample> examples;
  std::vector<std::int64_t> object_ids;
  std::uint64_t composition_hash = 0;
};

struct LossReport {
  std::int64_t step = 0;
  double intra = 0.0;
  std::vector<double> inter_per_level;
  double inter_total = 0.0;
  double overall = 0.0;
  double mi_bound = 0.0;
};

// Owns the parameters, encoders, heads, and optimizer state of one
// pretraining run. All randomness flows from the config seed through named
// SeedTree streams keyed by epoch and object index, so any (epoch, step)
// batch is reproducible in isolation.
class Trainer {
 public:
  Trainer(const data::DatasetHandle& dataset, RunConfig cfg);

  int steps_per_epoch() const;
  Batch make_batch(int epoch, int step_in_epoch) const;

  // Forward, backward, and one decoupled-weight-decay adaptive-moment
  // update over every parameter the step's graph touched. Throws with the
  // step and batch hash when the loss turns non-finite.
  LossReport train_step(const Batch& batch);

  std::vector<LossReport> run_epoch(int epoch);

  const RunConfig& config() const { return cfg_; }
  ParamStore& store() { return store_; }
  const ParamStore& store() const { return store_; }
  const enc::PointEncoder& point_encoder() const { return point_enc_; }
  const enc::ImageEncoder& image_encoder() const { return image_enc_; }
  const heads::HeadBank& head_bank() const { return bank_; }
  std::int64_t global_step() const { return step_; }
  int next_epoch() const { return next_epoch_; }
  const std::vector<LossReport>& history() const { return history_; }

  // Augmentation wiring, dataset identity, and parameter inventory, written
  // alongside every run for audit.
  nlohmann::json run_manifest() const;

  void save(const std::string& path) const;
  void restore(const std::string& path);

 private:
  const data::DatasetHandle* data_;
  RunConfig cfg_;
  SeedTree tree_;
  std::vector<aug::AugmentationPipeline> pipelines_;
  ParamStore store_;
  enc::PointEncoder point_enc_;
  enc::ImageEncoder image_enc_;
  heads::HeadBank bank_;
  std::int64_t step_ = 0;
  int next_epoch_ = 0;
  std::vector<LossReport> history_;

  double effective_lr() const;
};

struct PretrainResult {
  std::string final_checkpoint;
  std::string history_csv;
  int epochs_run = 0;
};

// The parameter registry plus the encoders and heads built over it, in an
// initialization order shared by training and evaluation so checkpoints
// load into either. Requires a validated config.
struct ModelParts {
  ParamStore store;
  enc::PointEncoder point_enc;
  enc::ImageEncoder image_enc;
  heads::HeadBank bank;
};
ModelParts build_model_parts(const RunConfig& cfg);

std::string loss_history_header(int m);
std::string loss_history_row(const LossReport& r);

// Epoch loop: shuffled train split, per-epoch checkpoints (only the newest
// epoch file is kept, plus checkpoint-final.ckpt), run-config.json,
// run-manifest.json, and an incrementally flushed history.csv. With resume
// set, picks up from the newest epoch checkpoint in out_dir.
PretrainResult pretrain(const RunConfig& cfg, const std::string& out_dir,
                        bool resume = false);

}  // namespace mmpoint::train

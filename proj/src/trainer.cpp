#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "mmpoint/checkpoint.hpp"
#include "mmpoint/hashing.hpp"
#include "mmpoint/losses.hpp"
#include "mmpoint/trainer.hpp"

namespace mmpoint::train {

namespace fs = std::filesystem;

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEps = 1e-8;
constexpr double kPi = 3.14159265358979323846;

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::vector<int> epoch_order(const data::DatasetHandle& data, const SeedTree& tree,
                             int epoch) {
  std::vector<int> order = data.train_indices();
  Stream s = tree.stream("batch-order", static_cast<std::uint64_t>(epoch));
  s.shuffle(order);
  return order;
}

}  // namespace

Trainer::Trainer(const data::DatasetHandle& dataset, RunConfig cfg)
    : data_(&dataset), cfg_(std::move(cfg)), tree_(0) {
  validate_run_config(cfg_);
  tree_ = SeedTree(cfg_.seed);

  if (cfg_.m > dataset.n_views())
    throw std::invalid_argument("trainer: m = " + std::to_string(cfg_.m) +
                                " exceeds the dataset's " +
                                std::to_string(dataset.n_views()) + " views per object");
  if (static_cast<int>(dataset.train_indices().size()) < cfg_.batch_size)
    throw std::invalid_argument("trainer: train split holds " +
                                std::to_string(dataset.train_indices().size()) +
                                " objects, need at least batch_size = " +
                                std::to_string(cfg_.batch_size));
  if (cfg_.m > 6)
    throw std::invalid_argument("trainer: m = " + std::to_string(cfg_.m) +
                                " needs a " + std::to_string(cfg_.m + 1) +
                                "-stage catalog; the default catalog has 7 stages");
  std::vector<aug::AugmentStage> catalog = aug::default_catalog(cfg_.m);
  if (cfg_.aug_mode == "multi") {
    pipelines_ = aug::build_mixed_pipelines(cfg_.m, catalog);
  } else {
    pipelines_ = aug::build_pipelines(cfg_.m, catalog);
    if (cfg_.aug_mode == "unified")
      pipelines_.assign(static_cast<size_t>(cfg_.m), pipelines_[0]);
  }

  ModelParts parts = build_model_parts(cfg_);
  store_ = std::move(parts.store);
  point_enc_ = std::move(parts.point_enc);
  image_enc_ = std::move(parts.image_enc);
  bank_ = std::move(parts.bank);
}

ModelParts build_model_parts(const RunConfig& cfg) {
  ModelParts parts;
  Stream init = SeedTree(cfg.seed).stream("init");
  enc::PointEncoderConfig pe;
  pe.k_nn = cfg.point_knn;
  parts.point_enc = enc::make_point_encoder(parts.store, pe, init);
  parts.image_enc = enc::make_image_encoder(parts.store, enc::ImageEncoderConfig{}, init);

  if (cfg.projection.d_in != parts.point_enc.feature_dim() ||
      cfg.projection.d_in != parts.image_enc.feature_dim())
    throw std::invalid_argument("trainer: projection d_in = " +
                                std::to_string(cfg.projection.d_in) +
                                " does not match the encoder feature width");

  heads::BankConfig bank;
  bank.m = cfg.m;
  bank.proj = cfg.projection;
  bank.multi_mlp = cfg.multi_mlp;
  bank.decoupled_intra = cfg.decoupled_intra;
  parts.bank = heads::make_head_bank(parts.store, bank, init);
  return parts;
}

int Trainer::steps_per_epoch() const {
  return static_cast<int>(data_->train_indices().size()) / cfg_.batch_size;
}

Batch Trainer::make_batch(int epoch, int step_in_epoch) const {
  if (epoch < 0 || step_in_epoch < 0)
    throw std::invalid_argument("make_batch: negative epoch or step");
  if (step_in_epoch >= steps_per_epoch())
    throw std::out_of_range("make_batch: step " + std::to_string(step_in_epoch) +
                            " of " + std::to_string(steps_per_epoch()) +
                            " per epoch");
  std::vector<int> order = epoch_order(*data_, tree_, epoch);

  Batch batch;
  batch.epoch = epoch;
  batch.step_in_epoch = step_in_epoch;
  std::vector<std::int64_t> hashed;
  hashed.push_back(epoch);
  hashed.push_back(step_in_epoch);

  int base = step_in_epoch * cfg_.batch_size;
  for (int slot = 0; slot < cfg_.batch_size; ++slot) {
    int index = order[static_cast<size_t>(base + slot)];
    PointCloud cloud = data_->cloud(index);

    Stream s3 = tree_.stream("augment-3d", static_cast<std::uint64_t>(epoch),
                             static_cast<std::uint64_t>(index));
    auto [p1, p2] = aug::augment_point_cloud(cloud, aug::Augment3DConfig{}, s3);

    Stream pick_stream = tree_.stream("data", static_cast<std::uint64_t>(epoch),
                                      static_cast<std::uint64_t>(index));
    std::vector<int> picked =
        pick_stream.sample_without_replacement(data_->n_views(), cfg_.m);

    TrainExample ex;
    ex.p1 = std::move(p1);
    ex.p2 = std::move(p2);
    ex.views.reserve(static_cast<size_t>(cfg_.m));
    for (int j = 1; j <= cfg_.m; ++j) {
      int view_index = picked[static_cast<size_t>(j - 1)];
      ViewImage raw{data_->view(index, view_index), view_index};
      const aug::AugmentationPipeline& pipeline = pipelines_[static_cast<size_t>(j - 1)];
      Stream s2 = tree_.stream("augment-2d-level-" + std::to_string(j),
                               static_cast<std::uint64_t>(epoch),
                               static_cast<std::uint64_t>(index));
      ex.views.push_back(aug::apply_level(raw, pipeline, s2));
      hashed.push_back(view_index);
    }
    batch.examples.push_back(std::move(ex));
    batch.object_ids.push_back(data_->object_id(index));
    hashed.push_back(data_->object_id(index));
  }
  batch.composition_hash = hash_bytes(hashed.data(), hashed.size() * sizeof(std::int64_t));
  return batch;
}

double Trainer::effective_lr() const {
  if (!cfg_.cosine_lr) return cfg_.learning_rate;
  double total = static_cast<double>(cfg_.epochs) * steps_per_epoch();
  double progress = std::min(1.0, static_cast<double>(step_ - 1) / std::max(1.0, total));
  return cfg_.learning_rate * 0.5 * (1.0 + std::cos(kPi * progress));
}

LossReport Trainer::train_step(const Batch& batch) {
  int B = static_cast<int>(batch.examples.size());
  if (B < 2) throw std::invalid_argument("train_step: need at least two examples");

  Tape t;
  TapeBinding bind(store_);

  std::vector<int> g1_rows, g2_rows;
  std::vector<std::vector<int>> view_rows(static_cast<size_t>(cfg_.m));
  for (const TrainExample& ex : batch.examples) {
    int x1 = t.leaf(ex.p1.xyz);
    int x2 = t.leaf(ex.p2.xyz);
    g1_rows.push_back(point_enc_.encode(t, bind, x1).global);
    g2_rows.push_back(point_enc_.encode(t, bind, x2).global);
    for (int j = 0; j < cfg_.m; ++j) {
      const Tensor& px = ex.views[static_cast<size_t>(j)].pixels;
      Tensor chw = px;
      chw.shape = {1, px.dim(0), px.dim(1)};
      view_rows[static_cast<size_t>(j)].push_back(
          image_enc_.encode(t, bind, t.leaf(std::move(chw))));
    }
  }
  int G1 = ops::stack_rows(t, g1_rows);
  int G2 = ops::stack_rows(t, g2_rows);

  int z1_intra = bank_.project_intra_point(t, bind, G1);
  int z2_intra = bank_.project_intra_point(t, bind, G2);
  int intra_node = losses::pairwise_contrast_node(t, z1_intra, z2_intra, cfg_.tau);

  std::vector<int> z1_cross, z2_cross, v_cross;
  for (int j = 1; j <= cfg_.m; ++j) {
    int H = ops::stack_rows(t, view_rows[static_cast<size_t>(j - 1)]);
    z1_cross.push_back(bank_.project_cross_point(t, bind, G1, j));
    z2_cross.push_back(bank_.project_cross_point(t, bind, G2, j));
    v_cross.push_back(bank_.project_cross_image(t, bind, H, j));
  }
  std::vector<double> per_level;
  int inter_node =
      losses::loss_inter_plus_node(t, z1_cross, z2_cross, v_cross, cfg_.tau, &per_level);

  int overall_node = ops::add(t, ops::scale(t, intra_node, cfg_.lambda_intra),
                              ops::scale(t, inter_node, cfg_.lambda_inter));

  LossReport report;
  report.intra = t.val(intra_node).data[0];
  report.inter_per_level = per_level;
  report.inter_total = t.val(inter_node).data[0];
  report.overall = t.val(overall_node).data[0];

  if (!std::isfinite(report.overall))
    throw std::runtime_error("train_step: non-finite loss at step " +
                             std::to_string(step_ + 1) + ", batch hash " +
                             hex64(batch.composition_hash));

  t.backward(overall_node);

  ++step_;
  report.step = step_;
  double lr = effective_lr();
  double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step_));
  double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step_));
  for (int id = 0; id < static_cast<int>(store_.entries.size()); ++id) {
    if (!bind.bound(id)) continue;
    Tensor g = bind.grad_of(t, id);
    ParamStore::Entry& e = store_.at(id);
    for (std::int64_t i = 0; i < g.size(); ++i) {
      size_t q = static_cast<size_t>(i);
      double gi = g.data[q];
      e.m.data[q] = kBeta1 * e.m.data[q] + (1.0 - kBeta1) * gi;
      e.v.data[q] = kBeta2 * e.v.data[q] + (1.0 - kBeta2) * gi * gi;
      double mhat = e.m.data[q] / bc1;
      double vhat = e.v.data[q] / bc2;
      double theta = e.value.data[q];
      theta -= lr * cfg_.weight_decay * theta;
      theta -= lr * mhat / (std::sqrt(vhat) + kEps);
      e.value.data[q] = ParamStore::to_f32(theta);
      e.m.data[q] = ParamStore::to_f32(e.m.data[q]);
      e.v.data[q] = ParamStore::to_f32(e.v.data[q]);
    }
  }

  double term_sum = report.intra;
  for (double v : per_level) term_sum += v;
  int terms = 1 + 2 * cfg_.m;
  report.mi_bound = losses::mi_lower_bound(term_sum / terms, 2 * cfg_.batch_size - 2);

  history_.push_back(report);
  return report;
}

std::vector<LossReport> Trainer::run_epoch(int epoch) {
  std::vector<LossReport> reports;
  int steps = steps_per_epoch();
  reports.reserve(static_cast<size_t>(steps));
  for (int s = 0; s < steps; ++s) reports.push_back(train_step(make_batch(epoch, s)));
  next_epoch_ = epoch + 1;
  return reports;
}

nlohmann::json Trainer::run_manifest() const {
  nlohmann::json views = nlohmann::json::array();
  nlohmann::json floors = nlohmann::json::array();
  for (const aug::AugmentationPipeline& p : pipelines_) {
    views.push_back(p.serialize());
    floors.push_back(p.crop_s_floor);
  }
  return nlohmann::json{
      {"dataset_dir", data_->dir()},
      {"dataset_manifest_hash", hex64(data_->manifest_hash())},
      {"m", cfg_.m},
      {"multi_mlp", cfg_.multi_mlp},
      {"multi_level_aug", cfg_.multi_level_aug},
      {"aug_mode", cfg_.aug_mode},
      {"decoupled_intra", cfg_.decoupled_intra},
      {"view_pipelines", views},
      {"view_crop_floors", floors},
      {"total_params", store_.total_params()},
      {"point_feature_dim", point_enc_.feature_dim()},
      {"image_feature_dim", image_enc_.feature_dim()},
  };
}

void Trainer::save(const std::string& path) const {
  nlohmann::json extra{
      {"kind", "pretrain"},
      {"step", step_},
      {"epoch", next_epoch_},
      {"run_config", run_config_to_json(cfg_)},
  };
  save_checkpoint(path, store_, extra);
}

void Trainer::restore(const std::string& path) {
  nlohmann::json extra = load_checkpoint(path, store_);
  if (extra.value("kind", std::string()) != "pretrain")
    throw std::runtime_error("restore: " + path + " is not a pretraining checkpoint");
  step_ = extra.at("step").get<std::int64_t>();
  next_epoch_ = extra.at("epoch").get<int>();
}

std::string loss_history_header(int m) {
  std::string h = "step,intra";
  for (int j = 1; j <= m; ++j) h += ",inter_level_" + std::to_string(j);
  h += ",overall,mi_bound";
  return h;
}

std::string loss_history_row(const LossReport& r) {
  char buf[64];
  std::string row = std::to_string(r.step);
  auto push = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    row += ",";
    row += buf;
  };
  push(r.intra);
  for (double v : r.inter_per_level) push(v);
  push(r.overall);
  push(r.mi_bound);
  return row;
}

PretrainResult pretrain(const RunConfig& raw_cfg, const std::string& out_dir, bool resume) {
  RunConfig cfg = raw_cfg;
  validate_run_config(cfg);
  data::DatasetHandle dataset = data::DatasetHandle::open(cfg.dataset);
  fs::create_directories(out_dir);

  Trainer trainer(dataset, cfg);

  auto epoch_ckpt = [&](int epoch) {
    return out_dir + "/checkpoint-epoch-" + std::to_string(epoch) + ".ckpt";
  };

  int start_epoch = 0;
  if (resume) {
    int newest = -1;
    for (const auto& entry : fs::directory_iterator(out_dir)) {
      std::string name = entry.path().filename().string();
      if (name.rfind("checkpoint-epoch-", 0) != 0 || entry.path().extension() != ".ckpt")
        continue;
      newest = std::max(newest, std::stoi(name.substr(17)));
    }
    if (newest < 0)
      throw std::runtime_error("pretrain: resume requested but " + out_dir +
                               " holds no epoch checkpoint");
    trainer.restore(epoch_ckpt(newest));
    start_epoch = trainer.next_epoch();
  }

  save_run_config(out_dir + "/run-config.json", cfg);
  {
    std::ofstream mf(out_dir + "/run-manifest.json", std::ios::trunc);
    mf << trainer.run_manifest().dump(2) << "\n";
    if (!mf) throw std::runtime_error("pretrain: cannot write run-manifest.json");
  }

  std::string csv_path = out_dir + "/history.csv";
  std::ofstream csv;
  if (resume && start_epoch > 0 && fs::exists(csv_path)) {
    csv.open(csv_path, std::ios::app);
  } else {
    csv.open(csv_path, std::ios::trunc);
    csv << loss_history_header(cfg.m) << "\n";
  }
  if (!csv) throw std::runtime_error("pretrain: cannot write history.csv");

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    std::vector<LossReport> reports = trainer.run_epoch(epoch);
    for (const LossReport& r : reports) csv << loss_history_row(r) << "\n";
    csv.flush();
    trainer.save(epoch_ckpt(epoch + 1));
    fs::remove(epoch_ckpt(epoch));
  }

  std::string final_path = out_dir + "/checkpoint-final.ckpt";
  trainer.save(final_path);

  PretrainResult result;
  result.final_checkpoint = final_path;
  result.history_csv = csv_path;
  result.epochs_run = cfg.epochs - start_epoch;
  return result;
}

}  // namespace mmpoint::train

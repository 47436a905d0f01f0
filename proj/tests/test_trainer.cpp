#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mmpoint/dataset.hpp"
#include "mmpoint/trainer.hpp"

using namespace mmpoint;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  return p;
}

// One small dataset shared by every case: 4 classes x 3 objects, 128-point
// clouds, 32x32 views, split 8 train / 4 test.
const data::DatasetHandle& tiny_dataset() {
  static data::DatasetHandle handle = [] {
    data::DatasetConfig cfg;
    cfg.classes = 4;
    cfg.per_class = 3;
    cfg.n_points = 128;
    cfg.resolution = 32;
    return data::build_dataset(fresh_dir("mmpoint_trainer_ds").string(), cfg, 9001);
  }();
  return handle;
}

train::RunConfig tiny_config(int m = 2) {
  train::RunConfig cfg;
  cfg.dataset = tiny_dataset().dir();
  cfg.m = m;
  cfg.batch_size = 4;
  cfg.epochs = 1;
  cfg.point_knn = 8;
  return cfg;
}

std::vector<Tensor> snapshot_values(const ParamStore& store) {
  std::vector<Tensor> out;
  for (const auto& e : store.entries) out.push_back(e.value);
  return out;
}

bool entry_changed(const ParamStore& store, const std::vector<Tensor>& before, int id) {
  const Tensor& now = store.at(id).value;
  const Tensor& old = before[static_cast<size_t>(id)];
  for (std::int64_t i = 0; i < now.size(); ++i)
    if (now.data[static_cast<size_t>(i)] != old.data[static_cast<size_t>(i)]) return true;
  return false;
}

int count_lines(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  int n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

std::string first_line(const std::string& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  return line;
}

}  // namespace

TEST_CASE("run config round-trips through json and fills level defaults") {
  train::RunConfig cfg;
  cfg.dataset = "some/dir";
  cfg.m = 3;
  cfg.batch_size = 8;
  cfg.epochs = 5;
  cfg.learning_rate = 2e-3;
  cfg.weight_decay = 1e-5;
  cfg.tau = 0.2;
  cfg.lambda_intra = 0.5;
  cfg.lambda_inter = 2.0;
  cfg.seed = 77;
  cfg.multi_mlp = false;
  cfg.multi_level_aug = false;
  cfg.decoupled_intra = false;
  cfg.cosine_lr = true;
  cfg.point_knn = 12;

  train::validate_run_config(cfg);
  REQUIRE(cfg.projection.d_cross.size() == 3);
  heads::ProjectionConfig expect = heads::default_projection(3);
  CHECK(cfg.projection.d_cross == expect.d_cross);

  nlohmann::json j = train::run_config_to_json(cfg);
  train::RunConfig back = train::run_config_from_json(j);
  CHECK(back.dataset == cfg.dataset);
  CHECK(back.m == cfg.m);
  CHECK(back.batch_size == cfg.batch_size);
  CHECK(back.epochs == cfg.epochs);
  CHECK(back.learning_rate == cfg.learning_rate);
  CHECK(back.weight_decay == cfg.weight_decay);
  CHECK(back.tau == cfg.tau);
  CHECK(back.lambda_intra == cfg.lambda_intra);
  CHECK(back.lambda_inter == cfg.lambda_inter);
  CHECK(back.seed == cfg.seed);
  CHECK(back.multi_mlp == cfg.multi_mlp);
  CHECK(back.multi_level_aug == cfg.multi_level_aug);
  CHECK(back.decoupled_intra == cfg.decoupled_intra);
  CHECK(back.cosine_lr == cfg.cosine_lr);
  CHECK(back.point_knn == cfg.point_knn);
  CHECK(back.projection.d_in == cfg.projection.d_in);
  CHECK(back.projection.d_intra == cfg.projection.d_intra);
  CHECK(back.projection.d_cross == cfg.projection.d_cross);

  auto path = fresh_dir("mmpoint_runcfg");
  fs::create_directories(path);
  std::string file = (path / "run-config.json").string();
  train::save_run_config(file, cfg);
  train::RunConfig loaded = train::load_run_config(file);
  CHECK(loaded.seed == 77);
  CHECK(loaded.projection.d_cross == cfg.projection.d_cross);

  train::RunConfig sparse = train::run_config_from_json(nlohmann::json{{"dataset", "x"}});
  CHECK(sparse.m == 4);
  CHECK(sparse.batch_size == 32);
  CHECK(sparse.multi_mlp);
}

TEST_CASE("run config rejects unknown keys and invalid values") {
  CHECK_THROWS_AS(train::run_config_from_json(nlohmann::json{{"dataset", "x"}, {"boop", 1}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      train::run_config_from_json(nlohmann::json{
          {"dataset", "x"}, {"projection", nlohmann::json{{"d_in", 256}, {"oops", 3}}}}),
      std::invalid_argument);

  auto reject = [](auto&& mutate) {
    train::RunConfig cfg;
    cfg.dataset = "x";
    mutate(cfg);
    CHECK_THROWS_AS(train::validate_run_config(cfg), std::invalid_argument);
  };
  reject([](train::RunConfig& c) { c.m = 0; });
  reject([](train::RunConfig& c) { c.m = 25; });
  reject([](train::RunConfig& c) { c.batch_size = 1; });
  reject([](train::RunConfig& c) { c.epochs = 0; });
  reject([](train::RunConfig& c) { c.learning_rate = 0.0; });
  reject([](train::RunConfig& c) { c.weight_decay = -1e-4; });
  reject([](train::RunConfig& c) { c.tau = 0.0; });
  reject([](train::RunConfig& c) { c.lambda_intra = -0.1; });
  reject([](train::RunConfig& c) { c.point_knn = 0; });
  reject([](train::RunConfig& c) { c.projection.d_cross = {300, 300, 300}; });  // m = 4
}

TEST_CASE("batches are reproducible from the seed alone") {
  train::Trainer a(tiny_dataset(), tiny_config());
  train::Trainer b(tiny_dataset(), tiny_config());
  REQUIRE(a.steps_per_epoch() == 2);

  for (int epoch : {0, 3}) {
    for (int step = 0; step < 2; ++step) {
      train::Batch ba = a.make_batch(epoch, step);
      train::Batch bb = b.make_batch(epoch, step);
      CHECK(ba.composition_hash == bb.composition_hash);
      CHECK(ba.object_ids == bb.object_ids);
      const Tensor& va = ba.examples[0].views[0].pixels;
      const Tensor& vb = bb.examples[0].views[0].pixels;
      REQUIRE(va.size() == vb.size());
      for (std::int64_t i = 0; i < va.size(); ++i)
        REQUIRE(va.data[static_cast<size_t>(i)] == vb.data[static_cast<size_t>(i)]);
      const Tensor& pa = ba.examples[0].p1.xyz;
      const Tensor& pb = bb.examples[0].p1.xyz;
      REQUIRE(pa.size() == pb.size());
      for (std::int64_t i = 0; i < pa.size(); ++i)
        REQUIRE(pa.data[static_cast<size_t>(i)] == pb.data[static_cast<size_t>(i)]);
    }
  }

  // Repeated calls on one instance agree too: batch assembly holds no state.
  CHECK(a.make_batch(1, 1).composition_hash == a.make_batch(1, 1).composition_hash);

  train::RunConfig other = tiny_config();
  other.seed = 1;
  train::Trainer c(tiny_dataset(), other);
  bool any_diff = false;
  for (int step = 0; step < 2; ++step)
    any_diff |= a.make_batch(0, step).composition_hash !=
                c.make_batch(0, step).composition_hash;
  CHECK(any_diff);
}

TEST_CASE("batch layout carries two clouds and one view per level") {
  train::Trainer t(tiny_dataset(), tiny_config(3));
  train::Batch batch = t.make_batch(0, 0);
  REQUIRE(batch.examples.size() == 4);
  REQUIRE(batch.object_ids.size() == 4);
  CHECK(batch.composition_hash != 0);

  for (const auto& ex : batch.examples) {
    CHECK(ex.p1.num_points() >= 64);
    CHECK(ex.p2.num_points() >= 64);
    REQUIRE(ex.views.size() == 3);
    bool variants_differ = ex.p1.num_points() != ex.p2.num_points();
    if (!variants_differ) {
      for (std::int64_t i = 0; i < ex.p1.xyz.size(); ++i)
        if (ex.p1.xyz.data[static_cast<size_t>(i)] !=
            ex.p2.xyz.data[static_cast<size_t>(i)]) {
          variants_differ = true;
          break;
        }
    }
    CHECK(variants_differ);
    for (const auto& view : ex.views) {
      REQUIRE(view.pixels.rank() == 2);
      CHECK(view.pixels.dim(0) == 32);
      CHECK(view.pixels.dim(1) == 32);
      for (double v : view.pixels.data) {
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 1.0);
      }
    }
  }

  // Across one epoch the batches partition the train split.
  std::set<std::int64_t> seen;
  for (int step = 0; step < t.steps_per_epoch(); ++step)
    for (std::int64_t id : t.make_batch(2, step).object_ids) seen.insert(id);
  CHECK(seen.size() == 8);

  CHECK(t.make_batch(0, 0).composition_hash != t.make_batch(0, 1).composition_hash);
  CHECK(t.make_batch(0, 0).composition_hash != t.make_batch(1, 0).composition_hash);
  CHECK_THROWS_AS(t.make_batch(0, 2), std::out_of_range);
  CHECK_THROWS_AS(t.make_batch(-1, 0), std::invalid_argument);
}

TEST_CASE("single-pipeline mode routes every view through the first stage set") {
  train::RunConfig cfg = tiny_config(3);
  cfg.multi_level_aug = false;
  train::Trainer flat(tiny_dataset(), cfg);
  nlohmann::json manifest = flat.run_manifest();

  auto pipes = manifest.at("view_pipelines");
  REQUIRE(pipes.size() == 3);
  std::string base = aug::build_pipelines(3, aug::default_catalog(3))[0].serialize();
  for (const auto& p : pipes) CHECK(p.get<std::string>() == base);
  for (const auto& f : manifest.at("view_crop_floors")) CHECK(f.get<double>() == 0.8);

  train::Trainer leveled(tiny_dataset(), tiny_config(3));
  auto leveled_pipes = leveled.run_manifest().at("view_pipelines");
  CHECK(leveled_pipes[0].get<std::string>() == base);
  CHECK(leveled_pipes[1].get<std::string>() != base);
  CHECK(leveled_pipes[2].get<std::string>() != leveled_pipes[1].get<std::string>());
  auto built = aug::build_pipelines(3, aug::default_catalog(3));
  auto floors = leveled.run_manifest().at("view_crop_floors");
  REQUIRE(floors.size() == 3);
  for (int j = 0; j < 3; ++j)
    CHECK(floors[static_cast<size_t>(j)].get<double>() ==
          built[static_cast<size_t>(j)].crop_s_floor);
  CHECK(floors[0].get<double>() > floors[1].get<double>());
  CHECK(floors[1].get<double>() > floors[2].get<double>());
}

TEST_CASE("mixed augmentation gives each view a distinct unordered stage") {
  train::RunConfig cfg = tiny_config(3);
  cfg.aug_mode = "multi";
  train::Trainer t(tiny_dataset(), cfg);
  CHECK_FALSE(t.config().multi_level_aug);
  CHECK(t.config().aug_mode == "multi");

  nlohmann::json manifest = t.run_manifest();
  CHECK(manifest.at("aug_mode").get<std::string>() == "multi");
  auto pipes = manifest.at("view_pipelines");
  REQUIRE(pipes.size() == 3);
  auto expect = aug::build_mixed_pipelines(3, aug::default_catalog(3));
  for (int j = 0; j < 3; ++j)
    CHECK(pipes[static_cast<size_t>(j)].get<std::string>() ==
          expect[static_cast<size_t>(j)].serialize());
  for (const auto& f : manifest.at("view_crop_floors"))
    CHECK(f.get<double>() == doctest::Approx(0.5).epsilon(1e-12));

  // Explicit mode wins over a contradicting boolean and round-trips.
  train::RunConfig clash = tiny_config();
  clash.multi_level_aug = true;
  clash.aug_mode = "unified";
  train::validate_run_config(clash);
  CHECK_FALSE(clash.multi_level_aug);
  train::RunConfig back = train::run_config_from_json(train::run_config_to_json(clash));
  CHECK(back.aug_mode == "unified");
  CHECK_FALSE(back.multi_level_aug);

  train::RunConfig bad = tiny_config();
  bad.aug_mode = "levelish";
  CHECK_THROWS_AS(train::validate_run_config(bad), std::invalid_argument);

  // Training steps run under the mixed wiring.
  train::LossReport r = t.train_step(t.make_batch(0, 0));
  CHECK(std::isfinite(r.overall));
}

TEST_CASE("reported losses compose into the overall objective") {
  train::RunConfig cfg = tiny_config();
  cfg.lambda_intra = 0.5;
  cfg.lambda_inter = 2.0;
  train::Trainer t(tiny_dataset(), cfg);
  train::LossReport r = t.train_step(t.make_batch(0, 0));

  CHECK(r.step == 1);
  REQUIRE(r.inter_per_level.size() == 2);
  double level_sum = r.inter_per_level[0] + r.inter_per_level[1];
  CHECK(r.inter_total == doctest::Approx(level_sum).epsilon(1e-12));
  CHECK(r.overall ==
        doctest::Approx(0.5 * r.intra + 2.0 * r.inter_total).epsilon(1e-12));

  double mean_term = (r.intra + level_sum) / 5.0;
  CHECK(r.mi_bound == doctest::Approx(std::log(6.0) - mean_term).epsilon(1e-12));

  CHECK(r.intra > 0.0);
  for (double v : r.inter_per_level) CHECK(v > 0.0);
  CHECK(t.global_step() == 1);
  REQUIRE(t.history().size() == 1);
  CHECK(t.history()[0].overall == r.overall);
}

TEST_CASE("one step updates every head the objective touches and no other") {
  train::Trainer t(tiny_dataset(), tiny_config());
  std::vector<Tensor> before = snapshot_values(t.store());
  t.train_step(t.make_batch(0, 0));

  std::vector<int> must_change;
  auto add_mlp = [&](const heads::Mlp2& h) {
    must_change.insert(must_change.end(), {h.w1, h.b1, h.w2, h.b2});
  };
  const auto& bank = t.head_bank();
  add_mlp(bank.intra_point);
  for (const auto& h : bank.cross_point) add_mlp(h);
  for (const auto& h : bank.cross_image) add_mlp(h);
  for (int id : t.point_encoder().w_ids) must_change.push_back(id);
  for (int id : t.point_encoder().b_ids) must_change.push_back(id);
  for (int id : t.image_encoder().w_ids) must_change.push_back(id);
  for (int id : t.image_encoder().b_ids) must_change.push_back(id);

  for (int id : must_change) CHECK(entry_changed(t.store(), before, id));

  // The image-side intra head exists in the registry but the objective
  // never routes through it, so one step leaves it at initialization.
  const heads::Mlp2& unused = bank.intra_image;
  for (int id : {unused.w1, unused.b1, unused.w2, unused.b2})
    CHECK_FALSE(entry_changed(t.store(), before, id));
}

TEST_CASE("loss history rows match the declared header") {
  CHECK(train::loss_history_header(2) == "step,intra,inter_level_1,inter_level_2,overall,mi_bound");
  CHECK(train::loss_history_header(1) == "step,intra,inter_level_1,overall,mi_bound");

  train::LossReport r;
  r.step = 12;
  r.intra = 1.5;
  r.inter_per_level = {2.25, 3.0};
  r.inter_total = 5.25;
  r.overall = 6.75;
  r.mi_bound = 0.125;
  CHECK(train::loss_history_row(r) == "12,1.5,2.25,3,6.75,0.125");

  train::Trainer t(tiny_dataset(), tiny_config());
  train::LossReport live = t.train_step(t.make_batch(0, 0));
  std::string row = train::loss_history_row(live);
  int commas = 0;
  for (char c : row) commas += c == ',';
  CHECK(commas == 5);
  CHECK(row.rfind("1,", 0) == 0);
}

TEST_CASE("training on a tiny dataset drives the objective down") {
  train::RunConfig cfg = tiny_config();
  cfg.learning_rate = 3e-3;
  cfg.epochs = 30;
  train::Trainer t(tiny_dataset(), cfg);

  std::vector<double> overall;
  for (int epoch = 0; epoch < 30; ++epoch)
    for (int step = 0; step < t.steps_per_epoch(); ++step)
      overall.push_back(t.train_step(t.make_batch(epoch, step)).overall);

  double early = 0.0, late = 0.0;
  for (int i = 0; i < 5; ++i) {
    early += overall[static_cast<size_t>(i)] / 5.0;
    late += overall[overall.size() - 5 + static_cast<size_t>(i)] / 5.0;
  }
  INFO("early mean ", early, " late mean ", late);
  CHECK(late < 0.85 * early);
  for (double v : overall) CHECK(std::isfinite(v));
}

TEST_CASE("interrupted runs resume to the exact same weights") {
  auto dir_full = fresh_dir("mmpoint_run_full");
  auto dir_split = fresh_dir("mmpoint_run_split");

  train::RunConfig cfg = tiny_config();
  cfg.epochs = 2;
  train::PretrainResult full = train::pretrain(cfg, dir_full.string());
  CHECK(full.epochs_run == 2);

  train::RunConfig half = cfg;
  half.epochs = 1;
  train::pretrain(half, dir_split.string());
  train::PretrainResult tail = train::pretrain(cfg, dir_split.string(), true);
  CHECK(tail.epochs_run == 1);

  train::Trainer a(tiny_dataset(), cfg);
  train::Trainer b(tiny_dataset(), cfg);
  a.restore(full.final_checkpoint);
  b.restore(tail.final_checkpoint);
  CHECK(a.store().value_hash() == b.store().value_hash());
  CHECK(a.global_step() == 4);
  CHECK(b.global_step() == 4);
  CHECK(a.next_epoch() == 2);

  // The loss history of the stitched run matches the uninterrupted one.
  std::ifstream fa(full.history_csv), fb(tail.history_csv);
  std::stringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  CHECK(sa.str() == sb.str());
  CHECK(count_lines(full.history_csv) == 5);

  // Only the newest epoch checkpoint survives alongside the final one.
  CHECK(fs::exists(dir_full / "checkpoint-epoch-2.ckpt"));
  CHECK_FALSE(fs::exists(dir_full / "checkpoint-epoch-1.ckpt"));
  CHECK(fs::exists(dir_full / "checkpoint-final.ckpt"));

  CHECK_THROWS_AS(train::pretrain(cfg, fresh_dir("mmpoint_run_empty").string(), true),
                  std::runtime_error);
}

TEST_CASE("same seed reproduces weights and a different seed does not") {
  train::RunConfig cfg = tiny_config();
  train::Trainer a(tiny_dataset(), cfg);
  train::Trainer b(tiny_dataset(), cfg);
  REQUIRE(a.store().value_hash() == b.store().value_hash());
  for (int step = 0; step < 2; ++step) {
    a.train_step(a.make_batch(0, step));
    b.train_step(b.make_batch(0, step));
  }
  CHECK(a.store().value_hash() == b.store().value_hash());

  train::RunConfig other = cfg;
  other.seed = 123;
  train::Trainer c(tiny_dataset(), other);
  CHECK(c.store().value_hash() != a.store().value_hash());
}

TEST_CASE("cosine schedule decays the step size and stays finite") {
  train::RunConfig cfg = tiny_config();
  cfg.cosine_lr = true;
  cfg.epochs = 2;
  train::Trainer t(tiny_dataset(), cfg);
  for (int epoch = 0; epoch < 2; ++epoch)
    for (int step = 0; step < t.steps_per_epoch(); ++step) {
      train::LossReport r = t.train_step(t.make_batch(epoch, step));
      CHECK(std::isfinite(r.overall));
    }
  CHECK(t.global_step() == 4);
}

TEST_CASE("invalid trainer setups are rejected") {
  train::RunConfig cfg = tiny_config();
  cfg.batch_size = 32;  // train split only holds 8 objects
  CHECK_THROWS_AS(train::Trainer(tiny_dataset(), cfg), std::invalid_argument);

  train::RunConfig seven = tiny_config(7);  // default catalog tops out at six levels
  CHECK_THROWS_AS(train::Trainer(tiny_dataset(), seven), std::invalid_argument);

  train::RunConfig narrow = tiny_config();
  narrow.projection = heads::ProjectionConfig{128, 128, {160, 192}};
  CHECK_THROWS_AS(train::Trainer(tiny_dataset(), narrow), std::invalid_argument);
}

TEST_CASE("corrupted parameters abort with step and batch diagnostics") {
  train::Trainer t(tiny_dataset(), tiny_config());
  t.store().at(t.head_bank().intra_point.w2).value.data[0] =
      std::numeric_limits<double>::quiet_NaN();
  train::Batch batch = t.make_batch(0, 0);
  try {
    t.train_step(batch);
    FAIL("expected a non-finite loss error");
  } catch (const std::runtime_error& err) {
    std::string msg = err.what();
    CHECK(msg.find("non-finite") != std::string::npos);
    CHECK(msg.find("step 1") != std::string::npos);
    CHECK(msg.find("0x") != std::string::npos);
  }
  CHECK(t.global_step() == 0);
}

TEST_CASE("run manifest records dataset identity and augmentation wiring") {
  train::Trainer t(tiny_dataset(), tiny_config());
  nlohmann::json m = t.run_manifest();
  CHECK(m.at("m").get<int>() == 2);
  CHECK(m.at("dataset_manifest_hash").get<std::string>().rfind("0x", 0) == 0);
  CHECK(m.at("dataset_dir").get<std::string>() == tiny_dataset().dir());
  CHECK(m.at("total_params").get<std::int64_t>() == t.store().total_params());
  CHECK(m.at("total_params").get<std::int64_t>() > 0);
  CHECK(m.at("view_pipelines").size() == 2);
  CHECK(m.at("multi_mlp").get<bool>());
  CHECK(m.at("point_feature_dim").get<int>() == 256);
  CHECK(m.at("image_feature_dim").get<int>() == 256);
}

TEST_CASE("pretraining writes config, manifest, history, and a final checkpoint") {
  auto dir = fresh_dir("mmpoint_run_files");
  train::RunConfig cfg = tiny_config();
  train::PretrainResult result = train::pretrain(cfg, dir.string());

  CHECK(fs::exists(result.final_checkpoint));
  CHECK(fs::exists(dir / "run-config.json"));
  CHECK(fs::exists(dir / "run-manifest.json"));
  CHECK(result.history_csv == (dir / "history.csv").string());

  train::RunConfig loaded = train::load_run_config((dir / "run-config.json").string());
  CHECK(loaded.m == 2);
  CHECK(loaded.projection.d_cross.size() == 2);  // persisted fully resolved

  CHECK(first_line(result.history_csv) == train::loss_history_header(2));
  CHECK(count_lines(result.history_csv) == 3);

  std::ifstream mf(dir / "run-manifest.json");
  nlohmann::json manifest = nlohmann::json::parse(mf);
  CHECK(manifest.at("m").get<int>() == 2);

  // Restoring the final checkpoint rebuilds the exact parameter state.
  train::Trainer fresh(tiny_dataset(), cfg);
  std::uint64_t init_hash = fresh.store().value_hash();
  fresh.restore(result.final_checkpoint);
  CHECK(fresh.store().value_hash() != init_hash);
  CHECK(fresh.global_step() == 2);
}

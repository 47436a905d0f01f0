#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mmpoint/dataset.hpp"
#include "mmpoint/evalsuite.hpp"
#include "mmpoint/hashing.hpp"
#include "mmpoint/trainer.hpp"

using namespace mmpoint;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

void print_dataset_summary(const data::DatasetHandle& ds) {
  std::printf("dataset: %s\n", ds.dir().c_str());
  std::printf("objects: %d (%zu train / %zu test), %d classes\n", ds.count(),
              ds.train_indices().size(), ds.test_indices().size(), ds.classes());
  std::printf("points per cloud: %d, views: %d at %dx%d\n", ds.n_points(), ds.n_views(),
              ds.resolution(), ds.resolution());
  std::printf("manifest hash: %s\n", hex64(ds.manifest_hash()).c_str());
}

void print_probe_report(const eval::EvalReport& report) {
  std::printf("accuracy: %.2f%%\n", report.accuracy);
  for (const auto& [label, acc] : report.per_class)
    std::printf("  class %d: %.2f%%\n", label, acc);
}

std::string last_history_row(const std::string& csv_path) {
  std::ifstream in(csv_path);
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty()) last = line;
  return last;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-modal contrastive pretraining on point clouds and rendered views"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a procedural shape dataset");
  data::DatasetConfig gen_cfg;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  gen->add_option("--classes", gen_cfg.classes, "Shape classes")->capture_default_str();
  gen->add_option("--per-class", gen_cfg.per_class, "Objects per class")
      ->capture_default_str();
  gen->add_option("--points", gen_cfg.n_points, "Points per cloud")->capture_default_str();
  gen->add_option("--views", gen_cfg.n_views, "Rendered views per object")
      ->capture_default_str();
  gen->add_option("--res", gen_cfg.resolution, "View resolution in pixels")
      ->capture_default_str();
  gen->add_option("--seed", gen_seed, "Generation seed")->capture_default_str();
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->callback([&] {
    data::DatasetHandle ds = data::build_dataset(gen_out, gen_cfg, gen_seed);
    print_dataset_summary(ds);
  });

  // ingest
  auto* ing = app.add_subcommand("ingest", "Convert an HDF5 point-cloud archive");
  std::string ing_hdf5, ing_out;
  int ing_points = 1024, ing_res = 64;
  std::uint64_t ing_seed = 0;
  ing->add_option("--hdf5", ing_hdf5, "Archive with data (N,P,3) and label tables")
      ->required();
  ing->add_option("--points", ing_points, "Points to subsample per cloud")
      ->capture_default_str();
  ing->add_option("--res", ing_res, "View resolution in pixels")->capture_default_str();
  ing->add_option("--seed", ing_seed, "Subsampling seed")->capture_default_str();
  ing->add_option("--out", ing_out, "Output directory")->required();
  ing->callback([&] {
    data::DatasetHandle ds = data::ingest_external(ing_out, ing_hdf5, ing_points, ing_res,
                                                   ing_seed);
    print_dataset_summary(ds);
  });

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "Run contrastive pretraining");
  std::string pre_config, pre_data, pre_out = "run";
  std::uint64_t pre_seed = 0;
  bool pre_resume = false;
  pre->add_option("--config", pre_config, "run-config.json path")->required();
  pre->add_option("--data", pre_data, "Dataset directory (overrides the config)");
  pre->add_option("--out", pre_out, "Run directory for checkpoints and logs")
      ->capture_default_str();
  auto* pre_seed_opt = pre->add_option("--seed", pre_seed, "Seed (overrides the config)");
  pre->add_flag("--resume", pre_resume, "Continue from the newest epoch checkpoint");
  pre->callback([&] {
    train::RunConfig cfg = train::load_run_config(pre_config);
    if (!pre_data.empty()) cfg.dataset = pre_data;
    if (pre_seed_opt->count() > 0) cfg.seed = pre_seed;
    train::PretrainResult res = train::pretrain(cfg, pre_out, pre_resume);
    std::printf("pretrained %d epochs\n", res.epochs_run);
    std::printf("final checkpoint: %s\n", res.final_checkpoint.c_str());
    std::printf("history: %s\n", res.history_csv.c_str());
    std::string last = last_history_row(res.history_csv);
    if (!last.empty()) std::printf("last step: %s\n", last.c_str());
  });

  // eval probe | eval fewshot
  auto* ev = app.add_subcommand("eval", "Evaluate frozen features from a checkpoint");
  ev->require_subcommand(1);

  auto* probe = ev->add_subcommand("probe", "Linear classifier on frozen features");
  std::string probe_ckpt, probe_data;
  double probe_c = 1.0;
  std::uint64_t probe_seed = 0;
  probe->add_option("--ckpt", probe_ckpt, "Pretraining checkpoint")->required();
  probe->add_option("--data", probe_data, "Dataset directory")->required();
  probe->add_option("--c-reg", probe_c, "Classifier regularization C")
      ->capture_default_str();
  probe->add_option("--seed", probe_seed, "Accepted for uniformity; the probe is deterministic");
  probe->callback([&] {
    data::DatasetHandle ds = data::DatasetHandle::open(probe_data);
    eval::FrozenModel model = eval::FrozenModel::load(probe_ckpt);
    eval::FeatureSet tr = eval::extract_features(model, ds, eval::Subset::kTrain);
    eval::FeatureSet te = eval::extract_features(model, ds, eval::Subset::kTest);
    eval::EvalReport report =
        eval::linear_probe(tr.feats, tr.labels, te.feats, te.labels, probe_c);
    std::printf("linear probe: %zu train / %zu test objects, checkpoint step %lld\n",
                tr.labels.size(), te.labels.size(), static_cast<long long>(model.step));
    print_probe_report(report);
  });

  auto* few = ev->add_subcommand("fewshot", "N-way K-shot episodes on frozen features");
  std::string few_ckpt, few_data;
  eval::EpisodeSpec few_spec;
  std::uint64_t few_seed = 0;
  few->add_option("--ckpt", few_ckpt, "Pretraining checkpoint")->required();
  few->add_option("--data", few_data, "Dataset directory")->required();
  few->add_option("--n-way", few_spec.ways, "Classes per episode")->capture_default_str();
  few->add_option("--k-shot", few_spec.shots, "Support examples per class")
      ->capture_default_str();
  few->add_option("--queries", few_spec.queries, "Query examples per class")
      ->capture_default_str();
  few->add_option("--runs", few_spec.runs, "Episodes to average")->capture_default_str();
  few->add_option("--seed", few_seed, "Episode sampling seed")->capture_default_str();
  few->callback([&] {
    data::DatasetHandle ds = data::DatasetHandle::open(few_data);
    eval::FrozenModel model = eval::FrozenModel::load(few_ckpt);
    eval::FeatureSet all = eval::extract_features(model, ds, eval::Subset::kAll);
    Stream episodes(few_seed);
    eval::EvalReport report = eval::few_shot_eval(all.feats, all.labels, few_spec, episodes);
    std::printf("%d-way %d-shot, %d queries, %d runs\n", few_spec.ways, few_spec.shots,
                few_spec.queries, few_spec.runs);
    std::printf("accuracy: %.2f%% +/- %.2f%%\n", report.accuracy, report.accuracy_std);
  });

  // ablate
  auto* abl = app.add_subcommand("ablate", "Pretrain and probe across one config axis");
  std::string abl_axis, abl_values, abl_config, abl_data, abl_seeds, abl_out = "ablation";
  std::uint64_t abl_seed = 0;
  abl->add_option("--axis", abl_axis, "views, multi_mlp, or multi_level_aug")->required();
  abl->add_option("--values", abl_values, "Comma-separated axis values (default: all)");
  abl->add_option("--config", abl_config, "Base run-config.json")->required();
  abl->add_option("--data", abl_data, "Dataset directory (overrides the config)");
  auto* abl_seeds_opt =
      abl->add_option("--seeds", abl_seeds, "Comma-separated seeds (default: config seed)");
  auto* abl_seed_opt = abl->add_option("--seed", abl_seed, "Single seed shorthand");
  abl_seed_opt->excludes(abl_seeds_opt);
  abl->add_option("--out", abl_out, "Work directory for the grid")->capture_default_str();
  abl->callback([&] {
    train::RunConfig base = train::load_run_config(abl_config);
    if (!abl_data.empty()) base.dataset = abl_data;
    std::vector<std::uint64_t> seed_list;
    if (abl_seed_opt->count() > 0) seed_list.push_back(abl_seed);
    for (const std::string& s : split_list(abl_seeds))
      seed_list.push_back(std::stoull(s));
    eval::AblationTable table =
        eval::ablate(abl_axis, split_list(abl_values), base, seed_list, abl_out);
    std::printf("%s", table.render().c_str());
    fs::path csv_path = fs::path(abl_out) / (abl_axis + ".csv");
    std::ofstream csv(csv_path, std::ios::trunc);
    csv << table.to_csv();
    csv.close();
    if (csv.fail()) throw std::runtime_error("ablate: cannot write " + csv_path.string());
    std::printf("wrote %s\n", csv_path.string().c_str());
  });

  // export
  auto* exp = app.add_subcommand("export", "Write frozen embeddings of every object as CSV");
  std::string exp_ckpt, exp_data, exp_out;
  std::uint64_t exp_seed = 0;
  exp->add_option("--ckpt", exp_ckpt, "Pretraining checkpoint")->required();
  exp->add_option("--data", exp_data, "Dataset directory")->required();
  exp->add_option("--out", exp_out, "Output CSV path")->required();
  exp->add_option("--seed", exp_seed, "Accepted for uniformity; the export is deterministic");
  exp->callback([&] {
    data::DatasetHandle ds = data::DatasetHandle::open(exp_data);
    eval::export_embeddings(exp_ckpt, ds, exp_out);
    std::printf("wrote %d rows to %s\n", ds.count(), exp_out.c_str());
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmpoint/dataset.hpp"
#include "mmpoint/trainer.hpp"

namespace mmpoint::eval {

// One-vs-rest linear classifier with L1 hinge loss and L2 regularization,
// solved to convergence by dual coordinate descent with deterministic
// zero initialization and a fixed sweep order. A constant coordinate is
// appended to every feature vector to carry the bias.
struct LinearSvmConfig {
  double c_reg = 1.0;
  double tol = 1e-6;
  int max_sweeps = 2000;
};

struct LinearModel {
  std::vector<int> classes;  // sorted distinct training labels
  Tensor weights;            // [classes, d+1], last column is the bias
};

LinearModel train_linear_svm(const Tensor& feats, const std::vector<int>& labels,
                             const LinearSvmConfig& cfg = {});
std::vector<int> predict(const LinearModel& model, const Tensor& feats);

// A pretrained model rebuilt from a checkpoint for frozen-weight
// evaluation. Features are the global point-encoder outputs, taken before
// any projection head.
struct FrozenModel {
  train::RunConfig cfg;
  ParamStore store;
  enc::PointEncoder point_enc;
  enc::ImageEncoder image_enc;
  heads::HeadBank bank;
  std::int64_t step = 0;

  static FrozenModel load(const std::string& checkpoint);
  Tensor features(const PointCloud& cloud);  // [1, d]
};

enum class Subset { kTrain, kTest, kAll };

struct FeatureSet {
  Tensor feats;  // [n, d]
  std::vector<int> labels;
};

// Encodes every object of the chosen split. Guards the frozen contract: the
// parameter hash must be identical before and after, or this throws.
FeatureSet extract_features(FrozenModel& model, const data::DatasetHandle& ds,
                            Subset subset);
FeatureSet extract_features(const std::string& checkpoint, const data::DatasetHandle& ds,
                            Subset subset);

struct EvalReport {
  double accuracy = 0.0;               // mean over runs, percent
  double accuracy_std = 0.0;           // population std over runs, percent
  std::map<int, double> per_class;     // label -> query accuracy, percent
  std::vector<double> run_accuracies;  // one entry per run
  nlohmann::json config_echo;
};

// Fits the linear classifier on frozen training features and scores the
// held-out features. Needs at least two distinct training classes.
EvalReport linear_probe(const Tensor& train_feats, const std::vector<int>& train_labels,
                        const Tensor& test_feats, const std::vector<int>& test_labels,
                        double c_reg = 1.0);

struct EpisodeSpec {
  int ways = 5;
  int shots = 10;
  int queries = 20;
  int runs = 10;
};

// N-way K-shot episodes: each run samples ways classes, then shots support
// and queries query examples per class with no overlap, fits the linear
// classifier on the support set, and scores the queries. Reports mean and
// std over runs. Classes with fewer than shots + queries examples are not
// eligible; if fewer than ways classes remain this throws.
EvalReport few_shot_eval(const Tensor& feats, const std::vector<int>& labels,
                         const EpisodeSpec& spec, Stream& stream);

// Writes every object of the dataset as one CSV row: integer label first,
// then the frozen feature vector. No header row.
void export_embeddings(const std::string& checkpoint, const data::DatasetHandle& ds,
                       const std::string& out_path);

struct AblationRow {
  std::string value;
  std::vector<std::uint64_t> seeds;
  std::vector<double> accuracies;  // linear-probe accuracy per seed, percent
  double mean = 0.0;
  double stddev = 0.0;
};

struct AblationTable {
  std::string axis;
  std::vector<AblationRow> rows;
  std::string render() const;  // aligned text table
  std::string to_csv() const;  // long format: axis,value,seed,accuracy
};

// Runs a full pretrain plus linear probe for every (value, seed) cell and
// tabulates the accuracies. Axes: "views" takes level counts (default
// 1,3,4,5,6); "multi_mlp" takes none/intra/inter/both (default all four);
// "multi_level_aug" takes unified/multi/multi-level (default all three).
// Every cell shares the base config's dataset so comparisons are paired.
// Run directories are created under work_dir.
AblationTable ablate(const std::string& axis, std::vector<std::string> values,
                     const train::RunConfig& base, const std::vector<std::uint64_t>& seeds,
                     const std::string& work_dir);

}  // namespace mmpoint::eval

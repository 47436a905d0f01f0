#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include "mmpoint/checkpoint.hpp"
#include "mmpoint/evalsuite.hpp"
#include "mmpoint/tape.hpp"

namespace mmpoint::eval {

namespace {

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double population_std(const std::vector<double>& v, double mean) {
  double sq = 0.0;
  for (double x : v) sq += (x - mean) * (x - mean);
  return std::sqrt(sq / static_cast<double>(v.size()));
}

std::map<int, double> per_class_percent(const std::map<int, std::pair<int, int>>& tallies) {
  std::map<int, double> out;
  for (const auto& [label, counts] : tallies)
    out[label] = 100.0 * counts.first / std::max(1, counts.second);
  return out;
}

}  // namespace

FrozenModel FrozenModel::load(const std::string& checkpoint) {
  nlohmann::json extra = read_checkpoint_metadata(checkpoint);
  if (extra.value("kind", std::string()) != "pretrain")
    throw std::runtime_error("evalsuite: " + checkpoint + " is not a pretraining checkpoint");

  FrozenModel model;
  model.cfg = train::run_config_from_json(extra.at("run_config"));
  train::validate_run_config(model.cfg);
  train::ModelParts parts = train::build_model_parts(model.cfg);
  model.store = std::move(parts.store);
  model.point_enc = std::move(parts.point_enc);
  model.image_enc = std::move(parts.image_enc);
  model.bank = std::move(parts.bank);
  load_checkpoint(checkpoint, model.store);
  model.step = extra.at("step").get<std::int64_t>();
  return model;
}

Tensor FrozenModel::features(const PointCloud& cloud) {
  Tape t;
  TapeBinding bind(store);
  int xyz = t.leaf(cloud.xyz);
  enc::PointEncoder::Output out = point_enc.encode(t, bind, xyz);
  return t.val(out.global);
}

FeatureSet extract_features(FrozenModel& model, const data::DatasetHandle& ds,
                            Subset subset) {
  std::vector<int> indices;
  switch (subset) {
    case Subset::kTrain: indices = ds.train_indices(); break;
    case Subset::kTest: indices = ds.test_indices(); break;
    case Subset::kAll:
      indices.resize(static_cast<size_t>(ds.count()));
      std::iota(indices.begin(), indices.end(), 0);
      break;
  }
  if (indices.empty()) throw std::invalid_argument("extract_features: empty split");

  std::uint64_t before = model.store.value_hash();
  int d = model.point_enc.feature_dim();
  FeatureSet set;
  set.feats = Tensor({static_cast<int>(indices.size()), d});
  set.labels.resize(indices.size());
  for (size_t row = 0; row < indices.size(); ++row) {
    Tensor f = model.features(ds.cloud(indices[row]));
    for (int c = 0; c < d; ++c) set.feats.at(static_cast<int>(row), c) = f.at(0, c);
    set.labels[row] = ds.label(indices[row]);
  }
  if (model.store.value_hash() != before)
    throw std::logic_error("extract_features: parameters changed during evaluation");
  return set;
}

FeatureSet extract_features(const std::string& checkpoint, const data::DatasetHandle& ds,
                            Subset subset) {
  FrozenModel model = FrozenModel::load(checkpoint);
  return extract_features(model, ds, subset);
}

EvalReport linear_probe(const Tensor& train_feats, const std::vector<int>& train_labels,
                        const Tensor& test_feats, const std::vector<int>& test_labels,
                        double c_reg) {
  if (test_labels.empty()) throw std::invalid_argument("linear_probe: empty test set");
  LinearSvmConfig svm;
  svm.c_reg = c_reg;
  LinearModel model = train_linear_svm(train_feats, train_labels, svm);
  std::vector<int> guess = predict(model, test_feats);

  int correct = 0;
  std::map<int, std::pair<int, int>> tallies;
  for (size_t i = 0; i < test_labels.size(); ++i) {
    auto& [hit, total] = tallies[test_labels[i]];
    ++total;
    if (guess[i] == test_labels[i]) {
      ++hit;
      ++correct;
    }
  }

  EvalReport report;
  report.accuracy = 100.0 * correct / static_cast<double>(test_labels.size());
  report.accuracy_std = 0.0;
  report.run_accuracies = {report.accuracy};
  report.per_class = per_class_percent(tallies);
  report.config_echo = {{"c_reg", c_reg},
                        {"train_count", train_labels.size()},
                        {"test_count", test_labels.size()},
                        {"classes", model.classes.size()}};
  return report;
}

EvalReport few_shot_eval(const Tensor& feats, const std::vector<int>& labels,
                         const EpisodeSpec& spec, Stream& stream) {
  if (feats.rank() != 2 || static_cast<size_t>(feats.rows()) != labels.size())
    throw std::invalid_argument("few_shot_eval: features must be [n, d] matching labels");
  if (spec.ways < 2 || spec.shots < 1 || spec.queries < 1 || spec.runs < 1)
    throw std::invalid_argument("few_shot_eval: need ways >= 2, shots, queries, runs >= 1");

  std::map<int, std::vector<int>> by_class;
  for (size_t i = 0; i < labels.size(); ++i)
    by_class[labels[i]].push_back(static_cast<int>(i));
  int need = spec.shots + spec.queries;
  std::vector<int> eligible;
  for (const auto& [label, rows] : by_class)
    if (static_cast<int>(rows.size()) >= need) eligible.push_back(label);
  if (static_cast<int>(eligible.size()) < spec.ways)
    throw std::invalid_argument("few_shot_eval: " + std::to_string(spec.ways) +
                                "-way episodes need " + std::to_string(need) +
                                " examples per class; only " +
                                std::to_string(eligible.size()) + " classes qualify");

  int d = feats.cols();
  auto gather = [&](const std::vector<int>& rows, Tensor& out, std::vector<int>& out_labels) {
    out = Tensor({static_cast<int>(rows.size()), d});
    out_labels.resize(rows.size());
    for (size_t r = 0; r < rows.size(); ++r) {
      for (int c = 0; c < d; ++c) out.at(static_cast<int>(r), c) = feats.at(rows[r], c);
      out_labels[r] = labels[static_cast<size_t>(rows[r])];
    }
  };

  EvalReport report;
  std::map<int, std::pair<int, int>> tallies;
  for (int run = 0; run < spec.runs; ++run) {
    std::vector<int> class_picks =
        stream.sample_without_replacement(static_cast<int>(eligible.size()), spec.ways);
    std::vector<int> support_rows, query_rows;
    for (int pick : class_picks) {
      const std::vector<int>& rows = by_class.at(eligible[static_cast<size_t>(pick)]);
      std::vector<int> chosen =
          stream.sample_without_replacement(static_cast<int>(rows.size()), need);
      for (int k = 0; k < spec.shots; ++k)
        support_rows.push_back(rows[static_cast<size_t>(chosen[static_cast<size_t>(k)])]);
      for (int q = spec.shots; q < need; ++q)
        query_rows.push_back(rows[static_cast<size_t>(chosen[static_cast<size_t>(q)])]);
    }

    std::set<int> support_set(support_rows.begin(), support_rows.end());
    for (int row : query_rows)
      if (support_set.count(row))
        throw std::logic_error("few_shot_eval: support and query sets overlap");

    Tensor support, query;
    std::vector<int> support_labels, query_labels;
    gather(support_rows, support, support_labels);
    gather(query_rows, query, query_labels);

    LinearModel svm = train_linear_svm(support, support_labels, {});
    std::vector<int> guess = predict(svm, query);
    int correct = 0;
    for (size_t i = 0; i < query_labels.size(); ++i) {
      auto& [hit, total] = tallies[query_labels[i]];
      ++total;
      if (guess[i] == query_labels[i]) {
        ++hit;
        ++correct;
      }
    }
    report.run_accuracies.push_back(100.0 * correct /
                                    static_cast<double>(query_labels.size()));
  }

  report.accuracy = mean_of(report.run_accuracies);
  report.accuracy_std = population_std(report.run_accuracies, report.accuracy);
  report.per_class = per_class_percent(tallies);
  report.config_echo = {{"ways", spec.ways},
                        {"shots", spec.shots},
                        {"queries", spec.queries},
                        {"runs", spec.runs}};
  return report;
}

void export_embeddings(const std::string& checkpoint, const data::DatasetHandle& ds,
                       const std::string& out_path) {
  FeatureSet all = extract_features(checkpoint, ds, Subset::kAll);
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw std::runtime_error("export_embeddings: cannot write " + out_path);
  char buf[32];
  for (int i = 0; i < all.feats.rows(); ++i) {
    out << all.labels[static_cast<size_t>(i)];
    for (int c = 0; c < all.feats.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.10g", all.feats.at(i, c));
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("export_embeddings: short write to " + out_path);
}

}  // namespace mmpoint::eval

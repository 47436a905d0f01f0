#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "mmpoint/evalsuite.hpp"

namespace mmpoint::eval {

namespace {

namespace fs = std::filesystem;

std::vector<std::string> default_values(const std::string& axis) {
  if (axis == "views") return {"1", "3", "4", "5", "6"};
  if (axis == "multi_mlp") return {"none", "intra", "inter", "both"};
  if (axis == "multi_level_aug") return {"unified", "multi", "multi-level"};
  throw std::invalid_argument("ablate: unknown axis '" + axis +
                              "', expected views, multi_mlp, or multi_level_aug");
}

train::RunConfig apply_value(const std::string& axis, const std::string& value,
                             train::RunConfig cfg) {
  if (axis == "views") {
    size_t used = 0;
    int m = 0;
    try {
      m = std::stoi(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != value.size() || m < 1)
      throw std::invalid_argument("ablate: views value must be a positive integer, got '" +
                                  value + "'");
    cfg.m = m;
    cfg.projection.d_cross.clear();
  } else if (axis == "multi_mlp") {
    if (value != "none" && value != "intra" && value != "inter" && value != "both")
      throw std::invalid_argument(
          "ablate: multi_mlp value must be none, intra, inter, or both, got '" + value + "'");
    cfg.decoupled_intra = value == "intra" || value == "both";
    cfg.multi_mlp = value == "inter" || value == "both";
  } else {
    cfg.aug_mode = value;
    cfg.multi_level_aug = value == "multi-level";
  }
  return cfg;
}

std::string format_cell(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

std::string AblationTable::render() const {
  std::vector<std::array<std::string, 3>> lines;
  lines.push_back({axis, "accuracy", "per-seed"});
  for (const AblationRow& row : rows) {
    std::string spread = format_cell(row.mean) + " +/- " + format_cell(row.stddev);
    std::string cells;
    for (size_t i = 0; i < row.accuracies.size(); ++i) {
      if (i) cells += ' ';
      cells += format_cell(row.accuracies[i]);
    }
    lines.push_back({row.value, spread, cells});
  }

  std::array<size_t, 3> width = {0, 0, 0};
  for (const auto& line : lines)
    for (size_t c = 0; c < 3; ++c) width[c] = std::max(width[c], line[c].size());

  std::ostringstream out;
  for (const auto& line : lines) {
    for (size_t c = 0; c < 3; ++c) {
      if (c) out << "  ";
      out << line[c] << std::string(width[c] - line[c].size(), ' ');
    }
    out << '\n';
  }
  return out.str();
}

std::string AblationTable::to_csv() const {
  std::ostringstream out;
  out << "axis,value,seed,accuracy\n";
  char buf[32];
  for (const AblationRow& row : rows)
    for (size_t i = 0; i < row.accuracies.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.10g", row.accuracies[i]);
      out << axis << ',' << row.value << ',' << row.seeds[i] << ',' << buf << '\n';
    }
  return out.str();
}

AblationTable ablate(const std::string& axis, std::vector<std::string> values,
                     const train::RunConfig& base, const std::vector<std::uint64_t>& seeds,
                     const std::string& work_dir) {
  if (values.empty()) values = default_values(axis);
  else default_values(axis);  // axis check
  std::vector<std::uint64_t> seed_list = seeds;
  if (seed_list.empty()) seed_list = {base.seed};

  data::DatasetHandle ds = data::DatasetHandle::open(base.dataset);
  fs::create_directories(work_dir);

  AblationTable table;
  table.axis = axis;
  for (const std::string& value : values) {
    AblationRow row;
    row.value = value;
    for (std::uint64_t seed : seed_list) {
      train::RunConfig cfg = apply_value(axis, value, base);
      cfg.seed = seed;
      train::validate_run_config(cfg);
      std::string run_dir =
          (fs::path(work_dir) / (axis + "-" + value + "-seed" + std::to_string(seed)))
              .string();
      train::PretrainResult res = train::pretrain(cfg, run_dir, false);

      FrozenModel model = FrozenModel::load(res.final_checkpoint);
      FeatureSet train_set = extract_features(model, ds, Subset::kTrain);
      FeatureSet test_set = extract_features(model, ds, Subset::kTest);
      EvalReport probe = linear_probe(train_set.feats, train_set.labels, test_set.feats,
                                      test_set.labels);
      row.seeds.push_back(seed);
      row.accuracies.push_back(probe.accuracy);
    }
    row.mean = std::accumulate(row.accuracies.begin(), row.accuracies.end(), 0.0) /
               static_cast<double>(row.accuracies.size());
    double sq = 0.0;
    for (double a : row.accuracies) sq += (a - row.mean) * (a - row.mean);
    row.stddev = std::sqrt(sq / static_cast<double>(row.accuracies.size()));
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace mmpoint::eval

#pragma once

#include <string>

#include <nlohmann/json_fwd.hpp>

#include "udi/pipeline.hpp"
#include "udi/synthdata.hpp"

namespace udi {

struct DatasetConfig {
  std::string generator = "redundant";  // redundant | complementary | imbalanced | csv
  int n = 3000;
  int classes = 4;
  // redundant
  int d1 = 16;
  int d2 = 16;
  double noise = 1.0;
  // complementary
  int d_shared = 6;
  int d_specific = 8;
  // imbalanced
  double snr1 = 1.0;
  double snr2 = 0.3;
  std::uint64_t seed = 0;  // resolved from the run seed when absent
  bool seed_explicit = false;
  CsvSpec csv;
};

/// Full declarative description of a run. Schema-validated before any
/// compute; unknown keys are rejected; the resolved form is echoed into the
/// output directory.
struct ExperimentConfig {
  DatasetConfig dataset;
  TrainConfig train;
  std::string out_dir = "runs/out";
};

ExperimentConfig parse_config_json(const nlohmann::json& j);
ExperimentConfig load_config_file(const std::string& path);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
void echo_config(const ExperimentConfig& cfg, const std::string& dir);

MultimodalDataset build_dataset(const DatasetConfig& cfg);

std::string strategy_name(StrategyKind s);
StrategyKind strategy_from_name(const std::string& s);
std::string fusion_name(FusionRule f);
FusionRule fusion_from_name(const std::string& s);

}  // namespace udi

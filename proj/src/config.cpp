#include "udi/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

namespace udi {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw ParseError("config: unknown key '" + it.key() + "' in " + where);
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError("config: bad value for '" + key + "': " + e.what());
  }
}

}  // namespace

std::string strategy_name(StrategyKind s) {
  switch (s) {
    case StrategyKind::Udi: return "udi";
    case StrategyKind::JointSum: return "joint_sum";
    case StrategyKind::Decoupled: return "decoupled";
  }
  return "?";
}

StrategyKind strategy_from_name(const std::string& s) {
  if (s == "udi") return StrategyKind::Udi;
  if (s == "joint_sum") return StrategyKind::JointSum;
  if (s == "decoupled") return StrategyKind::Decoupled;
  throw ParseError("config: unknown strategy '" + s + "'");
}

std::string fusion_name(FusionRule f) {
  switch (f) {
    case FusionRule::Sum: return "sum";
    case FusionRule::MeanProbs: return "mean_probs";
    case FusionRule::Concat: return "concat";
  }
  return "?";
}

FusionRule fusion_from_name(const std::string& s) {
  if (s == "sum") return FusionRule::Sum;
  if (s == "mean_probs") return FusionRule::MeanProbs;
  if (s == "concat") return FusionRule::Concat;
  throw ParseError("config: unknown fusion rule '" + s + "'");
}

ExperimentConfig parse_config_json(const json& j) {
  if (!j.is_object()) throw ParseError("config: top level must be an object");
  reject_unknown(j, {"dataset", "model", "epochs", "anchor_select_epochs", "optimizer",
                     "estimator_lr", "estimator_warmup_batches", "strategy", "controller",
                     "anchor", "fusion", "tie_threshold", "patience", "min_delta",
                     "js_normalize", "fusion_head_epochs", "seed", "out_dir"},
                 "top level");
  ExperimentConfig cfg;

  cfg.train.seed = get_or<std::uint64_t>(j, "seed", 1);
  cfg.out_dir = get_or<std::string>(j, "out_dir", "runs/out");

  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    reject_unknown(d, {"generator", "n", "classes", "d1", "d2", "noise", "d_shared",
                       "d_specific", "snr1", "snr2", "seed", "csv"},
                   "dataset");
    DatasetConfig& ds = cfg.dataset;
    ds.generator = get_or<std::string>(d, "generator", "redundant");
    ds.n = get_or<int>(d, "n", ds.n);
    ds.classes = get_or<int>(d, "classes", ds.classes);
    ds.d1 = get_or<int>(d, "d1", ds.d1);
    ds.d2 = get_or<int>(d, "d2", ds.d2);
    ds.noise = get_or<double>(d, "noise", ds.noise);
    ds.d_shared = get_or<int>(d, "d_shared", ds.d_shared);
    ds.d_specific = get_or<int>(d, "d_specific", ds.d_specific);
    ds.snr1 = get_or<double>(d, "snr1", ds.snr1);
    ds.snr2 = get_or<double>(d, "snr2", ds.snr2);
    if (d.contains("seed")) {
      ds.seed = d.at("seed").get<std::uint64_t>();
      ds.seed_explicit = true;
    }
    if (ds.generator == "csv") {
      if (!d.contains("csv")) throw ParseError("config: csv generator needs a 'csv' block");
      const json& c = d.at("csv");
      reject_unknown(c, {"modalities", "labels", "split", "standardize"}, "dataset.csv");
      if (!c.contains("modalities") || !c.at("modalities").is_object())
        throw ParseError("config: dataset.csv.modalities must map names to paths");
      for (auto it = c.at("modalities").begin(); it != c.at("modalities").end(); ++it)
        ds.csv.modalities.emplace_back(it.key(), it.value().get<std::string>());
      ds.csv.labels_path = c.at("labels").get<std::string>();
      if (c.contains("split")) ds.csv.split_path = c.at("split").get<std::string>();
      ds.csv.standardize = get_or<bool>(c, "standardize", true);
    } else if (ds.generator != "redundant" && ds.generator != "complementary" &&
               ds.generator != "imbalanced") {
      throw ParseError("config: unknown generator '" + ds.generator + "'");
    }
  }
  if (!cfg.dataset.seed_explicit) cfg.dataset.seed = cfg.train.seed;
  cfg.dataset.csv.split_seed = cfg.dataset.seed;

  if (j.contains("model")) {
    const json& m = j.at("model");
    reject_unknown(m, {"encoder_hidden", "feature_dim", "estimator_hidden"}, "model");
    cfg.train.encoder_hidden = get_or<std::vector<int>>(m, "encoder_hidden", {64});
    cfg.train.feature_dim = get_or<int>(m, "feature_dim", 32);
    cfg.train.estimator_hidden = get_or<std::vector<int>>(m, "estimator_hidden", {64});
  }

  if (j.contains("epochs")) {
    if (j.at("epochs").is_array())
      cfg.train.epochs_per_modality = j.at("epochs").get<std::vector<int>>();
    else
      cfg.train.epochs = j.at("epochs").get<int>();
    if (cfg.train.epochs_per_modality && !cfg.train.epochs_per_modality->empty())
      cfg.train.epochs = cfg.train.epochs_per_modality->front();
  }
  cfg.train.anchor_select_epochs = get_or<int>(j, "anchor_select_epochs", -1);

  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    reject_unknown(o, {"lr", "momentum", "weight_decay", "batch_size"}, "optimizer");
    cfg.train.optimizer.lr = get_or<double>(o, "lr", cfg.train.optimizer.lr);
    cfg.train.optimizer.momentum = get_or<double>(o, "momentum", cfg.train.optimizer.momentum);
    cfg.train.optimizer.weight_decay =
        get_or<double>(o, "weight_decay", cfg.train.optimizer.weight_decay);
    cfg.train.optimizer.batch_size = get_or<int>(o, "batch_size", cfg.train.optimizer.batch_size);
  }
  cfg.train.estimator_lr = get_or<double>(j, "estimator_lr", -1.0);
  cfg.train.estimator_warmup_batches =
      get_or<int>(j, "estimator_warmup_batches", cfg.train.estimator_warmup_batches);

  cfg.train.strategy = strategy_from_name(get_or<std::string>(j, "strategy", "udi"));

  if (j.contains("controller")) {
    const json& c = j.at("controller");
    reject_unknown(c, {"mode", "alpha_con", "alpha_com", "epsilon", "task_loss"}, "controller");
    const std::string mode = get_or<std::string>(c, "mode", "dynamic");
    if (mode == "dynamic") {
      cfg.train.controller.dynamic = true;
    } else if (mode == "fixed") {
      cfg.train.controller.dynamic = false;
      cfg.train.controller.fixed_alpha_con = get_or<double>(c, "alpha_con", 0.0);
      cfg.train.controller.fixed_alpha_com = get_or<double>(c, "alpha_com", 0.0);
    } else {
      throw ParseError("config: controller.mode must be dynamic or fixed");
    }
    cfg.train.controller.epsilon = get_or<double>(c, "epsilon", 1e-8);
    const std::string task = get_or<std::string>(c, "task_loss", "fused");
    if (task == "fused")
      cfg.train.controller.task_loss = ControllerTaskLoss::Fused;
    else if (task == "unimodal")
      cfg.train.controller.task_loss = ControllerTaskLoss::Unimodal;
    else
      throw ParseError("config: controller.task_loss must be fused or unimodal");
  }

  if (j.contains("anchor")) {
    const json& a = j.at("anchor");
    if (a.is_string() && a.get<std::string>() == "auto")
      cfg.train.anchor_override = -1;
    else if (a.is_number_integer())
      cfg.train.anchor_override = a.get<int>();
    else
      throw ParseError("config: anchor must be \"auto\" or a modality index");
  }

  cfg.train.fusion = fusion_from_name(get_or<std::string>(j, "fusion", "sum"));
  cfg.train.tie_threshold = get_or<double>(j, "tie_threshold", 0.005);
  cfg.train.patience = get_or<int>(j, "patience", 10);
  cfg.train.min_delta = get_or<double>(j, "min_delta", 1e-4);
  cfg.train.js_normalize = get_or<bool>(j, "js_normalize", true);
  cfg.train.fusion_head_epochs = get_or<int>(j, "fusion_head_epochs", 20);

  if (cfg.train.epochs < 0 || cfg.train.patience < 0 || cfg.train.optimizer.batch_size <= 0)
    throw ParseError("config: epochs/patience must be >= 0 and batch_size > 0");
  if (cfg.train.controller.epsilon <= 0.0)
    throw ParseError("config: controller.epsilon must be positive");

  cfg.train.run_id = strategy_name(cfg.train.strategy) + "-s" + std::to_string(cfg.train.seed);
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open config file: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ParseError("config " + path + ": " + e.what());
  }
  return parse_config_json(j);
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  json d;
  d["generator"] = cfg.dataset.generator;
  d["seed"] = cfg.dataset.seed;
  if (cfg.dataset.generator == "csv") {
    json mods = json::object();
    for (const auto& [name, path] : cfg.dataset.csv.modalities) mods[name] = path;
    json c;
    c["modalities"] = mods;
    c["labels"] = cfg.dataset.csv.labels_path;
    if (cfg.dataset.csv.split_path) c["split"] = *cfg.dataset.csv.split_path;
    c["standardize"] = cfg.dataset.csv.standardize;
    d["csv"] = c;
  } else {
    d["n"] = cfg.dataset.n;
    d["classes"] = cfg.dataset.classes;
    if (cfg.dataset.generator == "redundant") {
      d["d1"] = cfg.dataset.d1;
      d["d2"] = cfg.dataset.d2;
      d["noise"] = cfg.dataset.noise;
    } else if (cfg.dataset.generator == "complementary") {
      d["d_shared"] = cfg.dataset.d_shared;
      d["d_specific"] = cfg.dataset.d_specific;
    } else {
      d["snr1"] = cfg.dataset.snr1;
      d["snr2"] = cfg.dataset.snr2;
    }
  }
  j["dataset"] = d;

  j["model"] = {{"encoder_hidden", cfg.train.encoder_hidden},
                {"feature_dim", cfg.train.feature_dim},
                {"estimator_hidden", cfg.train.estimator_hidden}};
  if (cfg.train.epochs_per_modality)
    j["epochs"] = *cfg.train.epochs_per_modality;
  else
    j["epochs"] = cfg.train.epochs;
  j["anchor_select_epochs"] = cfg.train.anchor_select_epochs;
  j["optimizer"] = {{"lr", cfg.train.optimizer.lr},
                    {"momentum", cfg.train.optimizer.momentum},
                    {"weight_decay", cfg.train.optimizer.weight_decay},
                    {"batch_size", cfg.train.optimizer.batch_size}};
  j["estimator_lr"] = cfg.train.estimator_lr;
  j["estimator_warmup_batches"] = cfg.train.estimator_warmup_batches;
  j["strategy"] = strategy_name(cfg.train.strategy);
  json c;
  c["mode"] = cfg.train.controller.dynamic ? "dynamic" : "fixed";
  if (!cfg.train.controller.dynamic) {
    c["alpha_con"] = cfg.train.controller.fixed_alpha_con;
    c["alpha_com"] = cfg.train.controller.fixed_alpha_com;
  }
  c["epsilon"] = cfg.train.controller.epsilon;
  c["task_loss"] =
      cfg.train.controller.task_loss == ControllerTaskLoss::Fused ? "fused" : "unimodal";
  j["controller"] = c;
  if (cfg.train.anchor_override < 0)
    j["anchor"] = "auto";
  else
    j["anchor"] = cfg.train.anchor_override;
  j["fusion"] = fusion_name(cfg.train.fusion);
  j["tie_threshold"] = cfg.train.tie_threshold;
  j["patience"] = cfg.train.patience;
  j["min_delta"] = cfg.train.min_delta;
  j["js_normalize"] = cfg.train.js_normalize;
  j["fusion_head_epochs"] = cfg.train.fusion_head_epochs;
  j["seed"] = cfg.train.seed;
  j["out_dir"] = cfg.out_dir;
  return j;
}

void echo_config(const ExperimentConfig& cfg, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream os(std::filesystem::path(dir) / "config.json");
  if (!os) throw ParseError("cannot write config echo in " + dir);
  os << config_to_json(cfg).dump(2) << "\n";
}

MultimodalDataset build_dataset(const DatasetConfig& cfg) {
  if (cfg.generator == "redundant")
    return gen_redundant(cfg.n, cfg.classes, cfg.d1, cfg.d2, cfg.noise, cfg.seed);
  if (cfg.generator == "complementary")
    return gen_complementary(cfg.n, cfg.classes, cfg.d_shared, cfg.d_specific, cfg.seed);
  if (cfg.generator == "imbalanced")
    return gen_imbalanced(cfg.n, cfg.classes, cfg.snr1, cfg.snr2, cfg.seed);
  if (cfg.generator == "csv") return load_csv(cfg.csv);
  throw ParseError("unknown generator '" + cfg.generator + "'");
}

}  // namespace udi

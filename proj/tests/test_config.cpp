#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "udi/config.hpp"

using namespace udi;
using nlohmann::json;

TEST_CASE("config defaults resolve and echo round trips") {
  json j = {{"seed", 9}, {"strategy", "udi"}, {"out_dir", "runs/x"}};
  ExperimentConfig cfg = parse_config_json(j);
  CHECK(cfg.train.seed == 9);
  CHECK(cfg.dataset.seed == 9);  // follows the run seed unless pinned
  CHECK(cfg.train.optimizer.momentum == 0.9);
  CHECK(cfg.train.optimizer.weight_decay == 1e-4);
  CHECK(cfg.train.optimizer.batch_size == 64);
  CHECK(cfg.train.controller.dynamic);
  CHECK(cfg.train.controller.epsilon == 1e-8);
  CHECK(cfg.train.tie_threshold == 0.005);
  CHECK(cfg.train.run_id == "udi-s9");

  // The resolved echo parses back to the same resolved config.
  json echoed = config_to_json(cfg);
  ExperimentConfig cfg2 = parse_config_json(echoed);
  CHECK(config_to_json(cfg2) == echoed);
}

TEST_CASE("unknown keys are rejected at every level") {
  CHECK_THROWS_AS(parse_config_json(json{{"seeed", 1}}), ParseError);
  CHECK_THROWS_AS(parse_config_json(json{{"dataset", {{"generatr", "redundant"}}}}), ParseError);
  CHECK_THROWS_AS(parse_config_json(json{{"optimizer", {{"lr", 0.1}, {"nesterov", true}}}}),
                  ParseError);
  CHECK_THROWS_AS(parse_config_json(json{{"controller", {{"mode", "dynamic"}, {"beta", 2}}}}),
                  ParseError);
}

TEST_CASE("invalid enum values are rejected") {
  CHECK_THROWS_AS(parse_config_json(json{{"strategy", "both"}}), ParseError);
  CHECK_THROWS_AS(parse_config_json(json{{"fusion", "max"}}), ParseError);
  CHECK_THROWS_AS(parse_config_json(json{{"controller", {{"mode", "sometimes"}}}}), ParseError);
  CHECK_THROWS_AS(parse_config_json(json{{"dataset", {{"generator", "mystery"}}}}), ParseError);
  CHECK_THROWS_AS(parse_config_json(json{{"anchor", 1.5}}), ParseError);
}

TEST_CASE("fixed controller weights parse") {
  json j = {{"controller", {{"mode", "fixed"}, {"alpha_con", 0.0}, {"alpha_com", 1.0}}}};
  ExperimentConfig cfg = parse_config_json(j);
  CHECK_FALSE(cfg.train.controller.dynamic);
  CHECK(cfg.train.controller.fixed_alpha_con == 0.0);
  CHECK(cfg.train.controller.fixed_alpha_com == 1.0);
}

TEST_CASE("per-modality epochs parse as an array") {
  json j = {{"epochs", {30, 20}}};
  ExperimentConfig cfg = parse_config_json(j);
  REQUIRE(cfg.train.epochs_per_modality.has_value());
  CHECK((*cfg.train.epochs_per_modality)[0] == 30);
  CHECK((*cfg.train.epochs_per_modality)[1] == 20);
}

TEST_CASE("explicit dataset seed survives run-seed changes") {
  json j = {{"seed", 4}, {"dataset", {{"generator", "redundant"}, {"seed", 99}}}};
  ExperimentConfig cfg = parse_config_json(j);
  CHECK(cfg.dataset.seed == 99);
  CHECK(cfg.train.seed == 4);
}

TEST_CASE("build_dataset dispatches every generator") {
  DatasetConfig d;
  d.n = 200;
  d.classes = 4;
  d.seed = 3;
  d.generator = "redundant";
  CHECK(build_dataset(d).modality_count() == 2);
  d.generator = "complementary";
  CHECK(build_dataset(d).modality_count() == 2);
  d.generator = "imbalanced";
  CHECK(build_dataset(d).rows() == 200);
}

TEST_CASE("config echo to disk parses back") {
  namespace fs = std::filesystem;
  const std::string dir = "test_echo";
  fs::remove_all(dir);
  ExperimentConfig cfg = parse_config_json(json{{"seed", 17}});
  echo_config(cfg, dir);
  ExperimentConfig back = load_config_file(dir + "/config.json");
  CHECK(back.train.seed == 17);
  CHECK(config_to_json(back) == config_to_json(cfg));
  fs::remove_all(dir);
}

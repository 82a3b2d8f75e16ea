// End-to-end checks of the command-line surface: exit codes, file outputs,
// rerun determinism. Drives the real binary.

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(UDI_CLI_PATH) + " " + args + " 2>cli_stderr.log";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_tiny_config(const fs::path& path, const std::string& strategy,
                       const std::string& extra = "") {
  std::ofstream os(path);
  os << R"({
  "dataset": {"generator": "redundant", "n": 240, "classes": 4, "d1": 5, "d2": 5, "noise": 0.8},
  "model": {"encoder_hidden": [12], "feature_dim": 6, "estimator_hidden": [12]},
  "epochs": 3,
  "optimizer": {"lr": 0.05, "batch_size": 32},
  "strategy": ")"
     << strategy << R"(",
  "seed": 3)" << extra
     << "\n}\n";
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(run_cli("definitely-not-a-subcommand") == 2);
  CHECK(run_cli("train") == 2);                            // missing --config
  CHECK(run_cli("eval --ckpt does_not_exist_dir") == 2);   // missing checkpoint
}

TEST_CASE("bad config files exit with code 2") {
  TempDir dir("cli_badcfg");
  {
    std::ofstream os(dir.path / "bad.json");
    os << "{\"strategy\": \"nonsense\"}\n";
  }
  CHECK(run_cli("train --config " + (dir.path / "bad.json").string()) == 2);
  {
    std::ofstream os(dir.path / "unparseable.json");
    os << "{not json";
  }
  CHECK(run_cli("train --config " + (dir.path / "unparseable.json").string()) == 2);
}

TEST_CASE("gen-data writes CSVs, is seed-stable and respects --force") {
  TempDir dir("cli_gendata");
  write_tiny_config(dir.path / "cfg.json", "udi");
  const std::string out1 = (dir.path / "d1").string();
  const std::string out2 = (dir.path / "d2").string();

  CHECK(run_cli("gen-data --config " + (dir.path / "cfg.json").string() + " --out " + out1) == 0);
  CHECK(fs::exists(fs::path(out1) / "m1.csv"));
  CHECK(fs::exists(fs::path(out1) / "m2.csv"));
  CHECK(fs::exists(fs::path(out1) / "labels.csv"));
  CHECK(fs::exists(fs::path(out1) / "split.csv"));

  CHECK(run_cli("gen-data --config " + (dir.path / "cfg.json").string() + " --out " + out2) == 0);
  CHECK(slurp(fs::path(out1) / "m1.csv") == slurp(fs::path(out2) / "m1.csv"));

  // refuses to overwrite, then --force succeeds
  CHECK(run_cli("gen-data --config " + (dir.path / "cfg.json").string() + " --out " + out1) == 1);
  CHECK(run_cli("gen-data --config " + (dir.path / "cfg.json").string() + " --out " + out1 +
                " --force") == 0);
}

TEST_CASE("train writes metrics, checkpoints and a config echo; rerun is byte-identical") {
  TempDir dir("cli_train");
  write_tiny_config(dir.path / "cfg.json", "udi");
  const std::string out1 = (dir.path / "r1").string();
  const std::string out2 = (dir.path / "r2").string();

  CHECK(run_cli("train --config " + (dir.path / "cfg.json").string() + " --out " + out1) == 0);
  CHECK(fs::exists(fs::path(out1) / "metrics.csv"));
  CHECK(fs::exists(fs::path(out1) / "config.json"));
  CHECK(fs::exists(fs::path(out1) / "checkpoints" / "m1.ps"));
  CHECK(fs::exists(fs::path(out1) / "checkpoints" / "m2.ps"));
  CHECK(fs::exists(fs::path(out1) / "timing.txt"));

  CHECK(run_cli("train --config " + (dir.path / "cfg.json").string() + " --out " + out2) == 0);
  CHECK(slurp(fs::path(out1) / "metrics.csv") == slurp(fs::path(out2) / "metrics.csv"));
  CHECK(slurp(fs::path(out1) / "checkpoints" / "m2.ps") ==
        slurp(fs::path(out2) / "checkpoints" / "m2.ps"));

  // rerunning FROM THE ECHO reproduces the metrics too
  const std::string out3 = (dir.path / "r3").string();
  CHECK(run_cli("train --config " + (fs::path(out1) / "config.json").string() + " --out " + out3)
        == 0);
  CHECK(slurp(fs::path(out1) / "metrics.csv") == slurp(fs::path(out3) / "metrics.csv"));

  // overwrite protection
  CHECK(run_cli("train --config " + (dir.path / "cfg.json").string() + " --out " + out1) == 1);
}

TEST_CASE("eval after train matches the final test row of metrics.csv") {
  TempDir dir("cli_eval");
  write_tiny_config(dir.path / "cfg.json", "udi");
  const std::string out = (dir.path / "run").string();
  REQUIRE(run_cli("train --config " + (dir.path / "cfg.json").string() + " --out " + out) == 0);

  const std::string eval_before = slurp(fs::path(out) / "eval.csv");
  CHECK(run_cli("eval --ckpt " + out) == 0);
  CHECK(slurp(fs::path(out) / "eval.csv") == eval_before);

  // the metrics final row carries the same accuracy cells
  std::istringstream metrics(slurp(fs::path(out) / "metrics.csv"));
  std::string header, line, final_line;
  std::getline(metrics, header);
  while (std::getline(metrics, line))
    if (line.find(",final,") != std::string::npos) final_line = line;
  REQUIRE_FALSE(final_line.empty());

  std::istringstream eval_csv(eval_before);
  std::string eval_header, eval_row, cell;
  std::getline(eval_csv, eval_header);
  std::getline(eval_csv, eval_row);
  std::istringstream row_stream(eval_row);
  std::vector<std::string> eval_cells;
  while (std::getline(row_stream, cell, ',')) eval_cells.push_back(cell);
  REQUIRE(eval_cells.size() == 5);  // split, acc_m1, acc_m2, acc_fused, macro_f1
  for (std::size_t i = 1; i < eval_cells.size(); ++i)
    CHECK(final_line.find(eval_cells[i]) != std::string::npos);
}

TEST_CASE("fusion override changes only fused columns") {
  TempDir dir("cli_fusion");
  write_tiny_config(dir.path / "cfg.json", "udi");
  const std::string out = (dir.path / "run").string();
  REQUIRE(run_cli("train --config " + (dir.path / "cfg.json").string() + " --out " + out) == 0);

  CHECK(run_cli("eval --ckpt " + out + " --fusion sum") == 0);
  const std::string sum_eval = slurp(fs::path(out) / "eval.csv");
  CHECK(run_cli("eval --ckpt " + out + " --fusion mean_probs") == 0);
  const std::string mean_eval = slurp(fs::path(out) / "eval.csv");

  auto cells = [](const std::string& csv) {
    std::vector<std::string> out_cells;
    std::istringstream is(csv);
    std::string header, row, cell;
    std::getline(is, header);
    std::getline(is, row);
    std::istringstream rs(row);
    while (std::getline(rs, cell, ',')) out_cells.push_back(cell);
    return out_cells;
  };
  const auto a = cells(sum_eval), b = cells(mean_eval);
  REQUIRE(a.size() == b.size());
  REQUIRE(a.size() == 5);  // split, m1, m2, fused, f1
  CHECK(a[1] == b[1]);     // unimodal columns unchanged
  CHECK(a[2] == b[2]);
}

TEST_CASE("fig1 emits a 3x3 table and well-formed SVG") {
  TempDir dir("cli_fig1");
  write_tiny_config(dir.path / "cfg.json", "udi");
  const std::string out = (dir.path / "fig").string();
  REQUIRE(run_cli("fig1 --config " + (dir.path / "cfg.json").string() + " --out " + out) == 0);

  const std::string csv = slurp(fs::path(out) / "fig1.csv");
  std::istringstream is(csv);
  std::string header, line;
  std::getline(is, header);
  int rows = 0, numeric_cells = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    ++rows;
    std::istringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');  // scheme name
    while (std::getline(ls, cell, ',')) {
      CHECK_NOTHROW((void)std::stod(cell));
      ++numeric_cells;
    }
  }
  CHECK(rows == 3);
  CHECK(numeric_cells == 9);

  // minimal XML well-formedness: every opened tag closes, quotes balance
  const std::string svg = slurp(fs::path(out) / "fig1.svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  int depth = 0;
  bool ok = true;
  for (std::size_t i = 0; i < svg.size(); ++i) {
    if (svg[i] != '<') continue;
    const std::size_t end = svg.find('>', i);
    if (end == std::string::npos) {
      ok = false;
      break;
    }
    const std::string tag = svg.substr(i, end - i + 1);
    if (tag.rfind("<?", 0) == 0) continue;
    if (tag.rfind("</", 0) == 0)
      --depth;
    else if (tag[tag.size() - 2] != '/')
      ++depth;
    if (depth < 0) ok = false;
  }
  CHECK(ok);
  CHECK(depth == 0);
}

TEST_CASE("sweep runs every seed into its own directory") {
  TempDir dir("cli_sweep");
  write_tiny_config(dir.path / "cfg.json", "decoupled");
  const std::string out = (dir.path / "sw").string();
  REQUIRE(run_cli("sweep --config " + (dir.path / "cfg.json").string() + " --out " + out +
                  " --seeds 1,2") == 0);
  CHECK(fs::exists(fs::path(out) / "seed_1" / "metrics.csv"));
  CHECK(fs::exists(fs::path(out) / "seed_2" / "metrics.csv"));
  CHECK(fs::exists(fs::path(out) / "sweep.csv"));
  // different seeds produce different metrics
  CHECK(slurp(fs::path(out) / "seed_1" / "metrics.csv") !=
        slurp(fs::path(out) / "seed_2" / "metrics.csv"));
}

TEST_CASE("verify passes on a fresh build") {
  CHECK(run_cli("verify >verify_out.txt") == 0);
  const std::string report = slurp("verify_out.txt");
  CHECK(report.find("[PASS]") != std::string::npos);
  CHECK(report.find("[FAIL]") == std::string::npos);
  CHECK(report.find("grad_check") != std::string::npos);
  fs::remove("verify_out.txt");
  fs::remove("cli_stderr.log");
}

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "udi/checkpoint.hpp"
#include "udi/config.hpp"
#include "udi/gradcheck.hpp"
#include "udi/mi_oracle.hpp"
#include "udi/pipeline.hpp"
#include "udi/rng.hpp"
#include "udi/svg.hpp"

namespace fs = std::filesystem;
using namespace udi;

namespace {

enum class LogLevel { Info, Debug };

LogLevel log_level() {
  const char* env = std::getenv("UDI_LOG");
  if (env && std::string(env) == "debug") return LogLevel::Debug;
  return LogLevel::Info;
}

void log_info(const std::string& msg) { std::cerr << "[udi] " << msg << "\n"; }

void log_debug(const std::string& msg) {
  if (log_level() == LogLevel::Debug) std::cerr << "[udi:debug] " << msg << "\n";
}

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  long long seed = -1;
  bool force = false;
};

ExperimentConfig load_and_resolve(const CommonOpts& opts) {
  ExperimentConfig cfg = load_config_file(opts.config_path);
  if (opts.seed >= 0) {
    cfg.train.seed = static_cast<std::uint64_t>(opts.seed);
    if (!cfg.dataset.seed_explicit) cfg.dataset.seed = cfg.train.seed;
    cfg.dataset.csv.split_seed = cfg.dataset.seed;
    cfg.train.run_id = strategy_name(cfg.train.strategy) + "-s" + std::to_string(cfg.train.seed);
  }
  if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
  return cfg;
}

std::vector<std::string> modality_names(const MultimodalDataset& data) {
  std::vector<std::string> names;
  for (int m = 0; m < data.modality_count(); ++m) names.push_back(data.modality(m).name);
  return names;
}

void write_checkpoints(const TrainedEnsemble& ens, const std::string& dir) {
  fs::create_directories(dir);
  for (const auto& b : ens.branches)
    save_checkpoint(b.params, (fs::path(dir) / (b.name + ".ps")).string());
  for (const auto& est : ens.estimators)
    save_checkpoint(est->params, (fs::path(dir) / ("mi." + est->pair + ".ps")).string());
  if (ens.concat_head)
    save_checkpoint(ens.concat_params, (fs::path(dir) / "fusion.concat.ps").string());
}

void print_eval(const MultimodalDataset& data, const EvalResult& res) {
  for (int m = 0; m < data.modality_count(); ++m)
    std::cout << "acc_" << data.modality(m).name << " " << MetricsWriter::format_cell(res.modality_acc[m])
              << "\n";
  std::cout << "acc_fused " << MetricsWriter::format_cell(res.fused_acc) << "\n";
  std::cout << "macro_f1 " << MetricsWriter::format_cell(res.macro_f1) << "\n";
}

void write_eval_csv(const std::string& path, const MultimodalDataset& data, const EvalResult& res) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw ParseError("cannot write " + path);
  os << "split";
  for (int m = 0; m < data.modality_count(); ++m) os << ",acc_" << data.modality(m).name;
  os << ",acc_fused,macro_f1\n";
  os << "test";
  for (double v : res.modality_acc) os << ',' << MetricsWriter::format_cell(v);
  os << ',' << MetricsWriter::format_cell(res.fused_acc) << ','
     << MetricsWriter::format_cell(res.macro_f1) << "\n";
}

int cmd_gen_data(const CommonOpts& opts) {
  ExperimentConfig cfg = load_and_resolve(opts);
  MultimodalDataset data = build_dataset(cfg.dataset);
  const std::string dir = cfg.out_dir;
  save_dataset_csv(data, dir, opts.force);
  log_info("wrote dataset (" + std::to_string(data.rows()) + " rows, " +
           std::to_string(data.modality_count()) + " modalities) to " + dir);
  return 0;
}

int run_train(const ExperimentConfig& cfg, bool force, RunReport* out_report = nullptr,
              MultimodalDataset* out_data = nullptr) {
  const fs::path out(cfg.out_dir);
  if (fs::exists(out / "metrics.csv") && !force)
    throw ContractError("refusing to overwrite " + (out / "metrics.csv").string() +
                        " without --force");
  fs::create_directories(out);
  echo_config(cfg, cfg.out_dir);

  MultimodalDataset data = build_dataset(cfg.dataset);
  log_info("run " + cfg.train.run_id + ": " + std::to_string(data.rows()) + " rows, " +
           std::to_string(data.modality_count()) + " modalities, strategy " +
           strategy_name(cfg.train.strategy));

  MetricsWriter metrics((out / "metrics.csv").string(), modality_names(data));
  TrainedEnsemble ens;
  const auto t0 = std::chrono::steady_clock::now();
  RunReport rep = run_strategy(data, cfg.train, &metrics, &ens);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  metrics.flush();
  write_checkpoints(ens, (out / "checkpoints").string());
  {
    // Timing stays out of metrics.csv so identical runs stay byte-identical.
    std::ofstream timing(out / "timing.txt");
    timing << "wall_seconds " << secs << "\n";
  }
  for (const auto& s : rep.stages)
    log_debug("stage " + s.stage + ": " + std::to_string(s.epochs_run) + " epochs, best val " +
              std::to_string(s.best_val_acc));
  print_eval(data, rep.test);
  write_eval_csv((out / "eval.csv").string(), data, rep.test);
  log_info("finished in " + std::to_string(secs) + "s; outputs in " + cfg.out_dir);
  if (out_report) *out_report = rep;
  if (out_data) *out_data = std::move(data);
  return 0;
}

int cmd_train(const CommonOpts& opts) {
  ExperimentConfig cfg = load_and_resolve(opts);
  return run_train(cfg, opts.force);
}

int cmd_eval(const std::string& ckpt_dir, const std::string& fusion_override) {
  const fs::path dir(ckpt_dir);
  if (!fs::exists(dir / "config.json"))
    throw ParseError("no config.json under " + ckpt_dir);
  ExperimentConfig cfg = load_config_file((dir / "config.json").string());
  if (!fusion_override.empty()) cfg.train.fusion = fusion_from_name(fusion_override);

  MultimodalDataset data = build_dataset(cfg.dataset);
  TrainRun shell(data, cfg.train, nullptr);
  TrainedEnsemble& ens = shell.ensemble();
  ens.fusion = cfg.train.fusion;
  if (cfg.train.strategy == StrategyKind::Decoupled) ens.fusion = FusionRule::MeanProbs;
  for (auto& b : ens.branches) {
    const fs::path ckpt = dir / "checkpoints" / (b.name + ".ps");
    if (!fs::exists(ckpt)) throw ParseError("missing checkpoint: " + ckpt.string());
    ParamSet loaded = load_checkpoint(ckpt.string());
    b.params.restore(loaded);
    b.trained = true;
  }
  if (ens.fusion == FusionRule::Concat) {
    const fs::path ckpt = dir / "checkpoints" / "fusion.concat.ps";
    if (!fs::exists(ckpt)) throw ParseError("missing checkpoint: " + ckpt.string());
    ens.concat_head = DecisionHead("fusion.concat",
                                   cfg.train.feature_dim * data.modality_count(), data.classes);
    ens.concat_head->register_params(ens.concat_params, cfg.train.seed);
    ens.concat_params.restore(load_checkpoint(ckpt.string()));
  }

  EvalResult res = evaluate(ens, data, Split::Test);
  print_eval(data, res);
  write_eval_csv((dir / "eval.csv").string(), data, res);
  return 0;
}

int cmd_fig1(const CommonOpts& opts) {
  ExperimentConfig cfg = load_and_resolve(opts);
  MultimodalDataset data = build_dataset(cfg.dataset);
  fs::create_directories(cfg.out_dir);

  const std::vector<StrategyKind> schemes{StrategyKind::Decoupled, StrategyKind::JointSum,
                                          StrategyKind::Udi};
  std::vector<std::vector<double>> cells;
  std::vector<std::string> scheme_names;
  for (StrategyKind s : schemes) {
    TrainConfig tc = cfg.train;
    tc.strategy = s;
    tc.run_id = strategy_name(s) + "-s" + std::to_string(tc.seed);
    log_info("fig1: running " + strategy_name(s));
    TrainedEnsemble ens;
    RunReport rep = run_strategy(data, tc, nullptr, &ens);
    std::vector<double> row = rep.test.modality_acc;
    row.push_back(rep.test.fused_acc);
    cells.push_back(row);
    scheme_names.push_back(strategy_name(s));
  }

  const fs::path csv_path = fs::path(cfg.out_dir) / "fig1.csv";
  std::ofstream os(csv_path);
  os << "scheme";
  for (int m = 0; m < data.modality_count(); ++m) os << ",acc_" << data.modality(m).name;
  os << ",acc_fused\n";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    os << scheme_names[i];
    for (double v : cells[i]) os << ',' << MetricsWriter::format_cell(v);
    os << "\n";
  }
  os.close();

  std::vector<std::string> series = modality_names(data);
  series.push_back("fused");
  write_grouped_bar_svg((fs::path(cfg.out_dir) / "fig1.svg").string(),
                        "Accuracy by training scheme", scheme_names, series, cells);
  std::cout << "wrote " << csv_path.string() << " and fig1.svg\n";
  return 0;
}

int cmd_sweep(const CommonOpts& opts, const std::string& seeds_arg, int jobs) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(seeds_arg);
  std::string tok;
  while (std::getline(ss, tok, ',')) seeds.push_back(std::stoull(tok));
  if (seeds.empty()) throw ParseError("sweep: no seeds given");

  ExperimentConfig base = load_and_resolve(opts);
  fs::create_directories(base.out_dir);

  auto child_args = [&](std::uint64_t seed) {
    std::vector<std::string> args{"train", "--config", opts.config_path, "--seed",
                                  std::to_string(seed), "--out",
                                  (fs::path(base.out_dir) / ("seed_" + std::to_string(seed))).string()};
    if (opts.force) args.push_back("--force");
    return args;
  };

  if (jobs > 1) {
    // Fan out as independent processes of this same binary.
    std::vector<pid_t> running;
    std::size_t next = 0;
    int failures = 0;
    while (next < seeds.size() || !running.empty()) {
      while (next < seeds.size() && static_cast<int>(running.size()) < jobs) {
        const auto args = child_args(seeds[next]);
        pid_t pid = fork();
        if (pid == 0) {
          std::vector<char*> argv;
          std::string self = "/proc/self/exe";
          argv.push_back(self.data());
          for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
          argv.push_back(nullptr);
          execv("/proc/self/exe", argv.data());
          _exit(127);
        }
        running.push_back(pid);
        ++next;
      }
      int status = 0;
      pid_t done = waitpid(-1, &status, 0);
      std::erase(running, done);
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) ++failures;
    }
    if (failures > 0) throw ContractError(std::to_string(failures) + " sweep runs failed");
  } else {
    for (std::uint64_t seed : seeds) {
      CommonOpts run_opts = opts;
      run_opts.seed = static_cast<long long>(seed);
      run_opts.out_dir = (fs::path(base.out_dir) / ("seed_" + std::to_string(seed))).string();
      ExperimentConfig cfg = load_and_resolve(run_opts);
      run_train(cfg, opts.force);
    }
  }

  // Collect the per-seed eval rows into one summary.
  std::ofstream summary(fs::path(base.out_dir) / "sweep.csv");
  summary << "seed,row\n";
  for (std::uint64_t seed : seeds) {
    std::ifstream is(fs::path(base.out_dir) / ("seed_" + std::to_string(seed)) / "eval.csv");
    std::string header, row;
    std::getline(is, header);
    std::getline(is, row);
    summary << seed << "," << row << "\n";
  }
  std::cout << "sweep finished over " << seeds.size() << " seeds\n";
  return 0;
}

struct VerifyCheck {
  std::string name;
  double measured;
  double tolerance;
  bool leq;  // pass when measured <= tolerance (else >=)
  bool pass() const { return leq ? measured <= tolerance : measured >= tolerance; }
};

int cmd_verify();

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unidirectional dynamic interaction training laboratory"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string ckpt_dir, fusion_override, seeds_arg = "1,2,3,4,5";
  int jobs = 1;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    sub->add_option("--config", opts.config_path, "experiment config (JSON)")
        ->required(config_required);
    sub->add_option("--seed", opts.seed, "override the run seed");
    sub->add_option("--out", opts.out_dir, "override the output directory");
    sub->add_flag("--force", opts.force, "overwrite existing outputs");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate a dataset as CSV files");
  add_common(gen, true);
  CLI::App* train = app.add_subcommand("train", "run one training strategy");
  add_common(train, true);
  CLI::App* eval = app.add_subcommand("eval", "evaluate checkpoints on the test split");
  eval->add_option("--ckpt", ckpt_dir, "run directory with config.json and checkpoints/")
      ->required();
  eval->add_option("--fusion", fusion_override, "override the fusion rule (sum|mean_probs|concat)");
  CLI::App* verify = app.add_subcommand("verify", "run the bundled numeric oracles");
  CLI::App* fig1 = app.add_subcommand("fig1", "compare the three training schemes on one dataset");
  add_common(fig1, true);
  CLI::App* sweep = app.add_subcommand("sweep", "run the config across several seeds");
  add_common(sweep, true);
  sweep->add_option("--seeds", seeds_arg, "comma-separated seed list");
  sweep->add_option("--jobs", jobs, "parallel worker processes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(opts);
    if (train->parsed()) return cmd_train(opts);
    if (eval->parsed()) return cmd_eval(ckpt_dir, fusion_override);
    if (verify->parsed()) return cmd_verify();
    if (fig1->parsed()) return cmd_fig1(opts);
    if (sweep->parsed()) return cmd_sweep(opts, seeds_arg, jobs);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

namespace {

int cmd_verify() {
  std::vector<VerifyCheck> checks;
  const auto t0 = std::chrono::steady_clock::now();

  // Gradient checks over every loss path on a small randomized model.
  {
    ParamSet ps;
    MlpEncoder enc("enc.v", {4, 8, 5});
    DecisionHead head("head.v", 5, 3);
    enc.register_params(ps, 1001);
    head.register_params(ps, 1001);
    Rng rng(1002);
    std::vector<double> xv(6 * 4);
    for (double& v : xv) v = rng.normal();
    Tensor x = Tensor::from_data({6, 4}, std::move(xv));
    std::vector<double> yv(6 * 3, 0.0);
    for (int i = 0; i < 6; ++i) yv[i * 3 + static_cast<int>(rng.below(3))] = 1.0;
    Tensor y = Tensor::from_data({6, 3}, std::move(yv));
    std::vector<double> av(6 * 3);
    for (double& v : av) v = rng.normal();
    Tensor anchor_logits = Tensor::from_data({6, 3}, std::move(av));
    Tensor anchor_probs = softmax_rows(anchor_logits).detach();

    checks.push_back({"grad_check cross_entropy",
                      grad_check([&] { return cross_entropy(head.forward(ps, enc.forward(ps, x)).probs, y); }, ps),
                      1e-4, true});
    checks.push_back({"grad_check js_consistency",
                      grad_check([&] {
                        return js_consistency(anchor_probs,
                                              head.forward(ps, enc.forward(ps, x)).probs);
                      }, ps),
                      1e-4, true});
    ParamSet q_ps;
    GaussianConditional q("mi.v", 5, {8}, 5);
    q.register_params(q_ps, 1003);
    std::vector<double> fav(6 * 5);
    for (double& v : fav) v = rng.normal();
    Tensor f_a = Tensor::from_data({6, 5}, std::move(fav));
    checks.push_back({"grad_check mi_nll",
                      grad_check([&] { return mi_nll(q, q_ps, f_a, enc.forward(ps, x).detach()); }, q_ps),
                      1e-4, true});
    checks.push_back({"grad_check mi_upper_bound",
                      grad_check([&] { return mi_upper_bound(q, q_ps, f_a, enc.forward(ps, x)); }, ps),
                      1e-4, true});
    checks.push_back({"grad_check fused loss",
                      grad_check([&] {
                        auto out = head.forward(ps, enc.forward(ps, x));
                        return cross_entropy(softmax_rows(add(anchor_logits, out.logits)), y);
                      }, ps),
                      1e-4, true});
  }

  // Discrete bound check on random joints.
  {
    Rng rng(1005);
    double worst_gap = 0.0;    // how far below MI the bound ever falls
    double worst_eq = 0.0;     // bound-MI gap on factorizable tables
    for (int trial = 0; trial < 100; ++trial) {
      DiscreteJoint j;
      j.nx = 2 + static_cast<int>(rng.below(5));
      j.ny = 2 + static_cast<int>(rng.below(5));
      j.p.resize(static_cast<std::size_t>(j.nx) * j.ny);
      double s = 0.0;
      for (double& v : j.p) s += (v = rng.uniform(0.01, 1.0));
      for (double& v : j.p) v /= s;
      double again = 0.0;
      for (double v : j.p) again += v;
      j.p.back() += 1.0 - again;
      worst_gap = std::max(worst_gap, discrete_mi(j) - discrete_mi_upper_bound(j));
    }
    for (int trial = 0; trial < 100; ++trial) {
      const int nx = 2 + static_cast<int>(rng.below(4));
      const int ny = 2 + static_cast<int>(rng.below(4));
      std::vector<double> px(nx), py(ny);
      double sx = 0.0, sy = 0.0;
      for (double& v : px) sx += (v = rng.uniform(0.05, 1.0));
      for (double& v : py) sy += (v = rng.uniform(0.05, 1.0));
      for (double& v : px) v /= sx;
      for (double& v : py) v /= sy;
      DiscreteJoint j;
      j.nx = nx;
      j.ny = ny;
      for (double a : px)
        for (double b : py) j.p.push_back(a * b);
      double s = 0.0;
      for (double v : j.p) s += v;
      j.p.back() += 1.0 - s;
      worst_eq = std::max(worst_eq, std::fabs(discrete_mi_upper_bound(j) - discrete_mi(j)));
    }
    checks.push_back({"discrete bound >= MI (worst violation)", worst_gap, 1e-10, true});
    checks.push_back({"discrete bound equality on factorizable", worst_eq, 1e-10, true});
  }

  // Sampled bound vs analytic Gaussian MI with the true conditional.
  {
    double worst_margin = 1e9;
    for (double rho : {0.3, 0.6, 0.9}) {
      const double s2 = 1.0 - rho * rho;
      Rng rng(1007 + static_cast<std::uint64_t>(rho * 100));
      const int n = 8000;
      std::vector<double> x(n), y(n);
      for (int i = 0; i < n; ++i) {
        x[i] = rng.normal();
        y[i] = rho * x[i] + std::sqrt(s2) * rng.normal();
      }
      double diag = 0.0, cross = 0.0;
      for (int i = 0; i < n; ++i) {
        const double d = y[i] - rho * x[i];
        diag += -d * d / (2 * s2);
      }
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const double d = y[j] - rho * x[i];
          cross += -d * d / (2 * s2);
        }
      const double bound = diag / n - cross / (static_cast<double>(n) * n);
      worst_margin = std::min(worst_margin, bound - gaussian_mi(rho));
    }
    checks.push_back({"sampled bound - analytic MI (worst margin)", worst_margin, -0.02, false});
  }

  // Controller fixtures.
  {
    auto [a1, b1] = compute_alphas(2.0, 2.0, 1e-8);
    checks.push_back({"alphas symmetric case |a-0.5|", std::fabs(a1 - 0.5) + std::fabs(b1 - 0.5),
                      1e-8, true});
    auto [a2, b2] = compute_alphas(3.0, -1.0, 1e-8);
    checks.push_back({"alphas one-negative case", std::fabs(a2 - 1.0) + std::fabs(b2), 1e-8, true});
    auto [a3, b3] = compute_alphas(-5.0, -2.0, 1e-8);
    checks.push_back({"alphas both-negative case", std::fabs(a3) + std::fabs(b3), 0.0, true});

    ParamSet ps;
    ps.add("u", Tensor::param({2}, {1.5, -0.5}));
    ps.add("v", Tensor::param({2}, {0.8, 0.3}));
    DynamicController ctrl(1e-8);
    DynamicController::LossBuilders builders{
        [&] { return scale(sum_all(mul(ps.at("u"), ps.at("u"))), 0.5); },
        [&] { return scale(sum_all(mul(ps.at("u"), ps.at("u"))), 1.5); },
        [&] { return scale(sum_all(mul(ps.at("v"), ps.at("v"))), 0.5); }};
    ctrl.maybe_update(1, builders, ps);
    checks.push_back({"constructed geometry alpha_con", ctrl.state().alpha_con, 0.99, false});
    ctrl.maybe_update(1, builders, ps);
    checks.push_back({"controller updates within one epoch", static_cast<double>(ctrl.update_count()),
                      1.0, true});
  }

  // Softmax invariants on random rows.
  {
    Rng rng(1011);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> z(6);
      for (double& v : z) v = rng.normal() * 5;
      Tensor p = softmax_rows(Tensor::from_data({1, 6}, std::move(z)));
      double s = 0.0;
      for (int j = 0; j < 6; ++j) s += p.at(0, j);
      worst = std::max(worst, std::fabs(s - 1.0));
    }
    checks.push_back({"softmax row sums", worst, 1e-12, true});
  }

  // Mutation sanity: the checker must flag an op whose backward rule flips a
  // sign.
  {
    ParamSet ps;
    ps.add("theta", Tensor::param({3}, {0.7, -1.2, 0.4}));
    auto bad_square_sum = [&]() {
      Tensor t = ps.at("theta");
      double s = 0.0;
      for (double v : t.data()) s += v * v;
      return Tensor::make_node({}, {s}, {t}, [](TensorNode& self) {
        TensorNode* p = self.parents[0].node();
        for (std::size_t i = 0; i < p->data.size(); ++i) {
          const double sign = i == 1 ? -1.0 : 1.0;
          p->grad[i] += sign * self.grad[0] * 2.0 * p->data[i];
        }
      });
    };
    checks.push_back({"mutation sanity: sign flip detected", grad_check(bad_square_sum, ps),
                      0.1, false});
  }

  bool all_pass = true;
  for (const auto& c : checks) {
    const bool ok = c.pass();
    all_pass = all_pass && ok;
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << c.name << ": measured "
              << MetricsWriter::format_cell(c.measured) << (c.leq ? " <= " : " >= ")
              << MetricsWriter::format_cell(c.tolerance) << "\n";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << (all_pass ? "verify: all checks passed" : "verify: FAILURES above") << " ("
            << checks.size() << " checks, " << secs << "s)\n";
  return all_pass ? 0 : 1;
}

}  // namespace

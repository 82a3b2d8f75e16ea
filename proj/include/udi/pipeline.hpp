#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "udi/controller.hpp"
#include "udi/losses.hpp"
#include "udi/metrics.hpp"
#include "udi/nets.hpp"
#include "udi/synthdata.hpp"

namespace udi {

struct OptimizerConfig {
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int batch_size = 64;
  double clip_norm = 5.0;  // 0 disables; global-norm clip before the update
};

/// SGD with momentum and decoupled-from-nothing weight decay:
///   v <- momentum * v + g + weight_decay * theta;  theta <- theta - lr * v
class SgdOptimizer {
 public:
  explicit SgdOptimizer(const OptimizerConfig& cfg) : cfg_(cfg) {}
  /// One update from the gradients currently held by the set; zeroes them.
  void step(ParamSet& params) const;

 private:
  OptimizerConfig cfg_;
};

enum class StrategyKind { Udi, JointSum, Decoupled };
enum class FusionRule { Sum, MeanProbs, Concat };
enum class ControllerTaskLoss { Fused, Unimodal };

struct ControllerConfig {
  bool dynamic = true;
  double fixed_alpha_con = 0.0;  // used when !dynamic
  double fixed_alpha_com = 0.0;
  double epsilon = 1e-8;
  ControllerTaskLoss task_loss = ControllerTaskLoss::Fused;
};

struct TrainConfig {
  std::vector<int> encoder_hidden = {64};  // hidden dims; feature dim below
  int feature_dim = 32;
  std::vector<int> estimator_hidden = {64};
  int epochs = 40;                          // E^m, per stage
  std::optional<std::vector<int>> epochs_per_modality;
  int anchor_select_epochs = -1;            // -1: same as epochs
  OptimizerConfig optimizer;
  double estimator_lr = -1.0;               // -1: same as optimizer.lr
  // NLL-only steps before the bound joins the objective and the controller
  // starts firing; the bound is meaningful only once the estimator fits.
  int estimator_warmup_batches = 64;
  StrategyKind strategy = StrategyKind::Udi;
  ControllerConfig controller;
  int anchor_override = -1;                 // -1: auto-select
  FusionRule fusion = FusionRule::Sum;
  double tie_threshold = 0.005;
  int patience = 10;
  double min_delta = 1e-4;
  bool js_normalize = true;
  int fusion_head_epochs = 20;              // concat rule only
  std::uint64_t seed = 1;
  std::string run_id = "run";
};

/// One modality's encoder + decision head and their parameters. Once frozen,
/// parameter bytes must never change again; violations are checked by
/// checksum and raise a ContractError.
struct ModalityBranch {
  std::string name;
  MlpEncoder encoder;
  DecisionHead head;
  ParamSet params;
  bool trained = false;
  bool frozen = false;
  double val_accuracy = 0.0;
  double pred_entropy = 0.0;
  std::uint64_t freeze_checksum = 0;

  struct Fwd {
    Tensor features;
    Tensor logits;
    Tensor probs;
  };
  Fwd forward(const Tensor& x, bool detached = false) const;

  void freeze();
  void check_frozen_intact() const;
};

/// Branches in training order plus the per-pair variational estimators and
/// the optional concat fusion head.
struct TrainedEnsemble {
  std::vector<ModalityBranch> branches;  // dataset modality order
  int anchor = -1;
  std::vector<int> training_order;       // anchor first
  struct Estimator {
    std::string pair;  // "<guide>-><follower>"
    GaussianConditional q;
    ParamSet params;
  };
  std::vector<std::unique_ptr<Estimator>> estimators;
  FusionRule fusion = FusionRule::Sum;
  std::optional<DecisionHead> concat_head;
  ParamSet concat_params;
};

struct EvalResult {
  std::vector<double> modality_acc;
  double fused_acc = 0.0;
  double macro_f1 = 0.0;
  std::vector<double> per_class_f1;
};

/// Fused probabilities for a batch under the ensemble's rule.
Tensor fuse_predict(const TrainedEnsemble& ensemble, const std::vector<Tensor>& xs);

/// Accuracy, macro-F1 and per-class breakdown on one split.
EvalResult evaluate(const TrainedEnsemble& ensemble, const MultimodalDataset& data, Split split);

double accuracy_of(const Tensor& probs, const std::vector<int>& labels);
double macro_f1_of(const Tensor& probs, const std::vector<int>& labels, int classes,
                   std::vector<double>* per_class = nullptr);

/// argmax validation accuracy, entropy tie-break within tie_threshold,
/// modality index beyond that.
int select_anchor(const std::vector<ModalityBranch>& branches, double tie_threshold);

struct StageReport {
  std::string stage;
  int epochs_run = 0;
  int best_epoch = 0;
  double best_val_acc = 0.0;
  int controller_updates = 0;
  int grad_captures = 0;
  std::vector<LossBreakdown> per_epoch;  // follower stages
  std::vector<std::pair<double, double>> alpha_history;  // follower stages
};

struct RunReport {
  std::vector<StageReport> stages;
  EvalResult test;
  double anchor_val_accuracy = 0.0;
};

class TrainRun {
 public:
  TrainRun(const MultimodalDataset& data, TrainConfig cfg, MetricsWriter* metrics);

  RunReport run();  // dispatches on cfg.strategy

  TrainedEnsemble& ensemble() { return ensemble_; }
  const TrainConfig& config() const { return cfg_; }

  /// Mini-batch SGD on the branch's own cross-entropy with early stopping and
  /// best-epoch restore.
  StageReport train_unimodal(ModalityBranch& branch, const std::string& stage, int epochs);

  /// Follower adaptation guided by every previously trained (frozen) branch.
  StageReport train_follower(int follower_idx, const std::string& stage, int epochs);

 private:
  StageReport run_joint(int epochs);
  void train_concat_head();
  ModalityBranch make_branch(int modality_idx) const;
  TrainedEnsemble::Estimator* make_estimator(int guide_idx, int follower_idx);

  std::vector<std::vector<int>> epoch_batches(int epoch) const;
  double unimodal_val_accuracy(const ModalityBranch& branch) const;
  void emit_epoch_row(const std::string& stage, int epoch, const LossBreakdown& losses,
                      const ControllerState* ctrl);
  int stage_epochs(int modality_idx) const;

  const MultimodalDataset& data_;
  TrainConfig cfg_;
  MetricsWriter* metrics_;
  TrainedEnsemble ensemble_;
  std::vector<int> train_idx_, val_idx_, test_idx_;
  RunReport report_;
};

/// Convenience wrapper: build, run, evaluate.
RunReport run_strategy(const MultimodalDataset& data, const TrainConfig& cfg,
                       MetricsWriter* metrics, TrainedEnsemble* out_ensemble = nullptr);

}  // namespace udi

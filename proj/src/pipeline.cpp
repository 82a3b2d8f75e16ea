#include "udi/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "udi/rng.hpp"

namespace udi {

void SgdOptimizer::step(ParamSet& params) const {
  double clip_scale = 1.0;
  if (cfg_.clip_norm > 0.0) {
    double norm2 = 0.0;
    for (const auto& e : params.entries())
      for (double g : e.value.grad()) norm2 += g * g;
    const double norm = std::sqrt(norm2);
    if (norm > cfg_.clip_norm) clip_scale = cfg_.clip_norm / norm;
  }
  for (auto& e : params.entries()) {
    auto data = e.value.mutable_data();
    const auto& g = e.value.node()->grad;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double grad = (g.empty() ? 0.0 : g[i]) * clip_scale;
      e.velocity[i] = cfg_.momentum * e.velocity[i] + grad + cfg_.weight_decay * data[i];
      data[i] -= cfg_.lr * e.velocity[i];
    }
  }
  params.zero_grads();
}

ModalityBranch::Fwd ModalityBranch::forward(const Tensor& x, bool detached) const {
  Tensor f = encoder.forward(params, x, detached);
  DecisionHead::Out out = head.forward(params, f, detached);
  return {f, out.logits, out.probs};
}

void ModalityBranch::freeze() {
  frozen = true;
  freeze_checksum = params.checksum();
}

void ModalityBranch::check_frozen_intact() const {
  if (!frozen) throw ContractError("branch " + name + " is not frozen");
  if (params.checksum() != freeze_checksum)
    throw ContractError("frozen branch " + name + " was modified");
}

int select_anchor(const std::vector<ModalityBranch>& branches, double tie_threshold) {
  if (branches.empty()) throw ContractError("select_anchor: no branches");
  double top = branches[0].val_accuracy;
  for (const auto& b : branches) top = std::max(top, b.val_accuracy);
  int pick = -1;
  for (int i = 0; i < static_cast<int>(branches.size()); ++i) {
    if (top - branches[i].val_accuracy > tie_threshold) continue;
    if (pick < 0 || branches[i].pred_entropy < branches[pick].pred_entropy) pick = i;
  }
  return pick;
}

double accuracy_of(const Tensor& probs, const std::vector<int>& labels) {
  const int n = probs.rows(), c = probs.cols();
  if (n != static_cast<int>(labels.size())) throw ShapeError("accuracy_of: row/label mismatch");
  if (n == 0) throw ContractError("accuracy_of: empty split");
  int correct = 0;
  for (int i = 0; i < n; ++i) {
    int arg = 0;
    for (int j = 1; j < c; ++j)
      if (probs.at(i, j) > probs.at(i, arg)) arg = j;
    if (arg == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / n;
}

double macro_f1_of(const Tensor& probs, const std::vector<int>& labels, int classes,
                   std::vector<double>* per_class) {
  const int n = probs.rows();
  std::vector<int> tp(classes, 0), fp(classes, 0), fn(classes, 0);
  for (int i = 0; i < n; ++i) {
    int arg = 0;
    for (int j = 1; j < probs.cols(); ++j)
      if (probs.at(i, j) > probs.at(i, arg)) arg = j;
    if (arg == labels[i]) {
      ++tp[arg];
    } else {
      ++fp[arg];
      ++fn[labels[i]];
    }
  }
  double sum = 0.0;
  if (per_class) per_class->assign(classes, 0.0);
  for (int k = 0; k < classes; ++k) {
    const double denom_p = tp[k] + fp[k], denom_r = tp[k] + fn[k];
    const double p = denom_p > 0 ? tp[k] / denom_p : 0.0;
    const double r = denom_r > 0 ? tp[k] / denom_r : 0.0;
    const double f1 = (p + r) > 0 ? 2.0 * p * r / (p + r) : 0.0;
    if (per_class) (*per_class)[k] = f1;
    sum += f1;
  }
  return sum / classes;
}

namespace {

Tensor concat_features(const std::vector<Tensor>& feats) {
  const int n = feats[0].rows();
  int total = 0;
  for (const auto& f : feats) total += f.cols();
  std::vector<double> out(static_cast<std::size_t>(n) * total);
  int col = 0;
  for (const auto& f : feats) {
    for (int i = 0; i < n; ++i)
      std::copy_n(f.data().begin() + static_cast<std::size_t>(i) * f.cols(), f.cols(),
                  out.begin() + static_cast<std::size_t>(i) * total + col);
    col += f.cols();
  }
  return Tensor::from_data({n, total}, std::move(out));
}

// Fused probabilities without the trained-branch gate; used for in-training
// metrics where the current branch is mid-stage.
Tensor fused_probs_internal(const TrainedEnsemble& ensemble, const std::vector<Tensor>& xs,
                            FusionRule rule) {
  std::vector<Tensor> probs, logits, feats;
  for (std::size_t m = 0; m < ensemble.branches.size(); ++m) {
    auto fwd = ensemble.branches[m].forward(xs[m], /*detached=*/true);
    probs.push_back(fwd.probs);
    logits.push_back(fwd.logits);
    feats.push_back(fwd.features);
  }
  switch (rule) {
    case FusionRule::Sum: {
      Tensor z = logits[0];
      for (std::size_t m = 1; m < logits.size(); ++m) z = add(z, logits[m]);
      return softmax_rows(z);
    }
    case FusionRule::MeanProbs: {
      Tensor p = probs[0];
      for (std::size_t m = 1; m < probs.size(); ++m) p = add(p, probs[m]);
      return scale(p, 1.0 / probs.size());
    }
    case FusionRule::Concat: {
      if (!ensemble.concat_head)
        throw ContractError("concat fusion requires a trained fusion head");
      return ensemble.concat_head->forward(ensemble.concat_params, concat_features(feats),
                                           /*detached=*/true)
          .probs;
    }
  }
  throw ContractError("unknown fusion rule");
}

}  // namespace

Tensor fuse_predict(const TrainedEnsemble& ensemble, const std::vector<Tensor>& xs) {
  if (xs.size() != ensemble.branches.size())
    throw ShapeError("fuse_predict: batch has " + std::to_string(xs.size()) +
                     " modalities, ensemble has " + std::to_string(ensemble.branches.size()));
  for (const auto& b : ensemble.branches)
    if (!b.trained) throw ContractError("fuse_predict: branch " + b.name + " is untrained");
  return fused_probs_internal(ensemble, xs, ensemble.fusion);
}

EvalResult evaluate(const TrainedEnsemble& ensemble, const MultimodalDataset& data, Split split) {
  const auto idx = data.indices(split);
  if (idx.empty()) throw ContractError("evaluate: empty split");
  const auto labels = data.gather_labels(idx);

  EvalResult res;
  std::vector<Tensor> xs;
  for (int m = 0; m < data.modality_count(); ++m) xs.push_back(data.gather(m, idx));
  for (std::size_t m = 0; m < ensemble.branches.size(); ++m) {
    auto fwd = ensemble.branches[m].forward(xs[m], /*detached=*/true);
    res.modality_acc.push_back(accuracy_of(fwd.probs, labels));
  }
  Tensor fused = fused_probs_internal(ensemble, xs, ensemble.fusion);
  res.fused_acc = accuracy_of(fused, labels);
  res.macro_f1 = macro_f1_of(fused, labels, data.classes, &res.per_class_f1);
  return res;
}

TrainRun::TrainRun(const MultimodalDataset& data, TrainConfig cfg, MetricsWriter* metrics)
    : data_(data), cfg_(std::move(cfg)), metrics_(metrics) {
  data_.validate();
  train_idx_ = data_.indices(Split::Train);
  val_idx_ = data_.indices(Split::Val);
  test_idx_ = data_.indices(Split::Test);
  if (train_idx_.empty() || val_idx_.empty() || test_idx_.empty())
    throw ContractError("dataset must have nonempty train/val/test splits");
  if (cfg_.anchor_select_epochs < 0) cfg_.anchor_select_epochs = cfg_.epochs;
  if (cfg_.estimator_lr < 0.0) cfg_.estimator_lr = cfg_.optimizer.lr;
  ensemble_.fusion = cfg_.fusion;
  for (int m = 0; m < data_.modality_count(); ++m) ensemble_.branches.push_back(make_branch(m));
}

ModalityBranch TrainRun::make_branch(int modality_idx) const {
  const auto& mod = data_.modality(modality_idx);
  ModalityBranch b;
  b.name = mod.name;
  std::vector<int> dims;
  dims.push_back(mod.dim);
  for (int h : cfg_.encoder_hidden) dims.push_back(h);
  dims.push_back(cfg_.feature_dim);
  b.encoder = MlpEncoder("enc." + mod.name, dims);
  b.head = DecisionHead("head." + mod.name, cfg_.feature_dim, data_.classes);
  b.encoder.register_params(b.params, cfg_.seed);
  b.head.register_params(b.params, cfg_.seed);
  return b;
}

TrainedEnsemble::Estimator* TrainRun::make_estimator(int guide_idx, int follower_idx) {
  auto est = std::make_unique<TrainedEnsemble::Estimator>();
  est->pair = ensemble_.branches[guide_idx].name + "_to_" + ensemble_.branches[follower_idx].name;
  est->q = GaussianConditional("mi." + est->pair, cfg_.feature_dim, cfg_.estimator_hidden,
                               cfg_.feature_dim);
  est->q.register_params(est->params, cfg_.seed);
  ensemble_.estimators.push_back(std::move(est));
  return ensemble_.estimators.back().get();
}

std::vector<std::vector<int>> TrainRun::epoch_batches(int epoch) const {
  std::vector<int> idx = train_idx_;
  Rng rng(hash_combine(cfg_.seed, static_cast<std::uint64_t>(epoch)));
  rng.shuffle(idx);
  std::vector<std::vector<int>> batches;
  const int bs = cfg_.optimizer.batch_size;
  for (std::size_t start = 0; start < idx.size(); start += bs) {
    const std::size_t end = std::min(idx.size(), start + bs);
    batches.emplace_back(idx.begin() + start, idx.begin() + end);
  }
  return batches;
}

double TrainRun::unimodal_val_accuracy(const ModalityBranch& branch) const {
  int mod = -1;
  for (int m = 0; m < data_.modality_count(); ++m)
    if (data_.modality(m).name == branch.name) mod = m;
  Tensor x = data_.gather(mod, val_idx_);
  auto fwd = branch.forward(x, /*detached=*/true);
  return accuracy_of(fwd.probs, data_.gather_labels(val_idx_));
}

int TrainRun::stage_epochs(int modality_idx) const {
  if (cfg_.epochs_per_modality) {
    const auto& per = *cfg_.epochs_per_modality;
    if (modality_idx < static_cast<int>(per.size())) return per[modality_idx];
  }
  return cfg_.epochs;
}

void TrainRun::emit_epoch_row(const std::string& stage, int epoch, const LossBreakdown& losses,
                              const ControllerState* ctrl) {
  if (!metrics_) return;
  MetricsRow row;
  row.run_id = cfg_.run_id;
  row.stage = stage;
  row.epoch = epoch;
  row.split = "val";
  row.loss_cls = losses.cls;
  row.loss_con = losses.con;
  row.loss_com = losses.com;
  row.loss_mi_nll = losses.mi_nll;
  row.loss_total = losses.total;
  if (ctrl) {
    row.alpha_con = ctrl->alpha_con;
    row.alpha_com = ctrl->alpha_com;
    row.xi_con = ctrl->xi_con;
    row.xi_com = ctrl->xi_com;
  }
  const auto labels = data_.gather_labels(val_idx_);
  std::vector<Tensor> xs;
  for (int m = 0; m < data_.modality_count(); ++m) xs.push_back(data_.gather(m, val_idx_));
  for (std::size_t m = 0; m < ensemble_.branches.size(); ++m) {
    auto fwd = ensemble_.branches[m].forward(xs[m], /*detached=*/true);
    row.modality_acc.push_back(accuracy_of(fwd.probs, labels));
  }
  // Concat fusion has no head until its own stage; report sum fusion until then.
  FusionRule rule = ensemble_.fusion;
  if (rule == FusionRule::Concat && !ensemble_.concat_head) rule = FusionRule::Sum;
  Tensor fused = fused_probs_internal(ensemble_, xs, rule);
  row.fused_acc = accuracy_of(fused, labels);
  row.macro_f1 = macro_f1_of(fused, labels, data_.classes, nullptr);
  metrics_->append(row);
}

namespace {

// Per-column affine that standardizes a feature batch. Absorbed into the
// variational estimator as a fixed (detached) input layer: the bound's
// double-difference cancels the Jacobian constant, so the estimate is the
// raw-feature one while the estimator trains on unit-scale inputs. Raw
// encoder outputs fed directly make the Gaussian NLL stiff enough to diverge
// under SGD once the follower features grow.
struct ColumnAffine {
  Tensor neg_mean;  // length-m constants
  Tensor inv_sd;
};

ColumnAffine feature_affine(const Tensor& f) {
  const int n = f.rows(), m = f.cols();
  std::vector<double> neg_mean(m, 0.0), inv_sd(m, 0.0);
  for (int j = 0; j < m; ++j) {
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += f.at(i, j);
    mean /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = f.at(i, j) - mean;
      var += d * d;
    }
    const double sd = std::sqrt(var / n);
    neg_mean[j] = -mean;
    inv_sd[j] = 1.0 / std::max(sd, 1e-3);
  }
  return {Tensor::from_data({m}, std::move(neg_mean)), Tensor::from_data({m}, std::move(inv_sd))};
}

Tensor apply_affine(const Tensor& f, const ColumnAffine& a) {
  return mul_rowvec(add_rowvec(f, a.neg_mean), a.inv_sd);
}

void check_finite_loss(double v, const std::string& stage, int epoch) {
  if (!std::isfinite(v))
    throw NumericError("non-finite loss in stage " + stage + " epoch " + std::to_string(epoch));
}

struct EarlyStopper {
  double best = -1.0;
  int best_epoch = 0;
  int stale = 0;
  ParamSet snapshot;
  bool has_snapshot = false;

  // Returns true when training should stop. With refresh_ties, epochs that
  // match the best accuracy refresh the snapshot without resetting patience:
  // the restored model is the latest at the best accuracy and its decision
  // margins keep maturing after the accuracy saturates. Guided follower
  // stages instead keep the first best epoch, the least-drifted follower
  // that fuses that well.
  bool observe(double val_acc, int epoch, const ParamSet& params, int patience,
               double min_delta, bool refresh_ties = true) {
    if (val_acc > best + min_delta) {
      best = val_acc;
      best_epoch = epoch;
      snapshot = params.clone();
      has_snapshot = true;
      stale = 0;
      return false;
    }
    if (refresh_ties && val_acc >= best) {
      best_epoch = epoch;
      snapshot = params.clone();
      has_snapshot = true;
    }
    return ++stale >= patience;
  }
};

}  // namespace

StageReport TrainRun::train_unimodal(ModalityBranch& branch, const std::string& stage,
                                     int epochs) {
  int mod = -1;
  for (int m = 0; m < data_.modality_count(); ++m)
    if (data_.modality(m).name == branch.name) mod = m;
  if (mod < 0) throw ContractError("train_unimodal: dataset lacks modality " + branch.name);

  StageReport rep;
  rep.stage = stage;
  SgdOptimizer opt(cfg_.optimizer);
  EarlyStopper stopper;
  if (epochs > 0) stopper.observe(unimodal_val_accuracy(branch), 0, branch.params,
                                  cfg_.patience, cfg_.min_delta);

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    double loss_sum = 0.0;
    const auto batches = epoch_batches(epoch);
    for (const auto& batch : batches) {
      Tensor x = data_.gather(mod, batch);
      Tensor y = data_.gather_onehot(batch);
      auto fwd = branch.forward(x);
      Tensor loss = cross_entropy(fwd.probs, y);
      check_finite_loss(loss.value(), stage, epoch);
      loss_sum += loss.value();
      branch.params.zero_grads();
      loss.backward();
      opt.step(branch.params);
    }
    rep.epochs_run = epoch;
    const double mean_loss = loss_sum / batches.size();
    const double val_acc = unimodal_val_accuracy(branch);
    LossBreakdown bd;
    bd.cls = mean_loss;
    bd.total = mean_loss;
    emit_epoch_row(stage, epoch, bd, nullptr);
    if (stopper.observe(val_acc, epoch, branch.params, cfg_.patience, cfg_.min_delta)) break;
  }

  if (stopper.has_snapshot) branch.params.restore(stopper.snapshot);
  rep.best_epoch = stopper.best_epoch;
  rep.best_val_acc = stopper.has_snapshot ? stopper.best : unimodal_val_accuracy(branch);

  branch.val_accuracy = rep.best_val_acc;
  Tensor x_val = data_.gather(mod, val_idx_);
  branch.pred_entropy = predictive_entropy(branch.forward(x_val, /*detached=*/true).probs);
  branch.trained = true;
  report_.stages.push_back(rep);
  return rep;
}

StageReport TrainRun::train_follower(int follower_idx, const std::string& stage, int epochs) {
  ModalityBranch& follower = ensemble_.branches[follower_idx];
  std::vector<int> guides = ensemble_.training_order;
  if (guides.empty()) throw ContractError("train_follower: no trained guide branches");
  for (int g : guides) ensemble_.branches[g].check_frozen_intact();

  std::vector<TrainedEnsemble::Estimator*> estimators;
  for (int g : guides) estimators.push_back(make_estimator(g, follower_idx));

  StageReport rep;
  rep.stage = stage;
  SgdOptimizer opt(cfg_.optimizer);
  // The estimator runs without momentum: the NLL's exp(-logvar) curvature
  // plus a momentum buffer overshoots into divergence while it chases the
  // moving follower features.
  OptimizerConfig est_cfg = cfg_.optimizer;
  est_cfg.lr = cfg_.estimator_lr;
  est_cfg.momentum = 0.0;
  est_cfg.clip_norm = 5.0;
  SgdOptimizer est_opt(est_cfg);
  EarlyStopper stopper;

  DynamicController controller(cfg_.controller.epsilon);
  const bool dynamic = cfg_.controller.dynamic;
  double alpha_con = dynamic ? controller.state().alpha_con : cfg_.controller.fixed_alpha_con;
  double alpha_com = dynamic ? controller.state().alpha_com : cfg_.controller.fixed_alpha_com;
  double applied_con = alpha_con, applied_com = 0.0;
  int phi_steps = 0;

  // A guided stage exists to improve the ensemble, so its checkpoint metric
  // is the fused validation accuracy. With both weights pinned to zero the
  // stage degenerates to unimodal training and keeps unimodal validation,
  // which preserves the bit-identity with the decoupled ablation.
  const bool guided = dynamic || cfg_.controller.fixed_alpha_con != 0.0 ||
                      cfg_.controller.fixed_alpha_com != 0.0;
  const auto val_labels = data_.gather_labels(val_idx_);
  std::vector<Tensor> val_xs;
  for (int m = 0; m < data_.modality_count(); ++m) val_xs.push_back(data_.gather(m, val_idx_));
  auto stage_val_metric = [&]() {
    if (!guided) return unimodal_val_accuracy(follower);
    // sum fusion over the trained prefix: guides plus the stage's follower
    Tensor z = follower.forward(val_xs[follower_idx], /*detached=*/true).logits;
    for (int g : guides)
      z = add(z, ensemble_.branches[g].forward(val_xs[g], /*detached=*/true).logits);
    return accuracy_of(softmax_rows(z), val_labels);
  };

  if (epochs > 0)
    stopper.observe(stage_val_metric(), 0, follower.params, cfg_.patience, cfg_.min_delta,
                    /*refresh_ties=*/!guided);

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    LossBreakdown epoch_losses;
    const auto batches = epoch_batches(epoch);
    for (const auto& batch : batches) {
      const bool warmed_up = phi_steps >= cfg_.estimator_warmup_batches;
      Tensor x_f = data_.gather(follower_idx, batch);
      Tensor y = data_.gather_onehot(batch);

      // Frozen guide outputs for this batch: plain constants, standardized
      // once for the estimators.
      std::vector<Tensor> guide_feats;
      Tensor guide_logit_sum;
      for (std::size_t gi = 0; gi < guides.size(); ++gi) {
        Tensor x_g = data_.gather(guides[gi], batch);
        auto fwd = ensemble_.branches[guides[gi]].forward(x_g, /*detached=*/true);
        guide_feats.push_back(apply_affine(fwd.features, feature_affine(fwd.features)));
        guide_logit_sum = gi == 0 ? fwd.logits : add(guide_logit_sum, fwd.logits);
      }
      Tensor guide_probs = softmax_rows(guide_logit_sum);

      // (1) Estimator update: one NLL step per guide pair. The follower
      // affine is fixed from the batch-start features and reused for every
      // sub-step of this batch.
      Tensor f_follower_const = follower.encoder.forward(follower.params, x_f, /*detached=*/true);
      const ColumnAffine follower_affine = feature_affine(f_follower_const);
      Tensor f_follower_std = apply_affine(f_follower_const, follower_affine);
      double nll_sum = 0.0;
      for (std::size_t gi = 0; gi < estimators.size(); ++gi) {
        Tensor nll = mi_nll(estimators[gi]->q, estimators[gi]->params, guide_feats[gi],
                            f_follower_std);
        check_finite_loss(nll.value(), stage + "/mi_nll", epoch);
        nll_sum += nll.value();
        estimators[gi]->params.zero_grads();
        nll.backward();
        est_opt.step(estimators[gi]->params);
      }
      const double mi_nll_mean = nll_sum / estimators.size();
      ++phi_steps;

      auto follower_com = [&](const ModalityBranch::Fwd& fwd) {
        Tensor f_m_std = apply_affine(fwd.features, follower_affine);
        Tensor com;
        for (std::size_t gi = 0; gi < estimators.size(); ++gi) {
          Tensor b = mi_upper_bound(estimators[gi]->q, estimators[gi]->params, guide_feats[gi],
                                    f_m_std);
          com = gi == 0 ? b : add(com, b);
        }
        return scale(com, 1.0 / estimators.size());
      };

      // (2) Dynamic aware update, once per epoch on the first batch with a
      // warmed-up estimator.
      if (dynamic && warmed_up) {
        DynamicController::LossBuilders builders;
        builders.cls = [&]() {
          auto fwd = follower.forward(x_f);
          if (cfg_.controller.task_loss == ControllerTaskLoss::Fused)
            return cross_entropy(softmax_rows(add(guide_logit_sum, fwd.logits)), y);
          return cross_entropy(fwd.probs, y);
        };
        builders.con = [&]() {
          auto fwd = follower.forward(x_f);
          return js_consistency(guide_probs, fwd.probs, cfg_.js_normalize);
        };
        builders.com = [&]() { return follower_com(follower.forward(x_f)); };
        controller.maybe_update(epoch, builders, follower.params);
        alpha_con = controller.state().alpha_con;
        alpha_com = controller.state().alpha_com;
      }

      // (3) Follower update on the weighted objective. The bound term joins
      // only after warm-up.
      auto fwd = follower.forward(x_f);
      Tensor cls = cross_entropy(fwd.probs, y);
      Tensor con = js_consistency(guide_probs, fwd.probs, cfg_.js_normalize);
      Tensor com = follower_com(fwd);
      const double com_weight = warmed_up ? alpha_com : 0.0;
      Tensor total = cls;
      if (alpha_con != 0.0) total = add(total, scale(con, alpha_con));
      if (com_weight != 0.0) total = add(total, scale(com, com_weight));
      check_finite_loss(total.value(), stage + "/total", epoch);
      follower.params.zero_grads();
      total.backward();
      opt.step(follower.params);

      applied_con = alpha_con;
      applied_com = com_weight;
      epoch_losses.cls += cls.value();
      epoch_losses.con += con.value();
      epoch_losses.com += com.value();
      epoch_losses.mi_nll += mi_nll_mean;
      epoch_losses.total += total.value();
    }
    const double inv = 1.0 / batches.size();
    epoch_losses.cls *= inv;
    epoch_losses.con *= inv;
    epoch_losses.com *= inv;
    epoch_losses.mi_nll *= inv;
    epoch_losses.total *= inv;
    epoch_losses.pair = ensemble_.branches[guides[0]].name + "->" + follower.name;
    rep.per_epoch.push_back(epoch_losses);
    rep.alpha_history.emplace_back(applied_con, applied_com);
    rep.epochs_run = epoch;

    ControllerState state = controller.state();
    state.alpha_con = applied_con;
    state.alpha_com = applied_com;
    if (!dynamic) {
      state.xi_con = 0.0;
      state.xi_com = 0.0;
    }
    emit_epoch_row(stage, epoch, epoch_losses, &state);

    if (stopper.observe(stage_val_metric(), epoch, follower.params, cfg_.patience,
                        cfg_.min_delta, /*refresh_ties=*/!guided))
      break;
  }

  if (stopper.has_snapshot) follower.params.restore(stopper.snapshot);
  rep.best_epoch = stopper.best_epoch;
  rep.best_val_acc = stopper.has_snapshot ? stopper.best : stage_val_metric();
  follower.val_accuracy = unimodal_val_accuracy(follower);
  Tensor x_val = data_.gather(follower_idx, val_idx_);
  follower.pred_entropy = predictive_entropy(follower.forward(x_val, /*detached=*/true).probs);
  follower.trained = true;
  rep.controller_updates = controller.update_count();
  rep.grad_captures = controller.capture_count();

  for (int g : guides) ensemble_.branches[g].check_frozen_intact();
  report_.stages.push_back(rep);
  return rep;
}

StageReport TrainRun::run_joint(int epochs) {
  StageReport rep;
  rep.stage = "joint";
  // The joint baseline is the conventional method, reproduced without the
  // UDI pipeline's gradient clipping.
  OptimizerConfig joint_cfg = cfg_.optimizer;
  joint_cfg.clip_norm = 0.0;
  SgdOptimizer opt(joint_cfg);

  std::vector<ParamSet> best;  // one snapshot per branch at the best epoch
  double best_acc = -1.0;
  int best_epoch = 0, stale = 0;

  const auto val_labels = data_.gather_labels(val_idx_);
  std::vector<Tensor> val_xs;
  for (int m = 0; m < data_.modality_count(); ++m) val_xs.push_back(data_.gather(m, val_idx_));

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    double loss_sum = 0.0;
    const auto batches = epoch_batches(epoch);
    for (const auto& batch : batches) {
      Tensor y = data_.gather_onehot(batch);
      Tensor fused_logits;
      for (std::size_t m = 0; m < ensemble_.branches.size(); ++m) {
        Tensor x = data_.gather(static_cast<int>(m), batch);
        auto fwd = ensemble_.branches[m].forward(x);
        fused_logits = m == 0 ? fwd.logits : add(fused_logits, fwd.logits);
      }
      Tensor loss = cross_entropy(softmax_rows(fused_logits), y);
      check_finite_loss(loss.value(), "joint", epoch);
      loss_sum += loss.value();
      for (auto& b : ensemble_.branches) b.params.zero_grads();
      loss.backward();
      for (auto& b : ensemble_.branches) opt.step(b.params);
    }
    rep.epochs_run = epoch;
    LossBreakdown bd;
    bd.cls = loss_sum / batches.size();
    bd.total = bd.cls;
    emit_epoch_row("joint", epoch, bd, nullptr);

    Tensor fused = fused_probs_internal(ensemble_, val_xs, FusionRule::Sum);
    const double val_acc = accuracy_of(fused, val_labels);
    if (val_acc > best_acc + cfg_.min_delta) {
      best_acc = val_acc;
      best_epoch = epoch;
      best.clear();
      for (auto& b : ensemble_.branches) best.push_back(b.params.clone());
      stale = 0;
    } else if (++stale >= cfg_.patience) {
      break;
    }
  }

  if (!best.empty())
    for (std::size_t m = 0; m < ensemble_.branches.size(); ++m)
      ensemble_.branches[m].params.restore(best[m]);
  rep.best_epoch = best_epoch;
  rep.best_val_acc = best_acc;
  for (std::size_t m = 0; m < ensemble_.branches.size(); ++m) {
    ModalityBranch& b = ensemble_.branches[m];
    b.trained = true;
    b.val_accuracy = accuracy_of(b.forward(val_xs[m], /*detached=*/true).probs, val_labels);
  }
  report_.stages.push_back(rep);
  return rep;
}

void TrainRun::train_concat_head() {
  for (auto& b : ensemble_.branches) b.check_frozen_intact();
  int total_dim = cfg_.feature_dim * static_cast<int>(ensemble_.branches.size());
  ensemble_.concat_head = DecisionHead("fusion.concat", total_dim, data_.classes);
  ensemble_.concat_head->register_params(ensemble_.concat_params, cfg_.seed);

  SgdOptimizer opt(cfg_.optimizer);
  const auto val_labels = data_.gather_labels(val_idx_);
  std::vector<Tensor> val_xs;
  for (int m = 0; m < data_.modality_count(); ++m) val_xs.push_back(data_.gather(m, val_idx_));

  double best_acc = -1.0;
  ParamSet best;
  bool has_best = false;
  int stale = 0;
  StageReport rep;
  rep.stage = "fusion.concat";

  for (int epoch = 1; epoch <= cfg_.fusion_head_epochs; ++epoch) {
    double loss_sum = 0.0;
    const auto batches = epoch_batches(epoch);
    for (const auto& batch : batches) {
      Tensor y = data_.gather_onehot(batch);
      std::vector<Tensor> feats;
      for (std::size_t m = 0; m < ensemble_.branches.size(); ++m) {
        Tensor x = data_.gather(static_cast<int>(m), batch);
        feats.push_back(ensemble_.branches[m].forward(x, /*detached=*/true).features);
      }
      auto out = ensemble_.concat_head->forward(ensemble_.concat_params, concat_features(feats));
      Tensor loss = cross_entropy(out.probs, y);
      check_finite_loss(loss.value(), "fusion.concat", epoch);
      loss_sum += loss.value();
      ensemble_.concat_params.zero_grads();
      loss.backward();
      opt.step(ensemble_.concat_params);
    }
    rep.epochs_run = epoch;
    LossBreakdown bd;
    bd.cls = loss_sum / batches.size();
    bd.total = bd.cls;
    emit_epoch_row("fusion.concat", epoch, bd, nullptr);

    Tensor fused = fused_probs_internal(ensemble_, val_xs, FusionRule::Concat);
    const double val_acc = accuracy_of(fused, val_labels);
    if (val_acc > best_acc + cfg_.min_delta) {
      best_acc = val_acc;
      best = ensemble_.concat_params.clone();
      has_best = true;
      stale = 0;
      rep.best_epoch = epoch;
    } else if (++stale >= cfg_.patience) {
      break;
    }
  }
  if (has_best) ensemble_.concat_params.restore(best);
  rep.best_val_acc = best_acc;
  report_.stages.push_back(rep);
}

RunReport TrainRun::run() {
  report_ = RunReport{};

  switch (cfg_.strategy) {
    case StrategyKind::Udi: {
      int anchor = cfg_.anchor_override;
      std::vector<double> select_acc(data_.modality_count(), 0.0);
      bool selected = false;
      if (anchor < 0) {
        // Pre-train every branch in isolation to rank them.
        for (int m = 0; m < data_.modality_count(); ++m) {
          train_unimodal(ensemble_.branches[m], "select." + data_.modality(m).name,
                         cfg_.anchor_select_epochs);
          select_acc[m] = ensemble_.branches[m].val_accuracy;
        }
        anchor = select_anchor(ensemble_.branches, cfg_.tie_threshold);
        selected = true;
      }
      if (anchor < 0 || anchor >= data_.modality_count())
        throw ContractError("anchor index out of range");
      ensemble_.anchor = anchor;

      // The anchor trains alone from a fresh start, then freezes.
      ensemble_.branches[anchor] = make_branch(anchor);
      train_unimodal(ensemble_.branches[anchor],
                     "anchor." + ensemble_.branches[anchor].name, stage_epochs(anchor));
      report_.anchor_val_accuracy = ensemble_.branches[anchor].val_accuracy;
      ensemble_.branches[anchor].freeze();
      ensemble_.training_order = {anchor};

      // Followers in descending pre-training performance where known.
      std::vector<int> rest;
      for (int m = 0; m < data_.modality_count(); ++m)
        if (m != anchor) rest.push_back(m);
      if (selected)
        std::stable_sort(rest.begin(), rest.end(),
                         [&](int a, int b) { return select_acc[a] > select_acc[b]; });

      for (int follower : rest) {
        ensemble_.branches[follower] = make_branch(follower);  // guided training from scratch
        train_follower(follower, "follower." + ensemble_.branches[follower].name,
                       stage_epochs(follower));
        ensemble_.branches[follower].freeze();
        ensemble_.training_order.push_back(follower);
      }
      if (cfg_.fusion == FusionRule::Concat) train_concat_head();
      break;
    }
    case StrategyKind::JointSum: {
      ensemble_.fusion = FusionRule::Sum;
      run_joint(cfg_.epochs);
      break;
    }
    case StrategyKind::Decoupled: {
      ensemble_.fusion = FusionRule::MeanProbs;
      for (int m = 0; m < data_.modality_count(); ++m) {
        ensemble_.branches[m] = make_branch(m);
        train_unimodal(ensemble_.branches[m], "train." + data_.modality(m).name,
                       stage_epochs(m));
      }
      break;
    }
  }

  report_.test = evaluate(ensemble_, data_, Split::Test);
  if (metrics_) {
    MetricsRow row;
    row.run_id = cfg_.run_id;
    row.stage = "final";
    row.epoch = 0;
    row.split = "test";
    row.modality_acc = report_.test.modality_acc;
    row.fused_acc = report_.test.fused_acc;
    row.macro_f1 = report_.test.macro_f1;
    metrics_->append(row);
  }
  return report_;
}

RunReport run_strategy(const MultimodalDataset& data, const TrainConfig& cfg,
                       MetricsWriter* metrics, TrainedEnsemble* out_ensemble) {
  TrainRun run(data, cfg, metrics);
  RunReport rep = run.run();
  if (out_ensemble) *out_ensemble = std::move(run.ensemble());
  return rep;
}

}  // namespace udi

#pragma once

#include <string>
#include <vector>

namespace udi {

/// One append-only metrics record. Loss cells are train-epoch means; alpha/xi
/// mirror the controller state after the epoch. All numeric cells must be
/// finite. Wall-clock timing deliberately lives in a separate file so reruns
/// of the same config+seed produce byte-identical metrics.
struct MetricsRow {
  std::string run_id;
  std::string stage;
  int epoch = 0;
  std::string split;
  double loss_cls = 0.0;
  double loss_con = 0.0;
  double loss_com = 0.0;
  double loss_mi_nll = 0.0;
  double loss_total = 0.0;
  double alpha_con = 0.0;
  double alpha_com = 0.0;
  double xi_con = 0.0;
  double xi_com = 0.0;
  std::vector<double> modality_acc;  // one per modality, dataset order
  double fused_acc = 0.0;
  double macro_f1 = 0.0;
};

class MetricsWriter {
 public:
  MetricsWriter(std::string path, std::vector<std::string> modality_names);

  void append(const MetricsRow& row);
  const std::vector<MetricsRow>& rows() const { return rows_; }
  void flush() const;  // writes header + all rows

  static std::string format_cell(double v);

 private:
  std::string path_;
  std::vector<std::string> modality_names_;
  std::vector<MetricsRow> rows_;
};

}  // namespace udi

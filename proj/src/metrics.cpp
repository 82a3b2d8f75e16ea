#include "udi/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "udi/errors.hpp"

namespace udi {

MetricsWriter::MetricsWriter(std::string path, std::vector<std::string> modality_names)
    : path_(std::move(path)), modality_names_(std::move(modality_names)) {}

std::string MetricsWriter::format_cell(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void MetricsWriter::append(const MetricsRow& row) {
  auto check = [&](double v, const char* what) {
    if (!std::isfinite(v))
      throw NumericError("metrics row " + row.stage + "/" + std::to_string(row.epoch) +
                         ": non-finite " + what);
  };
  check(row.loss_cls, "loss_cls");
  check(row.loss_con, "loss_con");
  check(row.loss_com, "loss_com");
  check(row.loss_mi_nll, "loss_mi_nll");
  check(row.loss_total, "loss_total");
  check(row.alpha_con, "alpha_con");
  check(row.alpha_com, "alpha_com");
  check(row.xi_con, "xi_con");
  check(row.xi_com, "xi_com");
  if (row.modality_acc.size() != modality_names_.size())
    throw ContractError("metrics row has wrong modality accuracy count");
  for (double v : row.modality_acc) check(v, "modality accuracy");
  check(row.fused_acc, "fused_acc");
  check(row.macro_f1, "macro_f1");
  rows_.push_back(row);
}

void MetricsWriter::flush() const {
  if (path_.empty()) return;
  std::ofstream os(path_, std::ios::trunc);
  if (!os) throw ParseError("cannot write metrics file: " + path_);
  os << "run_id,stage,epoch,split,loss_cls,loss_con,loss_com,loss_mi_nll,loss_total,"
        "alpha_con,alpha_com,xi_con,xi_com";
  for (const auto& name : modality_names_) os << ",acc_" << name;
  os << ",acc_fused,macro_f1\n";
  for (const auto& r : rows_) {
    os << r.run_id << ',' << r.stage << ',' << r.epoch << ',' << r.split << ','
       << format_cell(r.loss_cls) << ',' << format_cell(r.loss_con) << ','
       << format_cell(r.loss_com) << ',' << format_cell(r.loss_mi_nll) << ','
       << format_cell(r.loss_total) << ',' << format_cell(r.alpha_con) << ','
       << format_cell(r.alpha_com) << ',' << format_cell(r.xi_con) << ','
       << format_cell(r.xi_com);
    for (double v : r.modality_acc) os << ',' << format_cell(v);
    os << ',' << format_cell(r.fused_acc) << ',' << format_cell(r.macro_f1) << "\n";
  }
}

}  // namespace udi

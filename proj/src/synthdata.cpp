#include "udi/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "udi/rng.hpp"

namespace udi {

namespace fs = std::filesystem;

std::string split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split split_from_name(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw ParseError("unknown split tag: '" + s + "'");
}

std::vector<int> MultimodalDataset::indices(Split s) const {
  std::vector<int> out;
  for (int i = 0; i < rows(); ++i)
    if (split[i] == s) out.push_back(i);
  return out;
}

void MultimodalDataset::validate() const {
  const int n = rows();
  if (classes <= 0) throw ContractError("dataset: class count must be positive");
  if (static_cast<int>(split.size()) != n) throw ContractError("dataset: split tags != rows");
  for (const auto& m : modalities)
    if (static_cast<int>(m.features.size()) != n * m.dim)
      throw ContractError("dataset: modality " + m.name + " feature matrix is ragged");
  for (int y : labels)
    if (y < 0 || y >= classes)
      throw ContractError("dataset: label " + std::to_string(y) + " out of range");
}

Tensor MultimodalDataset::gather(int modality, const std::vector<int>& rows_idx) const {
  const ModalityData& m = modalities.at(modality);
  std::vector<double> out(rows_idx.size() * static_cast<std::size_t>(m.dim));
  for (std::size_t r = 0; r < rows_idx.size(); ++r)
    std::copy_n(m.features.begin() + static_cast<std::size_t>(rows_idx[r]) * m.dim, m.dim,
                out.begin() + r * m.dim);
  return Tensor::from_data({static_cast<int>(rows_idx.size()), m.dim}, std::move(out));
}

Tensor MultimodalDataset::gather_onehot(const std::vector<int>& rows_idx) const {
  std::vector<double> out(rows_idx.size() * static_cast<std::size_t>(classes), 0.0);
  for (std::size_t r = 0; r < rows_idx.size(); ++r)
    out[r * classes + labels[rows_idx[r]]] = 1.0;
  return Tensor::from_data({static_cast<int>(rows_idx.size()), classes}, std::move(out));
}

std::vector<int> MultimodalDataset::gather_labels(const std::vector<int>& rows_idx) const {
  std::vector<int> out(rows_idx.size());
  for (std::size_t r = 0; r < rows_idx.size(); ++r) out[r] = labels[rows_idx[r]];
  return out;
}

void assign_stratified_split(MultimodalDataset& data, std::uint64_t seed, double train_frac,
                             double val_frac) {
  const int n = data.rows();
  data.split.assign(n, Split::Train);
  std::vector<std::vector<int>> by_class(data.classes);
  for (int i = 0; i < n; ++i) by_class[data.labels[i]].push_back(i);
  Rng rng(seed, "split");
  for (auto& rows : by_class) {
    rng.shuffle(rows);
    const int k = static_cast<int>(rows.size());
    const int n_train = static_cast<int>(std::lround(train_frac * k));
    const int n_val = static_cast<int>(std::lround(val_frac * k));
    for (int r = 0; r < k; ++r) {
      if (r < n_train)
        data.split[rows[r]] = Split::Train;
      else if (r < n_train + n_val)
        data.split[rows[r]] = Split::Val;
      else
        data.split[rows[r]] = Split::Test;
    }
  }
}

namespace {

// Class means on a sphere of the given radius, re-drawn until pairwise
// distances reach 1.2 * radius (best effort after 50 tries). Low-dimensional
// cases (d = 1, two classes) then land on opposite signs instead of
// colliding.
std::vector<double> class_means(int c, int d, double radius, Rng& rng) {
  std::vector<double> means(static_cast<std::size_t>(c) * d);
  const double min_dist = 1.2 * radius;
  for (int k = 0; k < c; ++k) {
    double* mk = means.data() + static_cast<std::size_t>(k) * d;
    double best_sep = -1.0;
    std::vector<double> best(d);
    for (int attempt = 0; attempt < 50; ++attempt) {
      double norm2 = 0.0;
      for (int j = 0; j < d; ++j) {
        mk[j] = rng.normal();
        norm2 += mk[j] * mk[j];
      }
      const double s = radius / std::sqrt(norm2 > 0 ? norm2 : 1.0);
      for (int j = 0; j < d; ++j) mk[j] *= s;
      double sep = std::numeric_limits<double>::max();
      for (int prev = 0; prev < k; ++prev) {
        const double* mp = means.data() + static_cast<std::size_t>(prev) * d;
        double dist2 = 0.0;
        for (int j = 0; j < d; ++j) dist2 += (mk[j] - mp[j]) * (mk[j] - mp[j]);
        sep = std::min(sep, std::sqrt(dist2));
      }
      if (sep > best_sep) {
        best_sep = sep;
        std::copy(mk, mk + d, best.begin());
      }
      if (sep >= min_dist) break;
    }
    std::copy(best.begin(), best.end(), mk);
  }
  return means;
}

std::vector<int> balanced_labels(int n, int c, Rng& rng) {
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) labels[i] = i % c;
  rng.shuffle(labels);
  return labels;
}

}  // namespace

MultimodalDataset gen_redundant(int n, int c, int d1, int d2, double noise, std::uint64_t seed) {
  if (d1 <= 0 || d2 <= 0 || c < 2) throw ContractError("gen_redundant: invalid dims");
  if (n < c * 10) throw ContractError("gen_redundant: need n >= 10 per class");

  // Modality 1 is strong but slow: well-separated class means at a small
  // feature scale, so its branch needs many clean gradient steps. Modality 2
  // is a fast weak copy: an amplified affine image of modality 1 plus a
  // class-independent low-rank nuisance, all noise scaled by `noise` so that
  // noise = 0 leaves m2 an exact affine function of m1. Under a joint loss
  // the amplified branch dominates early and starves the strong one, which
  // is the regime the redundant acceptance pattern checks.
  constexpr double kSlowScale = 0.08;
  constexpr double kAmplify = 4.0;
  constexpr double kMeanRadius = 5.0;
  constexpr int kNuisanceDims = 2;

  MultimodalDataset data;
  data.classes = c;
  Rng label_rng(seed, "redundant.labels");
  data.labels = balanced_labels(n, c, label_rng);

  Rng mean_rng(seed, "redundant.means");
  const auto means = class_means(c, d1, kMeanRadius, mean_rng);
  ModalityData m1{"m1", d1, std::vector<double>(static_cast<std::size_t>(n) * d1)};
  std::vector<double> raw(static_cast<std::size_t>(n) * d1);
  Rng feat_rng(seed, "redundant.m1");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d1; ++j) {
      const std::size_t idx = static_cast<std::size_t>(i) * d1 + j;
      raw[idx] = means[static_cast<std::size_t>(data.labels[i]) * d1 + j] + feat_rng.normal();
      m1.features[idx] = kSlowScale * raw[idx];
    }

  Rng map_rng(seed, "redundant.map");
  std::vector<double> lin(static_cast<std::size_t>(d1) * d2);
  const double lin_scale = 1.0 / std::sqrt(static_cast<double>(d1));
  for (double& v : lin) v = map_rng.normal() * lin_scale;
  std::vector<double> offset(d2);
  for (double& v : offset) v = map_rng.uniform(-1.0, 1.0);
  std::vector<double> nuisance_map(static_cast<std::size_t>(kNuisanceDims) * d2);
  for (double& v : nuisance_map) v = map_rng.normal();

  ModalityData m2{"m2", d2, std::vector<double>(static_cast<std::size_t>(n) * d2)};
  Rng noise_rng(seed, "redundant.m2noise");
  for (int i = 0; i < n; ++i) {
    double u[kNuisanceDims];
    for (double& v : u) v = noise_rng.normal();
    for (int j = 0; j < d2; ++j) {
      double v = offset[j];
      for (int k = 0; k < d1; ++k)
        v += raw[static_cast<std::size_t>(i) * d1 + k] * lin[static_cast<std::size_t>(k) * d2 + j];
      double nuis = 0.0;
      for (int t = 0; t < kNuisanceDims; ++t)
        nuis += u[t] * nuisance_map[static_cast<std::size_t>(t) * d2 + j];
      m2.features[static_cast<std::size_t>(i) * d2 + j] =
          kAmplify * (v + noise * (nuis + noise_rng.normal()));
    }
  }

  data.modalities = {std::move(m1), std::move(m2)};
  assign_stratified_split(data, hash_combine(seed, "redundant.split"));
  data.validate();
  return data;
}

MultimodalDataset gen_complementary(int n, int c, int d_shared, int d_specific,
                                    std::uint64_t seed, GenLatents* latents) {
  if (c < 4) throw ContractError("gen_complementary: needs c >= 4");
  if (d_specific <= 0 || d_shared < 0) throw ContractError("gen_complementary: invalid dims");
  // Factor the class count as evenly as possible: label = a * cb + b.
  int ca = static_cast<int>(std::sqrt(static_cast<double>(c)));
  while (ca > 1 && c % ca != 0) --ca;
  if (ca < 2) throw ContractError("gen_complementary: class count must factor into two >= 2");
  const int cb = c / ca;

  MultimodalDataset data;
  data.classes = c;
  Rng label_rng(seed, "comp.labels");
  data.labels = balanced_labels(n, c, label_rng);

  GenLatents local;
  GenLatents& lat = latents ? *latents : local;
  lat.factor_a.resize(n);
  lat.factor_b.resize(n);
  for (int i = 0; i < n; ++i) {
    lat.factor_a[i] = data.labels[i] / cb;
    lat.factor_b[i] = data.labels[i] % cb;
  }

  Rng mean_rng(seed, "comp.means");
  const auto means_a = class_means(ca, d_specific, 2.8, mean_rng);
  const auto means_b = class_means(cb, d_specific, 2.8, mean_rng);

  // Class-independent nuisance carried by BOTH modalities: a strong shared
  // distractor block. Each modality sees it through its own small noise so
  // the cross-modal dependence stays finite.
  lat.shared_nuisance.assign(static_cast<std::size_t>(n) * std::max(d_shared, 0), 0.0);
  Rng shared_rng(seed, "comp.shared");
  for (double& v : lat.shared_nuisance) v = 2.0 * shared_rng.normal();

  const int d = d_shared + d_specific;
  auto build = [&](const char* name, const std::vector<double>& means, const std::vector<int>& f,
                   const std::string& stream) {
    ModalityData m{name, d, std::vector<double>(static_cast<std::size_t>(n) * d)};
    Rng rng(seed, stream);
    for (int i = 0; i < n; ++i) {
      double* row = m.features.data() + static_cast<std::size_t>(i) * d;
      for (int j = 0; j < d_shared; ++j)
        row[j] = lat.shared_nuisance[static_cast<std::size_t>(i) * d_shared + j] +
                 0.3 * rng.normal();
      for (int j = 0; j < d_specific; ++j)
        row[d_shared + j] = means[static_cast<std::size_t>(f[i]) * d_specific + j] + rng.normal();
    }
    return m;
  };

  data.modalities.push_back(build("m1", means_a, lat.factor_a, "comp.m1"));
  data.modalities.push_back(build("m2", means_b, lat.factor_b, "comp.m2"));
  assign_stratified_split(data, hash_combine(seed, "comp.split"));
  data.validate();
  return data;
}

MultimodalDataset gen_imbalanced(int n, int c, double snr1, double snr2, std::uint64_t seed) {
  if (snr1 < 0.0 || snr2 < 0.0) throw ContractError("gen_imbalanced: SNR must be >= 0");
  if (c < 2 || n < c * 10) throw ContractError("gen_imbalanced: invalid params");
  const int d = 16;

  MultimodalDataset data;
  data.classes = c;
  Rng label_rng(seed, "imb.labels");
  data.labels = balanced_labels(n, c, label_rng);

  Rng mean_rng(seed, "imb.means");
  const auto means = class_means(c, d, 1.0, mean_rng);

  auto build = [&](const char* name, double snr, const std::string& stream) {
    ModalityData m{name, d, std::vector<double>(static_cast<std::size_t>(n) * d)};
    Rng rng(seed, stream);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j)
        m.features[static_cast<std::size_t>(i) * d + j] =
            snr * means[static_cast<std::size_t>(data.labels[i]) * d + j] + rng.normal();
    return m;
  };

  data.modalities.push_back(build("m1", snr1, "imb.m1"));
  data.modalities.push_back(build("m2", snr2, "imb.m2"));
  assign_stratified_split(data, hash_combine(seed, "imb.split"));
  data.validate();
  return data;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  cells.push_back(cur);
  return cells;
}

double parse_cell(const std::string& cell, const std::string& file, int line, int col) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(cell, &pos);
    if (pos != cell.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw ParseError(file + ":" + std::to_string(line) + ": column " + std::to_string(col + 1) +
                     ": unparseable cell '" + cell + "'");
  }
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open " + path);
  CsvTable t;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() && is.eof()) break;
    auto cells = split_line(line);
    if (line_no == 1) {
      t.header = std::move(cells);
    } else {
      if (cells.size() != t.header.size())
        throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                         std::to_string(t.header.size()) + " cells, got " +
                         std::to_string(cells.size()));
      t.rows.push_back(std::move(cells));
    }
  }
  return t;
}

}  // namespace

MultimodalDataset load_csv(const CsvSpec& spec) {
  MultimodalDataset data;

  const CsvTable label_table = read_csv(spec.labels_path);
  if (label_table.header.size() != 1 || label_table.header[0] != "label")
    throw ParseError(spec.labels_path + ": expected single 'label' header");
  const int n = static_cast<int>(label_table.rows.size());
  data.labels.resize(n);
  int max_label = 0;
  for (int i = 0; i < n; ++i) {
    const double v = parse_cell(label_table.rows[i][0], spec.labels_path, i + 2, 0);
    const int y = static_cast<int>(v);
    if (v != y || y < 0)
      throw ParseError(spec.labels_path + ":" + std::to_string(i + 2) +
                       ": labels must be nonnegative integers");
    data.labels[i] = y;
    max_label = std::max(max_label, y);
  }
  data.classes = max_label + 1;

  for (const auto& [name, path] : spec.modalities) {
    const CsvTable t = read_csv(path);
    if (static_cast<int>(t.rows.size()) != n)
      throw ParseError(path + ": has " + std::to_string(t.rows.size()) + " rows but " +
                       spec.labels_path + " has " + std::to_string(n));
    ModalityData m;
    m.name = name;
    m.dim = static_cast<int>(t.header.size());
    m.features.resize(static_cast<std::size_t>(n) * m.dim);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m.dim; ++j)
        m.features[static_cast<std::size_t>(i) * m.dim + j] =
            parse_cell(t.rows[i][j], path, i + 2, j);
    data.modalities.push_back(std::move(m));
  }

  if (spec.split_path) {
    const CsvTable t = read_csv(*spec.split_path);
    if (t.header.size() != 1 || t.header[0] != "split")
      throw ParseError(*spec.split_path + ": expected single 'split' header");
    if (static_cast<int>(t.rows.size()) != n)
      throw ParseError(*spec.split_path + ": row count mismatch");
    data.split.resize(n);
    for (int i = 0; i < n; ++i) data.split[i] = split_from_name(t.rows[i][0]);
  } else {
    assign_stratified_split(data, spec.split_seed);
  }

  if (spec.standardize) {
    const auto train_idx = data.indices(Split::Train);
    if (train_idx.empty()) throw ContractError("load_csv: no training rows to standardize on");
    for (auto& m : data.modalities) {
      for (int j = 0; j < m.dim; ++j) {
        double mean = 0.0;
        for (int i : train_idx) mean += m.features[static_cast<std::size_t>(i) * m.dim + j];
        mean /= train_idx.size();
        double var = 0.0;
        for (int i : train_idx) {
          const double d = m.features[static_cast<std::size_t>(i) * m.dim + j] - mean;
          var += d * d;
        }
        const double sd = std::sqrt(var / train_idx.size());
        const double inv = sd > 1e-12 ? 1.0 / sd : 1.0;
        for (int i = 0; i < data.rows(); ++i) {
          double& v = m.features[static_cast<std::size_t>(i) * m.dim + j];
          v = (v - mean) * inv;
        }
      }
    }
  }

  data.validate();
  return data;
}

void save_dataset_csv(const MultimodalDataset& data, const std::string& dir, bool force) {
  fs::create_directories(dir);
  auto open_out = [&](const std::string& file) {
    const fs::path p = fs::path(dir) / file;
    if (fs::exists(p) && !force)
      throw ContractError("refusing to overwrite " + p.string() + " without force");
    std::ofstream os(p);
    if (!os) throw ParseError("cannot write " + p.string());
    return os;
  };

  char buf[64];
  for (const auto& m : data.modalities) {
    std::ofstream os = open_out(m.name + ".csv");
    for (int j = 0; j < m.dim; ++j) os << (j ? ",f" : "f") << j;
    os << "\n";
    for (int i = 0; i < data.rows(); ++i) {
      for (int j = 0; j < m.dim; ++j) {
        std::snprintf(buf, sizeof(buf), "%.17g", m.features[static_cast<std::size_t>(i) * m.dim + j]);
        os << (j ? "," : "") << buf;
      }
      os << "\n";
    }
  }

  std::ofstream labels = open_out("labels.csv");
  labels << "label\n";
  for (int y : data.labels) labels << y << "\n";

  std::ofstream split = open_out("split.csv");
  split << "split\n";
  for (Split s : data.split) split << split_name(s) << "\n";
}

}  // namespace udi

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "udi/tensor.hpp"

namespace udi {

enum class Split { Train, Val, Test };

std::string split_name(Split s);
Split split_from_name(const std::string& s);

struct ModalityData {
  std::string name;
  int dim = 0;
  std::vector<double> features;  // rows x dim, row-major
};

/// Per-modality feature matrices plus integer class labels; one row per
/// sample across all modalities. Regenerable bit-exactly from
/// (generator id, params, seed).
struct MultimodalDataset {
  std::vector<ModalityData> modalities;
  std::vector<int> labels;
  int classes = 0;
  std::vector<Split> split;

  int rows() const { return static_cast<int>(labels.size()); }
  int modality_count() const { return static_cast<int>(modalities.size()); }
  const ModalityData& modality(int m) const { return modalities.at(m); }
  std::vector<int> indices(Split s) const;
  void validate() const;

  /// Constant tensor of the given rows for one modality.
  Tensor gather(int modality, const std::vector<int>& rows) const;
  /// n x c one-hot matrix for the given rows.
  Tensor gather_onehot(const std::vector<int>& rows) const;
  std::vector<int> gather_labels(const std::vector<int>& rows) const;
};

/// Ground truth kept aside for tests (latent factors behind the generators).
struct GenLatents {
  std::vector<int> factor_a;
  std::vector<int> factor_b;
  std::vector<double> shared_nuisance;  // rows x d_shared when present
};

/// Strong modality 1 (Gaussian mixture per class) plus a modality 2 that is a
/// fixed affine image of modality 1 with class-independent offsets and added
/// noise: informative only through modality 1.
MultimodalDataset gen_redundant(int n, int c, int d1, int d2, double noise, std::uint64_t seed);

/// Label is the product of two independent latent factors; modality 1
/// observes factor A, modality 2 observes factor B, both padded with a shared
/// class-independent nuisance block of width d_shared. Neither modality
/// suffices alone; together they do.
MultimodalDataset gen_complementary(int n, int c, int d_shared, int d_specific,
                                    std::uint64_t seed, GenLatents* latents = nullptr);

/// Both modalities carry the same latent class signal at different
/// signal-to-noise ratios.
MultimodalDataset gen_imbalanced(int n, int c, double snr1, double snr2, std::uint64_t seed);

struct CsvSpec {
  std::vector<std::pair<std::string, std::string>> modalities;  // name -> path
  std::string labels_path;
  std::optional<std::string> split_path;  // absent: stratified split from seed
  bool standardize = true;                // train-split statistics only
  std::uint64_t split_seed = 1;
};

MultimodalDataset load_csv(const CsvSpec& spec);

/// Writes <name>.csv per modality plus labels.csv and split.csv into dir.
/// Refuses to overwrite existing files unless force.
void save_dataset_csv(const MultimodalDataset& data, const std::string& dir, bool force);

/// Stratified split with the configured proportions, within +-1 sample per
/// class of exact.
void assign_stratified_split(MultimodalDataset& data, std::uint64_t seed,
                             double train_frac = 0.70, double val_frac = 0.15);

}  // namespace udi

#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "udi/tensor.hpp"

namespace udi {

struct ParamEntry {
  std::string key;
  Tensor value;                    // leaf tensor, requires_grad
  std::vector<double> velocity;    // SGD momentum buffer, same length as value
};

/// Ordered collection of named parameter tensors. Iteration follows
/// insertion order and is stable across runs given the same construction
/// sequence; the controller's key intersections rely on that.
class ParamSet {
 public:
  Tensor& add(const std::string& key, Tensor value);
  bool contains(const std::string& key) const { return index_.count(key) > 0; }
  Tensor& at(const std::string& key);
  const Tensor& at(const std::string& key) const;
  ParamEntry& entry(const std::string& key);

  std::vector<std::string> keys() const;
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

  std::vector<ParamEntry>& entries() { return entries_; }
  const std::vector<ParamEntry>& entries() const { return entries_; }

  void zero_grads();

  /// FNV-1a over keys, shapes and raw value bytes; the freeze-contract
  /// checks compare these.
  std::uint64_t checksum() const;

  /// Deep copy of values (graph-free) and velocities.
  ParamSet clone() const;
  /// Restore values and velocities from a clone with identical keys/shapes.
  void restore(const ParamSet& snapshot);

 private:
  std::vector<ParamEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace udi

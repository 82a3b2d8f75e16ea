#include "udi/paramset.hpp"

#include <cstring>

namespace udi {

Tensor& ParamSet::add(const std::string& key, Tensor value) {
  if (contains(key)) throw ContractError("duplicate parameter key: " + key);
  if (!value.requires_grad())
    throw ContractError("parameter " + key + " must be a differentiable leaf");
  index_[key] = entries_.size();
  entries_.push_back({key, std::move(value), {}});
  ParamEntry& e = entries_.back();
  e.velocity.assign(e.value.size(), 0.0);
  return e.value;
}

Tensor& ParamSet::at(const std::string& key) {
  auto it = index_.find(key);
  if (it == index_.end()) throw ContractError("unknown parameter key: " + key);
  return entries_[it->second].value;
}

const Tensor& ParamSet::at(const std::string& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) throw ContractError("unknown parameter key: " + key);
  return entries_[it->second].value;
}

ParamEntry& ParamSet::entry(const std::string& key) {
  auto it = index_.find(key);
  if (it == index_.end()) throw ContractError("unknown parameter key: " + key);
  return entries_[it->second];
}

std::vector<std::string> ParamSet::keys() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.key);
  return out;
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

void ParamSet::zero_grads() {
  for (auto& e : entries_) e.value.zero_grad();
}

std::uint64_t ParamSet::checksum() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* p, std::size_t len) {
    const unsigned char* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& e : entries_) {
    mix(e.key.data(), e.key.size());
    for (int d : e.value.shape()) mix(&d, sizeof(d));
    mix(e.value.data().data(), e.value.size() * sizeof(double));
  }
  return h;
}

ParamSet ParamSet::clone() const {
  ParamSet out;
  for (const auto& e : entries_) {
    Tensor copy = Tensor::param(e.value.shape(), {e.value.data().begin(), e.value.data().end()});
    out.add(e.key, std::move(copy));
    out.entries_.back().velocity = e.velocity;
  }
  return out;
}

void ParamSet::restore(const ParamSet& snapshot) {
  if (snapshot.size() != size()) throw ContractError("restore: parameter set size mismatch");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const ParamEntry& src = snapshot.entries_[i];
    ParamEntry& dst = entries_[i];
    if (src.key != dst.key || src.value.shape() != dst.value.shape())
      throw ContractError("restore: mismatched entry " + src.key);
    std::memcpy(dst.value.mutable_data().data(), src.value.data().data(),
                src.value.size() * sizeof(double));
    dst.velocity = src.velocity;
  }
}

}  // namespace udi

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "spad/errors.hpp"

namespace spad {

/// One named parameter array, row-major over `shape`.
template <typename T>
struct ParamArray {
  std::string name;
  std::vector<int> shape;
  std::vector<T> values;

  friend bool operator==(const ParamArray&, const ParamArray&) = default;
};

/// Ordered collection of named arrays. Used for model weights, gradients and
/// optimizer buffers, which always share one layout.
template <typename T>
class ParamSet {
 public:
  ParamSet() = default;

  std::size_t add(std::string name, std::vector<int> shape) {
    std::size_t count = 1;
    for (int d : shape) count *= static_cast<std::size_t>(d);
    arrays_.push_back({std::move(name), std::move(shape), std::vector<T>(count, T{0})});
    return arrays_.size() - 1;
  }

  std::size_t size() const noexcept { return arrays_.size(); }
  ParamArray<T>& operator[](std::size_t i) { return arrays_[i]; }
  const ParamArray<T>& operator[](std::size_t i) const { return arrays_[i]; }
  auto begin() { return arrays_.begin(); }
  auto end() { return arrays_.end(); }
  auto begin() const { return arrays_.begin(); }
  auto end() const { return arrays_.end(); }

  const ParamArray<T>* find(const std::string& name) const {
    for (const auto& a : arrays_)
      if (a.name == name) return &a;
    return nullptr;
  }

  std::size_t total_count() const noexcept {
    std::size_t n = 0;
    for (const auto& a : arrays_) n += a.values.size();
    return n;
  }

  /// Same names and shapes, every value zero.
  ParamSet zeros_like() const {
    ParamSet out = *this;
    for (auto& a : out.arrays_) std::fill(a.values.begin(), a.values.end(), T{0});
    return out;
  }

  bool same_layout(const ParamSet& other) const noexcept {
    if (arrays_.size() != other.arrays_.size()) return false;
    for (std::size_t i = 0; i < arrays_.size(); ++i) {
      if (arrays_[i].name != other.arrays_[i].name || arrays_[i].shape != other.arrays_[i].shape)
        return false;
    }
    return true;
  }

  void require_same_layout(const ParamSet& other, const char* what) const {
    if (!same_layout(other)) throw ShapeError(std::string(what) + ": parameter layout mismatch");
  }

  void add_scaled(const ParamSet& other, T scale) {
    require_same_layout(other, "add_scaled");
    for (std::size_t i = 0; i < arrays_.size(); ++i) {
      auto& dst = arrays_[i].values;
      const auto& src = other.arrays_[i].values;
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += scale * src[k];
    }
  }

  bool all_finite() const noexcept {
    for (const auto& a : arrays_)
      for (T v : a.values)
        if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const ParamSet&, const ParamSet&) = default;

 private:
  std::vector<ParamArray<T>> arrays_;
};

}  // namespace spad

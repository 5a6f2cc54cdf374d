#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "spad/errors.hpp"

namespace spad {

/// Dense channel-major (C, H, W) tensor holding one sample.
///
/// Images are described as H x W x C in the interfaces; storage is planar so
/// each channel is a contiguous H*W block, which is what the convolution
/// kernels consume directly.
template <typename T>
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(int channels, int height, int width, T fill = T{0})
      : channels_(channels), height_(height), width_(width),
        data_(static_cast<std::size_t>(channels) * height * width, fill) {
    if (channels < 0 || height < 0 || width < 0) throw ShapeError("negative tensor extent");
  }

  int channels() const noexcept { return channels_; }
  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(height_) * width_; }

  T& operator()(int c, int y, int x) noexcept { return data_[(c * plane()) + y * width_ + x]; }
  const T& operator()(int c, int y, int x) const noexcept {
    return data_[(c * plane()) + y * width_ + x];
  }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  bool same_shape(const Tensor3& other) const noexcept {
    return channels_ == other.channels_ && height_ == other.height_ && width_ == other.width_;
  }

  std::string shape_string() const {
    return "(" + std::to_string(height_) + "x" + std::to_string(width_) + "x" +
           std::to_string(channels_) + ")";
  }

  template <typename U>
  Tensor3<U> cast() const {
    Tensor3<U> out(channels_, height_, width_);
    for (std::size_t i = 0; i < data_.size(); ++i) out.data()[i] = static_cast<U>(data_[i]);
    return out;
  }

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

/// Preprocessed network input: values in [0,1], RGB, square side.
using ImageTensor = Tensor3<float>;

/// Throws DataError unless every value is finite and inside [0,1].
void validate_image(const ImageTensor& image);

}  // namespace spad

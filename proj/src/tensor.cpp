#include "spad/tensor.hpp"

#include <cmath>

namespace spad {

void validate_image(const ImageTensor& image) {
  for (std::size_t i = 0; i < image.size(); ++i) {
    const float v = image.data()[i];
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f)
      throw DataError("image value " + std::to_string(v) + " at flat index " + std::to_string(i) +
                      " is outside [0,1]");
  }
}

}  // namespace spad

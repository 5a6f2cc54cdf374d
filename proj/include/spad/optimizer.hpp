#pragma once

#include "spad/params.hpp"

namespace spad {

/// SGD with classical momentum and L2 weight decay folded into the gradient:
///   g <- g + weight_decay * p;  buf <- momentum * buf + g;  p <- p - lr * buf
/// All three sets must share one layout.
template <typename T>
void sgd_update(ParamSet<T>& params, const ParamSet<T>& grads, ParamSet<T>& buffers, double lr,
                double momentum, double weight_decay) {
  params.require_same_layout(grads, "sgd_update(grads)");
  params.require_same_layout(buffers, "sgd_update(buffers)");
  const T lr_t = static_cast<T>(lr);
  const T mom_t = static_cast<T>(momentum);
  const T wd_t = static_cast<T>(weight_decay);
  for (std::size_t a = 0; a < params.size(); ++a) {
    auto& p = params[a].values;
    const auto& g = grads[a].values;
    auto& buf = buffers[a].values;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const T step = g[i] + wd_t * p[i];
      buf[i] = mom_t * buf[i] + step;
      p[i] -= lr_t * buf[i];
    }
  }
}

}  // namespace spad

#include "spad/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Core>

#include "spad/parallel.hpp"

namespace spad {

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

constexpr std::size_t kMaxGradientShards = 8;

// Unfolds `image` (C, H, W) into columns of shape (C*k*k, out_h*out_w).
template <typename T>
void im2col(const T* image, int channels, int height, int width, int kernel, int stride, int pad,
            int out_h, int out_w, T* cols) {
  const int plane = out_h * out_w;
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        T* row = cols + static_cast<std::size_t>((c * kernel + ky) * kernel + kx) * plane;
        const T* src = image + static_cast<std::size_t>(c) * height * width;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          T* dst = row + oy * out_w;
          if (iy < 0 || iy >= height) {
            std::fill(dst, dst + out_w, T{0});
            continue;
          }
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            dst[ox] = (ix >= 0 && ix < width) ? src[iy * width + ix] : T{0};
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters columns back, accumulating into `image`.
template <typename T>
void col2im(const T* cols, int channels, int height, int width, int kernel, int stride, int pad,
            int out_h, int out_w, T* image) {
  const int plane = out_h * out_w;
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        const T* row = cols + static_cast<std::size_t>((c * kernel + ky) * kernel + kx) * plane;
        T* dst = image + static_cast<std::size_t>(c) * height * width;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= height) continue;
          const T* src = row + oy * out_w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < width) dst[iy * width + ix] += src[ox];
          }
        }
      }
    }
  }
}

int conv_out(int in, int kernel, int stride, int pad) { return (in + 2 * pad - kernel) / stride + 1; }
int deconv_out(int in, int kernel, int stride, int pad) { return (in - 1) * stride - 2 * pad + kernel; }

}  // namespace

// ---------------------------------------------------------------------------
// Architecture descriptor

namespace {

int stride2_blocks_for(int side) {
  int n = 0;
  while (n < 5 && side % 2 == 0 && side / 2 >= 2) {
    side /= 2;
    ++n;
  }
  return n;
}

}  // namespace

ArchitectureDescriptor ArchitectureDescriptor::standard(int input_side, int input_channels) {
  return with_widths(input_side, input_channels, {32, 64, 128, 256, 256, 128, 64});
}

ArchitectureDescriptor ArchitectureDescriptor::with_widths(int input_side, int input_channels,
                                                           const std::vector<int>& widths) {
  ArchitectureDescriptor d;
  d.input_side = input_side;
  d.input_channels = input_channels;
  const int downsampling = stride2_blocks_for(input_side);
  for (std::size_t i = 0; i < widths.size(); ++i)
    d.blocks.push_back({widths[i], static_cast<int>(i) < downsampling ? 2 : 1});
  d.validate();
  return d;
}

void ArchitectureDescriptor::validate() const {
  if (input_side <= 0 || input_channels <= 0) throw ShapeError("input side and channels must be positive");
  if (blocks.empty()) throw ShapeError("architecture needs at least one block");
  if (norm_groups <= 0) throw ShapeError("norm_groups must be positive");
  if (!(norm_epsilon > 0.0)) throw ShapeError("norm_epsilon must be positive");
  int side = input_side;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    if (b.out_channels <= 0) throw ShapeError("block " + std::to_string(i) + " has no channels");
    if (b.stride != 1 && b.stride != 2)
      throw ShapeError("block " + std::to_string(i) + ": stride must be 1 or 2");
    if (b.stride == 2 && side % 2 != 0)
      throw ShapeError("input side " + std::to_string(input_side) +
                       " is incompatible with the downsampling chain (odd side " +
                       std::to_string(side) + " at block " + std::to_string(i) + ")");
    side = conv_out(side, b.kernel(), b.stride, b.padding());
    if (side < 1) throw ShapeError("downsampling chain collapses below 1 pixel");
  }
}

int ArchitectureDescriptor::latent_side() const {
  int side = input_side;
  for (const auto& b : blocks) side = conv_out(side, b.kernel(), b.stride, b.padding());
  return side;
}

int ArchitectureDescriptor::latent_channels() const { return blocks.back().out_channels; }

int ArchitectureDescriptor::groups_for(int channels) const { return std::gcd(channels, norm_groups); }

nlohmann::json ArchitectureDescriptor::to_json() const {
  nlohmann::json blocks_json = nlohmann::json::array();
  for (const auto& b : blocks)
    blocks_json.push_back({{"out_channels", b.out_channels}, {"stride", b.stride}, {"kernel", b.kernel()}});
  return {{"input_side", input_side},   {"input_channels", input_channels},
          {"blocks", blocks_json},      {"norm_groups", norm_groups},
          {"leaky_slope", leaky_slope}, {"norm_epsilon", norm_epsilon},
          {"output_activation", "sigmoid"}};
}

ArchitectureDescriptor ArchitectureDescriptor::from_json(const nlohmann::json& j) {
  ArchitectureDescriptor d;
  try {
    d.input_side = j.at("input_side").get<int>();
    d.input_channels = j.at("input_channels").get<int>();
    d.norm_groups = j.at("norm_groups").get<int>();
    d.leaky_slope = j.at("leaky_slope").get<double>();
    d.norm_epsilon = j.at("norm_epsilon").get<double>();
    for (const auto& b : j.at("blocks"))
      d.blocks.push_back({b.at("out_channels").get<int>(), b.at("stride").get<int>()});
  } catch (const nlohmann::json::exception& e) {
    throw ShapeError(std::string("malformed architecture descriptor: ") + e.what());
  }
  d.validate();
  return d;
}

// ---------------------------------------------------------------------------
// Autoencoder

template <typename T>
ConvAutoencoder<T>::ConvAutoencoder(ArchitectureDescriptor arch) : arch_(std::move(arch)) {
  arch_.validate();
  build_layout();
}

template <typename T>
void ConvAutoencoder<T>::build_layout() {
  const auto& blocks = arch_.blocks;
  const std::size_t n = blocks.size();
  std::vector<int> widths{arch_.input_channels};
  for (const auto& b : blocks) widths.push_back(b.out_channels);

  for (std::size_t i = 0; i < n; ++i) {
    const auto& b = blocks[i];
    const std::string prefix = "encoder." + std::to_string(i);
    Layer l{};
    l.in_channels = widths[i];
    l.out_channels = widths[i + 1];
    l.kernel = b.kernel();
    l.stride = b.stride;
    l.padding = b.padding();
    l.transposed = false;
    l.normalized = true;
    l.weight = params_.add(prefix + ".conv.weight", {l.out_channels, l.in_channels, l.kernel, l.kernel});
    l.bias = params_.add(prefix + ".conv.bias", {l.out_channels});
    l.gamma = params_.add(prefix + ".norm.weight", {l.out_channels});
    l.beta = params_.add(prefix + ".norm.bias", {l.out_channels});
    layers_.push_back(l);
  }
  // Decoder block j undoes encoder block n-1-j.
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t mirror = n - 1 - j;
    const auto& b = blocks[mirror];
    const std::string prefix = "decoder." + std::to_string(j);
    Layer l{};
    l.in_channels = widths[mirror + 1];
    l.out_channels = widths[mirror];
    l.kernel = b.kernel();
    l.stride = b.stride;
    l.padding = b.padding();
    l.transposed = true;
    l.normalized = j + 1 < n;
    l.weight = params_.add(prefix + ".deconv.weight", {l.in_channels, l.out_channels, l.kernel, l.kernel});
    l.bias = params_.add(prefix + ".deconv.bias", {l.out_channels});
    if (l.normalized) {
      l.gamma = params_.add(prefix + ".norm.weight", {l.out_channels});
      l.beta = params_.add(prefix + ".norm.bias", {l.out_channels});
    }
    layers_.push_back(l);
  }
}

template <typename T>
ConvAutoencoder<T> ConvAutoencoder<T>::initialized(ArchitectureDescriptor arch, std::uint64_t seed) {
  ConvAutoencoder model(std::move(arch));
  std::mt19937_64 rng(seed);
  for (const auto& l : model.layers_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.in_channels * l.kernel * l.kernel));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& w : model.params_[l.weight].values) w = static_cast<T>(dist(rng));
    for (auto& b : model.params_[l.bias].values) b = static_cast<T>(dist(rng));
    if (l.normalized) {
      auto& g = model.params_[l.gamma].values;
      std::fill(g.begin(), g.end(), T{1});
    }
  }
  return model;
}

template <typename T>
void ConvAutoencoder<T>::set_params(ParamSet<T> params) {
  params_.require_same_layout(params, "set_params");
  params_ = std::move(params);
}

template <typename T>
void ConvAutoencoder<T>::check_input(const Tensor3<T>& x) const {
  if (x.channels() != arch_.input_channels || x.height() != arch_.input_side ||
      x.width() != arch_.input_side) {
    throw ShapeError("input shape " + x.shape_string() + " does not match configured input (" +
                     std::to_string(arch_.input_side) + "x" + std::to_string(arch_.input_side) + "x" +
                     std::to_string(arch_.input_channels) + ")");
  }
}

template <typename T>
void ConvAutoencoder<T>::check_latent(const Tensor3<T>& z) const {
  const int side = arch_.latent_side();
  if (z.channels() != arch_.latent_channels() || z.height() != side || z.width() != side) {
    throw ShapeError("latent shape " + z.shape_string() + " does not match declared latent (" +
                     std::to_string(side) + "x" + std::to_string(side) + "x" +
                     std::to_string(arch_.latent_channels()) + ")");
  }
}

template <typename T>
Tensor3<T> ConvAutoencoder<T>::run(const Tensor3<T>& x, std::size_t first, std::size_t last,
                                   ForwardTape<T>* tape) const {
  Tensor3<T> current = x;
  for (std::size_t li = first; li < last; ++li) {
    const Layer& l = layers_[li];
    const auto& weight = params_[l.weight].values;
    const auto& bias = params_[l.bias].values;
    const int in_h = current.height();
    const int in_w = current.width();
    Tensor3<T> out;
    if (!l.transposed) {
      const int oh = conv_out(in_h, l.kernel, l.stride, l.padding);
      const int ow = conv_out(in_w, l.kernel, l.stride, l.padding);
      const int k_rows = l.in_channels * l.kernel * l.kernel;
      std::vector<T> cols(static_cast<std::size_t>(k_rows) * oh * ow);
      im2col(current.data(), l.in_channels, in_h, in_w, l.kernel, l.stride, l.padding, oh, ow, cols.data());
      out = Tensor3<T>(l.out_channels, oh, ow);
      MatMap<T> o(out.data(), l.out_channels, oh * ow);
      o.noalias() = ConstMatMap<T>(weight.data(), l.out_channels, k_rows) *
                    ConstMatMap<T>(cols.data(), k_rows, oh * ow);
    } else {
      const int oh = deconv_out(in_h, l.kernel, l.stride, l.padding);
      const int ow = deconv_out(in_w, l.kernel, l.stride, l.padding);
      const int k_rows = l.out_channels * l.kernel * l.kernel;
      RowMatrix<T> cols = ConstMatMap<T>(weight.data(), l.in_channels, k_rows).transpose() *
                          ConstMatMap<T>(current.data(), l.in_channels, in_h * in_w);
      out = Tensor3<T>(l.out_channels, oh, ow);
      col2im(cols.data(), l.out_channels, oh, ow, l.kernel, l.stride, l.padding, in_h, in_w, out.data());
    }
    const std::size_t plane = out.plane();
    for (int c = 0; c < l.out_channels; ++c) {
      T* p = out.data() + c * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] += bias[c];
    }

    typename ForwardTape<T>::Step step;
    if (l.normalized) {
      const auto& gamma = params_[l.gamma].values;
      const auto& beta = params_[l.beta].values;
      const int groups = arch_.groups_for(l.out_channels);
      const int per_group = l.out_channels / groups;
      const std::size_t count = static_cast<std::size_t>(per_group) * plane;
      Tensor3<T> normed(l.out_channels, out.height(), out.width());
      step.inv_std.resize(groups);
      const T slope = static_cast<T>(arch_.leaky_slope);
      for (int g = 0; g < groups; ++g) {
        const T* src = out.data() + static_cast<std::size_t>(g) * count;
        double mean = 0.0;
        for (std::size_t i = 0; i < count; ++i) mean += src[i];
        mean /= static_cast<double>(count);
        double var = 0.0;
        for (std::size_t i = 0; i < count; ++i) {
          const double d = src[i] - mean;
          var += d * d;
        }
        var /= static_cast<double>(count);
        const T inv = static_cast<T>(1.0 / std::sqrt(var + arch_.norm_epsilon));
        step.inv_std[g] = inv;
        T* nd = normed.data() + static_cast<std::size_t>(g) * count;
        for (std::size_t i = 0; i < count; ++i) nd[i] = (src[i] - static_cast<T>(mean)) * inv;
      }
      for (int c = 0; c < l.out_channels; ++c) {
        const T* nd = normed.data() + c * plane;
        T* o = out.data() + c * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const T pre = gamma[c] * nd[i] + beta[c];
          o[i] = pre > T{0} ? pre : slope * pre;
        }
      }
      if (tape) step.normed = std::move(normed);
    } else {
      for (auto& v : out.values()) v = T{1} / (T{1} + std::exp(-v));
    }
    if (tape) {
      step.output = out;
      tape->steps.push_back(std::move(step));
    }
    current = std::move(out);
  }
  return current;
}

template <typename T>
Tensor3<T> ConvAutoencoder<T>::encode(const Tensor3<T>& x) const {
  check_input(x);
  return run(x, 0, arch_.blocks.size(), nullptr);
}

template <typename T>
Tensor3<T> ConvAutoencoder<T>::decode(const Tensor3<T>& z) const {
  check_latent(z);
  return run(z, arch_.blocks.size(), layers_.size(), nullptr);
}

template <typename T>
Tensor3<T> ConvAutoencoder<T>::reconstruct(const Tensor3<T>& x) const {
  return decode(encode(x));
}

template <typename T>
ForwardTape<T> ConvAutoencoder<T>::forward_tape(const Tensor3<T>& x) const {
  check_input(x);
  ForwardTape<T> tape;
  tape.input = x;
  tape.steps.reserve(layers_.size());
  run(x, 0, layers_.size(), &tape);
  tape.loss = per_sample_mse(x, tape.reconstruction());
  return tape;
}

template <typename T>
void ConvAutoencoder<T>::backward(const ForwardTape<T>& tape, T scale, ParamSet<T>& grads) const {
  params_.require_same_layout(grads, "backward");
  if (tape.steps.size() != layers_.size()) throw ShapeError("tape does not belong to this model");

  // dL/dx_hat for the mean squared error.
  const Tensor3<T>& xhat = tape.reconstruction();
  Tensor3<T> delta(xhat.channels(), xhat.height(), xhat.width());
  const T factor = scale * T{2} / static_cast<T>(xhat.size());
  for (std::size_t i = 0; i < xhat.size(); ++i)
    delta.data()[i] = factor * (xhat.data()[i] - tape.input.data()[i]);

  for (std::size_t li = layers_.size(); li-- > 0;) {
    const Layer& l = layers_[li];
    const auto& step = tape.steps[li];
    const Tensor3<T>& input = li == 0 ? tape.input : tape.steps[li - 1].output;
    const Tensor3<T>& out = step.output;
    const std::size_t plane = out.plane();

    // delta: gradient w.r.t. this layer's output -> gradient w.r.t. conv output.
    if (l.normalized) {
      const auto& gamma = params_[l.gamma].values;
      auto& dgamma = grads[l.gamma].values;
      auto& dbeta = grads[l.beta].values;
      const T slope = static_cast<T>(arch_.leaky_slope);
      for (std::size_t i = 0; i < out.size(); ++i)
        if (!(out.data()[i] > T{0})) delta.data()[i] *= slope;
      for (int c = 0; c < l.out_channels; ++c) {
        const T* d = delta.data() + c * plane;
        const T* nd = step.normed.data() + c * plane;
        T gsum = 0, bsum = 0;
        for (std::size_t i = 0; i < plane; ++i) {
          gsum += d[i] * nd[i];
          bsum += d[i];
        }
        dgamma[c] += gsum;
        dbeta[c] += bsum;
        T* dm = delta.data() + c * plane;
        for (std::size_t i = 0; i < plane; ++i) dm[i] *= gamma[c];
      }
      const int groups = arch_.groups_for(l.out_channels);
      const std::size_t count = static_cast<std::size_t>(l.out_channels / groups) * plane;
      for (int g = 0; g < groups; ++g) {
        T* d = delta.data() + static_cast<std::size_t>(g) * count;
        const T* nd = step.normed.data() + static_cast<std::size_t>(g) * count;
        T sum_d = 0, sum_dn = 0;
        for (std::size_t i = 0; i < count; ++i) {
          sum_d += d[i];
          sum_dn += d[i] * nd[i];
        }
        const T n = static_cast<T>(count);
        const T inv = step.inv_std[g];
        for (std::size_t i = 0; i < count; ++i) d[i] = inv / n * (n * d[i] - sum_d - nd[i] * sum_dn);
      }
    } else {
      for (std::size_t i = 0; i < out.size(); ++i) {
        const T y = out.data()[i];
        delta.data()[i] *= y * (T{1} - y);
      }
    }

    auto& dbias = grads[l.bias].values;
    for (int c = 0; c < l.out_channels; ++c) {
      const T* d = delta.data() + c * plane;
      T s = 0;
      for (std::size_t i = 0; i < plane; ++i) s += d[i];
      dbias[c] += s;
    }

    const auto& weight = params_[l.weight].values;
    auto& dweight = grads[l.weight].values;
    const int in_h = input.height();
    const int in_w = input.width();
    Tensor3<T> dinput(l.in_channels, in_h, in_w);
    if (!l.transposed) {
      const int oh = out.height();
      const int ow = out.width();
      const int k_rows = l.in_channels * l.kernel * l.kernel;
      std::vector<T> cols(static_cast<std::size_t>(k_rows) * oh * ow);
      im2col(input.data(), l.in_channels, in_h, in_w, l.kernel, l.stride, l.padding, oh, ow, cols.data());
      ConstMatMap<T> d(delta.data(), l.out_channels, oh * ow);
      ConstMatMap<T> colm(cols.data(), k_rows, oh * ow);
      MatMap<T>(dweight.data(), l.out_channels, k_rows).noalias() += d * colm.transpose();
      if (li > 0) {
        RowMatrix<T> dcols = ConstMatMap<T>(weight.data(), l.out_channels, k_rows).transpose() * d;
        col2im(dcols.data(), l.in_channels, in_h, in_w, l.kernel, l.stride, l.padding, oh, ow,
               dinput.data());
      }
    } else {
      const int k_rows = l.out_channels * l.kernel * l.kernel;
      std::vector<T> dcols(static_cast<std::size_t>(k_rows) * in_h * in_w);
      im2col(delta.data(), l.out_channels, out.height(), out.width(), l.kernel, l.stride, l.padding,
             in_h, in_w, dcols.data());
      ConstMatMap<T> dc(dcols.data(), k_rows, in_h * in_w);
      ConstMatMap<T> x(input.data(), l.in_channels, in_h * in_w);
      MatMap<T>(dweight.data(), l.in_channels, k_rows).noalias() += x * dc.transpose();
      MatMap<T>(dinput.data(), l.in_channels, in_h * in_w).noalias() =
          ConstMatMap<T>(weight.data(), l.in_channels, k_rows) * dc;
    }
    delta = std::move(dinput);
  }
}

// ---------------------------------------------------------------------------
// Losses and batch gradients

template <typename T>
double per_sample_mse(const Tensor3<T>& x, const Tensor3<T>& xhat) {
  if (!x.same_shape(xhat))
    throw ShapeError("per_sample_mse: shapes " + x.shape_string() + " and " + xhat.shape_string() + " differ");
  if (x.size() == 0) throw ShapeError("per_sample_mse: empty tensor");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x.data()[i]) - static_cast<double>(xhat.data()[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(x.size());
}

double weighted_batch_objective(std::span<const double> losses, std::span<const double> weights) {
  if (losses.size() != weights.size())
    throw ShapeError("weighted_batch_objective: " + std::to_string(losses.size()) + " losses but " +
                     std::to_string(weights.size()) + " weights");
  if (losses.empty()) throw ShapeError("weighted_batch_objective: empty batch");
  double acc = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (!(weights[i] >= 0.0 && weights[i] <= 1.0))
      throw ConfigError("weighted_batch_objective: weight " + std::to_string(weights[i]) + " at index " +
                        std::to_string(i) + " outside [0,1]");
    acc += weights[i] * losses[i];
  }
  return acc / static_cast<double>(losses.size());
}

template <typename T>
BatchEvaluation<T> evaluate_batch(const ConvAutoencoder<T>& model, std::span<const Tensor3<T>> batch) {
  BatchEvaluation<T> eval;
  eval.tapes.resize(batch.size());
  eval.losses.resize(batch.size());
  parallel_for(batch.size(), [&](std::size_t i) {
    eval.tapes[i] = model.forward_tape(batch[i]);
    eval.losses[i] = eval.tapes[i].loss;
  });
  return eval;
}

template <typename T>
ParamSet<T> backpropagate(const ConvAutoencoder<T>& model, const BatchEvaluation<T>& eval,
                          std::span<const double> weights) {
  const std::size_t n = eval.tapes.size();
  if (weights.size() != n)
    throw ShapeError("backpropagate: " + std::to_string(n) + " samples but " + std::to_string(weights.size()) +
                     " weights");
  if (n == 0) throw ShapeError("backpropagate: empty batch");
  // Contiguous shards, each summed in sample order, then summed in shard
  // order: the result does not depend on the number of worker threads.
  const std::size_t shards = std::min(kMaxGradientShards, n);
  std::vector<ParamSet<T>> partial(shards, model.params().zeros_like());
  parallel_for(shards, [&](std::size_t s) {
    const std::size_t lo = s * n / shards;
    const std::size_t hi = (s + 1) * n / shards;
    for (std::size_t i = lo; i < hi; ++i) {
      if (weights[i] == 0.0) continue;
      const T scale = static_cast<T>(weights[i] / static_cast<double>(n));
      model.backward(eval.tapes[i], scale, partial[s]);
    }
  });
  ParamSet<T> total = std::move(partial[0]);
  for (std::size_t s = 1; s < shards; ++s) total.add_scaled(partial[s], T{1});
  if (!total.all_finite()) throw NumericalError("non-finite parameter gradient");
  return total;
}

template <typename T>
GradientResult<T> gradient(const ConvAutoencoder<T>& model, std::span<const Tensor3<T>> batch,
                           std::span<const double> weights) {
  if (weights.size() != batch.size())
    throw ShapeError("gradient: " + std::to_string(batch.size()) + " samples but " +
                     std::to_string(weights.size()) + " weights");
  BatchEvaluation<T> eval = evaluate_batch(model, batch);
  for (double l : eval.losses)
    if (!std::isfinite(l)) throw NumericalError("non-finite reconstruction loss");
  GradientResult<T> result;
  result.objective = weighted_batch_objective(eval.losses, weights);
  result.grads = backpropagate(model, eval, weights);
  result.losses = std::move(eval.losses);
  return result;
}

template <typename T>
std::vector<double> reconstruction_losses(const ConvAutoencoder<T>& model,
                                          std::span<const Tensor3<T>> samples) {
  std::vector<double> losses(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    losses[i] = per_sample_mse(samples[i], model.reconstruct(samples[i]));
  });
  return losses;
}

template class ConvAutoencoder<float>;
template class ConvAutoencoder<double>;

#define SPAD_INSTANTIATE(T)                                                                              \
  template double per_sample_mse<T>(const Tensor3<T>&, const Tensor3<T>&);                               \
  template BatchEvaluation<T> evaluate_batch<T>(const ConvAutoencoder<T>&, std::span<const Tensor3<T>>); \
  template ParamSet<T> backpropagate<T>(const ConvAutoencoder<T>&, const BatchEvaluation<T>&,          \
                                        std::span<const double>);                                        \
  template GradientResult<T> gradient<T>(const ConvAutoencoder<T>&, std::span<const Tensor3<T>>,       \
                                         std::span<const double>);                                       \
  template std::vector<double> reconstruction_losses<T>(const ConvAutoencoder<T>&,                       \
                                                        std::span<const Tensor3<T>>);

SPAD_INSTANTIATE(float)
SPAD_INSTANTIATE(double)

#undef SPAD_INSTANTIATE

}  // namespace spad

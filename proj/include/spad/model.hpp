#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "spad/params.hpp"
#include "spad/tensor.hpp"

namespace spad {

/// One encoder block. Stride 2 blocks use a 4x4 kernel with padding 1 (exact
/// halving); stride 1 blocks use 3x3 with padding 1 (size preserving).
struct BlockSpec {
  int out_channels = 0;
  int stride = 1;

  int kernel() const noexcept { return stride == 2 ? 4 : 3; }
  int padding() const noexcept { return 1; }

  friend bool operator==(const BlockSpec&, const BlockSpec&) = default;
};

/// Shape of the convolutional autoencoder. The decoder is never described
/// separately: it mirrors the encoder block for block with transposed
/// convolutions, and ends in a sigmoid.
struct ArchitectureDescriptor {
  int input_side = 224;
  int input_channels = 3;
  std::vector<BlockSpec> blocks;
  int norm_groups = 1;
  double leaky_slope = 0.2;
  double norm_epsilon = 1e-5;

  /// Seven blocks with widths 32-64-128-256-256-128-64. The number of stride
  /// 2 blocks adapts to the input side (at most five, latent side >= 2).
  static ArchitectureDescriptor standard(int input_side = 224, int input_channels = 3);
  /// Seven-block layout with custom widths, same stride rule as standard().
  static ArchitectureDescriptor with_widths(int input_side, int input_channels,
                                            const std::vector<int>& widths);

  /// Throws ShapeError when the downsampling chain cannot reproduce the input side.
  void validate() const;
  int latent_side() const;
  int latent_channels() const;
  /// Groups actually used for a layer with `channels` channels.
  int groups_for(int channels) const;

  nlohmann::json to_json() const;
  static ArchitectureDescriptor from_json(const nlohmann::json& j);

  friend bool operator==(const ArchitectureDescriptor&, const ArchitectureDescriptor&) = default;
};

template <typename T>
struct ForwardTape;

/// Convolutional autoencoder, x_hat = decode(encode(x)).
///
/// Blocks are conv -> group norm -> leaky ReLU. Group normalization works per
/// sample, so a sample's reconstruction never depends on what else is in the
/// batch; training and inference share one code path.
template <typename T>
class ConvAutoencoder {
 public:
  /// All parameters zero, including normalization scales.
  explicit ConvAutoencoder(ArchitectureDescriptor arch);
  /// Uniform fan-in init: weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)),
  /// normalization scale 1 and shift 0.
  static ConvAutoencoder initialized(ArchitectureDescriptor arch, std::uint64_t seed);

  const ArchitectureDescriptor& architecture() const noexcept { return arch_; }
  ParamSet<T>& params() noexcept { return params_; }
  const ParamSet<T>& params() const noexcept { return params_; }
  /// Replace parameters; layout must match the architecture.
  void set_params(ParamSet<T> params);

  Tensor3<T> encode(const Tensor3<T>& x) const;
  Tensor3<T> decode(const Tensor3<T>& z) const;
  Tensor3<T> reconstruct(const Tensor3<T>& x) const;

  /// Forward pass keeping every intermediate needed by backward().
  ForwardTape<T> forward_tape(const Tensor3<T>& x) const;
  /// Accumulate scale * dL/dparams into grads, L being the tape's per-sample MSE.
  void backward(const ForwardTape<T>& tape, T scale, ParamSet<T>& grads) const;

 private:
  struct Layer {
    std::size_t weight, bias, gamma = 0, beta = 0;
    int in_channels, out_channels, kernel, stride, padding;
    bool transposed;
    bool normalized;  // false only for the output layer (sigmoid instead)
  };

  Tensor3<T> run(const Tensor3<T>& x, std::size_t first, std::size_t last,
                 ForwardTape<T>* tape) const;
  void check_input(const Tensor3<T>& x) const;
  void check_latent(const Tensor3<T>& z) const;
  void build_layout();

  ArchitectureDescriptor arch_;
  ParamSet<T> params_;
  std::vector<Layer> layers_;  // encoder blocks followed by decoder blocks
};

/// Activations recorded by a forward pass.
template <typename T>
struct ForwardTape {
  struct Step {
    Tensor3<T> normed;       // normalized pre-affine values (empty for the output layer)
    std::vector<T> inv_std;  // one per normalization group
    Tensor3<T> output;       // post-activation output, input of the next step
  };
  Tensor3<T> input;
  std::vector<Step> steps;
  double loss = 0.0;

  const Tensor3<T>& reconstruction() const { return steps.back().output; }
};

/// Mean over all H*W*C elements of the squared difference.
template <typename T>
double per_sample_mse(const Tensor3<T>& x, const Tensor3<T>& xhat);

/// sum_i v_i L_i / batch_size. Weights must lie in [0,1].
double weighted_batch_objective(std::span<const double> losses, std::span<const double> weights);

/// Per-sample forward results for one mini-batch.
template <typename T>
struct BatchEvaluation {
  std::vector<ForwardTape<T>> tapes;
  std::vector<double> losses;
};

template <typename T>
struct GradientResult {
  ParamSet<T> grads;
  std::vector<double> losses;
  double objective = 0.0;
};

/// Forward pass of every sample, parallel across samples.
template <typename T>
BatchEvaluation<T> evaluate_batch(const ConvAutoencoder<T>& model, std::span<const Tensor3<T>> batch);

/// Gradient of weighted_batch_objective for an already evaluated batch. The
/// weights enter as constants. Throws NumericalError on a non-finite gradient.
template <typename T>
ParamSet<T> backpropagate(const ConvAutoencoder<T>& model, const BatchEvaluation<T>& eval,
                          std::span<const double> weights);

/// evaluate_batch followed by backpropagate.
template <typename T>
GradientResult<T> gradient(const ConvAutoencoder<T>& model, std::span<const Tensor3<T>> batch,
                           std::span<const double> weights);

/// Per-sample reconstruction losses, parallel across samples, no tape kept.
template <typename T>
std::vector<double> reconstruction_losses(const ConvAutoencoder<T>& model,
                                          std::span<const Tensor3<T>> samples);

}  // namespace spad

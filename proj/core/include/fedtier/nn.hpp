#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedtier/dataset.hpp"
#include "fedtier/tensor.hpp"

namespace fedtier {

/// Two-convolution MNIST network:
///   conv(1->c1, 5x5) -> maxpool 2 -> relu -> conv(c1->c2, 5x5) -> maxpool 2 -> relu
///   -> flatten(c2*4*4) -> dense(->hidden) -> relu -> dense(->10) -> log-softmax
/// Parameter names follow the usual conv1/conv2/fc1/fc2 weight/bias scheme,
/// weights stored out-major (out, in, kh, kw) and (out, in).
struct SimpleCnnArch {
  std::size_t conv1_channels = 10;
  std::size_t conv2_channels = 20;
  std::size_t hidden_units = 50;

  static constexpr std::size_t kKernel = 5;

  /// 10/20/50: 21,840 parameters.
  static SimpleCnnArch standard() { return {}; }
  /// 2/2/8 variant used for exhaustive finite-difference checks.
  static SimpleCnnArch shrunken() { return {2, 2, 8}; }
  /// Recovers the architecture from a parameter set; throws ShapeError if the
  /// set is not a SimpleCNN layout.
  static SimpleCnnArch infer(const ModelParams& params);

  std::size_t flat_features() const noexcept { return conv2_channels * 16; }
  std::vector<std::pair<std::string, Shape>> layout() const;
  std::size_t parameter_count() const;

  friend bool operator==(const SimpleCnnArch&, const SimpleCnnArch&) = default;
};

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.5;
  std::size_t batch_size = 64;
  std::size_t local_epochs = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Weights i.i.d. uniform on [-1/sqrt(fan_in), 1/sqrt(fan_in)] drawn from
/// SplitMix64(seed) in layout order; biases zero.
ModelParams init_params(const SimpleCnnArch& arch, std::uint64_t seed);

/// Row-wise log-probabilities, shape N x 10.
Tensor forward(const ModelParams& params, const Tensor& batch);

struct LossAndGradients {
  double loss = 0.0;  ///< mean negative log-likelihood
  ModelParams grads;
};

LossAndGradients loss_and_gradients(const ModelParams& params, const Tensor& batch,
                                    std::span<const int> labels);

/// v <- momentum * v + g; w <- w - lr * v. An empty `velocity` is treated as
/// zeros of the params layout.
void sgd_momentum_step(ModelParams& params, const ModelParams& grads, ModelParams& velocity,
                       const TrainConfig& cfg);

struct LocalTrainResult {
  ModelParams params;
  std::size_t sample_count = 0;
  std::size_t steps = 0;
};

/// local_epochs passes of shuffled mini-batch SGD with momentum; velocity starts
/// at zero. Each epoch reshuffles with SplitMix64(cfg.seed) continuing across
/// epochs. The final batch of an epoch may be short.
LocalTrainResult train_local(ModelParams params, const LabeledSet& data, const TrainConfig& cfg);

/// Fraction of rows whose argmax (lowest index on ties) equals the label.
double evaluate_accuracy(const ModelParams& params, const LabeledSet& data);

}  // namespace fedtier

#ifndef DEEPSPACE_NN_HPP
#define DEEPSPACE_NN_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "deepspace/encode.hpp"
#include "deepspace/errors.hpp"

namespace deepspace {

/// Dense row-major tensor of 64-bit floats. Gradient-check tolerances at the
/// scales used here require double precision throughout.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {}

  static Tensor zeros(std::vector<std::size_t> shape);

  std::size_t size() const { return data.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }

  double& at(std::size_t i) { return data[i]; }
  double at(std::size_t i) const { return data[i]; }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// One-hot encoding of a label sequence: shape [num_classes, W], column t
/// carries a single 1.0 at row labels[t]. Throws LabelOutOfRange.
Tensor one_hot(std::span<const int> labels, std::size_t num_classes);

// ---------------------------------------------------------------------------
// Layers. Each op exposes its forward map and the exact adjoint.
// ---------------------------------------------------------------------------

/// Valid 1-D convolution, stride 1: input [C,T] * kernels [F,C,K] + bias [F]
/// -> [F, T-K+1]. Throws ShapeMismatch.
Tensor conv1d_forward(const Tensor& input, const Tensor& kernels,
                      const Tensor& bias);

struct Conv1dGrads {
  Tensor d_input;
  Tensor d_kernels;
  Tensor d_bias;
};

/// Adjoint of conv1d_forward. `need_d_input` skips the input gradient when
/// the layer sits on non-trainable data.
Conv1dGrads conv1d_backward(const Tensor& input, const Tensor& kernels,
                            const Tensor& d_out, bool need_d_input = true);

/// PReLU with one learnable slope per channel: out = x > 0 ? x : a_c * x.
/// The subgradient at exactly 0 uses the positive branch.
Tensor prelu_forward(const Tensor& input, const Tensor& slopes);

struct PreluGrads {
  Tensor d_input;
  Tensor d_slopes;
};

PreluGrads prelu_backward(const Tensor& input, const Tensor& slopes,
                          const Tensor& d_out);

/// Max pooling over time: [C,T] -> [C, floor((T-width)/stride)+1].
struct MaxPoolResult {
  Tensor output;
  std::vector<std::size_t> argmax;  ///< flat input index per output element
};

MaxPoolResult maxpool1d_forward(const Tensor& input, std::size_t width,
                                std::size_t stride);

/// Routes each output gradient to the first maximal input position.
Tensor maxpool1d_backward(const Tensor& input, const MaxPoolResult& fwd,
                          const Tensor& d_out);

/// Cross-channel local response normalization:
///   out[c,t] = in[c,t] / (k + alpha * sum_{|c'-c| <= n/2} in[c',t]^2)^beta.
struct LrnParams {
  double k = 1.0;
  std::size_t n_neighbors = 5;
  double alpha = 1e-4;
  double beta = 0.75;

  friend bool operator==(const LrnParams&, const LrnParams&) = default;
};

Tensor lrn_forward(const Tensor& input, const LrnParams& params);
Tensor lrn_backward(const Tensor& input, const LrnParams& params,
                    const Tensor& d_out);

/// Softmax classifier with cross-entropy loss over flattened features.
/// Logits are max-shifted before exponentiation so large gaps cannot
/// overflow. d_logits = probs - one_hot(true_label).
struct SoftmaxResult {
  double loss = 0.0;
  Tensor probs;       ///< [classes]
  Tensor d_w;         ///< [classes, features]
  Tensor d_features;  ///< [features]
};

SoftmaxResult softmax_cross_entropy(const Tensor& features, const Tensor& w,
                                    int true_label);

/// Probabilities only (inference path, no gradients).
Tensor softmax_probs(const Tensor& features, const Tensor& w);

// ---------------------------------------------------------------------------
// The network: conv -> PReLU -> maxpool -> norm -> softmax classifier.
// ---------------------------------------------------------------------------

struct NetConfig {
  std::size_t filters = 25;
  std::size_t kernel_width = 5;
  std::size_t pool_width = 2;
  std::size_t pool_stride = 2;
  bool lrn_enabled = true;
  LrnParams lrn;
  double conv_bias_init = 0.9;
  double prelu_init = 0.25;

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t batch_size = 32;
  std::size_t epochs = 1;  ///< passes over the stream
  std::uint64_t seed = 0;
  std::size_t window = 50;  ///< W, the input history length
  NetConfig net;
};

struct CnnModel {
  std::size_t in_channels = 0;
  std::size_t num_classes = 0;
  std::size_t window = 0;
  NetConfig net;

  Tensor conv_kernels;  ///< [filters, in_channels, kernel_width]
  Tensor conv_bias;     ///< [filters]
  Tensor prelu_slopes;  ///< [filters]
  Tensor softmax_w;     ///< [num_classes, feature_len]

  std::size_t conv_out_len() const { return window - net.kernel_width + 1; }
  std::size_t pooled_len() const {
    return (conv_out_len() - net.pool_width) / net.pool_stride + 1;
  }
  std::size_t feature_len() const { return net.filters * pooled_len(); }

  friend bool operator==(const CnnModel&, const CnnModel&) = default;
};

/// Seeded Glorot-uniform kernels and classifier weights, conv bias 0.9
/// everywhere, PReLU slopes 0.25. kernel_width and pool_width shrink to fit
/// when the window is shorter than the configured sizes.
CnnModel init_model(std::size_t in_channels, std::size_t num_classes,
                    const TrainConfig& cfg, std::uint64_t seed);

struct ForwardCache {
  Tensor input;
  Tensor conv_out;
  Tensor act_out;
  MaxPoolResult pool;
  Tensor norm_out;   ///< flattened into features below
  Tensor features;   ///< [feature_len]
  Tensor probs;      ///< [num_classes]
};

/// Full forward pass; the cache carries everything backward() needs.
/// Throws ShapeMismatch when the input is not [in_channels, window].
ForwardCache forward(const CnnModel& model, const Tensor& input);

/// Convenience: one-hot encode a label window, then forward.
ForwardCache forward_window(const CnnModel& model, std::span<const int> window);

struct ModelGrads {
  Tensor d_kernels;
  Tensor d_bias;
  Tensor d_slopes;
  Tensor d_w;

  static ModelGrads zeros_like(const CnnModel& model);
  void scale(double factor);
};

/// Accumulates gradients for one sample into `grads`; returns the loss.
double backward(const CnnModel& model, const ForwardCache& cache,
                int true_label, ModelGrads& grads);

struct BatchStats {
  double mean_loss = 0.0;
  std::size_t correct = 0;  ///< argmax hits before the update
  std::size_t count = 0;
};

/// One mini-batch SGD step: parameters -= lr * mean gradient. Samples'
/// targets must be local class indices of this model.
BatchStats train_step(CnnModel& model, std::span<const Sample> batch,
                      double learning_rate);

/// Argmax with deterministic tie-break (lowest index).
int argmax_label(const Tensor& probs);

// ---------------------------------------------------------------------------
// Gradient verification.
// ---------------------------------------------------------------------------

struct GradCheckResult {
  double conv_kernels = 0.0;
  double conv_bias = 0.0;
  double prelu_slopes = 0.0;
  double softmax_w = 0.0;

  double max_error() const;
};

/// Central finite differences over every parameter of the model against the
/// analytic gradient; relative error |a - n| / max(|a|, |n|, 1e-8).
GradCheckResult grad_check_detail(const CnnModel& model, const Sample& sample,
                                  double epsilon);

/// Max relative error over all parameters.
double grad_check(const CnnModel& model, const Sample& sample, double epsilon);

}  // namespace deepspace

#endif  // DEEPSPACE_NN_HPP

#include "deepspace/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "deepspace/rng.hpp"

namespace deepspace {

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  std::size_t total = 1;
  for (std::size_t d : shape) total *= d;
  Tensor t;
  t.shape = std::move(shape);
  t.data.assign(total, 0.0);
  return t;
}

Tensor one_hot(std::span<const int> labels, std::size_t num_classes) {
  Tensor out = Tensor::zeros({num_classes, labels.size()});
  const std::size_t t_len = labels.size();
  for (std::size_t t = 0; t < t_len; ++t) {
    const int label = labels[t];
    if (label < 0 || static_cast<std::size_t>(label) >= num_classes) {
      throw LabelOutOfRange("one_hot: label " + std::to_string(label) +
                            " outside [0, " + std::to_string(num_classes) + ")");
    }
    out.data[static_cast<std::size_t>(label) * t_len + t] = 1.0;
  }
  return out;
}

namespace {

void expect_2d(const Tensor& t, const char* who) {
  if (t.shape.size() != 2) {
    throw ShapeMismatch(std::string(who) + ": expected rank-2 input");
  }
}

}  // namespace

Tensor conv1d_forward(const Tensor& input, const Tensor& kernels,
                      const Tensor& bias) {
  expect_2d(input, "conv1d");
  if (kernels.shape.size() != 3 || bias.shape.size() != 1) {
    throw ShapeMismatch("conv1d: kernels must be [F,C,K], bias [F]");
  }
  const std::size_t channels = input.dim(0), t_in = input.dim(1);
  const std::size_t filters = kernels.dim(0), k_width = kernels.dim(2);
  if (kernels.dim(1) != channels || bias.dim(0) != filters || t_in < k_width) {
    throw ShapeMismatch("conv1d: input/kernel shapes disagree");
  }
  const std::size_t t_out = t_in - k_width + 1;

  Tensor out = Tensor::zeros({filters, t_out});
  for (std::size_t f = 0; f < filters; ++f) {
    double* out_row = &out.data[f * t_out];
    std::fill(out_row, out_row + t_out, bias.data[f]);
    for (std::size_t c = 0; c < channels; ++c) {
      const double* in_row = &input.data[c * t_in];
      const double* k_row = &kernels.data[(f * channels + c) * k_width];
      for (std::size_t t = 0; t < t_out; ++t) {
        double acc = 0.0;
        for (std::size_t d = 0; d < k_width; ++d) {
          acc += k_row[d] * in_row[t + d];
        }
        out_row[t] += acc;
      }
    }
  }
  return out;
}

Conv1dGrads conv1d_backward(const Tensor& input, const Tensor& kernels,
                            const Tensor& d_out, bool need_d_input) {
  const std::size_t channels = input.dim(0), t_in = input.dim(1);
  const std::size_t filters = kernels.dim(0), k_width = kernels.dim(2);
  const std::size_t t_out = t_in - k_width + 1;
  if (d_out.shape.size() != 2 || d_out.dim(0) != filters || d_out.dim(1) != t_out) {
    throw ShapeMismatch("conv1d_backward: gradient shape disagrees");
  }

  Conv1dGrads grads;
  grads.d_kernels = Tensor::zeros(kernels.shape);
  grads.d_bias = Tensor::zeros({filters});
  if (need_d_input) grads.d_input = Tensor::zeros(input.shape);

  for (std::size_t f = 0; f < filters; ++f) {
    const double* g_row = &d_out.data[f * t_out];
    grads.d_bias.data[f] = std::accumulate(g_row, g_row + t_out, 0.0);
    for (std::size_t c = 0; c < channels; ++c) {
      const double* in_row = &input.data[c * t_in];
      double* dk_row = &grads.d_kernels.data[(f * channels + c) * k_width];
      for (std::size_t d = 0; d < k_width; ++d) {
        double acc = 0.0;
        for (std::size_t t = 0; t < t_out; ++t) {
          acc += g_row[t] * in_row[t + d];
        }
        dk_row[d] += acc;
      }
      if (need_d_input) {
        const double* k_row = &kernels.data[(f * channels + c) * k_width];
        double* di_row = &grads.d_input.data[c * t_in];
        for (std::size_t t = 0; t < t_out; ++t) {
          const double g = g_row[t];
          for (std::size_t d = 0; d < k_width; ++d) {
            di_row[t + d] += k_row[d] * g;
          }
        }
      }
    }
  }
  return grads;
}

Tensor prelu_forward(const Tensor& input, const Tensor& slopes) {
  expect_2d(input, "prelu");
  const std::size_t channels = input.dim(0), t_len = input.dim(1);
  if (slopes.shape.size() != 1 || slopes.dim(0) != channels) {
    throw ShapeMismatch("prelu: one slope per channel required");
  }
  Tensor out = input;
  for (std::size_t c = 0; c < channels; ++c) {
    const double a = slopes.data[c];
    double* row = &out.data[c * t_len];
    for (std::size_t t = 0; t < t_len; ++t) {
      if (row[t] < 0.0) row[t] *= a;
    }
  }
  return out;
}

PreluGrads prelu_backward(const Tensor& input, const Tensor& slopes,
                          const Tensor& d_out) {
  const std::size_t channels = input.dim(0), t_len = input.dim(1);
  if (d_out.shape != input.shape) {
    throw ShapeMismatch("prelu_backward: gradient shape disagrees");
  }
  PreluGrads grads;
  grads.d_input = Tensor::zeros(input.shape);
  grads.d_slopes = Tensor::zeros({channels});
  for (std::size_t c = 0; c < channels; ++c) {
    const double a = slopes.data[c];
    const double* in_row = &input.data[c * t_len];
    const double* g_row = &d_out.data[c * t_len];
    double* di_row = &grads.d_input.data[c * t_len];
    double da = 0.0;
    for (std::size_t t = 0; t < t_len; ++t) {
      if (in_row[t] < 0.0) {
        di_row[t] = a * g_row[t];
        da += in_row[t] * g_row[t];
      } else {
        di_row[t] = g_row[t];  // x == 0 takes the positive branch
      }
    }
    grads.d_slopes.data[c] = da;
  }
  return grads;
}

MaxPoolResult maxpool1d_forward(const Tensor& input, std::size_t width,
                                std::size_t stride) {
  expect_2d(input, "maxpool1d");
  const std::size_t channels = input.dim(0), t_in = input.dim(1);
  if (width == 0 || stride == 0 || t_in < width) {
    throw ShapeMismatch("maxpool1d: window does not fit input");
  }
  const std::size_t t_out = (t_in - width) / stride + 1;
  MaxPoolResult result;
  result.output = Tensor::zeros({channels, t_out});
  result.argmax.resize(channels * t_out);
  for (std::size_t c = 0; c < channels; ++c) {
    const double* in_row = &input.data[c * t_in];
    for (std::size_t t = 0; t < t_out; ++t) {
      std::size_t best = t * stride;
      for (std::size_t d = 1; d < width; ++d) {
        if (in_row[t * stride + d] > in_row[best]) best = t * stride + d;
      }
      result.output.data[c * t_out + t] = in_row[best];
      result.argmax[c * t_out + t] = c * t_in + best;
    }
  }
  return result;
}

Tensor maxpool1d_backward(const Tensor& input, const MaxPoolResult& fwd,
                          const Tensor& d_out) {
  if (d_out.shape != fwd.output.shape) {
    throw ShapeMismatch("maxpool1d_backward: gradient shape disagrees");
  }
  Tensor d_input = Tensor::zeros(input.shape);
  for (std::size_t i = 0; i < fwd.argmax.size(); ++i) {
    d_input.data[fwd.argmax[i]] += d_out.data[i];
  }
  return d_input;
}

Tensor lrn_forward(const Tensor& input, const LrnParams& params) {
  expect_2d(input, "lrn");
  const std::size_t channels = input.dim(0), t_len = input.dim(1);
  const std::size_t half = params.n_neighbors / 2;
  Tensor out = Tensor::zeros(input.shape);
  for (std::size_t t = 0; t < t_len; ++t) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t lo = c >= half ? c - half : 0;
      const std::size_t hi = std::min(channels - 1, c + half);
      double sum_sq = 0.0;
      for (std::size_t n = lo; n <= hi; ++n) {
        const double v = input.data[n * t_len + t];
        sum_sq += v * v;
      }
      const double denom = std::pow(params.k + params.alpha * sum_sq, params.beta);
      out.data[c * t_len + t] = input.data[c * t_len + t] / denom;
    }
  }
  return out;
}

Tensor lrn_backward(const Tensor& input, const LrnParams& params,
                    const Tensor& d_out) {
  if (d_out.shape != input.shape) {
    throw ShapeMismatch("lrn_backward: gradient shape disagrees");
  }
  const std::size_t channels = input.dim(0), t_len = input.dim(1);
  const std::size_t half = params.n_neighbors / 2;
  Tensor d_input = Tensor::zeros(input.shape);
  // d out_c / d in_j = delta_cj * S_c^-beta
  //                  - 2 alpha beta in_j in_c S_c^(-beta-1)  for j in N(c).
  for (std::size_t t = 0; t < t_len; ++t) {
    std::vector<double> scale(channels);       // S_c = k + alpha * sum sq
    std::vector<double> scale_pow(channels);   // S_c^-beta
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t lo = c >= half ? c - half : 0;
      const std::size_t hi = std::min(channels - 1, c + half);
      double sum_sq = 0.0;
      for (std::size_t n = lo; n <= hi; ++n) {
        const double v = input.data[n * t_len + t];
        sum_sq += v * v;
      }
      scale[c] = params.k + params.alpha * sum_sq;
      scale_pow[c] = std::pow(scale[c], -params.beta);
    }
    for (std::size_t j = 0; j < channels; ++j) {
      const double g_j = d_out.data[j * t_len + t];
      double acc = g_j * scale_pow[j];
      const std::size_t lo = j >= half ? j - half : 0;
      const std::size_t hi = std::min(channels - 1, j + half);
      double cross = 0.0;
      for (std::size_t c = lo; c <= hi; ++c) {
        const double g_c = d_out.data[c * t_len + t];
        const double in_c = input.data[c * t_len + t];
        cross += g_c * in_c * scale_pow[c] / scale[c];
      }
      acc -= 2.0 * params.alpha * params.beta * input.data[j * t_len + t] * cross;
      d_input.data[j * t_len + t] = acc;
    }
  }
  return d_input;
}

SoftmaxResult softmax_cross_entropy(const Tensor& features, const Tensor& w,
                                    int true_label) {
  if (w.shape.size() != 2 || w.dim(1) != features.size()) {
    throw ShapeMismatch("softmax: w must be [classes, features]");
  }
  const std::size_t classes = w.dim(0), feat = features.size();
  if (true_label < 0 || static_cast<std::size_t>(true_label) >= classes) {
    throw LabelOutOfRange("softmax: label " + std::to_string(true_label) +
                          " outside [0, " + std::to_string(classes) + ")");
  }

  SoftmaxResult result;
  result.probs = Tensor::zeros({classes});
  std::vector<double> logits(classes);
  for (std::size_t j = 0; j < classes; ++j) {
    const double* w_row = &w.data[j * feat];
    double acc = 0.0;
    for (std::size_t i = 0; i < feat; ++i) acc += w_row[i] * features.data[i];
    logits[j] = acc;
  }
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t j = 0; j < classes; ++j) {
    result.probs.data[j] = std::exp(logits[j] - max_logit);
    z += result.probs.data[j];
  }
  for (std::size_t j = 0; j < classes; ++j) result.probs.data[j] /= z;

  result.loss = -std::log(result.probs.data[true_label]);

  result.d_w = Tensor::zeros(w.shape);
  result.d_features = Tensor::zeros({feat});
  for (std::size_t j = 0; j < classes; ++j) {
    const double d_logit =
        result.probs.data[j] - (static_cast<std::size_t>(true_label) == j ? 1.0 : 0.0);
    double* dw_row = &result.d_w.data[j * feat];
    const double* w_row = &w.data[j * feat];
    for (std::size_t i = 0; i < feat; ++i) {
      dw_row[i] = d_logit * features.data[i];
      result.d_features.data[i] += d_logit * w_row[i];
    }
  }
  return result;
}

Tensor softmax_probs(const Tensor& features, const Tensor& w) {
  if (w.shape.size() != 2 || w.dim(1) != features.size()) {
    throw ShapeMismatch("softmax: w must be [classes, features]");
  }
  const std::size_t classes = w.dim(0), feat = features.size();
  Tensor probs = Tensor::zeros({classes});
  for (std::size_t j = 0; j < classes; ++j) {
    const double* w_row = &w.data[j * feat];
    double acc = 0.0;
    for (std::size_t i = 0; i < feat; ++i) acc += w_row[i] * features.data[i];
    probs.data[j] = acc;
  }
  const double max_logit = *std::max_element(probs.data.begin(), probs.data.end());
  double z = 0.0;
  for (double& p : probs.data) {
    p = std::exp(p - max_logit);
    z += p;
  }
  for (double& p : probs.data) p /= z;
  return probs;
}

CnnModel init_model(std::size_t in_channels, std::size_t num_classes,
                    const TrainConfig& cfg, std::uint64_t seed) {
  CnnModel model;
  model.in_channels = in_channels;
  model.num_classes = num_classes;
  model.window = cfg.window;
  model.net = cfg.net;
  // Shrink kernel/pool to fit short windows (W down to 1 stays usable).
  model.net.kernel_width = std::min(model.net.kernel_width, model.window);
  const std::size_t conv_len = model.window - model.net.kernel_width + 1;
  model.net.pool_width = std::min(model.net.pool_width, conv_len);

  const std::size_t filters = model.net.filters;
  const std::size_t k_width = model.net.kernel_width;

  Rng rng(mix_seed(seed));
  const auto glorot_fill = [&rng](Tensor& t, std::size_t fan_in, std::size_t fan_out) {
    const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : t.data) v = rng.uniform(-s, s);
  };

  model.conv_kernels = Tensor::zeros({filters, in_channels, k_width});
  glorot_fill(model.conv_kernels, in_channels * k_width, filters * k_width);
  model.conv_bias = Tensor::zeros({filters});
  std::fill(model.conv_bias.data.begin(), model.conv_bias.data.end(),
            model.net.conv_bias_init);
  model.prelu_slopes = Tensor::zeros({filters});
  std::fill(model.prelu_slopes.data.begin(), model.prelu_slopes.data.end(),
            model.net.prelu_init);
  model.softmax_w = Tensor::zeros({num_classes, model.feature_len()});
  glorot_fill(model.softmax_w, model.feature_len(), num_classes);
  return model;
}

ForwardCache forward(const CnnModel& model, const Tensor& input) {
  if (input.shape.size() != 2 || input.dim(0) != model.in_channels ||
      input.dim(1) != model.window) {
    throw ShapeMismatch("forward: input must be [in_channels, window]");
  }
  ForwardCache cache;
  cache.input = input;
  cache.conv_out = conv1d_forward(input, model.conv_kernels, model.conv_bias);
  cache.act_out = prelu_forward(cache.conv_out, model.prelu_slopes);
  cache.pool = maxpool1d_forward(cache.act_out, model.net.pool_width,
                                 model.net.pool_stride);
  cache.norm_out = model.net.lrn_enabled
                       ? lrn_forward(cache.pool.output, model.net.lrn)
                       : cache.pool.output;
  cache.features = Tensor{{cache.norm_out.size()}, cache.norm_out.data};
  cache.probs = softmax_probs(cache.features, model.softmax_w);
  return cache;
}

ForwardCache forward_window(const CnnModel& model, std::span<const int> window) {
  return forward(model, one_hot(window, model.in_channels));
}

ModelGrads ModelGrads::zeros_like(const CnnModel& model) {
  ModelGrads grads;
  grads.d_kernels = Tensor::zeros(model.conv_kernels.shape);
  grads.d_bias = Tensor::zeros(model.conv_bias.shape);
  grads.d_slopes = Tensor::zeros(model.prelu_slopes.shape);
  grads.d_w = Tensor::zeros(model.softmax_w.shape);
  return grads;
}

void ModelGrads::scale(double factor) {
  for (Tensor* t : {&d_kernels, &d_bias, &d_slopes, &d_w}) {
    for (double& v : t->data) v *= factor;
  }
}

namespace {

void add_into(Tensor& acc, const Tensor& g) {
  for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += g.data[i];
}

}  // namespace

double backward(const CnnModel& model, const ForwardCache& cache, int true_label,
                ModelGrads& grads) {
  const auto soft =
      softmax_cross_entropy(cache.features, model.softmax_w, true_label);
  add_into(grads.d_w, soft.d_w);

  Tensor d_norm = Tensor{cache.norm_out.shape, soft.d_features.data};
  Tensor d_pool = model.net.lrn_enabled
                      ? lrn_backward(cache.pool.output, model.net.lrn, d_norm)
                      : std::move(d_norm);
  Tensor d_act = maxpool1d_backward(cache.act_out, cache.pool, d_pool);
  const auto prelu = prelu_backward(cache.conv_out, model.prelu_slopes, d_act);
  add_into(grads.d_slopes, prelu.d_slopes);
  const auto conv = conv1d_backward(cache.input, model.conv_kernels, prelu.d_input,
                                    /*need_d_input=*/false);
  add_into(grads.d_kernels, conv.d_kernels);
  add_into(grads.d_bias, conv.d_bias);
  return soft.loss;
}

int argmax_label(const Tensor& probs) {
  int best = 0;
  for (std::size_t j = 1; j < probs.size(); ++j) {
    if (probs.data[j] > probs.data[best]) best = static_cast<int>(j);
  }
  return best;
}

BatchStats train_step(CnnModel& model, std::span<const Sample> batch,
                      double learning_rate) {
  if (batch.empty()) {
    throw Error("train_step: empty batch");
  }
  ModelGrads grads = ModelGrads::zeros_like(model);
  BatchStats stats;
  double loss_sum = 0.0;
  for (const Sample& sample : batch) {
    const ForwardCache cache = forward_window(model, sample.window);
    if (argmax_label(cache.probs) == sample.target) ++stats.correct;
    loss_sum += backward(model, cache, sample.target, grads);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  grads.scale(inv);
  stats.mean_loss = loss_sum * inv;
  stats.count = batch.size();

  const auto apply = [learning_rate](Tensor& param, const Tensor& grad) {
    for (std::size_t i = 0; i < param.data.size(); ++i) {
      param.data[i] -= learning_rate * grad.data[i];
    }
  };
  apply(model.conv_kernels, grads.d_kernels);
  apply(model.conv_bias, grads.d_bias);
  apply(model.prelu_slopes, grads.d_slopes);
  apply(model.softmax_w, grads.d_w);
  return stats;
}

double GradCheckResult::max_error() const {
  return std::max({conv_kernels, conv_bias, prelu_slopes, softmax_w});
}

namespace {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
  return std::fabs(analytic - numeric) / denom;
}

double loss_of(const CnnModel& model, const Tensor& input, int label) {
  const ForwardCache cache = forward(model, input);
  const double p = cache.probs.data[label];
  return -std::log(p);
}

double check_tensor(CnnModel& model, Tensor CnnModel::* member, const Tensor& analytic,
                    const Tensor& input, int label, double epsilon) {
  double worst = 0.0;
  Tensor& param = model.*member;
  for (std::size_t i = 0; i < param.data.size(); ++i) {
    const double saved = param.data[i];
    param.data[i] = saved + epsilon;
    const double loss_hi = loss_of(model, input, label);
    param.data[i] = saved - epsilon;
    const double loss_lo = loss_of(model, input, label);
    param.data[i] = saved;
    const double numeric = (loss_hi - loss_lo) / (2.0 * epsilon);
    worst = std::max(worst, relative_error(analytic.data[i], numeric));
  }
  return worst;
}

}  // namespace

GradCheckResult grad_check_detail(const CnnModel& model, const Sample& sample,
                                  double epsilon) {
  const Tensor input = one_hot(sample.window, model.in_channels);
  ModelGrads grads = ModelGrads::zeros_like(model);
  const ForwardCache cache = forward(model, input);
  backward(model, cache, sample.target, grads);

  CnnModel probe = model;
  GradCheckResult result;
  result.conv_kernels = check_tensor(probe, &CnnModel::conv_kernels, grads.d_kernels,
                                     input, sample.target, epsilon);
  result.conv_bias = check_tensor(probe, &CnnModel::conv_bias, grads.d_bias, input,
                                  sample.target, epsilon);
  result.prelu_slopes = check_tensor(probe, &CnnModel::prelu_slopes, grads.d_slopes,
                                     input, sample.target, epsilon);
  result.softmax_w = check_tensor(probe, &CnnModel::softmax_w, grads.d_w, input,
                                  sample.target, epsilon);
  return result;
}

double grad_check(const CnnModel& model, const Sample& sample, double epsilon) {
  return grad_check_detail(model, sample, epsilon).max_error();
}

}  // namespace deepspace

#include "fedtier/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fedtier/error.hpp"
#include "fedtier/random.hpp"

namespace fedtier {

namespace {

constexpr std::size_t kK = SimpleCnnArch::kKernel;
constexpr std::size_t kKK = kK * kK;
constexpr std::size_t kConv1Side = kImageSide - kK + 1;  // 24
constexpr std::size_t kConv1Area = kConv1Side * kConv1Side;
constexpr std::size_t kPool1Side = kConv1Side / 2;  // 12
constexpr std::size_t kPool1Area = kPool1Side * kPool1Side;
constexpr std::size_t kConv2Side = kPool1Side - kK + 1;  // 8
constexpr std::size_t kConv2Area = kConv2Side * kConv2Side;
constexpr std::size_t kPool2Side = kConv2Side / 2;  // 4
constexpr std::size_t kPool2Area = kPool2Side * kPool2Side;

// dst[0..n) += a * src[0..n)
inline void axpy(double* __restrict dst, const double* __restrict src, double a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += a * src[i];
}

inline double dot(const double* __restrict a, const double* __restrict b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

// Raw views of the eight parameter tensors in layout order.
struct Weights {
  const double* conv1_w;
  const double* conv1_b;
  const double* conv2_w;
  const double* conv2_b;
  const double* fc1_w;
  const double* fc1_b;
  const double* fc2_w;
  const double* fc2_b;

  explicit Weights(const ModelParams& p)
      : conv1_w(p[0].tensor.data()),
        conv1_b(p[1].tensor.data()),
        conv2_w(p[2].tensor.data()),
        conv2_b(p[3].tensor.data()),
        fc1_w(p[4].tensor.data()),
        fc1_b(p[5].tensor.data()),
        fc2_w(p[6].tensor.data()),
        fc2_b(p[7].tensor.data()) {}
};

struct Grads {
  double* conv1_w;
  double* conv1_b;
  double* conv2_w;
  double* conv2_b;
  double* fc1_w;
  double* fc1_b;
  double* fc2_w;
  double* fc2_b;

  explicit Grads(ModelParams& p)
      : conv1_w(p[0].tensor.data()),
        conv1_b(p[1].tensor.data()),
        conv2_w(p[2].tensor.data()),
        conv2_b(p[3].tensor.data()),
        fc1_w(p[4].tensor.data()),
        fc1_b(p[5].tensor.data()),
        fc2_w(p[6].tensor.data()),
        fc2_b(p[7].tensor.data()) {}
};

// Per-sample activations, reused across samples of a batch.
class Workspace {
 public:
  explicit Workspace(const SimpleCnnArch& arch)
      : c1_(arch.conv1_channels),
        c2_(arch.conv2_channels),
        hidden_(arch.hidden_units),
        flat_n_(arch.flat_features()),
        k2_(c1_ * kKK),
        cols1_(kKK * kConv1Area),
        cols1_t_(kConv1Area * kKK),
        conv1_(c1_ * kConv1Area),
        pool1_arg_(c1_ * kPool1Area),
        act1_(c1_ * kPool1Area),
        cols2_(k2_ * kConv2Area),
        cols2_t_(kConv2Area * k2_),
        conv2_(c2_ * kConv2Area),
        pool2_arg_(c2_ * kPool2Area),
        flat_(flat_n_),
        hidden_act_(hidden_),
        logits_(kNumClasses),
        d_logits_(kNumClasses),
        d_hidden_(hidden_),
        d_flat_(flat_n_),
        d_conv2_(c2_ * kConv2Area),
        d_cols2_t_(kConv2Area * k2_),
        d_act1_(c1_ * kPool1Area),
        d_conv1_(c1_ * kConv1Area) {}

  // Fills logits_ and log_probs (length 10) for one 28x28 image.
  void forward(const Weights& w, const double* image, double* log_probs, bool keep_transposed) {
    // im2col for conv1: cols1[k][p] with k = ky*5+kx, p = oy*24+ox.
    for (std::size_t ky = 0; ky < kK; ++ky) {
      for (std::size_t kx = 0; kx < kK; ++kx) {
        double* row = &cols1_[(ky * kK + kx) * kConv1Area];
        for (std::size_t oy = 0; oy < kConv1Side; ++oy) {
          const double* src = image + (oy + ky) * kImageSide + kx;
          std::copy(src, src + kConv1Side, row + oy * kConv1Side);
        }
      }
    }
    for (std::size_t o = 0; o < c1_; ++o) {
      double* out = &conv1_[o * kConv1Area];
      std::fill(out, out + kConv1Area, w.conv1_b[o]);
      for (std::size_t k = 0; k < kKK; ++k) axpy(out, &cols1_[k * kConv1Area], w.conv1_w[o * kKK + k], kConv1Area);
    }
    max_pool(conv1_.data(), c1_, kConv1Side, pool1_arg_.data(), act1_.data());
    relu_inplace(act1_.data(), act1_.size());

    // im2col for conv2: cols2[(c*25 + ky*5 + kx)][oy*8+ox].
    for (std::size_t c = 0; c < c1_; ++c) {
      const double* plane = &act1_[c * kPool1Area];
      for (std::size_t ky = 0; ky < kK; ++ky) {
        for (std::size_t kx = 0; kx < kK; ++kx) {
          double* row = &cols2_[(c * kKK + ky * kK + kx) * kConv2Area];
          for (std::size_t oy = 0; oy < kConv2Side; ++oy) {
            const double* src = plane + (oy + ky) * kPool1Side + kx;
            std::copy(src, src + kConv2Side, row + oy * kConv2Side);
          }
        }
      }
    }
    for (std::size_t o = 0; o < c2_; ++o) {
      double* out = &conv2_[o * kConv2Area];
      std::fill(out, out + kConv2Area, w.conv2_b[o]);
      const double* wrow = w.conv2_w + o * k2_;
      for (std::size_t k = 0; k < k2_; ++k) axpy(out, &cols2_[k * kConv2Area], wrow[k], kConv2Area);
    }
    max_pool(conv2_.data(), c2_, kConv2Side, pool2_arg_.data(), flat_.data());
    relu_inplace(flat_.data(), flat_.size());

    for (std::size_t h = 0; h < hidden_; ++h) {
      const double z = w.fc1_b[h] + dot(w.fc1_w + h * flat_n_, flat_.data(), flat_n_);
      hidden_act_[h] = z > 0.0 ? z : 0.0;
    }
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      logits_[c] = w.fc2_b[c] + dot(w.fc2_w + c * hidden_, hidden_act_.data(), hidden_);
    }
    const double m = *std::max_element(logits_.begin(), logits_.end());
    double sum = 0.0;
    for (double z : logits_) sum += std::exp(z - m);
    const double lse = m + std::log(sum);
    for (std::size_t c = 0; c < kNumClasses; ++c) log_probs[c] = logits_[c] - lse;

    if (keep_transposed) {
      transpose(cols1_.data(), kKK, kConv1Area, cols1_t_.data());
      transpose(cols2_.data(), k2_, kConv2Area, cols2_t_.data());
    }
  }

  // Accumulates d(-log p[label]) into g. Requires forward(..., true) first.
  void backward(const Weights& w, const double* log_probs, int label, Grads& g) {
    for (std::size_t c = 0; c < kNumClasses; ++c) d_logits_[c] = std::exp(log_probs[c]);
    d_logits_[static_cast<std::size_t>(label)] -= 1.0;

    // fc2
    std::fill(d_hidden_.begin(), d_hidden_.end(), 0.0);
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      const double d = d_logits_[c];
      g.fc2_b[c] += d;
      axpy(g.fc2_w + c * hidden_, hidden_act_.data(), d, hidden_);
      axpy(d_hidden_.data(), w.fc2_w + c * hidden_, d, hidden_);
    }
    // relu + fc1
    std::fill(d_flat_.begin(), d_flat_.end(), 0.0);
    for (std::size_t h = 0; h < hidden_; ++h) {
      if (!(hidden_act_[h] > 0.0)) continue;
      const double d = d_hidden_[h];
      g.fc1_b[h] += d;
      axpy(g.fc1_w + h * flat_n_, flat_.data(), d, flat_n_);
      axpy(d_flat_.data(), w.fc1_w + h * flat_n_, d, flat_n_);
    }
    // relu + unpool into conv2 output grad
    std::fill(d_conv2_.begin(), d_conv2_.end(), 0.0);
    for (std::size_t i = 0; i < flat_n_; ++i) {
      if (flat_[i] > 0.0) d_conv2_[(i / kPool2Area) * kConv2Area + pool2_arg_[i]] += d_flat_[i];
    }
    // conv2 weight/bias grads and column grads (transposed: [p][k]).
    std::fill(d_cols2_t_.begin(), d_cols2_t_.end(), 0.0);
    for (std::size_t o = 0; o < c2_; ++o) {
      const double* dout = &d_conv2_[o * kConv2Area];
      double* gw = g.conv2_w + o * k2_;
      const double* wrow = w.conv2_w + o * k2_;
      double bsum = 0.0;
      for (std::size_t p = 0; p < kConv2Area; ++p) {
        const double d = dout[p];
        if (d == 0.0) continue;
        bsum += d;
        axpy(gw, &cols2_t_[p * k2_], d, k2_);
        axpy(&d_cols2_t_[p * k2_], wrow, d, k2_);
      }
      g.conv2_b[o] += bsum;
    }
    // col2im into the conv2 input (= relu(pool1)).
    std::fill(d_act1_.begin(), d_act1_.end(), 0.0);
    for (std::size_t oy = 0; oy < kConv2Side; ++oy) {
      for (std::size_t ox = 0; ox < kConv2Side; ++ox) {
        const double* dcol = &d_cols2_t_[(oy * kConv2Side + ox) * k2_];
        for (std::size_t c = 0; c < c1_; ++c) {
          double* plane = &d_act1_[c * kPool1Area];
          for (std::size_t ky = 0; ky < kK; ++ky) {
            double* dst = plane + (oy + ky) * kPool1Side + ox;
            const double* src = dcol + c * kKK + ky * kK;
            for (std::size_t kx = 0; kx < kK; ++kx) dst[kx] += src[kx];
          }
        }
      }
    }
    // relu + unpool into conv1 output grad
    std::fill(d_conv1_.begin(), d_conv1_.end(), 0.0);
    for (std::size_t i = 0; i < d_act1_.size(); ++i) {
      if (act1_[i] > 0.0) d_conv1_[(i / kPool1Area) * kConv1Area + pool1_arg_[i]] += d_act1_[i];
    }
    for (std::size_t o = 0; o < c1_; ++o) {
      const double* dout = &d_conv1_[o * kConv1Area];
      double* gw = g.conv1_w + o * kKK;
      double bsum = 0.0;
      for (std::size_t p = 0; p < kConv1Area; ++p) {
        const double d = dout[p];
        if (d == 0.0) continue;
        bsum += d;
        axpy(gw, &cols1_t_[p * kKK], d, kKK);
      }
      g.conv1_b[o] += bsum;
    }
  }

 private:
  // 2x2/stride-2 max pool over `channels` planes of side `side`. Records the
  // flat in-plane index of the (first) maximum for each output.
  static void max_pool(const double* in, std::size_t channels, std::size_t side, std::uint32_t* arg,
                       double* out) {
    const std::size_t half = side / 2;
    for (std::size_t c = 0; c < channels; ++c) {
      const double* plane = in + c * side * side;
      for (std::size_t y = 0; y < half; ++y) {
        for (std::size_t x = 0; x < half; ++x) {
          std::size_t best = (2 * y) * side + 2 * x;
          const std::size_t cand[3] = {best + 1, best + side, best + side + 1};
          for (std::size_t q : cand) {
            if (plane[q] > plane[best]) best = q;
          }
          const std::size_t o = c * half * half + y * half + x;
          out[o] = plane[best];
          arg[o] = static_cast<std::uint32_t>(best);
        }
      }
    }
  }

  static void relu_inplace(double* v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) v[i] = v[i] > 0.0 ? v[i] : 0.0;
  }

  static void transpose(const double* src, std::size_t rows, std::size_t cols, double* dst) {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
    }
  }

  std::size_t c1_, c2_, hidden_, flat_n_, k2_;
  std::vector<double> cols1_, cols1_t_, conv1_;
  std::vector<std::uint32_t> pool1_arg_;
  std::vector<double> act1_, cols2_, cols2_t_, conv2_;
  std::vector<std::uint32_t> pool2_arg_;
  std::vector<double> flat_, hidden_act_, logits_;
  std::vector<double> d_logits_, d_hidden_, d_flat_, d_conv2_, d_cols2_t_, d_act1_, d_conv1_;
};

std::size_t batch_rows(const Tensor& batch) {
  const Shape& s = batch.shape();
  if (s.size() != 4 || s[1] != 1 || s[2] != kImageSide || s[3] != kImageSide) {
    throw ShapeError("batch must have shape (N, 1, 28, 28), got " + to_string(s));
  }
  return s[0];
}

void check_label(int label) {
  if (label < 0 || label >= static_cast<int>(kNumClasses)) {
    throw InvalidArgument("label " + std::to_string(label) + " outside [0, 9]");
  }
}

// Sum (not mean) of per-sample NLL and gradients over rows `rows` of `images`.
double accumulate_gradients(const ModelParams& params, const SimpleCnnArch& arch,
                            std::span<const double> images, std::span<const int> labels,
                            std::span<const std::size_t> rows, ModelParams& grads) {
  const Weights w(params);
  Grads g(grads);
  Workspace ws(arch);
  double log_probs[kNumClasses];
  double loss = 0.0;
  for (std::size_t r : rows) {
    const int label = labels[r];
    ws.forward(w, images.data() + r * kImagePixels, log_probs, true);
    loss -= log_probs[label];
    ws.backward(w, log_probs, label, g);
  }
  return loss;
}

void scale(ModelParams& p, double factor) {
  for (auto& e : p) {
    for (double& v : e.tensor.values()) v *= factor;
  }
}

}  // namespace

SimpleCnnArch SimpleCnnArch::infer(const ModelParams& params) {
  if (params.size() != 8) {
    throw ShapeError("SimpleCNN expects 8 parameter tensors, got " + std::to_string(params.size()));
  }
  const Shape& c1 = params[0].tensor.shape();
  const Shape& c2 = params[2].tensor.shape();
  const Shape& f1 = params[4].tensor.shape();
  if (c1.size() != 4 || c2.size() != 4 || f1.size() != 2) {
    throw ShapeError("parameter set is not a SimpleCNN layout");
  }
  SimpleCnnArch arch{c1[0], c2[0], f1[0]};
  ModelParams expected = [&] {
    std::vector<NamedTensor> entries;
    for (auto& [name, shape] : arch.layout()) entries.push_back({name, Tensor(shape)});
    return ModelParams(std::move(entries));
  }();
  expected.require_same_layout(params, "SimpleCNN layout");
  return arch;
}

std::vector<std::pair<std::string, Shape>> SimpleCnnArch::layout() const {
  return {
      {"conv1.weight", {conv1_channels, 1, kKernel, kKernel}},
      {"conv1.bias", {conv1_channels}},
      {"conv2.weight", {conv2_channels, conv1_channels, kKernel, kKernel}},
      {"conv2.bias", {conv2_channels}},
      {"fc1.weight", {hidden_units, flat_features()}},
      {"fc1.bias", {hidden_units}},
      {"fc2.weight", {kNumClasses, hidden_units}},
      {"fc2.bias", {kNumClasses}},
  };
}

std::size_t SimpleCnnArch::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, shape] : layout()) n += element_count(shape);
  return n;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidArgument("learning_rate must be finite and non-negative");
  }
  if (!(momentum >= 0.0) || !std::isfinite(momentum)) {
    throw InvalidArgument("momentum must be finite and non-negative");
  }
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (local_epochs < 1) throw InvalidArgument("local_epochs must be >= 1");
}

ModelParams init_params(const SimpleCnnArch& arch, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<NamedTensor> entries;
  for (auto& [name, shape] : arch.layout()) {
    Tensor t(shape);
    if (shape.size() > 1) {
      std::size_t fan_in = 1;
      for (std::size_t i = 1; i < shape.size(); ++i) fan_in *= shape[i];
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (double& v : t.values()) v = rng.uniform(-bound, bound);
    }
    entries.push_back({name, std::move(t)});
  }
  return ModelParams(std::move(entries));
}

Tensor forward(const ModelParams& params, const Tensor& batch) {
  const SimpleCnnArch arch = SimpleCnnArch::infer(params);
  const std::size_t n = batch_rows(batch);
  Tensor out({n, kNumClasses});
  const Weights w(params);
  Workspace ws(arch);
  for (std::size_t i = 0; i < n; ++i) {
    ws.forward(w, batch.data() + i * kImagePixels, out.data() + i * kNumClasses, false);
  }
  return out;
}

LossAndGradients loss_and_gradients(const ModelParams& params, const Tensor& batch,
                                    std::span<const int> labels) {
  const SimpleCnnArch arch = SimpleCnnArch::infer(params);
  const std::size_t n = batch_rows(batch);
  if (labels.size() != n) {
    throw ShapeError("batch has " + std::to_string(n) + " rows but " +
                     std::to_string(labels.size()) + " labels");
  }
  for (int l : labels) check_label(l);
  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  LossAndGradients out{0.0, params.zeros_like()};
  const double total = accumulate_gradients(params, arch, batch.values(), labels, rows, out.grads);
  const double inv = 1.0 / static_cast<double>(n);
  out.loss = total * inv;
  scale(out.grads, inv);
  return out;
}

void sgd_momentum_step(ModelParams& params, const ModelParams& grads, ModelParams& velocity,
                       const TrainConfig& cfg) {
  params.require_same_layout(grads, "sgd_momentum_step(grads)");
  if (velocity.empty()) velocity = params.zeros_like();
  params.require_same_layout(velocity, "sgd_momentum_step(velocity)");
  const double lr = cfg.learning_rate;
  const double mu = cfg.momentum;
  for (std::size_t i = 0; i < params.size(); ++i) {
    double* w = params[i].tensor.data();
    double* v = velocity[i].tensor.data();
    const double* g = grads[i].tensor.data();
    const std::size_t n = params[i].tensor.size();
    for (std::size_t k = 0; k < n; ++k) {
      v[k] = mu * v[k] + g[k];
      w[k] -= lr * v[k];
    }
  }
}

LocalTrainResult train_local(ModelParams params, const LabeledSet& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw InvalidArgument("train_local: empty dataset");
  const SimpleCnnArch arch = SimpleCnnArch::infer(params);
  for (int l : data.labels) check_label(l);

  SplitMix64 rng(cfg.seed);
  ModelParams velocity = params.zeros_like();
  ModelParams grads = params.zeros_like();
  const std::size_t n = data.size();
  std::size_t steps = 0;
  for (std::size_t epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    const std::vector<std::size_t> order = shuffled_indices(n, rng);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, n - start);
      for (auto& e : grads) e.tensor.fill(0.0);
      accumulate_gradients(params, arch, data.images.values(), data.labels,
                           std::span<const std::size_t>(order).subspan(start, len), grads);
      scale(grads, 1.0 / static_cast<double>(len));
      sgd_momentum_step(params, grads, velocity, cfg);
      ++steps;
    }
  }
  return {std::move(params), n, steps};
}

double evaluate_accuracy(const ModelParams& params, const LabeledSet& data) {
  if (data.empty()) throw InvalidArgument("evaluate_accuracy: empty test set");
  const SimpleCnnArch arch = SimpleCnnArch::infer(params);
  const Weights w(params);
  Workspace ws(arch);
  double log_probs[kNumClasses];
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    ws.forward(w, data.image(i).data(), log_probs, false);
    std::size_t best = 0;
    for (std::size_t c = 1; c < kNumClasses; ++c) {
      if (log_probs[c] > log_probs[best]) best = c;
    }
    if (static_cast<int>(best) == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace fedtier

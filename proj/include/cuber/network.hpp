#pragma once
// Fully-connected networks: forward/backward passes with per-layer input
// capture, multi-head and single-head output modes, SGD epochs and the
// validation-driven learning rate schedule.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "cuber/error.hpp"
#include "cuber/linalg.hpp"
#include "cuber/random.hpp"

namespace cuber {

using TaskId = int;

enum class Activation { relu, identity };
enum class HeadMode { multi, single };
enum class LossKind { cross_entropy, mse };

struct Layer {
  Matrix weight;              // out_dim x in_dim
  std::vector<double> bias;   // out_dim
  Activation activation = Activation::relu;

  std::size_t in_dim() const noexcept { return weight.cols(); }
  std::size_t out_dim() const noexcept { return weight.rows(); }
};

/// Uniform(-a, a) weights with a = sqrt(6 / (in + out)); zero bias.
inline Layer make_layer(std::size_t in_dim, std::size_t out_dim, Activation act, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  std::uniform_real_distribution<double> dist(-a, a);
  Layer layer{Matrix(out_dim, in_dim), std::vector<double>(out_dim, 0.0), act};
  for (double& w : layer.weight.data()) w = dist(rng);
  return layer;
}

struct Dataset {
  Matrix features;          // one sample per row
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return features.cols(); }

  Dataset subset(std::span<const std::size_t> idx) const {
    Dataset out{Matrix(idx.size(), features.cols()), std::vector<int>(idx.size())};
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto src = features.row(idx[i]);
      std::copy(src.begin(), src.end(), out.features.row(i).begin());
      out.labels[i] = labels[idx[i]];
    }
    return out;
  }
};

class Network {
 public:
  Network() = default;
  Network(std::vector<Layer> body, HeadMode mode, std::size_t input_dim = 0)
      : body_(std::move(body)), mode_(mode), input_dim_(input_dim) {
    for (std::size_t l = 1; l < body_.size(); ++l)
      detail::require(body_[l].in_dim() == body_[l - 1].out_dim(), "Network: layer dimensions do not chain");
    if (!body_.empty()) {
      detail::require(input_dim == 0 || input_dim == body_.front().in_dim(), "Network: input dimension mismatch");
      input_dim_ = body_.front().in_dim();
    }
  }

  /// Hidden ReLU layers of the given widths; heads are added per task.
  static Network create(std::size_t input_dim, std::span<const std::size_t> hidden, HeadMode mode, Rng& rng) {
    std::vector<Layer> body;
    std::size_t in = input_dim;
    for (std::size_t width : hidden) {
      body.push_back(make_layer(in, width, Activation::relu, rng));
      in = width;
    }
    return Network(std::move(body), mode, input_dim);
  }

  HeadMode head_mode() const noexcept { return mode_; }
  std::size_t input_dim() const noexcept { return body_.empty() ? input_dim_ : body_.front().in_dim(); }
  std::size_t feature_dim() const noexcept { return body_.empty() ? input_dim_ : body_.back().out_dim(); }

  /// Layers traversed by one forward pass (body + head).
  std::size_t depth() const noexcept { return body_.size() + 1; }
  /// Layers shared across tasks; these carry subspace memory.
  std::size_t shared_depth() const noexcept { return body_.size() + (mode_ == HeadMode::single ? 1 : 0); }

  bool has_head(TaskId task) const { return heads_.count(head_key(task)) > 0; }

  void set_head(TaskId task, Layer head) {
    detail::require(head.activation == Activation::identity, "Network: head activation must be identity");
    detail::require(head.in_dim() == feature_dim(), "Network: head input dimension mismatch");
    heads_[head_key(task)] = std::move(head);
  }

  /// Adds a freshly initialized head unless one already serves `task`.
  void ensure_head(TaskId task, std::size_t classes, Rng& rng) {
    if (!has_head(task)) set_head(task, make_layer(feature_dim(), classes, Activation::identity, rng));
  }

  Layer& head(TaskId task) { return heads_.at(checked_key(task)); }
  const Layer& head(TaskId task) const { return heads_.at(checked_key(task)); }

  Layer& layer(std::size_t l, TaskId task) { return l < body_.size() ? body_[l] : head(task); }
  const Layer& layer(std::size_t l, TaskId task) const { return l < body_.size() ? body_[l] : head(task); }

  std::vector<Layer>& body() noexcept { return body_; }
  const std::vector<Layer>& body() const noexcept { return body_; }

  /// Shared layer `l` (< shared_depth()); the single head is the last one.
  Layer& shared_layer(std::size_t l) { return layer(l, 0); }
  const Layer& shared_layer(std::size_t l) const { return layer(l, 0); }

 private:
  TaskId head_key(TaskId task) const noexcept { return mode_ == HeadMode::single ? 0 : task; }
  TaskId checked_key(TaskId task) const {
    const TaskId key = head_key(task);
    if (!heads_.count(key)) throw InvalidInput("Network: no head for task " + std::to_string(task));
    return key;
  }

  std::vector<Layer> body_;
  std::map<TaskId, Layer> heads_;
  HeadMode mode_ = HeadMode::multi;
  std::size_t input_dim_ = 0;
};

struct ForwardTrace {
  std::vector<Matrix> inputs;  // inputs[l] = batch rows entering layer l
  Matrix logits;
  TaskId task = 0;
};

struct LayerGradients {
  std::vector<Matrix> weight;
  std::vector<std::vector<double>> bias;

  std::size_t size() const noexcept { return weight.size(); }

  LayerGradients& operator+=(const LayerGradients& o) {
    for (std::size_t l = 0; l < weight.size(); ++l) {
      weight[l] += o.weight[l];
      for (std::size_t i = 0; i < bias[l].size(); ++i) bias[l][i] += o.bias[l][i];
    }
    return *this;
  }
  LayerGradients& operator*=(double s) {
    for (std::size_t l = 0; l < weight.size(); ++l) {
      weight[l] *= s;
      for (double& b : bias[l]) b *= s;
    }
    return *this;
  }
};

namespace detail {

inline void affine(const Matrix& x, const Layer& layer, Matrix& z) {
  z = matmul_nt(x, layer.weight);
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto row = z.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += layer.bias[c];
  }
  if (layer.activation == Activation::relu)
    for (double& v : z.data()) v = v > 0.0 ? v : 0.0;
}

}  // namespace detail

inline ForwardTrace forward(const Network& net, const Matrix& batch, TaskId task) {
  detail::require(batch.cols() == net.input_dim(), "forward: batch width != network input dimension");
  ForwardTrace trace;
  trace.task = task;
  trace.inputs.reserve(net.depth());
  Matrix x = batch;
  for (std::size_t l = 0; l < net.depth(); ++l) {
    const Layer& layer = net.layer(l, task);
    Matrix z;
    detail::affine(x, layer, z);
    trace.inputs.push_back(std::move(x));
    x = std::move(z);
  }
  trace.logits = std::move(x);
  return trace;
}

/// Logits only, without keeping the per-layer inputs.
inline Matrix predict(const Network& net, const Matrix& batch, TaskId task) {
  detail::require(batch.cols() == net.input_dim(), "predict: batch width != network input dimension");
  Matrix x = batch;
  for (std::size_t l = 0; l < net.depth(); ++l) {
    Matrix z;
    detail::affine(x, net.layer(l, task), z);
    x = std::move(z);
  }
  return x;
}

namespace detail {

// Mean loss over the batch and its gradient w.r.t. the logits.
inline double loss_and_logit_grad(const Matrix& logits, std::span<const int> labels, LossKind kind, Matrix* dz) {
  const std::size_t n = logits.rows();
  const std::size_t k = logits.cols();
  require(labels.size() == n, "loss: label count != batch size");
  for (int y : labels)
    require(y >= 0 && static_cast<std::size_t>(y) < k, "loss: label out of class range");
  if (dz) *dz = Matrix(n, k);
  double total = 0.0;
  const double inv_n = n == 0 ? 0.0 : 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto z = logits.row(i);
    const auto y = static_cast<std::size_t>(labels[i]);
    if (kind == LossKind::cross_entropy) {
      const double zmax = *std::max_element(z.begin(), z.end());
      double sum = 0.0;
      for (double v : z) sum += std::exp(v - zmax);
      const double lse = zmax + std::log(sum);
      total += lse - z[y];
      if (dz) {
        auto g = dz->row(i);
        for (std::size_t c = 0; c < k; ++c) g[c] = std::exp(z[c] - lse) * inv_n;
        g[y] -= inv_n;
      }
    } else {
      for (std::size_t c = 0; c < k; ++c) {
        const double diff = z[c] - (c == y ? 1.0 : 0.0);
        total += diff * diff;
        if (dz) (*dz)(i, c) = 2.0 * diff * inv_n;
      }
    }
  }
  return total * inv_n;
}

}  // namespace detail

struct BackwardResult {
  double loss = 0.0;
  LayerGradients grads;
};

/// Mean batch loss and its exact gradient w.r.t. every weight and bias on
/// the forward path of `trace.task`.
inline BackwardResult backward(const Network& net, const ForwardTrace& trace, std::span<const int> labels,
                               LossKind kind) {
  detail::require(trace.inputs.size() == net.depth(), "backward: trace depth != network depth");
  BackwardResult out;
  Matrix dz;
  out.loss = detail::loss_and_logit_grad(trace.logits, labels, kind, &dz);
  const std::size_t depth = net.depth();
  out.grads.weight.resize(depth);
  out.grads.bias.resize(depth);
  for (std::size_t l = depth; l-- > 0;) {
    const Layer& layer = net.layer(l, trace.task);
    const Matrix& x = trace.inputs[l];
    out.grads.weight[l] = matmul_tn(dz, x);
    auto& db = out.grads.bias[l];
    db.assign(layer.out_dim(), 0.0);
    for (std::size_t r = 0; r < dz.rows(); ++r) {
      const auto row = dz.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) db[c] += row[c];
    }
    if (l == 0) break;
    Matrix dx = matmul(dz, layer.weight);
    if (net.layer(l - 1, trace.task).activation == Activation::relu) {
      // x holds post-ReLU activations of layer l-1, positive exactly where
      // the pre-activation was.
      for (std::size_t i = 0; i < dx.size(); ++i)
        if (!(x.data()[i] > 0.0)) dx.data()[i] = 0.0;
    }
    dz = std::move(dx);
  }
  return out;
}

/// w -= lr * g for every layer on the path of `task`.
inline void apply_step(Network& net, const LayerGradients& g, double lr, TaskId task) {
  for (std::size_t l = 0; l < g.size(); ++l) {
    Layer& layer = net.layer(l, task);
    layer.weight.add_scaled(g.weight[l], -lr);
    for (std::size_t i = 0; i < layer.bias.size(); ++i) layer.bias[i] -= lr * g.bias[l][i];
  }
}

/// Seeded shuffle of [0, n) cut into consecutive batches.
inline std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, Rng& rng) {
  detail::require(batch_size > 0, "make_batches: batch size must be positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

using GradTransform = std::function<void(LayerGradients&)>;

/// One pass over `data`; returns the mean of the batch losses.
inline double sgd_epoch(Network& net, const Dataset& data, TaskId task, double lr, std::size_t batch_size,
                        LossKind kind, Rng& rng, const GradTransform& transform = {}) {
  detail::require(data.size() > 0, "sgd_epoch: empty dataset");
  detail::require(lr >= 0.0, "sgd_epoch: negative learning rate");
  const auto batches = make_batches(data.size(), batch_size, rng);
  double total = 0.0;
  for (const auto& idx : batches) {
    const Dataset b = data.subset(idx);
    const ForwardTrace trace = forward(net, b.features, task);
    BackwardResult res = backward(net, trace, b.labels, kind);
    if (transform) transform(res.grads);
    apply_step(net, res.grads, lr, task);
    total += res.loss;
  }
  return total / static_cast<double>(batches.size());
}

/// Mean loss over a dataset, evaluated in chunks.
inline double dataset_loss(const Network& net, const Dataset& data, TaskId task, LossKind kind,
                           std::size_t chunk = 512) {
  detail::require(data.size() > 0, "dataset_loss: empty dataset");
  double total = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += chunk) {
    const std::size_t end = std::min(data.size(), start + chunk);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Dataset b = data.subset(idx);
    total += detail::loss_and_logit_grad(predict(net, b.features, task), b.labels, kind, nullptr) *
             static_cast<double>(b.size());
  }
  return total / static_cast<double>(data.size());
}

/// Gradient of the mean loss over the whole dataset (the average per-sample
/// gradient), computed chunk by chunk.
inline BackwardResult dataset_gradient(const Network& net, const Dataset& data, TaskId task, LossKind kind,
                                       std::size_t chunk = 512) {
  detail::require(data.size() > 0, "dataset_gradient: empty dataset");
  BackwardResult total;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += chunk) {
    const std::size_t end = std::min(data.size(), start + chunk);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Dataset b = data.subset(idx);
    BackwardResult part = backward(net, forward(net, b.features, task), b.labels, kind);
    const double w = static_cast<double>(b.size()) / static_cast<double>(data.size());
    part.grads *= w;
    if (start == 0) {
      total.grads = std::move(part.grads);
    } else {
      total.grads += part.grads;
    }
    total.loss += part.loss * w;
  }
  return total;
}

/// Fraction of samples whose argmax logit equals the label.
inline double evaluate(const Network& net, const Dataset& data, TaskId task) {
  detail::require(data.size() > 0, "evaluate: empty dataset");
  const Matrix logits = predict(net, data.features, task);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto z = logits.row(i);
    const auto pred = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
    if (pred == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------
// Learning rate schedule

struct TrainSchedule {
  double init_lr = 0.01;
  double min_lr = 1e-5;
  double decay = 2.0;
  int patience = 6;
  int max_epochs = 200;
  bool early_stop = true;  ///< false: fixed learning rate for max_epochs

  void validate() const {
    detail::require(init_lr > 0.0, "schedule: init_lr must be positive");
    detail::require(min_lr > 0.0, "schedule: min_lr must be positive");
    detail::require(decay > 1.0, "schedule: decay must exceed 1");
    detail::require(patience >= 0, "schedule: negative patience");
    detail::require(max_epochs >= 0, "schedule: negative max_epochs");
  }
};

/// Counts validation-loss increases; once the count exceeds `patience` the
/// learning rate is divided by `decay` and the count resets. Training stops
/// when the rate drops below `min_lr`.
class LrController {
 public:
  LrController(const TrainSchedule& s, double initial_valid_loss)
      : s_(s), lr_(s.init_lr), prev_(initial_valid_loss) {
    s_.validate();
  }

  /// Feeds one epoch's validation loss; returns false once training should stop.
  bool observe(double valid_loss) {
    if (!s_.early_stop) return true;
    if (valid_loss > prev_) ++counter_;
    prev_ = valid_loss;
    if (counter_ > s_.patience) {
      lr_ /= s_.decay;
      counter_ = 0;
      ++decays_;
      if (lr_ < s_.min_lr) return false;
    }
    return true;
  }

  double lr() const noexcept { return lr_; }
  int decays() const noexcept { return decays_; }

 private:
  TrainSchedule s_;
  double lr_;
  double prev_;
  int counter_ = 0;
  int decays_ = 0;
};

struct TrainStats {
  int epochs = 0;
  int lr_decays = 0;
  double final_lr = 0.0;
  std::vector<double> train_loss;
  std::vector<double> valid_loss;
};

/// Generic epoch driver: `epoch(lr)` trains once and returns the train loss,
/// `valid()` returns the current validation loss.
inline TrainStats run_schedule(const TrainSchedule& schedule, const std::function<double(double)>& epoch,
                               const std::function<double()>& valid) {
  LrController ctl(schedule, valid());
  TrainStats stats;
  for (int e = 0; e < schedule.max_epochs; ++e) {
    stats.train_loss.push_back(epoch(ctl.lr()));
    const double v = valid();
    stats.valid_loss.push_back(v);
    ++stats.epochs;
    if (!ctl.observe(v)) break;
  }
  stats.lr_decays = ctl.decays();
  stats.final_lr = ctl.lr();
  return stats;
}

inline TrainStats train_with_early_stop(Network& net, const Dataset& train, const Dataset& valid, TaskId task,
                                        const TrainSchedule& schedule, std::size_t batch_size, LossKind kind,
                                        Rng& rng, const GradTransform& transform = {}) {
  detail::require(valid.size() > 0, "train_with_early_stop: empty validation set");
  return run_schedule(
      schedule,
      [&](double lr) { return sgd_epoch(net, train, task, lr, batch_size, kind, rng, transform); },
      [&] { return dataset_loss(net, valid, task, kind); });
}

/// Deterministic split holding out `fraction` of the samples for validation.
inline std::pair<Dataset, Dataset> split_validation(const Dataset& data, double fraction, Rng& rng) {
  detail::require(fraction > 0.0 && fraction < 1.0, "split_validation: fraction must lie in (0, 1)");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_valid = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(data.size())));
  std::vector<std::size_t> valid(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_valid));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_valid), order.end());
  std::sort(valid.begin(), valid.end());
  std::sort(train.begin(), train.end());
  return {data.subset(train), data.subset(valid)};
}

}  // namespace cuber

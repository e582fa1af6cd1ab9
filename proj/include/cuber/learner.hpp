#pragma once
// Task-by-task training with regime-dependent treatment of old tasks.
//
// For every shared layer l the forward pass of the new task uses the
// effective weight
//   w~ = w + sum_{j in Reg2 u Reg3} (w B_j Q_j B_j' - w B_j B_j')
//      = w (I + sum_j B_j (Q_j - I) B_j'),
// the weight gradient is pulled back through w~, a squared projection
// penalty anchors Regime-3 subspaces to the previous model, and the
// subspaces of Regime-1/2 tasks are removed from the weight gradient.
// After training w~ is written back into w.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cuber/error.hpp"
#include "cuber/linalg.hpp"
#include "cuber/memory.hpp"
#include "cuber/network.hpp"
#include "cuber/random.hpp"
#include "cuber/regimes.hpp"
#include "cuber/tasks.hpp"

namespace cuber {

enum class LearnerMode { cuber, orthogonal_only, forward_only, plain, multitask };

enum class DegenerationCheck { per_epoch, per_batch, off };

/// What happens to the learnt Q after a task. per_task keeps each task's Q
/// in memory and applies it only when that task runs; fold writes w~ into
/// the shared weights, which also moves older tasks' outputs.
enum class ScalingStorage { per_task, fold };

struct LearnerConfig {
  LearnerMode mode = LearnerMode::cuber;
  TrainSchedule schedule;
  double scaling_lr = 0.0;  ///< beta; 0 means "use the current model learning rate"
  double lambda = 1.0;
  CorrelationThresholds thresholds;
  std::size_t batch_size = 32;
  double snapshot_sparsity = 0.9;
  DegenerationCheck degeneration = DegenerationCheck::per_epoch;
  ScalingStorage storage = ScalingStorage::per_task;
  LossKind loss = LossKind::cross_entropy;
  ExtractionConfig extraction;
  std::uint64_t seed = 0;

  void validate() const {
    schedule.validate();
    thresholds.validate();
    detail::require(scaling_lr >= 0.0, "learner: scaling lr must be non-negative");
    detail::require(lambda >= 0.0, "learner: lambda must be non-negative");
    detail::require(batch_size > 0, "learner: batch size must be positive");
    detail::require(snapshot_sparsity >= 0.0 && snapshot_sparsity < 1.0, "learner: sparsity must lie in [0, 1)");
    detail::require(extraction.n_samples > 0, "learner: representation sample count must be positive");
  }
};

// ---------------------------------------------------------------------------
// Per-layer algebra

/// One Regime-2/3 old task of a layer: its basis and scaling matrix Q.
struct ScaledTerm {
  TaskId task = 0;
  const Basis* basis = nullptr;
  Matrix q;
};

inline void check_term(const Matrix& w, const ScaledTerm& t) {
  if (t.basis == nullptr) throw ConsistencyError("scaling: missing basis for task " + std::to_string(t.task));
  detail::require(t.basis->ambient_dim() == w.cols(), "scaling: basis dimension != weight input dimension");
  detail::require(t.q.rows() == t.basis->size() && t.q.cols() == t.basis->size(),
                  "scaling: Q must be k x k for a k-column basis");
}

inline Matrix effective_weight(const Matrix& w, std::span<const ScaledTerm> terms) {
  Matrix out = w;
  for (const ScaledTerm& t : terms) {
    check_term(w, t);
    if (t.basis->empty()) continue;
    const Matrix& b = t.basis->matrix();
    const Matrix wb = matmul(w, b);
    Matrix qmi = t.q;
    for (std::size_t i = 0; i < qmi.rows(); ++i) qmi(i, i) -= 1.0;
    out += matmul_nt(matmul(wb, qmi), b);
  }
  return out;
}

/// dL/dw given G = dL/dw~: G + sum_j G B_j (Q_j - I)' B_j'.
inline Matrix pull_back_weight_gradient(const Matrix& g, std::span<const ScaledTerm> terms) {
  Matrix out = g;
  for (const ScaledTerm& t : terms) {
    check_term(g, t);
    if (t.basis->empty()) continue;
    const Matrix& b = t.basis->matrix();
    Matrix qmi = t.q;
    for (std::size_t i = 0; i < qmi.rows(); ++i) qmi(i, i) -= 1.0;
    out += matmul_nt(matmul_nt(matmul(g, b), qmi), b);
  }
  return out;
}

/// dL/dQ given G = dL/dw~: B' w' G B.
inline Matrix scaling_gradient(const Matrix& w, const Matrix& g, const Basis& b) {
  detail::require(w.same_shape(g), "scaling_gradient: weight/gradient shape mismatch");
  detail::require(b.ambient_dim() == w.cols(), "scaling_gradient: basis dimension mismatch");
  if (b.empty()) return Matrix(0, 0);
  return matmul_tn(matmul(w, b.matrix()), matmul(g, b.matrix()));
}

inline void update_scaling(Matrix& q, double beta, const Matrix& grad_q) {
  detail::require(beta >= 0.0, "update_scaling: beta must be non-negative");
  detail::require(q.same_shape(grad_q), "update_scaling: shape mismatch");
  q.add_scaled(grad_q, -beta);
}

/// Removes the union of the listed subspaces from a weight gradient.
inline Matrix project_out_gradient(const Matrix& g, std::span<const Basis* const> bases) {
  if (bases.empty()) return g;
  return project_out(g, union_basis(bases, g.cols()));
}

struct Penalty {
  double value = 0.0;
  Matrix grad;
};

/// lambda * sum_j ||(w - w_prev) B_j B_j'||_F^2 and its gradient.
inline Penalty regime3_regularizer(const Matrix& w, const Matrix& w_prev, std::span<const Basis* const> bases,
                                   double lambda) {
  detail::require(w.same_shape(w_prev), "regularizer: weight/anchor shape mismatch");
  detail::require(lambda >= 0.0, "regularizer: lambda must be non-negative");
  Penalty out{0.0, Matrix(w.rows(), w.cols())};
  if (bases.empty() || lambda == 0.0) return out;
  const Matrix delta = w - w_prev;
  for (const Basis* b : bases) {
    const Matrix p = project(delta, *b);
    out.value += lambda * flat_inner(p, p);
    out.grad.add_scaled(p, 2.0 * lambda);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Layer plans and the per-batch objective

/// Regime bookkeeping of one shared layer while a task is being learnt.
struct LayerPlan {
  std::vector<ScaledTerm> scaled;         ///< Regime 2 and 3 tasks with their Q
  std::set<TaskId> reg1, reg2, reg3;
  std::vector<const Basis*> reg3_bases;
  Basis frozen;                           ///< union of Regime 1 and 2 bases
  Matrix anchor;                          ///< weights before this task

  void rebuild(const SubspaceMemory& memory, std::size_t layer) {
    reg3_bases.clear();
    for (TaskId j : reg3) reg3_bases.push_back(&memory.basis(layer, j));
    std::vector<const Basis*> fb;
    for (TaskId j : reg1) fb.push_back(&memory.basis(layer, j));
    for (TaskId j : reg2) fb.push_back(&memory.basis(layer, j));
    frozen = union_basis(fb, anchor.cols());
  }
};

inline std::vector<LayerPlan> make_plans(const Network& net, const SubspaceMemory& memory,
                                         const RegimeAssignment& regimes) {
  detail::require(regimes.layers.size() == memory.layer_count(), "make_plans: regime/memory layer mismatch");
  detail::require(memory.layer_count() <= net.shared_depth(), "make_plans: memory has more layers than the network");
  std::vector<LayerPlan> plans(memory.layer_count());
  for (std::size_t l = 0; l < plans.size(); ++l) {
    LayerPlan& p = plans[l];
    const LayerRegimes& r = regimes.layers[l];
    p.reg1 = r.reg1;
    p.reg2 = r.reg2;
    p.reg3 = r.reg3;
    p.anchor = net.shared_layer(l).weight;
    for (TaskId j : r.scaled()) {
      const Basis& b = memory.basis(l, j);
      p.scaled.push_back({j, &b, Matrix::identity(b.size())});
    }
    p.rebuild(memory, l);
  }
  return plans;
}

/// Copy of `net` with every planned layer's weight replaced by w~.
inline Network effective_network(const Network& net, std::span<const LayerPlan> plans) {
  Network eff = net;
  for (std::size_t l = 0; l < plans.size(); ++l) {
    if (plans[l].scaled.empty()) continue;
    eff.shared_layer(l).weight = effective_weight(net.shared_layer(l).weight, plans[l].scaled);
  }
  return eff;
}

/// Copy of `net` carrying the scalings `task` stored in memory, i.e. the
/// weights that task sees at inference. Equal to `net` when it stored none.
inline Network task_network(const Network& net, const SubspaceMemory& memory, TaskId task) {
  Network eff = net;
  if (!memory.has_scalings(task)) return eff;
  for (std::size_t l = 0; l < memory.layer_count(); ++l) {
    std::vector<ScaledTerm> terms;
    for (const StoredScaling& s : memory.scalings(task, l))
      terms.push_back({s.basis_task, &memory.basis(l, s.basis_task), s.q});
    if (!terms.empty()) eff.shared_layer(l).weight = effective_weight(net.shared_layer(l).weight, terms);
  }
  return eff;
}

struct ObjectiveGradients {
  double loss = 0.0;                     ///< task loss at w~
  double penalty = 0.0;                  ///< Regime-3 regularizer value
  LayerGradients loss_grads;             ///< d loss / d w (no penalty), biases included
  LayerGradients total_grads;            ///< loss_grads plus penalty gradient, unprojected
  std::vector<std::vector<Matrix>> q_grads;  ///< [layer][scaled term]
};

/// Loss at the effective weights plus the Regime-3 penalty, and its exact
/// gradients with respect to the raw weights, biases and every Q.
inline ObjectiveGradients objective_gradients(const Network& net, std::span<const LayerPlan> plans,
                                              const Matrix& batch, std::span<const int> labels, TaskId task,
                                              LossKind kind, double lambda) {
  // Same algebra as effective_weight / pull_back_weight_gradient /
  // scaling_gradient, sharing w B and G B across the three.
  Network eff = net;
  std::vector<std::vector<Matrix>> wb(plans.size());
  std::vector<std::vector<Matrix>> qmi(plans.size());
  for (std::size_t l = 0; l < plans.size(); ++l) {
    const Matrix& w = net.shared_layer(l).weight;
    Matrix& w_eff = eff.shared_layer(l).weight;
    for (const ScaledTerm& t : plans[l].scaled) {
      check_term(w, t);
      const Matrix& b = t.basis->matrix();
      Matrix d = t.q;
      for (std::size_t i = 0; i < d.rows(); ++i) d(i, i) -= 1.0;
      wb[l].push_back(t.basis->empty() ? Matrix(w.rows(), 0) : matmul(w, b));
      if (!t.basis->empty()) w_eff += matmul_nt(matmul(wb[l].back(), d), b);
      qmi[l].push_back(std::move(d));
    }
  }
  BackwardResult res = backward(eff, forward(eff, batch, task), labels, kind);
  ObjectiveGradients out;
  out.loss = res.loss;
  out.q_grads.resize(plans.size());
  out.loss_grads = res.grads;
  for (std::size_t l = 0; l < plans.size(); ++l) {
    const Matrix& g = res.grads.weight[l];
    Matrix& pulled = out.loss_grads.weight[l];
    for (std::size_t k = 0; k < plans[l].scaled.size(); ++k) {
      const Basis& basis = *plans[l].scaled[k].basis;
      if (basis.empty()) {
        out.q_grads[l].push_back(Matrix(0, 0));
        continue;
      }
      const Matrix gb = matmul(g, basis.matrix());
      out.q_grads[l].push_back(matmul_tn(wb[l][k], gb));
      pulled += matmul_nt(matmul_nt(gb, qmi[l][k]), basis.matrix());
    }
  }
  out.total_grads = out.loss_grads;
  for (std::size_t l = 0; l < plans.size(); ++l) {
    const Penalty pen = regime3_regularizer(net.shared_layer(l).weight, plans[l].anchor, plans[l].reg3_bases, lambda);
    out.penalty += pen.value;
    if (!plans[l].reg3_bases.empty()) out.total_grads.weight[l] += pen.grad;
  }
  return out;
}

inline double objective_value(const Network& net, std::span<const LayerPlan> plans, const Matrix& batch,
                              std::span<const int> labels, TaskId task, LossKind kind, double lambda) {
  const Network eff = effective_network(net, plans);
  double v = detail::loss_and_logit_grad(predict(eff, batch, task), labels, kind, nullptr);
  for (std::size_t l = 0; l < plans.size(); ++l)
    v += regime3_regularizer(net.shared_layer(l).weight, plans[l].anchor, plans[l].reg3_bases, lambda).value;
  return v;
}

/// The weight step direction: total gradient with the frozen union removed.
/// Biases and layers beyond the plans pass through untouched.
inline LayerGradients projected_step(const ObjectiveGradients& og, std::span<const LayerPlan> plans) {
  LayerGradients step = og.total_grads;
  for (std::size_t l = 0; l < plans.size(); ++l)
    if (!plans[l].frozen.empty()) step.weight[l] = project_out(step.weight[l], plans[l].frozen);
  return step;
}

/// Writes w~ into w for every planned layer and resets Q to identity.
inline void fold_scaling(Network& net, std::vector<LayerPlan>& plans) {
  for (std::size_t l = 0; l < plans.size(); ++l) {
    if (plans[l].scaled.empty()) continue;
    net.shared_layer(l).weight = effective_weight(net.shared_layer(l).weight, plans[l].scaled);
    for (ScaledTerm& t : plans[l].scaled) t.q = Matrix::identity(t.q.rows());
  }
}

// ---------------------------------------------------------------------------
// Task driver

struct DegenerationEvent {
  std::size_t layer = 0;
  TaskId old_task = 0;
  int epoch = 0;     ///< 0-based epoch in which the check failed
  int batch = -1;    ///< batch index for per-batch checks, -1 otherwise
  double cosine = 0.0;
};

struct TaskResult {
  TaskId task = 0;
  std::size_t task_index = 0;
  std::vector<double> accuracies;  ///< test accuracy of tasks[0..task_index] after this task
  RegimeAssignment regimes;        ///< as detected at the start of the task
  RegimeAssignment final_regimes;  ///< after degeneration demotions
  std::vector<DegenerationEvent> degenerations;
  TrainStats train;
  /// Per shared layer: max over final Regime-1 tasks j of ||(w - w_prev) B_j||_F,
  /// before and after the scaling is folded into w (equal under per_task).
  std::vector<double> reg1_drift;
  std::vector<double> reg1_drift_folded;
};

namespace detail {

enum class Stream : std::uint64_t { head = 1, detect = 2, train = 3, represent = 4, joint = 5 };

inline Rng stream(const LearnerConfig& cfg, std::size_t task_index, Stream s) {
  return Rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(task_index), static_cast<std::uint64_t>(s)}));
}

inline void force_mode(RegimeAssignment& r, LearnerMode mode) {
  for (LayerRegimes& lr : r.layers) {
    if (mode == LearnerMode::orthogonal_only) {
      lr.reg1.insert(lr.reg2.begin(), lr.reg2.end());
      lr.reg1.insert(lr.reg3.begin(), lr.reg3.end());
      lr.reg2.clear();
      lr.reg3.clear();
    } else if (mode == LearnerMode::forward_only) {
      lr.reg2.insert(lr.reg3.begin(), lr.reg3.end());
      lr.reg3.clear();
    }
  }
}

inline double max_drift(const Matrix& w, const Matrix& w_prev, const std::set<TaskId>& tasks,
                        const SubspaceMemory& memory, std::size_t layer) {
  double worst = 0.0;
  const Matrix delta = w - w_prev;
  for (TaskId j : tasks) {
    const Basis& b = memory.basis(layer, j);
    if (b.empty()) continue;
    worst = std::max(worst, flat_norm(matmul(delta, b.matrix())));
  }
  return worst;
}

}  // namespace detail

/// Learns tasks[index] given that tasks[0..index) were learnt into `net` and
/// `memory`, then updates the memory and evaluates every task seen so far.
inline TaskResult learn_task(Network& net, SubspaceMemory& memory, std::span<const TaskDataset> tasks,
                             std::size_t index, const LearnerConfig& cfg) {
  cfg.validate();
  detail::require(index < tasks.size(), "learn_task: task index out of range");
  detail::require(cfg.mode != LearnerMode::multitask, "learn_task: multitask mode trains jointly, use learn_joint");
  detail::require(memory.layer_count() == net.shared_depth(), "learn_task: memory/network layer count mismatch");
  const TaskDataset& data = tasks[index];
  detail::require(data.train.size() > 0 && data.valid.size() > 0 && data.test.size() > 0,
                  "learn_task: every split must be non-empty");
  detail::require(data.dim() == net.input_dim(), "learn_task: feature dimension != network input dimension");
  for (std::size_t i = 0; i < index; ++i)
    if (tasks[i].task_id == data.task_id) throw InvalidInput("learn_task: duplicate task id");

  const TaskId task = data.task_id;
  TaskResult result;
  result.task = task;
  result.task_index = index;

  {
    Rng head_rng = detail::stream(cfg, index, detail::Stream::head);
    if (!net.has_head(task)) net.ensure_head(task, data.num_classes, head_rng);
    detail::require(net.head(task).out_dim() >= data.num_classes, "learn_task: head has too few outputs");
  }

  const bool use_memory = cfg.mode != LearnerMode::plain && !memory.tasks().empty();
  std::vector<LayerPlan> plans;
  if (use_memory) {
    Rng det_rng = detail::stream(cfg, index, detail::Stream::detect);
    std::vector<std::size_t> idx(data.train.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), det_rng);
    idx.resize(std::min(idx.size(), cfg.batch_size));
    const Dataset b = data.train.subset(idx);
    const BackwardResult init = backward(net, forward(net, b.features, task), b.labels, cfg.loss);
    result.regimes = detect_regimes(std::span<const Matrix>(init.grads.weight).first(memory.layer_count()), memory,
                                    cfg.thresholds);
    detail::force_mode(result.regimes, cfg.mode);
    plans = make_plans(net, memory, result.regimes);
  }

  const std::vector<Matrix> prev_weights = [&] {
    std::vector<Matrix> w;
    for (std::size_t l = 0; l < net.shared_depth(); ++l) w.push_back(net.shared_layer(l).weight);
    return w;
  }();

  Rng train_rng = detail::stream(cfg, index, detail::Stream::train);
  int epoch_no = 0;

  auto demote = [&](std::size_t l, const Matrix& grad, int batch_no) {
    LayerPlan& p = plans[l];
    std::vector<TaskId> failed;
    for (TaskId j : p.reg3) {
      const SparseLayer& snap = memory.snapshot(j).layers.at(l);
      if (!check_degeneration(snap, grad, cfg.thresholds.eps2))
        failed.push_back(j);
    }
    for (TaskId j : failed) {
      p.reg3.erase(j);
      p.reg2.insert(j);
      result.degenerations.push_back({l, j, epoch_no, batch_no, sparse_cosine(memory.snapshot(j).layers.at(l), grad)});
    }
    if (!failed.empty()) p.rebuild(memory, l);
  };

  auto epoch = [&](double lr) {
    const double beta = cfg.scaling_lr > 0.0 ? cfg.scaling_lr : lr;
    const auto batches = make_batches(data.train.size(), cfg.batch_size, train_rng);
    std::vector<Matrix> grad_sum;
    for (const LayerPlan& p : plans) grad_sum.emplace_back(p.anchor.rows(), p.anchor.cols());
    double total = 0.0;
    int batch_no = 0;
    for (const auto& idx : batches) {
      const Dataset b = data.train.subset(idx);
      ObjectiveGradients og = objective_gradients(net, plans, b.features, b.labels, task, cfg.loss, cfg.lambda);
      const LayerGradients step = projected_step(og, plans);
      apply_step(net, step, lr, task);
      for (std::size_t l = 0; l < plans.size(); ++l) {
        for (std::size_t k = 0; k < plans[l].scaled.size(); ++k)
          update_scaling(plans[l].scaled[k].q, beta, og.q_grads[l][k]);
        grad_sum[l] += og.loss_grads.weight[l];
        if (cfg.degeneration == DegenerationCheck::per_batch && !plans[l].reg3.empty())
          demote(l, og.loss_grads.weight[l], batch_no);
      }
      total += og.loss;
      ++batch_no;
    }
    if (cfg.degeneration == DegenerationCheck::per_epoch) {
      for (std::size_t l = 0; l < plans.size(); ++l) {
        if (plans[l].reg3.empty()) continue;
        grad_sum[l] *= 1.0 / static_cast<double>(batches.size());
        demote(l, grad_sum[l], -1);
      }
    }
    ++epoch_no;
    return total / static_cast<double>(batches.size());
  };
  auto valid = [&] { return dataset_loss(effective_network(net, plans), data.valid, task, cfg.loss); };
  result.train = run_schedule(cfg.schedule, epoch, valid);

  result.final_regimes = result.regimes;
  for (std::size_t l = 0; l < plans.size(); ++l) {
    LayerRegimes& lr = result.final_regimes.layers[l];
    lr.reg1 = plans[l].reg1;
    lr.reg2 = plans[l].reg2;
    lr.reg3 = plans[l].reg3;
    result.reg1_drift.push_back(
        detail::max_drift(net.shared_layer(l).weight, prev_weights[l], plans[l].reg1, memory, l));
  }
  if (cfg.storage == ScalingStorage::fold) {
    fold_scaling(net, plans);
  } else if (!plans.empty()) {
    std::vector<std::vector<StoredScaling>> stored(plans.size());
    for (std::size_t l = 0; l < plans.size(); ++l)
      for (const ScaledTerm& t : plans[l].scaled) stored[l].push_back({t.task, t.q});
    memory.set_scalings(task, std::move(stored));
  }
  for (std::size_t l = 0; l < plans.size(); ++l)
    result.reg1_drift_folded.push_back(
        detail::max_drift(net.shared_layer(l).weight, prev_weights[l], plans[l].reg1, memory, l));

  const Network own = task_network(net, memory, task);
  const BackwardResult full = dataset_gradient(own, data.train, task, cfg.loss);
  memory.set_snapshot(task, snapshot_gradient(full.grads, memory.layer_count(), cfg.snapshot_sparsity));
  Rng rep_rng = detail::stream(cfg, index, detail::Stream::represent);
  const std::size_t n_rep = std::min(cfg.extraction.n_samples, data.train.size());
  memory.absorb(task, index, collect_representations(own, data.train, task, n_rep, rep_rng));

  for (std::size_t i = 0; i <= index; ++i) {
    const TaskId id = tasks[i].task_id;
    result.accuracies.push_back(evaluate(task_network(net, memory, id), tasks[i].test, id));
  }
  return result;
}

/// Joint training on every task at once: each epoch visits every task's
/// batches in a shuffled interleaving. Returns one result whose accuracies
/// cover all tasks.
inline TaskResult learn_joint(Network& net, std::span<const TaskDataset> tasks, const LearnerConfig& cfg) {
  cfg.validate();
  detail::require(!tasks.empty(), "learn_joint: no tasks");
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    Rng head_rng = detail::stream(cfg, i, detail::Stream::head);
    if (!net.has_head(tasks[i].task_id)) net.ensure_head(tasks[i].task_id, tasks[i].num_classes, head_rng);
  }
  Rng rng = detail::stream(cfg, 0, detail::Stream::joint);
  auto epoch = [&](double lr) {
    std::vector<std::pair<std::size_t, std::vector<std::size_t>>> work;
    for (std::size_t i = 0; i < tasks.size(); ++i)
      for (auto& b : make_batches(tasks[i].train.size(), cfg.batch_size, rng)) work.emplace_back(i, std::move(b));
    std::shuffle(work.begin(), work.end(), rng);
    double total = 0.0;
    for (const auto& [i, idx] : work) {
      const Dataset b = tasks[i].train.subset(idx);
      const TaskId task = tasks[i].task_id;
      const BackwardResult res = backward(net, forward(net, b.features, task), b.labels, cfg.loss);
      apply_step(net, res.grads, lr, task);
      total += res.loss;
    }
    return total / static_cast<double>(work.size());
  };
  auto valid = [&] {
    double v = 0.0;
    for (const auto& t : tasks) v += dataset_loss(net, t.valid, t.task_id, cfg.loss);
    return v / static_cast<double>(tasks.size());
  };
  TaskResult result;
  result.task = tasks.back().task_id;
  result.task_index = tasks.size() - 1;
  result.train = run_schedule(cfg.schedule, epoch, valid);
  for (const auto& t : tasks) result.accuracies.push_back(evaluate(net, t.test, t.task_id));
  return result;
}

}  // namespace cuber

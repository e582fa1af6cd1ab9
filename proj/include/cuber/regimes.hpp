#pragma once
// Layer-wise task correlation detection. For each shared layer and old task
// the new task's initial gradient is scored by how much of it falls in the
// old task's input subspace (rho) and by its cosine with the old task's
// stored gradient (c). Low rho: Regime 1. High rho: Regime 3 when c clears
// eps2, Regime 2 otherwise, with at most `cap` tasks per layer outside
// Regime 1.

#include <algorithm>
#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <vector>

#include "cuber/error.hpp"
#include "cuber/linalg.hpp"
#include "cuber/memory.hpp"

namespace cuber {

struct CorrelationThresholds {
  double eps1 = 0.5;
  double eps2 = 0.0;
  std::size_t cap = 2;

  void validate() const {
    detail::require(eps1 > 0.0 && eps1 < 1.0, "thresholds: eps1 must lie in (0, 1)");
    detail::require(eps2 >= 0.0 && eps2 < 1.0, "thresholds: eps2 must lie in [0, 1)");
  }
};

enum class Regime { one = 1, two = 2, three = 3 };

struct LayerRegimes {
  std::set<TaskId> reg1, reg2, reg3;
  std::map<TaskId, double> projection_norms;  // rho
  std::map<TaskId, double> cosines;           // c
  bool zero_gradient = false;

  Regime of(TaskId task) const {
    if (reg3.count(task)) return Regime::three;
    if (reg2.count(task)) return Regime::two;
    return Regime::one;
  }
  /// Tasks whose weight projection is replaced by a learnable scaling.
  std::vector<TaskId> scaled() const {
    std::vector<TaskId> out(reg2.begin(), reg2.end());
    out.insert(out.end(), reg3.begin(), reg3.end());
    std::sort(out.begin(), out.end());
    return out;
  }
  /// Tasks whose subspace is removed from the gradient.
  std::vector<TaskId> frozen() const {
    std::vector<TaskId> out(reg1.begin(), reg1.end());
    out.insert(out.end(), reg2.begin(), reg2.end());
    std::sort(out.begin(), out.end());
    return out;
  }
};

struct RegimeAssignment {
  std::vector<LayerRegimes> layers;
};

/// rho = ||g B B'||_F / ||g||_F
inline double projection_ratio(const Matrix& g, const Basis& b) {
  const double n = flat_norm(g);
  if (n == 0.0) return 0.0;
  return flat_norm(project(g, b)) / n;
}

/// Classifies every old task for every shared layer from the new task's
/// initial weight gradients.
inline RegimeAssignment detect_regimes(std::span<const Matrix> init_grads, const SubspaceMemory& memory,
                                       const CorrelationThresholds& th) {
  th.validate();
  detail::require(init_grads.size() >= memory.layer_count(), "detect_regimes: fewer gradients than memory layers");
  const std::vector<TaskId> old_tasks = memory.tasks();
  RegimeAssignment out;
  out.layers.resize(memory.layer_count());
  for (std::size_t l = 0; l < memory.layer_count(); ++l) {
    LayerRegimes& lr = out.layers[l];
    const Matrix& g = init_grads[l];
    if (flat_norm(g) == 0.0) {
      lr.zero_gradient = true;
      for (TaskId j : old_tasks) {
        lr.reg1.insert(j);
        lr.projection_norms[j] = 0.0;
        lr.cosines[j] = 0.0;
      }
      continue;
    }
    std::vector<TaskId> strong;
    for (TaskId j : old_tasks) {
      const double rho = projection_ratio(g, memory.basis(l, j));
      const double c = sparse_cosine(memory.snapshot(j).layers.at(l), g);
      lr.projection_norms[j] = rho;
      lr.cosines[j] = c;
      if (rho >= th.eps1) {
        strong.push_back(j);
      } else {
        lr.reg1.insert(j);
      }
    }
    std::stable_sort(strong.begin(), strong.end(), [&](TaskId a, TaskId b) {
      const double ra = lr.projection_norms[a];
      const double rb = lr.projection_norms[b];
      if (ra != rb) return ra > rb;
      return a < b;
    });
    for (std::size_t i = 0; i < strong.size(); ++i) {
      const TaskId j = strong[i];
      if (i >= th.cap) {
        lr.reg1.insert(j);
      } else if (lr.cosines[j] >= th.eps2) {
        lr.reg3.insert(j);
      } else {
        lr.reg2.insert(j);
      }
    }
  }
  return out;
}

inline RegimeAssignment detect_regimes(const LayerGradients& init_grads, const SubspaceMemory& memory,
                                       const CorrelationThresholds& th) {
  return detect_regimes(std::span<const Matrix>(init_grads.weight), memory, th);
}

/// True when a Regime-3 task should stay in Regime 3: the stored gradient
/// and the current gradient still have cosine >= eps2.
inline bool check_degeneration(const SparseLayer& snapshot, const Matrix& current_grad, double eps2) {
  return sparse_cosine(snapshot, current_grad) >= eps2;
}

}  // namespace cuber

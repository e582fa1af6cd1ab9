#pragma once
// Per-task, per-layer subspace memory. After a task is learnt its layer
// inputs are summarized by an orthonormal basis (drawn from the old bases
// plus fresh SVD directions of the residual) and its average gradient is
// stored in pruned sparse form.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cuber/error.hpp"
#include "cuber/linalg.hpp"
#include "cuber/network.hpp"

namespace cuber {

// ---------------------------------------------------------------------------
// Gradient snapshots

/// Flattened layer gradient with only the largest-magnitude entries kept.
struct SparseLayer {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> indices;  // strictly increasing, < rows * cols
  std::vector<double> values;

  std::size_t length() const noexcept { return rows * cols; }

  double norm() const {
    return std::sqrt(std::inner_product(values.begin(), values.end(), values.begin(), 0.0));
  }

  Matrix densify() const {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < indices.size(); ++i) m.data()[indices[i]] = values[i];
    return m;
  }

  friend bool operator==(const SparseLayer&, const SparseLayer&) = default;
};

struct GradientSnapshot {
  std::vector<SparseLayer> layers;
  double sparsity = 0.0;

  friend bool operator==(const GradientSnapshot&, const GradientSnapshot&) = default;
};

/// Keeps the top ceil((1 - sparsity) * len) entries of `grad` by magnitude,
/// ties going to the lower index.
inline SparseLayer sparsify(const Matrix& grad, double sparsity) {
  detail::require(sparsity >= 0.0 && sparsity < 1.0, "snapshot: sparsity must lie in [0, 1)");
  const std::size_t len = grad.size();
  SparseLayer out{grad.rows(), grad.cols(), {}, {}};
  if (len == 0) return out;
  // The epsilon keeps products like (1 - 0.7) * 10 = 3.0000000000000004 at 3.
  auto keep = static_cast<std::size_t>(std::ceil((1.0 - sparsity) * static_cast<double>(len) - 1e-9));
  keep = std::clamp<std::size_t>(keep, 1, len);
  std::vector<std::size_t> order(len);
  std::iota(order.begin(), order.end(), 0);
  const auto data = grad.data();
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(data[a]) > std::abs(data[b]); });
  order.resize(keep);
  std::sort(order.begin(), order.end());
  out.indices = order;
  out.values.reserve(keep);
  for (std::size_t i : order) out.values.push_back(data[i]);
  return out;
}

inline GradientSnapshot snapshot_gradient(std::span<const Matrix> layer_grads, double sparsity) {
  GradientSnapshot snap;
  snap.sparsity = sparsity;
  for (const Matrix& g : layer_grads) snap.layers.push_back(sparsify(g, sparsity));
  return snap;
}

/// Snapshot of the first `layers` weight gradients.
inline GradientSnapshot snapshot_gradient(const LayerGradients& grads, std::size_t layers, double sparsity) {
  detail::require(layers <= grads.size(), "snapshot: more layers requested than gradients available");
  return snapshot_gradient(std::span<const Matrix>(grads.weight.data(), layers), sparsity);
}

/// Cosine between a stored sparse gradient and a dense gradient of the same
/// shape; 0 when either has zero norm.
inline double sparse_cosine(const SparseLayer& snap, const Matrix& dense) {
  detail::require(snap.length() == dense.size(), "sparse_cosine: length mismatch");
  const auto d = dense.data();
  double dot = 0.0;
  for (std::size_t i = 0; i < snap.indices.size(); ++i) dot += snap.values[i] * d[snap.indices[i]];
  const double ns = snap.norm();
  const double nd = flat_norm(dense);
  if (ns == 0.0 || nd == 0.0) return 0.0;
  return dot / (ns * nd);
}

// ---------------------------------------------------------------------------
// Basis extraction

/// Energy threshold per (task position, layer): start + step * t, capped.
struct ThresholdSchedule {
  double start = 0.97;
  double step = 0.003;
  double cap = 0.999;
  std::vector<double> layer_start;  ///< optional per-layer override of `start`

  double at(std::size_t task_index, std::size_t layer) const {
    const double s = layer < layer_start.size() ? layer_start[layer] : start;
    return std::min(cap, s + step * static_cast<double>(task_index));
  }

  friend bool operator==(const ThresholdSchedule&, const ThresholdSchedule&) = default;
};

struct ExtractionConfig {
  std::size_t n_samples = 125;
  ThresholdSchedule eps_th;

  friend bool operator==(const ExtractionConfig&, const ExtractionConfig&) = default;
};

/// layer -> R_l, one sample per row.
using RepresentationBatch = std::vector<Matrix>;

/// Inputs of every shared layer for `n` samples drawn without replacement.
inline RepresentationBatch collect_representations(const Network& net, const Dataset& data, TaskId task,
                                                   std::size_t n, Rng& rng) {
  detail::require(data.size() > 0, "collect_representations: empty dataset");
  detail::require(n > 0 && n <= data.size(), "collect_representations: n must lie in [1, dataset size]");
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  if (n < data.size()) {
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
  }
  ForwardTrace trace = forward(net, data.subset(idx).features, task);
  trace.inputs.resize(net.shared_depth());
  return std::move(trace.inputs);
}

struct BasisExtraction {
  Basis basis;
  double admitted_energy = 0.0;   ///< sum of ||R v||^2 over admitted directions
  double total_energy = 0.0;      ///< ||R||_F^2
  std::size_t from_old = 0;
  std::size_t from_new = 0;
  std::size_t candidates = 0;
};

/// Picks the basis for a new task from the pooled old bases and the SVD
/// directions of the residual R - R O O', ranking every candidate by the
/// representation energy ||R v||^2 and admitting greedily until
/// eps_th * ||R||_F^2 is reached.
inline BasisExtraction extract_bases_detailed(const Matrix& rep, std::span<const Basis* const> old_bases,
                                              double eps_th) {
  detail::require(eps_th > 0.0 && eps_th < 1.0, "extract_bases: eps_th must lie in (0, 1)");
  detail::require(rep.all_finite(), "extract_bases: non-finite representation");
  const std::size_t d = rep.cols();
  const Basis old = union_basis(old_bases, d);

  struct Candidate {
    std::vector<double> dir;
    double energy;
    bool is_old;
    std::size_t order;
  };
  std::vector<Candidate> pool;

  auto energy_of = [&](const std::vector<double>& v) {
    double e = 0.0;
    for (std::size_t r = 0; r < rep.rows(); ++r) {
      const auto row = rep.row(r);
      const double s = std::inner_product(row.begin(), row.end(), v.begin(), 0.0);
      e += s * s;
    }
    return e;
  };

  for (std::size_t c = 0; c < old.size(); ++c) {
    auto v = old.matrix().column(c);
    const double e = energy_of(v);
    pool.push_back({std::move(v), e, true, c});
  }

  const double total = flat_inner(rep, rep);
  const Matrix residual = project_out(rep, old);
  if (residual.size() > 0) {
    const SvdResult s = svd(residual.transposed());
    const double floor = 1e-10 * std::sqrt(total);
    for (std::size_t k = 0; k < s.singular_values.size(); ++k) {
      if (!(s.singular_values[k] > floor)) continue;
      auto v = s.u.column(k);
      const double e = energy_of(v);
      pool.push_back({std::move(v), e, false, k});
    }
  }

  std::stable_sort(pool.begin(), pool.end(), [](const Candidate& a, const Candidate& b) {
    if (a.energy != b.energy) return a.energy > b.energy;
    if (a.is_old != b.is_old) return a.is_old;
    return a.order < b.order;
  });

  BasisExtraction out;
  out.total_energy = total;
  out.candidates = pool.size();
  const double target = eps_th * total;
  std::vector<const Candidate*> admitted;
  for (const Candidate& c : pool) {
    if (out.admitted_energy >= target) break;
    admitted.push_back(&c);
    out.admitted_energy += c.energy;
    (c.is_old ? out.from_old : out.from_new) += 1;
  }
  Matrix cols(d, admitted.size());
  for (std::size_t j = 0; j < admitted.size(); ++j)
    for (std::size_t i = 0; i < d; ++i) cols(i, j) = admitted[j]->dir[i];
  out.basis = admitted.empty() ? Basis(d) : orthonormalize(cols);
  return out;
}

inline Basis extract_bases(const Matrix& rep, std::span<const Basis* const> old_bases, double eps_th) {
  return extract_bases_detailed(rep, old_bases, eps_th).basis;
}

// ---------------------------------------------------------------------------
// Memory store

/// Scaling matrix learnt for one old task's subspace while another task was
/// trained. It is applied only when that later task runs.
struct StoredScaling {
  TaskId basis_task = 0;
  Matrix q;
  friend bool operator==(const StoredScaling& a, const StoredScaling& b) {
    return a.basis_task == b.basis_task && a.q == b.q;
  }
};

class SubspaceMemory {
 public:
  explicit SubspaceMemory(std::size_t layers = 0, ExtractionConfig cfg = {})
      : layers_(layers), cfg_(std::move(cfg)) {}

  std::size_t layer_count() const noexcept { return layers_; }
  const ExtractionConfig& config() const noexcept { return cfg_; }

  void set_basis(std::size_t layer, TaskId task, Basis b) {
    detail::require(layer < layers_, "memory: layer index out of range");
    bases_[{layer, task}] = std::move(b);
  }
  bool has_basis(std::size_t layer, TaskId task) const { return bases_.count({layer, task}) > 0; }
  const Basis& basis(std::size_t layer, TaskId task) const {
    const auto it = bases_.find({layer, task});
    if (it == bases_.end())
      throw ConsistencyError("memory: no basis for layer " + std::to_string(layer) + ", task " +
                             std::to_string(task));
    return it->second;
  }

  void set_snapshot(TaskId task, GradientSnapshot s) {
    detail::require(s.layers.size() == layers_, "memory: snapshot layer count mismatch");
    snapshots_[task] = std::move(s);
  }
  bool has_snapshot(TaskId task) const { return snapshots_.count(task) > 0; }
  const GradientSnapshot& snapshot(TaskId task) const {
    const auto it = snapshots_.find(task);
    if (it == snapshots_.end()) throw ConsistencyError("memory: no snapshot for task " + std::to_string(task));
    return it->second;
  }

  /// Per shared layer, the scalings task `task` uses at inference.
  void set_scalings(TaskId task, std::vector<std::vector<StoredScaling>> per_layer) {
    detail::require(per_layer.size() == layers_, "memory: scaling layer count mismatch");
    for (std::size_t l = 0; l < layers_; ++l)
      for (const StoredScaling& s : per_layer[l]) {
        const Basis& b = basis(l, s.basis_task);
        detail::require(s.q.rows() == b.size() && s.q.cols() == b.size(), "memory: scaling must be k x k");
      }
    scalings_[task] = std::move(per_layer);
  }
  bool has_scalings(TaskId task) const { return scalings_.count(task) > 0; }
  /// Empty when the task stored none.
  const std::vector<StoredScaling>& scalings(TaskId task, std::size_t layer) const {
    static const std::vector<StoredScaling> none;
    const auto it = scalings_.find(task);
    if (it == scalings_.end()) return none;
    return it->second.at(layer);
  }

  /// Tasks with at least one stored basis, ascending.
  std::vector<TaskId> tasks() const {
    std::vector<TaskId> out;
    for (const auto& [key, b] : bases_)
      if (std::find(out.begin(), out.end(), key.second) == out.end()) out.push_back(key.second);
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<const Basis*> layer_bases(std::size_t layer) const {
    std::vector<const Basis*> out;
    for (const auto& [key, b] : bases_)
      if (key.first == layer) out.push_back(&b);
    return out;
  }

  /// Extracts and stores task `task`'s bases for every layer from `reps`.
  void absorb(TaskId task, std::size_t task_index, const RepresentationBatch& reps) {
    detail::require(reps.size() == layers_, "memory: representation layer count mismatch");
    for (std::size_t l = 0; l < layers_; ++l) {
      const auto old = layer_bases(l);
      set_basis(l, task, extract_bases(reps[l], old, cfg_.eps_th.at(task_index, l)));
    }
  }

  void save(std::ostream& os) const;
  static SubspaceMemory load(std::istream& is);

  friend bool operator==(const SubspaceMemory& a, const SubspaceMemory& b) {
    if (a.layers_ != b.layers_ || !(a.cfg_ == b.cfg_) || a.snapshots_ != b.snapshots_ ||
        a.scalings_ != b.scalings_)
      return false;
    if (a.bases_.size() != b.bases_.size()) return false;
    for (const auto& [key, basis] : a.bases_) {
      const auto it = b.bases_.find(key);
      if (it == b.bases_.end() || !(it->second.matrix() == basis.matrix())) return false;
    }
    return true;
  }

 private:
  std::size_t layers_;
  ExtractionConfig cfg_;
  std::map<std::pair<std::size_t, TaskId>, Basis> bases_;
  std::map<TaskId, GradientSnapshot> snapshots_;
  std::map<TaskId, std::vector<std::vector<StoredScaling>>> scalings_;
};

// Checkpoint format (text, one token stream, doubles as C99 hex floats so the
// round trip is exact):
//
//   cuber-memory 1
//   layers <L>
//   n_samples <n>
//   eps_th <start> <step> <cap> <k> <layer_start_1> ... <layer_start_k>
//   basis <layer> <task> <rows> <cols>        followed by rows*cols values, row-major
//   snapshot <task> <sparsity> <layers>       followed per layer by
//     layer <rows> <cols> <nnz>               and nnz pairs "<index> <value>"
//   scaling <task> <layer> <basis_task> <k>   followed by k*k values, row-major
//   end
namespace detail {

inline std::string hex(double v) {
  std::ostringstream os;
  os << std::hexfloat << v;
  return os.str();
}

class TokenReader {
 public:
  explicit TokenReader(std::istream& is) : is_(is) {}
  std::string word() {
    std::string w;
    if (!(is_ >> w)) throw InvalidInput("memory checkpoint: unexpected end of input");
    return w;
  }
  void expect(const std::string& w) {
    const std::string got = word();
    if (got != w) throw InvalidInput("memory checkpoint: expected '" + w + "', got '" + got + "'");
  }
  double real() {
    const std::string w = word();
    char* end = nullptr;
    const double v = std::strtod(w.c_str(), &end);
    if (end == w.c_str() || *end != '\0') throw InvalidInput("memory checkpoint: bad number '" + w + "'");
    return v;
  }
  std::size_t count() {
    const std::string w = word();
    char* end = nullptr;
    const unsigned long long v = std::strtoull(w.c_str(), &end, 10);
    if (end == w.c_str() || *end != '\0') throw InvalidInput("memory checkpoint: bad count '" + w + "'");
    return static_cast<std::size_t>(v);
  }
  int integer() {
    const std::string w = word();
    char* end = nullptr;
    const long v = std::strtol(w.c_str(), &end, 10);
    if (end == w.c_str() || *end != '\0') throw InvalidInput("memory checkpoint: bad integer '" + w + "'");
    return static_cast<int>(v);
  }

 private:
  std::istream& is_;
};

}  // namespace detail

inline void SubspaceMemory::save(std::ostream& os) const {
  using detail::hex;
  os << "cuber-memory 1\n";
  os << "layers " << layers_ << "\n";
  os << "n_samples " << cfg_.n_samples << "\n";
  os << "eps_th " << hex(cfg_.eps_th.start) << ' ' << hex(cfg_.eps_th.step) << ' ' << hex(cfg_.eps_th.cap) << ' '
     << cfg_.eps_th.layer_start.size();
  for (double v : cfg_.eps_th.layer_start) os << ' ' << hex(v);
  os << "\n";
  for (const auto& [key, b] : bases_) {
    const Matrix& m = b.matrix();
    os << "basis " << key.first << ' ' << key.second << ' ' << m.rows() << ' ' << m.cols() << "\n";
    for (std::size_t r = 0; r < m.rows(); ++r) {
      for (std::size_t c = 0; c < m.cols(); ++c) os << (c ? " " : "") << hex(m(r, c));
      os << "\n";
    }
  }
  for (const auto& [task, s] : snapshots_) {
    os << "snapshot " << task << ' ' << hex(s.sparsity) << ' ' << s.layers.size() << "\n";
    for (const SparseLayer& l : s.layers) {
      os << "layer " << l.rows << ' ' << l.cols << ' ' << l.indices.size() << "\n";
      for (std::size_t i = 0; i < l.indices.size(); ++i) os << l.indices[i] << ' ' << hex(l.values[i]) << "\n";
    }
  }
  for (const auto& [task, layers] : scalings_)
    for (std::size_t l = 0; l < layers.size(); ++l)
      for (const StoredScaling& sc : layers[l]) {
        os << "scaling " << task << ' ' << l << ' ' << sc.basis_task << ' ' << sc.q.rows() << "\n";
        for (std::size_t r = 0; r < sc.q.rows(); ++r) {
          for (std::size_t c = 0; c < sc.q.cols(); ++c) os << (c ? " " : "") << hex(sc.q(r, c));
          os << "\n";
        }
      }
  os << "end\n";
}

inline SubspaceMemory SubspaceMemory::load(std::istream& is) {
  detail::TokenReader in(is);
  in.expect("cuber-memory");
  if (in.integer() != 1) throw InvalidInput("memory checkpoint: unsupported version");
  in.expect("layers");
  const std::size_t layers = in.count();
  ExtractionConfig cfg;
  in.expect("n_samples");
  cfg.n_samples = in.count();
  in.expect("eps_th");
  cfg.eps_th.start = in.real();
  cfg.eps_th.step = in.real();
  cfg.eps_th.cap = in.real();
  cfg.eps_th.layer_start.resize(in.count());
  for (double& v : cfg.eps_th.layer_start) v = in.real();
  SubspaceMemory mem(layers, cfg);
  std::map<TaskId, std::vector<std::vector<StoredScaling>>> scalings;
  for (;;) {
    const std::string tag = in.word();
    if (tag == "end") break;
    if (tag == "basis") {
      const std::size_t layer = in.count();
      const int task = in.integer();
      const std::size_t rows = in.count();
      const std::size_t cols = in.count();
      Matrix m(rows, cols);
      for (double& v : m.data()) v = in.real();
      mem.set_basis(layer, task, Basis::from_orthonormal(std::move(m)));
    } else if (tag == "snapshot") {
      const int task = in.integer();
      GradientSnapshot s;
      s.sparsity = in.real();
      s.layers.resize(in.count());
      for (SparseLayer& l : s.layers) {
        in.expect("layer");
        l.rows = in.count();
        l.cols = in.count();
        const std::size_t nnz = in.count();
        for (std::size_t i = 0; i < nnz; ++i) {
          const std::size_t idx = in.count();
          if (idx >= l.length() || (!l.indices.empty() && idx <= l.indices.back()))
            throw InvalidInput("memory checkpoint: snapshot indices must be increasing and in range");
          l.indices.push_back(idx);
          l.values.push_back(in.real());
        }
      }
      mem.set_snapshot(task, std::move(s));
    } else if (tag == "scaling") {
      const int task = in.integer();
      const std::size_t layer = in.count();
      if (layer >= layers) throw InvalidInput("memory checkpoint: scaling layer out of range");
      StoredScaling sc;
      sc.basis_task = in.integer();
      const std::size_t k = in.count();
      sc.q = Matrix(k, k);
      for (double& v : sc.q.data()) v = in.real();
      auto& per_layer = scalings[task];
      per_layer.resize(layers);
      per_layer[layer].push_back(std::move(sc));
    } else {
      throw InvalidInput("memory checkpoint: unknown record '" + tag + "'");
    }
  }
  for (auto& [task, per_layer] : scalings) mem.set_scalings(task, std::move(per_layer));
  return mem;
}

}  // namespace cuber

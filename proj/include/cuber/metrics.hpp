#pragma once
// Continual-learning metrics over the lower-triangular accuracy matrix
// A[i][j] = test accuracy of task j after learning task i (0-based).

#include <algorithm>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cuber/error.hpp"
#include "cuber/regimes.hpp"

namespace cuber {

class AccuracyMatrix {
 public:
  explicit AccuracyMatrix(std::size_t tasks = 0) : rows_(tasks) {}

  std::size_t tasks() const noexcept { return rows_.size(); }

  /// Row i must hold exactly i + 1 accuracies in [0, 1].
  void set_row(std::size_t i, std::vector<double> row) {
    detail::require(i < rows_.size(), "accuracy matrix: row index out of range");
    detail::require(row.size() == i + 1, "accuracy matrix: row " + std::to_string(i) + " needs " +
                                             std::to_string(i + 1) + " entries");
    for (double a : row) detail::require(a >= 0.0 && a <= 1.0, "accuracy matrix: entry outside [0, 1]");
    rows_[i] = std::move(row);
  }

  bool has_row(std::size_t i) const { return i < rows_.size() && !rows_[i].empty(); }
  bool complete() const {
    return std::all_of(rows_.begin(), rows_.end(), [](const auto& r) { return !r.empty(); });
  }

  double at(std::size_t i, std::size_t j) const {
    detail::require(has_row(i), "accuracy matrix: row " + std::to_string(i) + " not filled");
    detail::require(j <= i, "accuracy matrix: entry above the diagonal");
    return rows_[i][j];
  }

  const std::vector<double>& row(std::size_t i) const { return rows_.at(i); }

  /// One line per row, comma separated, %.17g.
  void write_csv(std::ostream& os) const {
    os << "# cuber-accuracy 1\n";
    char buf[32];
    for (const auto& r : rows_) {
      for (std::size_t j = 0; j < r.size(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", r[j]);
        os << (j ? "," : "") << buf;
      }
      os << '\n';
    }
  }

  static AccuracyMatrix read_csv(std::istream& is) {
    std::string line;
    detail::require(static_cast<bool>(std::getline(is, line)) && line == "# cuber-accuracy 1",
                    "accuracy csv: missing or unknown header");
    std::vector<std::vector<double>> rows;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      std::vector<double> r;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) r.push_back(std::stod(cell));
      rows.push_back(std::move(r));
    }
    AccuracyMatrix a(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) a.set_row(i, std::move(rows[i]));
    return a;
  }

 private:
  std::vector<std::vector<double>> rows_;
};

struct Metrics {
  double acc = 0.0;
  std::optional<double> bwt;  ///< absent for a single task
};

/// ACC = mean_i A[T-1][i]; BWT = mean_{i<T-1} (A[T-1][i] - A[i][i]).
inline Metrics compute_metrics(const AccuracyMatrix& a) {
  detail::require(a.tasks() >= 1 && a.complete(), "metrics: accuracy matrix must be fully populated");
  const std::size_t last = a.tasks() - 1;
  Metrics m;
  for (std::size_t i = 0; i <= last; ++i) m.acc += a.at(last, i);
  m.acc /= static_cast<double>(a.tasks());
  if (a.tasks() >= 2) {
    double s = 0.0;
    for (std::size_t i = 0; i < last; ++i) s += a.at(last, i) - a.at(i, i);
    m.bwt = s / static_cast<double>(last);
  }
  return m;
}

struct PairTransfer {
  std::size_t new_task = 0;
  std::size_t old_task = 0;
  double value = 0.0;
};

struct BwtS {
  std::vector<PairTransfer> pairs;
  std::optional<double> mean;
};

/// For each new task t (index) with a selected old task j: A[t][j] - A[t-1][j].
inline BwtS compute_bwt_s(const AccuracyMatrix& a, const std::map<std::size_t, std::size_t>& selected) {
  BwtS out;
  for (const auto& [t, j] : selected) {
    detail::require(t >= 1 && j < t, "bwt-s: selection must point to an earlier task");
    detail::require(a.has_row(t) && a.has_row(t - 1), "bwt-s: selection references an unlearnt task");
    out.pairs.push_back({t, j, a.at(t, j) - a.at(t - 1, j)});
  }
  if (!out.pairs.empty()) {
    double s = 0.0;
    for (const auto& p : out.pairs) s += p.value;
    out.mean = s / static_cast<double>(out.pairs.size());
  }
  return out;
}

/// Selected old task of a new task: the one in Regime 3 on the most layers,
/// ties to the smaller id. Tasks never in Regime 3 are not selected.
inline std::optional<TaskId> select_old_task(const RegimeAssignment& r) {
  std::map<TaskId, int> count;
  for (const auto& layer : r.layers)
    for (TaskId j : layer.reg3) ++count[j];
  std::optional<TaskId> best;
  int best_count = 0;
  for (const auto& [j, c] : count)
    if (c > best_count) {
      best = j;
      best_count = c;
    }
  return best;
}

struct Fwt {
  std::vector<double> per_task;  ///< A[i][i] - scratch[i]
  std::optional<double> mean;    ///< over i >= 1
};

inline Fwt compute_fwt(const AccuracyMatrix& a, const std::vector<double>& scratch) {
  detail::require(a.complete(), "fwt: accuracy matrix must be fully populated");
  detail::require(scratch.size() == a.tasks(), "fwt: need one scratch accuracy per task");
  Fwt out;
  for (std::size_t i = 0; i < a.tasks(); ++i) out.per_task.push_back(a.at(i, i) - scratch[i]);
  if (a.tasks() >= 2) {
    double s = 0.0;
    for (std::size_t i = 1; i < a.tasks(); ++i) s += out.per_task[i];
    out.mean = s / static_cast<double>(a.tasks() - 1);
  }
  return out;
}

}  // namespace cuber

#pragma once
// Task sequences for desk-scale experiments: Gaussian-blob base datasets,
// permuted-feature task families (single shared head) and class-range
// splits with optional overlap (one head per task), plus CSV import.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cuber/error.hpp"
#include "cuber/network.hpp"
#include "cuber/random.hpp"

namespace cuber {

struct TaskDataset {
  TaskId task_id = 0;
  Dataset train;
  Dataset valid;
  Dataset test;
  std::size_t num_classes = 0;
  std::map<int, int> class_map;  // original class -> local label

  std::size_t dim() const noexcept { return train.dim(); }
};

namespace detail {

inline Dataset concat(const std::vector<Dataset>& parts, std::size_t dim) {
  std::size_t n = 0;
  for (const auto& p : parts) n += p.size();
  Dataset out{Matrix(n, dim), std::vector<int>(n)};
  std::size_t r = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < p.size(); ++i, ++r) {
      std::copy(p.features.row(i).begin(), p.features.row(i).end(), out.features.row(r).begin());
      out.labels[r] = p.labels[i];
    }
  }
  return out;
}

inline Dataset shuffled(const Dataset& d, Rng& rng) {
  std::vector<std::size_t> idx(d.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  return d.subset(idx);
}

inline std::map<int, int> identity_class_map(std::size_t classes) {
  std::map<int, int> m;
  for (std::size_t c = 0; c < classes; ++c) m[static_cast<int>(c)] = static_cast<int>(c);
  return m;
}

}  // namespace detail

/// Gaussian blobs with unit noise; class means pairwise at least
/// `separation` apart. Each class is split 80/10/10 into train/valid/test.
inline TaskDataset generate_synthetic_base(std::size_t n_classes, std::size_t dim, std::size_t per_class,
                                           double separation, std::uint64_t seed) {
  detail::require(n_classes >= 1, "synthetic base: need at least one class");
  detail::require(dim >= 1, "synthetic base: dim must be positive");
  detail::require(per_class > 0, "synthetic base: per_class must be positive");
  detail::require(separation > 0.0, "synthetic base: separation must be positive");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<std::vector<double>> means;
  double radius = separation;
  int attempts = 0;
  while (means.size() < n_classes) {
    std::vector<double> m(dim);
    double norm = 0.0;
    for (double& v : m) {
      v = normal(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : m) v *= radius / norm;
    bool ok = true;
    for (const auto& other : means) {
      double d2 = 0.0;
      for (std::size_t i = 0; i < dim; ++i) d2 += (m[i] - other[i]) * (m[i] - other[i]);
      if (std::sqrt(d2) < separation) {
        ok = false;
        break;
      }
    }
    if (ok) {
      means.push_back(std::move(m));
      attempts = 0;
    } else if (++attempts > 1000) {
      radius *= 1.1;
      attempts = 0;
    }
  }

  const std::size_t n_test = per_class / 10;
  const std::size_t n_valid = per_class / 10;
  std::vector<Dataset> train, valid, test;
  for (std::size_t c = 0; c < n_classes; ++c) {
    Dataset cls{Matrix(per_class, dim), std::vector<int>(per_class, static_cast<int>(c))};
    for (std::size_t i = 0; i < per_class; ++i)
      for (std::size_t k = 0; k < dim; ++k) cls.features(i, k) = means[c][k] + normal(rng);
    std::vector<std::size_t> idx(per_class);
    std::iota(idx.begin(), idx.end(), 0);
    auto take = [&](std::size_t from, std::size_t count) {
      std::vector<std::size_t> part(idx.begin() + static_cast<std::ptrdiff_t>(from),
                                    idx.begin() + static_cast<std::ptrdiff_t>(from + count));
      return cls.subset(part);
    };
    test.push_back(take(0, n_test));
    valid.push_back(take(n_test, n_valid));
    train.push_back(take(n_test + n_valid, per_class - n_test - n_valid));
  }
  TaskDataset base;
  base.task_id = 0;
  base.num_classes = n_classes;
  base.class_map = detail::identity_class_map(n_classes);
  base.train = detail::shuffled(detail::concat(train, dim), rng);
  base.valid = detail::shuffled(detail::concat(valid, dim), rng);
  base.test = detail::shuffled(detail::concat(test, dim), rng);
  return base;
}

/// Seeded permutation of [0, n).
inline std::vector<std::size_t> random_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  Rng rng(seed);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

/// Column i of the result is column perm[i] of `m`.
inline Matrix permute_columns(const Matrix& m, const std::vector<std::size_t>& perm) {
  detail::require(perm.size() == m.cols(), "permute_columns: permutation length != column count");
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = m(r, perm[c]);
  return out;
}

/// Task 0 keeps the base features; task i > 0 applies its own seeded
/// permutation to the feature coordinates of every split. Labels are shared.
inline std::vector<TaskDataset> generate_permuted_tasks(const TaskDataset& base, std::size_t t_count,
                                                        std::uint64_t seed) {
  detail::require(t_count >= 1, "permuted tasks: need at least one task");
  std::vector<TaskDataset> tasks;
  for (std::size_t t = 0; t < t_count; ++t) {
    TaskDataset task = base;
    task.task_id = static_cast<TaskId>(t);
    if (t > 0) {
      const auto perm = random_permutation(base.dim(), derive_seed(seed, {t}));
      task.train.features = permute_columns(base.train.features, perm);
      task.valid.features = permute_columns(base.valid.features, perm);
      task.test.features = permute_columns(base.test.features, perm);
    }
    tasks.push_back(std::move(task));
  }
  return tasks;
}

/// Inclusive original-class range [first, last].
using ClassRange = std::pair<int, int>;

/// Task i holds every sample whose class lies in ranges[i], relabelled to
/// 0..(last - first). Overlapping ranges share samples between tasks.
inline std::vector<TaskDataset> generate_overlap_split_tasks(const TaskDataset& base,
                                                             const std::vector<ClassRange>& ranges,
                                                             std::uint64_t seed) {
  detail::require(!ranges.empty(), "split tasks: no class ranges");
  std::vector<TaskDataset> tasks;
  for (std::size_t t = 0; t < ranges.size(); ++t) {
    const auto [first, last] = ranges[t];
    detail::require(first >= 0 && first <= last, "split tasks: malformed class range");
    detail::require(static_cast<std::size_t>(last) < base.num_classes, "split tasks: range exceeds available classes");
    Rng rng(derive_seed(seed, {t}));
    auto select = [&](const Dataset& d) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < d.size(); ++i)
        if (d.labels[i] >= first && d.labels[i] <= last) idx.push_back(i);
      Dataset out = d.subset(idx);
      for (int& y : out.labels) y -= first;
      return detail::shuffled(out, rng);
    };
    TaskDataset task;
    task.task_id = static_cast<TaskId>(t);
    task.num_classes = static_cast<std::size_t>(last - first + 1);
    for (int c = first; c <= last; ++c) task.class_map[c] = c - first;
    task.train = select(base.train);
    task.valid = select(base.valid);
    task.test = select(base.test);
    tasks.push_back(std::move(task));
  }
  return tasks;
}

/// Reads "n,d" followed by n rows of d floats and an integer label.
inline Dataset load_csv_dataset(std::istream& is) {
  auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  std::string line;
  detail::require(static_cast<bool>(std::getline(is, line)), "csv: missing header");
  const auto header = split(line);
  detail::require(header.size() == 2, "csv: header must be 'n,d'");
  const std::size_t n = std::stoul(header[0]);
  const std::size_t d = std::stoul(header[1]);
  Dataset out{Matrix(n, d), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    detail::require(static_cast<bool>(std::getline(is, line)), "csv: fewer rows than declared");
    const auto cells = split(line);
    detail::require(cells.size() == d + 1, "csv: row " + std::to_string(i) + " has wrong column count");
    for (std::size_t k = 0; k < d; ++k) out.features(i, k) = std::stod(cells[k]);
    out.labels[i] = std::stoi(cells[d]);
    detail::require(out.labels[i] >= 0, "csv: negative label");
  }
  detail::require(out.features.all_finite(), "csv: non-finite feature");
  return out;
}

inline Dataset load_csv_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("csv: cannot open " + path);
  return load_csv_dataset(in);
}

/// Seeded 80/10/10 split of an imported dataset into a base task.
inline TaskDataset make_base_task(const Dataset& data, std::uint64_t seed) {
  detail::require(data.size() >= 3, "base task: need at least three samples");
  Rng rng(seed);
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  const std::size_t n_test = std::max<std::size_t>(1, data.size() / 10);
  const std::size_t n_valid = std::max<std::size_t>(1, data.size() / 10);
  auto part = [&](std::size_t from, std::size_t to) {
    std::vector<std::size_t> p(idx.begin() + static_cast<std::ptrdiff_t>(from),
                               idx.begin() + static_cast<std::ptrdiff_t>(to));
    return data.subset(p);
  };
  TaskDataset base;
  base.num_classes = static_cast<std::size_t>(*std::max_element(data.labels.begin(), data.labels.end()) + 1);
  base.class_map = detail::identity_class_map(base.num_classes);
  base.test = part(0, n_test);
  base.valid = part(n_test, n_test + n_valid);
  base.train = part(n_test + n_valid, data.size());
  return base;
}

}  // namespace cuber

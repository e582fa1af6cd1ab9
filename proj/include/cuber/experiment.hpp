#pragma once
// Experiment configuration, full task-sequence runs and run persistence.
//
// Config file: one "key = value" per line, '#' starts a comment. Keys and
// defaults are listed in ExperimentConfig::set / to_text.
//
// Run directory <out>/<mode>/seed_<n>/:
//   config.txt     config snapshot (same format as the input file)
//   accuracy.csv   "# cuber-accuracy 1" + one row per task (row i: i+1 values),
//                  or "# cuber-joint 1" + one row for multitask runs
//   metrics.txt    "# cuber-metrics 1" + "key value..." lines, %.17g, no timings
//   events.jsonl   one JSON object per line (regimes, degenerations, epochs,
//                  drift, accuracies, wall time)
//   memory.ckpt    subspace memory checkpoint
//   error.txt      only when the run aborted

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "cuber/error.hpp"
#include "cuber/learner.hpp"
#include "cuber/memory.hpp"
#include "cuber/metrics.hpp"
#include "cuber/network.hpp"
#include "cuber/random.hpp"
#include "cuber/tasks.hpp"

namespace cuber {

inline const char* mode_name(LearnerMode m) {
  switch (m) {
    case LearnerMode::cuber: return "cuber";
    case LearnerMode::orthogonal_only: return "orthogonal_only";
    case LearnerMode::forward_only: return "forward_only";
    case LearnerMode::plain: return "plain";
    case LearnerMode::multitask: return "multitask";
  }
  return "?";
}

inline LearnerMode parse_mode(const std::string& s) {
  for (LearnerMode m : {LearnerMode::cuber, LearnerMode::orthogonal_only, LearnerMode::forward_only,
                        LearnerMode::plain, LearnerMode::multitask})
    if (s == mode_name(m)) return m;
  throw InvalidInput("unknown mode '" + s + "'");
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw InvalidInput("config: '" + key + "' expects a number, got '" + v + "'");
  }
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long d = std::stoull(v, &pos);
    if (pos != v.size() || v.front() == '-') throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw InvalidInput("config: '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InvalidInput("config: '" + key + "' expects true/false, got '" + v + "'");
}

}  // namespace detail

struct ExperimentConfig {
  std::string generator = "overlap";  ///< overlap | permuted
  std::size_t classes = 15;
  std::size_t dim = 32;
  std::size_t per_class = 200;
  double separation = 3.0;
  std::string csv;  ///< optional dataset replacing the synthetic base
  std::size_t tasks = 5;  ///< permuted generator only
  std::vector<ClassRange> ranges = {{0, 3}, {2, 5}, {4, 7}, {6, 9}, {8, 11}};
  std::vector<std::size_t> hidden = {100, 100};
  LearnerConfig learner;
  std::vector<LearnerMode> modes = {LearnerMode::cuber};
  std::vector<std::uint64_t> seeds = {1};
  bool scratch = false;  ///< train each task alone for FWT
  std::string out = "runs";

  void set(const std::string& key, const std::string& v) {
    using namespace detail;
    LearnerConfig& l = learner;
    if (key == "generator") generator = v;
    else if (key == "classes") classes = to_uint(key, v);
    else if (key == "dim") dim = to_uint(key, v);
    else if (key == "per_class") per_class = to_uint(key, v);
    else if (key == "separation") separation = to_double(key, v);
    else if (key == "csv") csv = v;
    else if (key == "tasks") tasks = to_uint(key, v);
    else if (key == "ranges") {
      ranges.clear();
      for (const auto& r : split_list(v)) {
        const auto dash = r.find('-');
        if (dash == std::string::npos) throw InvalidInput("config: range '" + r + "' must look like a-b");
        ranges.emplace_back(static_cast<int>(to_uint(key, trim(r.substr(0, dash)))),
                            static_cast<int>(to_uint(key, trim(r.substr(dash + 1)))));
      }
    } else if (key == "hidden") {
      hidden.clear();
      for (const auto& h : split_list(v)) hidden.push_back(to_uint(key, h));
    } else if (key == "lr") l.schedule.init_lr = to_double(key, v);
    else if (key == "min_lr") l.schedule.min_lr = to_double(key, v);
    else if (key == "lr_decay") l.schedule.decay = to_double(key, v);
    else if (key == "patience") l.schedule.patience = static_cast<int>(to_uint(key, v));
    else if (key == "epochs") l.schedule.max_epochs = static_cast<int>(to_uint(key, v));
    else if (key == "early_stop") l.schedule.early_stop = to_bool(key, v);
    else if (key == "batch") l.batch_size = to_uint(key, v);
    else if (key == "lambda") l.lambda = to_double(key, v);
    else if (key == "beta") l.scaling_lr = to_double(key, v);
    else if (key == "eps1") l.thresholds.eps1 = to_double(key, v);
    else if (key == "eps2") l.thresholds.eps2 = to_double(key, v);
    else if (key == "cap") l.thresholds.cap = to_uint(key, v);
    else if (key == "sparsity") l.snapshot_sparsity = to_double(key, v);
    else if (key == "degeneration") {
      if (v == "epoch") l.degeneration = DegenerationCheck::per_epoch;
      else if (v == "batch") l.degeneration = DegenerationCheck::per_batch;
      else if (v == "off") l.degeneration = DegenerationCheck::off;
      else throw InvalidInput("config: degeneration must be epoch, batch or off");
    } else if (key == "scaling") {
      if (v == "per_task") l.storage = ScalingStorage::per_task;
      else if (v == "fold") l.storage = ScalingStorage::fold;
      else throw InvalidInput("config: scaling must be per_task or fold");
    } else if (key == "loss") {
      if (v == "cross_entropy") l.loss = LossKind::cross_entropy;
      else if (v == "mse") l.loss = LossKind::mse;
      else throw InvalidInput("config: loss must be cross_entropy or mse");
    } else if (key == "rep_samples") l.extraction.n_samples = to_uint(key, v);
    else if (key == "eps_th_start") l.extraction.eps_th.start = to_double(key, v);
    else if (key == "eps_th_step") l.extraction.eps_th.step = to_double(key, v);
    else if (key == "eps_th_cap") l.extraction.eps_th.cap = to_double(key, v);
    else if (key == "modes") {
      modes.clear();
      for (const auto& m : split_list(v)) modes.push_back(parse_mode(m));
    } else if (key == "seeds") {
      seeds.clear();
      for (const auto& s : split_list(v)) seeds.push_back(to_uint(key, s));
    } else if (key == "scratch") scratch = to_bool(key, v);
    else if (key == "out") out = v;
    else throw InvalidInput("config: unknown key '" + key + "'");
  }

  static ExperimentConfig parse(std::istream& is) {
    ExperimentConfig c;
    std::string line;
    int n = 0;
    while (std::getline(is, line)) {
      ++n;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw InvalidInput("config line " + std::to_string(n) + ": expected key = value");
      c.set(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
    c.validate();
    return c;
  }

  static ExperimentConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("config: cannot open " + path);
    return parse(in);
  }

  std::string to_text() const {
    using detail::fmt;
    const LearnerConfig& l = learner;
    std::ostringstream os;
    auto join = [](const auto& xs, auto f) {
      std::string s;
      for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + f(xs[i]);
      return s;
    };
    os << "generator = " << generator << "\n";
    os << "classes = " << classes << "\n";
    os << "dim = " << dim << "\n";
    os << "per_class = " << per_class << "\n";
    os << "separation = " << fmt(separation) << "\n";
    if (!csv.empty()) os << "csv = " << csv << "\n";
    os << "tasks = " << tasks << "\n";
    os << "ranges = "
       << join(ranges, [](const ClassRange& r) { return std::to_string(r.first) + "-" + std::to_string(r.second); })
       << "\n";
    os << "hidden = " << join(hidden, [](std::size_t h) { return std::to_string(h); }) << "\n";
    os << "lr = " << fmt(l.schedule.init_lr) << "\n";
    os << "min_lr = " << fmt(l.schedule.min_lr) << "\n";
    os << "lr_decay = " << fmt(l.schedule.decay) << "\n";
    os << "patience = " << l.schedule.patience << "\n";
    os << "epochs = " << l.schedule.max_epochs << "\n";
    os << "early_stop = " << (l.schedule.early_stop ? "true" : "false") << "\n";
    os << "batch = " << l.batch_size << "\n";
    os << "lambda = " << fmt(l.lambda) << "\n";
    os << "beta = " << fmt(l.scaling_lr) << "\n";
    os << "eps1 = " << fmt(l.thresholds.eps1) << "\n";
    os << "eps2 = " << fmt(l.thresholds.eps2) << "\n";
    os << "cap = " << l.thresholds.cap << "\n";
    os << "sparsity = " << fmt(l.snapshot_sparsity) << "\n";
    os << "degeneration = "
       << (l.degeneration == DegenerationCheck::per_epoch ? "epoch"
           : l.degeneration == DegenerationCheck::per_batch ? "batch"
                                                             : "off")
       << "\n";
    os << "scaling = " << (l.storage == ScalingStorage::fold ? "fold" : "per_task") << "\n";
    os << "loss = " << (l.loss == LossKind::mse ? "mse" : "cross_entropy") << "\n";
    os << "rep_samples = " << l.extraction.n_samples << "\n";
    os << "eps_th_start = " << fmt(l.extraction.eps_th.start) << "\n";
    os << "eps_th_step = " << fmt(l.extraction.eps_th.step) << "\n";
    os << "eps_th_cap = " << fmt(l.extraction.eps_th.cap) << "\n";
    os << "modes = " << join(modes, [](LearnerMode m) { return std::string(mode_name(m)); }) << "\n";
    os << "seeds = " << join(seeds, [](std::uint64_t s) { return std::to_string(s); }) << "\n";
    os << "scratch = " << (scratch ? "true" : "false") << "\n";
    os << "out = " << out << "\n";
    return os.str();
  }

  void validate() const {
    detail::require(generator == "overlap" || generator == "permuted", "config: generator must be overlap or permuted");
    if (csv.empty()) {
      detail::require(classes >= 1 && dim >= 1 && per_class >= 10, "config: need classes, dim >= 1 and per_class >= 10");
      detail::require(separation > 0.0, "config: separation must be positive");
    }
    if (generator == "permuted") detail::require(tasks >= 1, "config: tasks must be positive");
    if (generator == "overlap") detail::require(!ranges.empty(), "config: overlap generator needs ranges");
    detail::require(!modes.empty(), "config: no modes");
    detail::require(!seeds.empty(), "config: no seeds");
    learner.validate();
  }

  HeadMode head_mode() const { return generator == "permuted" ? HeadMode::single : HeadMode::multi; }
};

// ---------------------------------------------------------------------------
// Single run

/// Task sequence of one seed.
inline std::vector<TaskDataset> build_tasks(const ExperimentConfig& cfg, std::uint64_t seed) {
  const TaskDataset base = cfg.csv.empty()
                               ? generate_synthetic_base(cfg.classes, cfg.dim, cfg.per_class, cfg.separation,
                                                         derive_seed(seed, {101}))
                               : make_base_task(load_csv_dataset(cfg.csv), derive_seed(seed, {101}));
  if (cfg.generator == "permuted") return generate_permuted_tasks(base, cfg.tasks, derive_seed(seed, {102}));
  return generate_overlap_split_tasks(base, cfg.ranges, derive_seed(seed, {102}));
}

inline Network build_network(const ExperimentConfig& cfg, std::size_t input_dim, std::uint64_t init_seed) {
  Rng rng(init_seed);
  return Network::create(input_dim, cfg.hidden, cfg.head_mode(), rng);
}

using EventSink = std::function<void(const nlohmann::json&)>;

inline nlohmann::json regimes_json(const RegimeAssignment& r) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : r.layers) {
    nlohmann::json rho = nlohmann::json::object(), cos = nlohmann::json::object();
    for (const auto& [j, v] : l.projection_norms) rho[std::to_string(j)] = v;
    for (const auto& [j, v] : l.cosines) cos[std::to_string(j)] = v;
    layers.push_back({{"reg1", l.reg1}, {"reg2", l.reg2}, {"reg3", l.reg3}, {"rho", rho}, {"cos", cos},
                      {"zero_gradient", l.zero_gradient}});
  }
  return layers;
}

struct RunResult {
  LearnerMode mode = LearnerMode::cuber;
  std::uint64_t seed = 0;
  AccuracyMatrix accuracy;
  std::vector<double> joint;    ///< multitask only
  std::vector<double> scratch;  ///< empty unless scratch runs were requested
  std::vector<TaskResult> tasks;
  SubspaceMemory memory;
};

/// Test accuracy of each task trained alone on a fresh network.
inline std::vector<double> scratch_accuracies(const ExperimentConfig& cfg, const std::vector<TaskDataset>& tasks,
                                              std::uint64_t seed) {
  std::vector<double> out;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    Network net = build_network(cfg, tasks[i].dim(), derive_seed(seed, {301, i}));
    SubspaceMemory mem(net.shared_depth(), cfg.learner.extraction);
    LearnerConfig lc = cfg.learner;
    lc.mode = LearnerMode::plain;
    lc.seed = derive_seed(seed, {302, i});
    out.push_back(learn_task(net, mem, std::span<const TaskDataset>(&tasks[i], 1), 0, lc).accuracies.front());
  }
  return out;
}

inline RunResult run_single(const ExperimentConfig& cfg, LearnerMode mode, std::uint64_t seed,
                            const EventSink& sink = {}, const std::vector<double>* scratch = nullptr) {
  cfg.validate();
  const std::vector<TaskDataset> tasks = build_tasks(cfg, seed);
  Network net = build_network(cfg, tasks.front().dim(), derive_seed(seed, {201}));
  LearnerConfig lc = cfg.learner;
  lc.mode = mode;
  lc.seed = derive_seed(seed, {202});
  RunResult out;
  out.mode = mode;
  out.seed = seed;
  out.memory = SubspaceMemory(net.shared_depth(), lc.extraction);
  if (scratch) out.scratch = *scratch;
  auto emit = [&](const nlohmann::json& j) {
    if (sink) sink(j);
  };
  emit({{"event", "run_start"}, {"mode", mode_name(mode)}, {"seed", seed}, {"tasks", tasks.size()}});

  if (mode == LearnerMode::multitask) {
    TaskResult r = learn_joint(net, tasks, lc);
    out.joint = r.accuracies;
    emit({{"event", "joint_done"}, {"epochs", r.train.epochs}, {"train_loss", r.train.train_loss},
          {"valid_loss", r.train.valid_loss}, {"accuracies", r.accuracies}});
    out.tasks.push_back(std::move(r));
    return out;
  }

  out.accuracy = AccuracyMatrix(tasks.size());
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    TaskResult r = learn_task(net, out.memory, tasks, i, lc);
    nlohmann::json degen = nlohmann::json::array();
    for (const auto& e : r.degenerations)
      degen.push_back({{"layer", e.layer}, {"old_task", e.old_task}, {"epoch", e.epoch}, {"batch", e.batch},
                       {"cosine", e.cosine}});
    emit({{"event", "task_done"},
          {"task", r.task},
          {"index", i},
          {"regimes", regimes_json(r.regimes)},
          {"final_regimes", regimes_json(r.final_regimes)},
          {"degenerations", degen},
          {"epochs", r.train.epochs},
          {"lr_decays", r.train.lr_decays},
          {"train_loss", r.train.train_loss},
          {"valid_loss", r.train.valid_loss},
          {"reg1_drift", r.reg1_drift},
          {"reg1_drift_folded", r.reg1_drift_folded},
          {"accuracies", r.accuracies}});
    out.accuracy.set_row(i, r.accuracies);
    out.tasks.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Metrics record

struct MetricsRecord {
  std::string mode;
  std::uint64_t seed = 0;
  std::size_t tasks = 0;
  double acc = 0.0;
  std::optional<double> bwt;
  BwtS bwt_s;
  std::vector<double> scratch;
  std::optional<Fwt> fwt;
  std::size_t degenerations = 0;
};

inline std::map<std::size_t, std::size_t> bwt_s_selection(const std::vector<TaskResult>& tasks) {
  std::map<std::size_t, std::size_t> sel;
  for (std::size_t t = 1; t < tasks.size(); ++t) {
    const auto j = select_old_task(tasks[t].regimes);
    if (!j) continue;
    for (std::size_t k = 0; k < t; ++k)
      if (tasks[k].task == *j) sel[t] = k;
  }
  return sel;
}

inline MetricsRecord make_record(const RunResult& r) {
  MetricsRecord m;
  m.mode = mode_name(r.mode);
  m.seed = r.seed;
  if (r.mode == LearnerMode::multitask) {
    m.tasks = r.joint.size();
    for (double a : r.joint) m.acc += a;
    m.acc /= static_cast<double>(r.joint.size());
    return m;
  }
  m.tasks = r.accuracy.tasks();
  const Metrics base = compute_metrics(r.accuracy);
  m.acc = base.acc;
  m.bwt = base.bwt;
  m.bwt_s = compute_bwt_s(r.accuracy, bwt_s_selection(r.tasks));
  m.scratch = r.scratch;
  if (!r.scratch.empty()) m.fwt = compute_fwt(r.accuracy, r.scratch);
  for (const auto& t : r.tasks) m.degenerations += t.degenerations.size();
  return m;
}

inline std::string format_metrics(const MetricsRecord& m) {
  using detail::fmt;
  std::ostringstream os;
  os << "# cuber-metrics 1\n";
  os << "mode " << m.mode << "\n";
  os << "seed " << m.seed << "\n";
  os << "tasks " << m.tasks << "\n";
  os << "acc " << fmt(m.acc) << "\n";
  os << "bwt " << (m.bwt ? fmt(*m.bwt) : "absent") << "\n";
  for (const auto& p : m.bwt_s.pairs) os << "bwt_s_pair " << p.new_task << " " << p.old_task << " " << fmt(p.value) << "\n";
  os << "bwt_s_mean " << (m.bwt_s.mean ? fmt(*m.bwt_s.mean) : "absent") << "\n";
  for (std::size_t i = 0; i < m.scratch.size(); ++i) os << "scratch " << i << " " << fmt(m.scratch[i]) << "\n";
  if (m.fwt) {
    for (std::size_t i = 0; i < m.fwt->per_task.size(); ++i) os << "fwt_task " << i << " " << fmt(m.fwt->per_task[i]) << "\n";
    os << "fwt_mean " << (m.fwt->mean ? fmt(*m.fwt->mean) : "absent") << "\n";
  }
  os << "degenerations " << m.degenerations << "\n";
  return os.str();
}

/// Parses a metrics file into key -> list of value tokens (repeated keys
/// keep every line).
inline std::multimap<std::string, std::vector<std::string>> read_metrics(std::istream& is) {
  std::string line;
  detail::require(static_cast<bool>(std::getline(is, line)) && line == "# cuber-metrics 1",
                  "metrics: missing or unknown header");
  std::multimap<std::string, std::vector<std::string>> out;
  while (std::getline(is, line)) {
    std::stringstream ss(line);
    std::string key, tok;
    if (!(ss >> key)) continue;
    std::vector<std::string> vals;
    while (ss >> tok) vals.push_back(tok);
    out.emplace(key, std::move(vals));
  }
  return out;
}

/// Rebuilds a run's metrics file from its accuracy.csv plus the selections,
/// scratch accuracies and event counts recorded in the old metrics file.
inline std::string recompute_metrics(const std::filesystem::path& run_dir) {
  std::ifstream mf(run_dir / "metrics.txt");
  if (!mf) throw InvalidInput("metrics: cannot open " + (run_dir / "metrics.txt").string());
  const auto old = read_metrics(mf);
  auto single = [&](const std::string& key) {
    const auto it = old.find(key);
    if (it == old.end() || it->second.empty()) throw InvalidInput("metrics: missing key " + key);
    return it->second.front();
  };
  MetricsRecord m;
  m.mode = single("mode");
  m.seed = std::stoull(single("seed"));
  m.degenerations = std::stoul(single("degenerations"));

  std::ifstream af(run_dir / "accuracy.csv");
  if (!af) throw InvalidInput("metrics: cannot open " + (run_dir / "accuracy.csv").string());
  std::string header;
  std::getline(af, header);
  if (header == "# cuber-joint 1") {
    std::string row;
    std::getline(af, row);
    const auto cells = detail::split_list(row);
    for (const auto& c : cells) m.acc += std::stod(c);
    m.tasks = cells.size();
    m.acc /= static_cast<double>(cells.size());
    return format_metrics(m);
  }
  af.clear();
  af.seekg(0);
  const AccuracyMatrix a = AccuracyMatrix::read_csv(af);
  const Metrics base = compute_metrics(a);
  m.tasks = a.tasks();
  m.acc = base.acc;
  m.bwt = base.bwt;
  std::map<std::size_t, std::size_t> sel;
  for (auto [it, end] = old.equal_range("bwt_s_pair"); it != end; ++it)
    sel[std::stoul(it->second.at(0))] = std::stoul(it->second.at(1));
  m.bwt_s = compute_bwt_s(a, sel);
  std::vector<std::pair<std::size_t, double>> scratch;
  for (auto [it, end] = old.equal_range("scratch"); it != end; ++it)
    scratch.emplace_back(std::stoul(it->second.at(0)), std::stod(it->second.at(1)));
  std::sort(scratch.begin(), scratch.end());
  for (const auto& [i, v] : scratch) m.scratch.push_back(v);
  if (!m.scratch.empty()) m.fwt = compute_fwt(a, m.scratch);
  return format_metrics(m);
}

// ---------------------------------------------------------------------------
// Persistence and the experiment driver

inline std::filesystem::path run_directory(const std::string& out, LearnerMode mode, std::uint64_t seed) {
  return std::filesystem::path(out) / mode_name(mode) / ("seed_" + std::to_string(seed));
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p);
  if (!f) throw InvalidInput("cannot write " + p.string());
  f << text;
}

inline void persist_run(const std::filesystem::path& dir, const ExperimentConfig& cfg, const RunResult& r) {
  std::filesystem::create_directories(dir);
  write_text(dir / "config.txt", cfg.to_text());
  {
    std::ofstream f(dir / "accuracy.csv");
    if (r.mode == LearnerMode::multitask) {
      f << "# cuber-joint 1\n";
      for (std::size_t j = 0; j < r.joint.size(); ++j) f << (j ? "," : "") << detail::fmt(r.joint[j]);
      f << "\n";
    } else {
      r.accuracy.write_csv(f);
    }
  }
  write_text(dir / "metrics.txt", format_metrics(make_record(r)));
  std::ofstream ck(dir / "memory.ckpt");
  r.memory.save(ck);
}

/// One (mode, seed) job with its events streamed to events.jsonl. On error
/// the events so far stay on disk and error.txt records the diagnostic.
inline RunResult run_job(const ExperimentConfig& cfg, LearnerMode mode, std::uint64_t seed,
                         const std::vector<double>* scratch) {
  const auto dir = run_directory(cfg.out, mode, seed);
  std::filesystem::create_directories(dir);
  std::ofstream events(dir / "events.jsonl");
  const auto start = std::chrono::steady_clock::now();
  auto sink = [&](const nlohmann::json& j) { events << j.dump() << "\n" << std::flush; };
  try {
    RunResult r = run_single(cfg, mode, seed, sink, scratch);
    persist_run(dir, cfg, r);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    sink({{"event", "run_done"}, {"wall_seconds", secs}});
    return r;
  } catch (const std::exception& e) {
    sink({{"event", "run_failed"}, {"error", e.what()}});
    write_text(dir / "error.txt", std::string(e.what()) + "\n");
    throw;
  }
}

struct ExperimentSummary {
  std::vector<MetricsRecord> records;  ///< modes x seeds, config order
};

/// Runs `work(i)` for i in [0, n) on up to `threads` workers; rethrows the
/// first failure after all workers finish.
inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& work) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      {
        std::lock_guard<std::mutex> lock(mu);
        if (failure) return;
      }
      try {
        work(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
}

inline ExperimentSummary run_experiment(const ExperimentConfig& cfg, std::size_t threads = 1) {
  cfg.validate();
  std::filesystem::create_directories(cfg.out);
  write_text(std::filesystem::path(cfg.out) / "config.txt", cfg.to_text());

  std::vector<std::vector<double>> scratch(cfg.seeds.size());
  if (cfg.scratch) {
    parallel_for(cfg.seeds.size(), threads, [&](std::size_t s) {
      scratch[s] = scratch_accuracies(cfg, build_tasks(cfg, cfg.seeds[s]), cfg.seeds[s]);
    });
  }
  const std::size_t jobs = cfg.modes.size() * cfg.seeds.size();
  ExperimentSummary summary;
  summary.records.resize(jobs);
  parallel_for(jobs, threads, [&](std::size_t i) {
    const LearnerMode mode = cfg.modes[i / cfg.seeds.size()];
    const std::size_t s = i % cfg.seeds.size();
    const RunResult r = run_job(cfg, mode, cfg.seeds[s], cfg.scratch ? &scratch[s] : nullptr);
    summary.records[i] = make_record(r);
  });
  return summary;
}

/// Mean and sample standard deviation per mode of acc / bwt / bwt_s / fwt.
inline std::string tabulate(const std::vector<MetricsRecord>& records) {
  std::map<std::string, std::map<std::string, std::vector<double>>> by_mode;
  std::vector<std::string> order;
  for (const auto& r : records) {
    if (!by_mode.count(r.mode)) order.push_back(r.mode);
    auto& m = by_mode[r.mode];
    m["acc"].push_back(r.acc);
    if (r.bwt) m["bwt"].push_back(*r.bwt);
    if (r.bwt_s.mean) m["bwt_s"].push_back(*r.bwt_s.mean);
    if (r.fwt && r.fwt->mean) m["fwt"].push_back(*r.fwt->mean);
  }
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-16s %5s %19s %19s %19s %19s\n", "mode", "runs", "acc", "bwt", "bwt_s", "fwt");
  os << buf;
  for (const auto& mode : order) {
    const auto& m = by_mode[mode];
    auto cell = [&](const std::string& k) -> std::string {
      const auto it = m.find(k);
      if (it == m.end() || it->second.empty()) return "-";
      const auto& v = it->second;
      double mean = 0.0, var = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      for (double x : v) var += (x - mean) * (x - mean);
      const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
      char c[64];
      std::snprintf(c, sizeof c, "%.4f +- %.4f", mean, sd);
      return c;
    };
    std::snprintf(buf, sizeof buf, "%-16s %5zu %19s %19s %19s %19s\n", mode.c_str(), m.at("acc").size(),
                  cell("acc").c_str(), cell("bwt").c_str(), cell("bwt_s").c_str(), cell("fwt").c_str());
    os << buf;
  }
  return os.str();
}

/// Reads <root>/<mode>/seed_*/metrics.txt back into records.
inline std::vector<MetricsRecord> collect_records(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root))
    if (e.is_regular_file() && e.path().filename() == "metrics.txt") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<MetricsRecord> out;
  for (const auto& f : files) {
    std::ifstream in(f);
    const auto kv = read_metrics(in);
    auto get = [&](const std::string& k) -> std::optional<std::string> {
      const auto it = kv.find(k);
      if (it == kv.end() || it->second.empty() || it->second.front() == "absent") return std::nullopt;
      return it->second.front();
    };
    MetricsRecord r;
    r.mode = get("mode").value_or("?");
    r.seed = std::stoull(get("seed").value_or("0"));
    r.acc = std::stod(get("acc").value_or("0"));
    if (auto b = get("bwt")) r.bwt = std::stod(*b);
    if (auto b = get("bwt_s_mean")) r.bwt_s.mean = std::stod(*b);
    if (auto f2 = get("fwt_mean")) r.fwt = Fwt{{}, std::stod(*f2)};
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace cuber

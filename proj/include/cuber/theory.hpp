#pragma once
// Numerical checks of the two-task update-rule results on synthetic smooth
// losses. Task 1 has been learnt (w0 ~ its minimizer); task 2 is then learnt
// either with its gradient projected off task 1's input subspace (rule 1) or
// with plain gradient descent (rule 2).
//
// Constants: every L_i is (H/2)-smooth, so F = L1 + L2 is H-smooth; B bounds
// ||grad L_i|| on a ball of radius r = 2(||w0 - c1|| + ||w0 - c2||) around w0,
// and each verifier confirms the trajectory stays inside that ball.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "cuber/error.hpp"
#include "cuber/linalg.hpp"
#include "cuber/random.hpp"

namespace cuber::theory {

using Vec = std::vector<double>;
using GradFn = std::function<Vec(const Vec&)>;

inline double dot(const Vec& a, const Vec& b) {
  detail::require(a.size() == b.size(), "dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}
inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }
inline Vec sub(const Vec& a, const Vec& b) {
  detail::require(a.size() == b.size(), "sub: length mismatch");
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}
inline Vec add(const Vec& a, const Vec& b) {
  detail::require(a.size() == b.size(), "add: length mismatch");
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}
inline Vec scaled(const Vec& a, double s) {
  Vec out(a);
  for (double& v : out) v *= s;
  return out;
}
inline double cosine(const Vec& a, const Vec& b) {
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

/// Projection of a vector onto span(B).
inline Vec project_vec(const Vec& v, const Basis& b) {
  detail::require(v.size() == b.ambient_dim(), "project_vec: dimension mismatch");
  if (b.empty()) return Vec(v.size(), 0.0);
  Matrix row(1, v.size(), v);
  const Matrix p = project(row, b);
  return Vec(p.data().begin(), p.data().end());
}

inline Vec matvec(const Matrix& a, const Vec& x) {
  detail::require(a.cols() == x.size(), "matvec: dimension mismatch");
  Vec out(a.rows(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto row = a.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) s += row[c] * x[c];
    out[r] = s;
  }
  return out;
}

/// Largest eigenvalue of a symmetric PSD matrix.
inline double psd_max_eigenvalue(const Matrix& a) {
  const SvdResult s = svd(a);
  return s.singular_values.empty() ? 0.0 : s.singular_values.front();
}

// ---------------------------------------------------------------------------
// Tasks

enum class TaskKind { quadratic, quartic };

/// quadratic: L(w) = 1/2 (w - c)' A (w - c) with A symmetric PSD.
/// quartic:   L(w) = sum_k ((w_k - c_k)^2 - a_k)^2 / 4.
struct SmoothTask {
  TaskKind kind = TaskKind::quadratic;
  Matrix a;   ///< Hessian for quadratic tasks
  Vec center;
  Vec shift;  ///< a_k for quartic tasks

  static SmoothTask quadratic(Matrix hessian, Vec c) {
    detail::require(hessian.rows() == hessian.cols() && hessian.rows() == c.size(),
                    "quadratic task: Hessian must be d x d for a length-d center");
    for (std::size_t i = 0; i < hessian.rows(); ++i)
      for (std::size_t j = 0; j < i; ++j)
        detail::require(std::abs(hessian(i, j) - hessian(j, i)) <= 1e-12 * (1.0 + std::abs(hessian(i, j))),
                        "quadratic task: Hessian must be symmetric");
    return SmoothTask{TaskKind::quadratic, std::move(hessian), std::move(c), {}};
  }
  static SmoothTask quartic(Vec c, Vec shift) {
    detail::require(c.size() == shift.size(), "quartic task: center/shift length mismatch");
    return SmoothTask{TaskKind::quartic, Matrix(), std::move(c), std::move(shift)};
  }

  std::size_t dim() const noexcept { return center.size(); }

  double value(const Vec& w) const {
    const Vec u = sub(w, center);
    if (kind == TaskKind::quadratic) return 0.5 * dot(u, matvec(a, u));
    double s = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
      const double q = u[k] * u[k] - shift[k];
      s += q * q / 4.0;
    }
    return s;
  }

  Vec gradient(const Vec& w) const {
    const Vec u = sub(w, center);
    if (kind == TaskKind::quadratic) return matvec(a, u);
    Vec g(u.size());
    for (std::size_t k = 0; k < u.size(); ++k) g[k] = (u[k] * u[k] - shift[k]) * u[k];
    return g;
  }

  /// Bound on the Hessian spectral norm over the ball (the task is this-smooth there).
  double curvature_bound(const Vec& w0, double radius) const {
    if (kind == TaskKind::quadratic) return psd_max_eigenvalue(a);
    double worst = 0.0;
    for (std::size_t k = 0; k < dim(); ++k) {
      const double far = std::abs(w0[k] - center[k]) + radius;
      const double near = std::max(0.0, std::abs(w0[k] - center[k]) - radius);
      // 3u^2 - a over u in [near, far]
      worst = std::max({worst, std::abs(3.0 * far * far - shift[k]), std::abs(3.0 * near * near - shift[k])});
      if (near == 0.0) worst = std::max(worst, std::abs(shift[k]));
    }
    return worst;
  }

  /// Bound on ||grad L|| over the ball.
  double gradient_bound(const Vec& w0, double radius) const {
    return norm(gradient(w0)) + curvature_bound(w0, radius) * radius;
  }
};

// ---------------------------------------------------------------------------
// Update rules

/// w - alpha (g2 - Proj_{S1} g2)
inline Vec rule1_step(const Vec& w, double alpha, const GradFn& g2, const Basis& b1) {
  const Vec g = g2(w);
  return sub(w, scaled(sub(g, project_vec(g, b1)), alpha));
}

/// w - alpha g2
inline Vec rule2_step(const Vec& w, double alpha, const GradFn& g2) { return sub(w, scaled(g2(w), alpha)); }

// ---------------------------------------------------------------------------
// Instances and hypotheses

enum class Claim { thm1, thm2_part1, thm2_part2 };

inline const char* claim_name(Claim c) {
  switch (c) {
    case Claim::thm1: return "theorem1";
    case Claim::thm2_part1: return "theorem2_part1";
    case Claim::thm2_part2: return "theorem2_part2";
  }
  return "?";
}

struct TheoremInstance {
  SmoothTask task1, task2;
  Basis b1;
  Vec w0;
  double gamma = 0.5;
  int steps = 1;  ///< K for theorem 1 and part 1, k for part 2
  double alpha = 0.0;
  double eps1 = 0.0;
  double eps2 = 0.0;
  double h = 0.0;       ///< F is h-smooth on the ball
  double b = 0.0;       ///< Lipschitz bound on the ball
  double radius = 0.0;

  double f(const Vec& w) const { return task1.value(w) + task2.value(w); }
  Vec grad_f(const Vec& w) const { return add(task1.gradient(w), task2.gradient(w)); }
  GradFn g2() const {
    return [this](const Vec& w) { return task2.gradient(w); };
  }
};

/// Fills radius, h and b from the tasks and w0.
inline void compute_constants(TheoremInstance& inst) {
  inst.radius = 2.0 * (norm(sub(inst.w0, inst.task1.center)) + norm(sub(inst.w0, inst.task2.center)));
  inst.h = 2.0 * std::max(inst.task1.curvature_bound(inst.w0, inst.radius),
                          inst.task2.curvature_bound(inst.w0, inst.radius));
  inst.b = std::max(inst.task1.gradient_bound(inst.w0, inst.radius), inst.task2.gradient_bound(inst.w0, inst.radius));
}

struct Margin {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool strict = false;  ///< lhs > rhs required instead of lhs >= rhs

  bool holds() const { return strict ? lhs > rhs : lhs >= rhs; }
  double margin() const { return lhs - rhs; }
};

/// Step-size cap shared by theorem 1 and part 1: min(1/H, gamma ||g1(w0)|| / (H B K)).
/// Instances whose admissible step falls below this are rejected, not run.
inline constexpr double kMinAlpha = 1e-12;

inline double alpha_cap(const TheoremInstance& inst) {
  const double g1 = norm(inst.task1.gradient(inst.w0));
  return std::min(1.0 / inst.h, inst.gamma * g1 / (inst.h * inst.b * static_cast<double>(inst.steps)));
}

/// (2 + gamma^2) ||g1(w0)|| / (4 ||g2(w0)||)
inline double eps2_bound(const TheoremInstance& inst) {
  const double g1 = norm(inst.task1.gradient(inst.w0));
  const double g2 = norm(inst.task2.gradient(inst.w0));
  return g2 == 0.0 ? std::numeric_limits<double>::infinity() : (2.0 + inst.gamma * inst.gamma) * g1 / (4.0 * g2);
}

/// sqrt((1 + 2 alpha H) / (2 + alpha H))
inline double eps1_bound(const TheoremInstance& inst) {
  const double ah = inst.alpha * inst.h;
  return std::sqrt((1.0 + 2.0 * ah) / (2.0 + ah));
}

/// 4 eps2 ||g1(w0)|| / (H B k^1.5)
inline double alpha_cap_part2(const TheoremInstance& inst) {
  const double g1 = norm(inst.task1.gradient(inst.w0));
  return 4.0 * inst.eps2 * g1 / (inst.h * inst.b * std::pow(static_cast<double>(inst.steps), 1.5));
}

/// Rule-2 iterates w_0..w_n.
inline std::vector<Vec> rule2_trajectory(const TheoremInstance& inst, int n) {
  std::vector<Vec> traj{inst.w0};
  const GradFn g2 = inst.g2();
  for (int i = 0; i < n; ++i) traj.push_back(rule2_step(traj.back(), inst.alpha, g2));
  return traj;
}

inline double max_distance(const std::vector<Vec>& traj, const Vec& w0) {
  double worst = 0.0;
  for (const Vec& w : traj) worst = std::max(worst, norm(sub(w, w0)));
  return worst;
}

/// Every hypothesis of `which`, with both sides as measured. Conditions
/// stated on iterates are evaluated along the actual rule-2 trajectory.
inline std::vector<Margin> check_hypotheses(const TheoremInstance& inst, Claim which) {
  std::vector<Margin> out;
  const Vec g1 = inst.task1.gradient(inst.w0);
  const Vec g2 = inst.task2.gradient(inst.w0);
  out.push_back({"gamma_in_(0,1)", std::min(inst.gamma, 1.0 - inst.gamma), 0.0, true});
  if (which == Claim::thm1 || which == Claim::thm2_part1) {
    out.push_back({"alpha<1/H", 1.0 / inst.h, inst.alpha, true});
    out.push_back({"alpha<gamma*|g1|/(HBK)",
                   inst.gamma * norm(g1) / (inst.h * inst.b * static_cast<double>(inst.steps)), inst.alpha, true});
    out.push_back({"eps2>=(2+gamma^2)|g1|/(4|g2|)", inst.eps2, eps2_bound(inst), false});
    out.push_back({"positive_correlation(w0)", cosine(g1, g2), inst.eps2, false});
  }
  if (which == Claim::thm2_part1) {
    out.push_back({"eps1>=sqrt((1+2aH)/(2+aH))", inst.eps1, eps1_bound(inst), false});
    const double g2n = norm(g2);
    out.push_back({"sufficient_projection(w0)", g2n == 0.0 ? 0.0 : norm(project_vec(g2, inst.b1)) / g2n, inst.eps1,
                   false});
    // The comparison uses that g1 lies in the task-1 input subspace.
    const double g1n = norm(g1);
    out.push_back({"g1_in_input_subspace", -norm(sub(g1, project_vec(g1, inst.b1))), -1e-10 * std::max(1.0, g1n),
                   false});
  }
  if (which == Claim::thm2_part2) {
    out.push_back({"eps2_in_(0,1)", std::min(inst.eps2, 1.0 - inst.eps2), 0.0, true});
    out.push_back({"alpha<=4*eps2*|g1|/(HBk^1.5)", alpha_cap_part2(inst), inst.alpha, false});
    const auto traj = rule2_trajectory(inst, inst.steps);
    double worst = std::numeric_limits<double>::infinity();
    for (int i = 0; i < inst.steps; ++i) worst = std::min(worst, cosine(g1, inst.task2.gradient(traj[i])));
    if (inst.steps == 0) worst = 1.0;
    out.push_back({"alignment_along_trajectory", worst, inst.eps2, false});
    out.push_back({"trajectory_in_ball", inst.radius, max_distance(traj, inst.w0), false});
  }
  if (which == Claim::thm1) {
    const auto traj = rule2_trajectory(inst, inst.steps);
    out.push_back({"trajectory_in_ball", inst.radius, max_distance(traj, inst.w0), false});
  }
  return out;
}

inline bool all_hold(const std::vector<Margin>& m) {
  return std::all_of(m.begin(), m.end(), [](const Margin& x) { return x.holds(); });
}

// ---------------------------------------------------------------------------
// Verification

struct VerificationReport {
  Claim claim = Claim::thm1;
  std::vector<Margin> hypotheses;
  bool applicable = false;        ///< all hypotheses hold
  bool conclusion_holds = false;  ///< meaningful only when applicable
  std::vector<double> trajectory; ///< objective per step (F, or L1 for part 2)
  std::vector<std::pair<std::string, double>> measures;

  double measure(const std::string& key) const {
    for (const auto& [k, v] : measures)
      if (k == key) return v;
    throw InvalidInput("report: no measure named " + key);
  }
};

/// Minimizer set of F for quadratic tasks: (A1 + A2)^+ (A1 c1 + A2 c2) plus
/// the null space of A1 + A2. Returns the minimum-norm point and the range
/// basis of A1 + A2.
inline std::pair<Vec, Basis> quadratic_joint_minimizer(const SmoothTask& t1, const SmoothTask& t2) {
  detail::require(t1.kind == TaskKind::quadratic && t2.kind == TaskKind::quadratic,
                  "joint minimizer: quadratic tasks only");
  const Matrix a = t1.a + t2.a;
  const Vec rhs = add(matvec(t1.a, t1.center), matvec(t2.a, t2.center));
  const SvdResult s = svd(a);
  const double tol = s.singular_values.empty() ? 0.0 : 1e-10 * s.singular_values.front();
  Vec w(a.cols(), 0.0);
  std::vector<std::size_t> keep;
  for (std::size_t k = 0; k < s.singular_values.size(); ++k) {
    if (s.singular_values[k] <= tol) continue;
    keep.push_back(k);
    double ub = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) ub += s.u(i, k) * rhs[i];
    for (std::size_t i = 0; i < a.cols(); ++i) w[i] += s.v(i, k) * ub / s.singular_values[k];
  }
  Matrix range(a.rows(), keep.size());
  for (std::size_t c = 0; c < keep.size(); ++c)
    for (std::size_t i = 0; i < a.rows(); ++i) range(i, c) = s.v(i, keep[c]);
  return {w, Basis::from_orthonormal(range, 1e-8)};
}

/// Global minimum value of F for separable quartic tasks (per-coordinate
/// grid search polished with Newton steps).
inline double quartic_joint_minimum(const SmoothTask& t1, const SmoothTask& t2) {
  detail::require(t1.kind == TaskKind::quartic && t2.kind == TaskKind::quartic, "quartic minimum: quartic tasks only");
  double total = 0.0;
  for (std::size_t k = 0; k < t1.dim(); ++k) {
    auto f = [&](double x) {
      const double q1 = (x - t1.center[k]) * (x - t1.center[k]) - t1.shift[k];
      const double q2 = (x - t2.center[k]) * (x - t2.center[k]) - t2.shift[k];
      return (q1 * q1 + q2 * q2) / 4.0;
    };
    auto df = [&](double x) {
      const double u1 = x - t1.center[k], u2 = x - t2.center[k];
      return (u1 * u1 - t1.shift[k]) * u1 + (u2 * u2 - t2.shift[k]) * u2;
    };
    auto d2f = [&](double x) {
      const double u1 = x - t1.center[k], u2 = x - t2.center[k];
      return 3.0 * u1 * u1 - t1.shift[k] + 3.0 * u2 * u2 - t2.shift[k];
    };
    const double reach = 2.0 + std::sqrt(std::max(0.0, std::max(t1.shift[k], t2.shift[k])));
    const double lo = std::min(t1.center[k], t2.center[k]) - reach;
    const double hi = std::max(t1.center[k], t2.center[k]) + reach;
    const int n = 4000;
    double best_x = lo, best = f(lo);
    for (int i = 1; i <= n; ++i) {
      const double x = lo + (hi - lo) * i / n;
      if (f(x) < best) {
        best = f(x);
        best_x = x;
      }
    }
    double x = best_x;
    for (int it = 0; it < 50; ++it) {
      const double h = d2f(x);
      if (h <= 0.0) break;
      const double nx = x - df(x) / h;
      if (!(f(nx) <= f(x))) break;
      x = nx;
    }
    total += std::min(best, f(x));
  }
  return total;
}

inline constexpr double kDivergence = 1e12;

/// Theorem 1. Convex instances: ||w_K - w*|| <= tol, distance measured to
/// the minimizer set of F. Nonconvex: the stationarity bound.
inline VerificationReport verify_theorem1(const TheoremInstance& inst, double tol = 1e-3) {
  VerificationReport rep;
  rep.claim = Claim::thm1;
  rep.hypotheses = check_hypotheses(inst, Claim::thm1);
  rep.applicable = all_hold(rep.hypotheses);
  const auto traj = rule2_trajectory(inst, inst.steps);
  bool diverged = false;
  bool monotone = true;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    rep.trajectory.push_back(inst.f(traj[i]));
    if (!std::isfinite(rep.trajectory.back()) || rep.trajectory.back() > kDivergence) diverged = true;
    if (i > 0 && rep.trajectory[i] > rep.trajectory[i - 1]) monotone = false;
  }
  rep.measures.emplace_back("steps", inst.steps);
  rep.measures.emplace_back("sufficient_decrease", monotone ? 1.0 : 0.0);
  rep.measures.emplace_back("travel", norm(sub(traj.back(), inst.w0)));
  rep.measures.emplace_back("travel_cap", inst.gamma * norm(inst.task1.gradient(inst.w0)) / inst.h);
  if (inst.task1.kind == TaskKind::quadratic && inst.task2.kind == TaskKind::quadratic) {
    const auto [w_star, range] = quadratic_joint_minimizer(inst.task1, inst.task2);
    auto dist = [&](const Vec& w) { return norm(project_vec(sub(w, w_star), range)); };
    const double d0 = dist(inst.w0), dk = dist(traj.back());
    rep.measures.emplace_back("distance_initial", d0);
    rep.measures.emplace_back("distance_final", dk);
    rep.measures.emplace_back("tolerance", tol);
    rep.conclusion_holds = !diverged && dk <= tol;
  } else {
    const double f_star = quartic_joint_minimum(inst.task1, inst.task2);
    double min_grad2 = std::numeric_limits<double>::infinity();
    for (int k = 0; k < inst.steps; ++k) {
      const double g = norm(inst.grad_f(traj[k]));
      min_grad2 = std::min(min_grad2, g * g);
    }
    const double g1 = norm(inst.task1.gradient(inst.w0));
    const double bound = 2.0 / (inst.alpha * inst.steps) * (inst.f(inst.w0) - f_star) +
                         (4.0 + inst.gamma * inst.gamma) / 2.0 * g1 * g1;
    rep.measures.emplace_back("min_grad_sq", min_grad2);
    rep.measures.emplace_back("bound", bound);
    rep.measures.emplace_back("f_star", f_star);
    rep.conclusion_holds = !diverged && min_grad2 < bound;
  }
  return rep;
}

/// Theorem 2, part 1: one step of each rule from w0; F(w^r) <= F(w^c).
inline VerificationReport verify_theorem2_part1(const TheoremInstance& inst) {
  VerificationReport rep;
  rep.claim = Claim::thm2_part1;
  rep.hypotheses = check_hypotheses(inst, Claim::thm2_part1);
  rep.applicable = all_hold(rep.hypotheses);
  const GradFn g2 = inst.g2();
  const Vec wc = rule1_step(inst.w0, inst.alpha, g2, inst.b1);
  const Vec wr = rule2_step(inst.w0, inst.alpha, g2);
  const double fc = inst.f(wc), fr = inst.f(wr);
  rep.trajectory = {inst.f(inst.w0), fr};
  rep.measures.emplace_back("f_rule1", fc);
  rep.measures.emplace_back("f_rule2", fr);
  rep.measures.emplace_back("gap", fc - fr);
  rep.conclusion_holds = fr <= fc + 1e-12 * std::max(1.0, std::abs(fc));
  return rep;
}

/// Theorem 2, part 2: k rule-2 steps; L1(w_k) <= L1(w0). With
/// `extended_steps` > 0 a second rule-2 run at step 1/H (the admissible step
/// is too small to leave w0's neighbourhood) records where alignment with
/// g1(w0) first breaks and where L1 first exceeds L1(w0).
inline VerificationReport verify_theorem2_part2(const TheoremInstance& inst, int extended_steps = 0) {
  VerificationReport rep;
  rep.claim = Claim::thm2_part2;
  rep.hypotheses = check_hypotheses(inst, Claim::thm2_part2);
  rep.applicable = all_hold(rep.hypotheses);
  const auto traj = rule2_trajectory(inst, inst.steps);
  const double l0 = inst.task1.value(inst.w0);
  for (int i = 0; i <= inst.steps; ++i) rep.trajectory.push_back(inst.task1.value(traj[i]));
  const double lk = rep.trajectory.back();
  rep.measures.emplace_back("l1_initial", l0);
  rep.measures.emplace_back("l1_final", lk);
  rep.measures.emplace_back("improvement", l0 - lk);
  rep.conclusion_holds = lk <= l0 + 1e-12;
  if (extended_steps > 0) {
    TheoremInstance ext = inst;
    ext.alpha = 1.0 / inst.h;
    const auto long_traj = rule2_trajectory(ext, extended_steps);
    const Vec g1 = inst.task1.gradient(inst.w0);
    double first_break = -1.0, first_worse = -1.0;
    for (int i = 0; i <= extended_steps; ++i) {
      if (first_break < 0 && i < extended_steps && cosine(g1, inst.task2.gradient(long_traj[i])) < inst.eps2)
        first_break = i;
      if (first_worse < 0 && inst.task1.value(long_traj[i]) > l0 + 1e-12) first_worse = i;
    }
    rep.measures.emplace_back("first_alignment_break", first_break);
    rep.measures.emplace_back("first_l1_increase", first_worse);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Instance sampling

namespace detail_theory {

inline Vec gaussian_vec(std::size_t d, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Vec v(d);
  for (double& x : v) x = n(rng);
  return v;
}

inline Matrix gaussian_matrix(std::size_t r, std::size_t c, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (double& x : m.data()) x = n(rng);
  return m;
}

inline std::size_t uniform_int(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

/// Random rank-r quadratic task 1: A1 = U diag(lambda) U', B1 = U.
inline std::pair<SmoothTask, Basis> rank_deficient_task(std::size_t d, std::size_t r, Rng& rng) {
  const Basis u = orthonormalize(gaussian_matrix(d, r, rng));
  Matrix a(d, d);
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double lam = uniform(rng, 0.5, 2.0);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) a(i, j) += lam * u.matrix()(i, k) * u.matrix()(j, k);
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < i; ++j) a(i, j) = a(j, i) = 0.5 * (a(i, j) + a(j, i));
  return {SmoothTask::quadratic(std::move(a), gaussian_vec(d, rng)), u};
}

/// A2 = M M' with M = B1 X + eta N: mostly inside span(B1).
inline Matrix correlated_hessian(const Basis& b1, Rng& rng, double eta) {
  const std::size_t d = b1.ambient_dim();
  const std::size_t m = uniform_int(rng, 1, d);
  Matrix mm = matmul(b1.matrix(), gaussian_matrix(b1.size(), m, rng));
  mm.add_scaled(gaussian_matrix(d, m, rng), eta);
  mm *= 1.0 / std::sqrt(static_cast<double>(m));
  Matrix a = matmul_nt(mm, mm);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < i; ++j) a(i, j) = a(j, i) = 0.5 * (a(i, j) + a(j, i));
  return a;
}

/// w0 from a few gradient steps on task 1 from a random start.
inline Vec learnt_model(const SmoothTask& t1, Rng& rng) {
  Vec w = add(t1.center, gaussian_vec(t1.dim(), rng, 2.0));
  const std::size_t steps = uniform_int(rng, 2, 12);
  for (std::size_t s = 0; s < steps; ++s) {
    // 1 / local curvature keeps the quartic iteration from overshooting
    const double step = 1.0 / std::max(1e-12, t1.curvature_bound(w, 0.0));
    w = sub(w, scaled(t1.gradient(w), t1.kind == TaskKind::quadratic ? step : 0.5 * step));
  }
  return w;
}

}  // namespace detail_theory

/// Convex instance for theorem 1 with K chosen from the condition number of
/// A2 at the largest admissible step. Rejected (nullopt) when the realized
/// correlation falls short of the required eps2.
inline std::optional<TheoremInstance> sample_theorem1_convex(Rng& rng, double tol = 1e-3) {
  using namespace detail_theory;
  const std::size_t d = uniform_int(rng, 3, 8);
  const std::size_t r = uniform_int(rng, 1, d - 1);
  auto [t1, b1] = rank_deficient_task(d, r, rng);
  TheoremInstance inst{t1, t1, b1, {}};
  inst.w0 = learnt_model(t1, rng);
  inst.task2 = SmoothTask::quadratic(correlated_hessian(b1, rng, uniform(rng, 0.0, 0.3)),
                                     add(inst.w0, gaussian_vec(d, rng)));
  if (norm(t1.gradient(inst.w0)) < 1e-8) return std::nullopt;
  compute_constants(inst);
  inst.gamma = uniform(rng, 0.05, 0.95);
  const SvdResult s = svd(inst.task2.a);
  double lmin = 0.0;
  for (double sv : s.singular_values)
    if (sv > 1e-10 * s.singular_values.front()) lmin = sv;
  const double kappa = s.singular_values.front() / lmin;
  const double dist = norm(sub(inst.w0, quadratic_joint_minimizer(inst.task1, inst.task2).first));
  inst.steps = static_cast<int>(std::clamp(std::ceil(2.0 * kappa * std::log(std::max(2.0, dist / tol))), 10.0, 20000.0));
  inst.alpha = uniform(rng, 0.1, 0.99) * alpha_cap(inst);
  if (!(inst.alpha >= kMinAlpha)) return std::nullopt;
  inst.eps2 = eps2_bound(inst);
  if (!(inst.eps2 < 1.0) || !all_hold(check_hypotheses(inst, Claim::thm1))) return std::nullopt;
  return inst;
}

/// Separable quartic instance for the nonconvex part of theorem 1.
inline std::optional<TheoremInstance> sample_theorem1_nonconvex(Rng& rng) {
  using namespace detail_theory;
  const std::size_t d = uniform_int(rng, 3, 8);
  Vec shift1(d), shift2(d);
  for (double& a : shift1) a = uniform(rng, 0.2, 1.5);
  for (double& a : shift2) a = uniform(rng, 0.2, 1.5);
  const SmoothTask t1 = SmoothTask::quartic(gaussian_vec(d, rng, 0.5), shift1);
  TheoremInstance inst{t1, t1, Basis(d), {}};
  inst.w0 = learnt_model(t1, rng);
  inst.task2 = SmoothTask::quartic(add(t1.center, gaussian_vec(d, rng, 0.3)), shift2);
  if (norm(t1.gradient(inst.w0)) < 1e-8) return std::nullopt;
  compute_constants(inst);
  inst.gamma = uniform(rng, 0.05, 0.95);
  inst.steps = static_cast<int>(uniform_int(rng, 10, 400));
  inst.alpha = uniform(rng, 0.1, 0.99) * alpha_cap(inst);
  if (!(inst.alpha >= kMinAlpha)) return std::nullopt;
  inst.eps2 = eps2_bound(inst);
  if (!(inst.eps2 < 1.0) || !all_hold(check_hypotheses(inst, Claim::thm1))) return std::nullopt;
  return inst;
}

/// Instance for part 1: eps1 and eps2 set to their required bounds and the
/// instance kept only if the realized projection ratio and cosine reach them.
inline std::optional<TheoremInstance> sample_theorem2_part1(Rng& rng) {
  using namespace detail_theory;
  const std::size_t d = uniform_int(rng, 3, 8);
  const std::size_t r = uniform_int(rng, 1, d - 1);
  auto [t1, b1] = rank_deficient_task(d, r, rng);
  TheoremInstance inst{t1, t1, b1, {}};
  inst.w0 = learnt_model(t1, rng);
  const Vec toward = scaled(sub(inst.w0, t1.center), uniform(rng, 0.5, 3.0));
  inst.task2 = SmoothTask::quadratic(correlated_hessian(b1, rng, uniform(rng, 0.0, 0.3)),
                                     sub(inst.w0, add(toward, gaussian_vec(d, rng, 0.5))));
  if (norm(t1.gradient(inst.w0)) < 1e-8) return std::nullopt;
  compute_constants(inst);
  inst.gamma = uniform(rng, 0.05, 0.95);
  inst.steps = static_cast<int>(uniform_int(rng, 1, 50));
  inst.alpha = uniform(rng, 0.1, 0.99) * alpha_cap(inst);
  if (!(inst.alpha >= kMinAlpha)) return std::nullopt;
  inst.eps1 = eps1_bound(inst);
  inst.eps2 = eps2_bound(inst);
  if (!(inst.eps2 < 1.0) || !all_hold(check_hypotheses(inst, Claim::thm2_part1))) return std::nullopt;
  return inst;
}

/// Instance for part 2: eps2 a fraction of the initial cosine, k in [1, 100],
/// alpha a fraction of its cap; kept only if alignment holds for i < k.
inline std::optional<TheoremInstance> sample_theorem2_part2(Rng& rng) {
  using namespace detail_theory;
  const std::size_t d = uniform_int(rng, 3, 8);
  const std::size_t r = uniform_int(rng, 1, d - 1);
  auto [t1, b1] = rank_deficient_task(d, r, rng);
  TheoremInstance inst{t1, t1, b1, {}};
  inst.w0 = learnt_model(t1, rng);
  const Vec toward = scaled(sub(inst.w0, t1.center), uniform(rng, 0.5, 3.0));
  inst.task2 = SmoothTask::quadratic(correlated_hessian(b1, rng, uniform(rng, 0.0, 0.3)),
                                     sub(inst.w0, add(toward, gaussian_vec(d, rng, 0.5))));
  if (norm(t1.gradient(inst.w0)) < 1e-8) return std::nullopt;
  compute_constants(inst);
  const double cos0 = cosine(t1.gradient(inst.w0), inst.task2.gradient(inst.w0));
  if (!(cos0 > 0.0)) return std::nullopt;
  inst.gamma = uniform(rng, 0.05, 0.95);
  inst.eps2 = uniform(rng, 0.1, 0.95) * cos0;
  inst.steps = static_cast<int>(uniform_int(rng, 1, 100));
  inst.alpha = uniform(rng, 0.1, 1.0) * alpha_cap_part2(inst);
  if (!(inst.alpha >= kMinAlpha)) return std::nullopt;
  if (!all_hold(check_hypotheses(inst, Claim::thm2_part2))) return std::nullopt;
  return inst;
}

// ---------------------------------------------------------------------------
// Sweeps

enum class SweepKind { thm1_convex, thm1_nonconvex, thm2_part1, thm2_part2 };

inline const char* sweep_name(SweepKind k) {
  switch (k) {
    case SweepKind::thm1_convex: return "theorem1_convex";
    case SweepKind::thm1_nonconvex: return "theorem1_nonconvex";
    case SweepKind::thm2_part1: return "theorem2_part1";
    case SweepKind::thm2_part2: return "theorem2_part2";
  }
  return "?";
}

struct SweepSummary {
  SweepKind kind = SweepKind::thm1_convex;
  std::size_t attempts = 0;
  std::size_t accepted = 0;
  std::size_t passed = 0;
  std::vector<VerificationReport> reports;  ///< one per accepted instance

  double acceptance_rate() const { return attempts == 0 ? 0.0 : static_cast<double>(accepted) / attempts; }
  bool all_passed() const { return accepted > 0 && passed == accepted; }
};

/// Samples until `count` instances pass the hypothesis gate (or
/// `max_attempts` is reached) and verifies each.
inline SweepSummary run_sweep(SweepKind kind, std::size_t count, std::uint64_t seed, std::size_t max_attempts = 0,
                              int extended_steps = 2000) {
  if (max_attempts == 0) max_attempts = 200 * count;
  Rng rng(seed);
  SweepSummary out;
  out.kind = kind;
  while (out.accepted < count && out.attempts < max_attempts) {
    ++out.attempts;
    std::optional<TheoremInstance> inst;
    switch (kind) {
      case SweepKind::thm1_convex: inst = sample_theorem1_convex(rng); break;
      case SweepKind::thm1_nonconvex: inst = sample_theorem1_nonconvex(rng); break;
      case SweepKind::thm2_part1: inst = sample_theorem2_part1(rng); break;
      case SweepKind::thm2_part2: inst = sample_theorem2_part2(rng); break;
    }
    if (!inst) continue;
    VerificationReport rep;
    switch (kind) {
      case SweepKind::thm1_convex:
      case SweepKind::thm1_nonconvex: rep = verify_theorem1(*inst); break;
      case SweepKind::thm2_part1: rep = verify_theorem2_part1(*inst); break;
      case SweepKind::thm2_part2: rep = verify_theorem2_part2(*inst, extended_steps); break;
    }
    if (!rep.applicable) continue;
    ++out.accepted;
    if (rep.conclusion_holds) ++out.passed;
    out.reports.push_back(std::move(rep));
  }
  return out;
}

}  // namespace cuber::theory

#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "chiralctl/analytic.hpp"
#include "chiralctl/baselines.hpp"
#include "chiralctl/detail/rng.hpp"
#include "chiralctl/detail/stage_solver.hpp"
#include "chiralctl/spin.hpp"
#include "chiralctl/types.hpp"

namespace chiralctl {

// Terminal cost steering the feasibility solves: zero exactly when the kept
// species reaches +x and the suppressed one hits the x = 0 plane.
struct ControlGradient {
  double cost = 0.0;
  Eigen::MatrixXd grad;  // n x 3, channels (op, oq, os)
};

namespace detail {

inline Vec3 row_field(const Eigen::MatrixXd& controls, int i, Chirality chi) {
  return Vec3(controls(i, 0), coupling_sign(chi) * controls(i, 1),
              controls(i, 2));
}

}  // namespace detail

inline double terminal_cost(const Eigen::MatrixXd& controls, double T) {
  const int n = static_cast<int>(controls.rows());
  require(n > 0 && controls.cols() == 3 && T > 0,
          "terminal_cost: need an n x 3 control table and T > 0");
  const double dt = T / n;
  Vec3 rp(0, 0, 1), rm(0, 0, 1);
  for (int i = 0; i < n; ++i) {
    rp = rotation_about(detail::row_field(controls, i, Chirality::Left), dt) * rp;
    rm = rotation_about(detail::row_field(controls, i, Chirality::Right), dt) * rm;
  }
  return (1.0 - rp.x()) * (1.0 - rp.x()) + rm.x() * rm.x();
}

// Exact gradient through the piecewise-constant rotations: adjoints flow
// backward under the same rotations, and each segment's sensitivity is the
// rotating integral of the angular momentum r x lambda over the segment.
inline ControlGradient terminal_cost_and_gradient(const Eigen::MatrixXd& controls,
                                                  double T) {
  const int n = static_cast<int>(controls.rows());
  require(n > 0 && controls.cols() == 3 && T > 0,
          "terminal_cost_and_gradient: need an n x 3 control table and T > 0");
  const double dt = T / n;

  std::vector<Vec3> rp_start(n), rm_start(n);
  Vec3 rp(0, 0, 1), rm(0, 0, 1);
  for (int i = 0; i < n; ++i) {
    rp_start[i] = rp;
    rm_start[i] = rm;
    rp = rotation_about(detail::row_field(controls, i, Chirality::Left), dt) * rp;
    rm = rotation_about(detail::row_field(controls, i, Chirality::Right), dt) * rm;
  }

  ControlGradient out;
  out.cost = (1.0 - rp.x()) * (1.0 - rp.x()) + rm.x() * rm.x();
  out.grad.resize(n, 3);

  Vec3 lp(-2.0 * (1.0 - rp.x()), 0.0, 0.0);
  Vec3 lm(2.0 * rm.x(), 0.0, 0.0);
  for (int i = n - 1; i >= 0; --i) {
    const Vec3 bp = detail::row_field(controls, i, Chirality::Left);
    const Vec3 bm = detail::row_field(controls, i, Chirality::Right);
    lp = rotation_about(bp, dt).transpose() * lp;
    lm = rotation_about(bm, dt).transpose() * lm;
    const Vec3 gp = rotating_integral(bp, rp_start[i].cross(lp), dt);
    const Vec3 gm = rotating_integral(bm, rm_start[i].cross(lm), dt);
    out.grad(i, 0) = 0.5 * (gp.x() + gm.x());
    out.grad(i, 1) = 0.5 * (gp.y() - gm.y());
    out.grad(i, 2) = 0.5 * (gp.z() + gm.z());
  }
  return out;
}

struct FeasibilityOptions {
  int restarts = 8;
  int max_iters = 1500;
  double target = 1e-12;  // stop polishing below this cost
  // near the reachable-time frontier the best cost falls off like the third
  // to fourth power of the time deficit, so a loose classification threshold
  // would blur the frontier by percents; 1e-10 localizes it to ~0.4%
  double feasible_tol = 1e-10;
  std::uint64_t seed = 20260818;
  const Eigen::MatrixXd* warm_start = nullptr;  // tried before all seeds
};

struct FeasibilityResult {
  double cost = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd controls;  // best table found, n x 3
  int iterations = 0;        // descent steps summed over restarts
  bool feasible = false;
};

namespace detail {

inline void clamp_controls(Eigen::MatrixXd& u, double omega0, double omega1) {
  for (int i = 0; i < u.rows(); ++i) {
    u(i, 0) = std::clamp(u(i, 0), -omega0, omega0);
    u(i, 1) = std::clamp(u(i, 1), -omega1, omega1);
    u(i, 2) = std::clamp(u(i, 2), -omega0, omega0);
  }
}

// Projected gradient descent with Barzilai-Borwein steps and an Armijo
// backtracking safeguard.
inline void projected_descent(Eigen::MatrixXd& u, double T, double omega0,
                              double omega1, const FeasibilityOptions& opts,
                              double& cost_out, int& iters_out) {
  clamp_controls(u, omega0, omega1);
  ControlGradient cg = terminal_cost_and_gradient(u, T);
  double step = 1.0;
  double last_best = cg.cost;
  int since_improvement = 0;
  int it = 0;
  for (; it < opts.max_iters && cg.cost > opts.target; ++it) {
    Eigen::MatrixXd u_try;
    double cost_try = 0.0;
    bool accepted = false;
    double alpha = step;
    for (int bt = 0; bt < 40; ++bt) {
      u_try = u - alpha * cg.grad;
      clamp_controls(u_try, omega0, omega1);
      cost_try = terminal_cost(u_try, T);
      const double decrease = (cg.grad.array() * (u - u_try).array()).sum();
      if (cost_try <= cg.cost - 1e-4 * decrease) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
      if (alpha < 1e-18) break;
    }
    if (!accepted) break;

    const ControlGradient cg_try = terminal_cost_and_gradient(u_try, T);
    const Eigen::MatrixXd du = u_try - u;
    const Eigen::MatrixXd dg = cg_try.grad - cg.grad;
    const double sy = (du.array() * dg.array()).sum();
    if (sy > 1e-18)
      step = std::clamp((du.array() * du.array()).sum() / sy, 1e-12, 1e6);
    else
      step = std::min(alpha * 2.0, 1e6);
    u = u_try;
    cg = cg_try;

    if (cg.cost < last_best * (1.0 - 1e-9)) {
      last_best = cg.cost;
      since_improvement = 0;
    } else if (++since_improvement > 80) {
      break;  // stalled
    }
  }
  cost_out = cg.cost;
  iters_out = it;
}

// Sample a schedule's piecewise-constant fields at the midpoints of n uniform
// segments, stretching its stage boundaries over the target duration.
inline Eigen::MatrixXd discretize_schedule(const PulseSchedule& sched, int n) {
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(n, 3);
  const double total = sched.total_duration();
  for (int i = 0; i < n; ++i) {
    const double t = (i + 0.5) / n * total;  // midpoint mapped back to [0, total]
    double acc = 0.0;
    const PulseSegment* active = &sched.segments.back();
    for (const auto& seg : sched.segments) {
      acc += seg.dt;
      if (t <= acc) {
        active = &seg;
        break;
      }
    }
    u(i, 0) = active->op;
    u(i, 1) = active->oq;
    u(i, 2) = active->os;
  }
  return u;
}

}  // namespace detail

// Can the pair be steered to its targets in exactly time T with n
// piecewise-constant segments? Multi-start projected descent; deterministic
// for a fixed seed.
inline FeasibilityResult feasibility_at_fixed_T(double s, double omega0,
                                                double T, int n_segments,
                                                const FeasibilityOptions& opts = {}) {
  require(s > 0 && omega0 > 0, "feasibility_at_fixed_T: need s > 0, omega0 > 0");
  require(T > 0 && n_segments > 0,
          "feasibility_at_fixed_T: need T > 0 and at least one segment");
  const double omega1 = s * omega0;
  const int n = n_segments;

  std::vector<Eigen::MatrixXd> starts;
  if (opts.warm_start) {
    require(opts.warm_start->rows() == n && opts.warm_start->cols() == 3,
            "feasibility_at_fixed_T: warm start shape mismatch");
    starts.push_back(*opts.warm_start);
  }
  {
    Eigen::MatrixXd u(n, 3);  // the constant-protocol shape, y capped at the bound
    u.col(0).setConstant(-omega0);
    u.col(1).setConstant(std::min(omega0, omega1));
    u.col(2).setConstant(-omega0);
    starts.push_back(u);
  }
  if (s >= kLowerBranchMinS)
    starts.push_back(
        detail::discretize_schedule(analytic_solution(s, omega0).schedule, n));
  detail::Rng rng(opts.seed);
  while (static_cast<int>(starts.size()) < opts.restarts + (opts.warm_start ? 1 : 0)) {
    Eigen::MatrixXd u(n, 3);
    for (int i = 0; i < n; ++i) {
      u(i, 0) = rng.uniform(-omega0, omega0);
      u(i, 1) = rng.uniform(-omega1, omega1);
      u(i, 2) = rng.uniform(-omega0, omega0);
    }
    starts.push_back(u);
  }

  FeasibilityResult best;
  for (const auto& start : starts) {
    Eigen::MatrixXd u = start;
    double cost = 0.0;
    int iters = 0;
    detail::projected_descent(u, T, omega0, omega1, opts, cost, iters);
    best.iterations += iters;
    if (cost < best.cost) {
      best.cost = cost;
      best.controls = u;
    }
    if (best.cost < opts.feasible_tol) break;  // classification settled
  }
  best.feasible = best.cost < opts.feasible_tol;
  return best;
}

// Piecewise-constant stage structure read off a control table: every channel
// snapped to {-bound, 0, +bound}, runs of equal triples merged.
struct StructureSpec {
  std::vector<Vec3> stage_fields;
  std::vector<double> durations;
  double unresolved_fraction = 0.0;  // channel samples too far from any level
};

inline StructureSpec extract_structure(const Eigen::MatrixXd& controls, double T,
                                       double omega0, double omega1,
                                       double tol_fraction = 0.05) {
  const int n = static_cast<int>(controls.rows());
  require(n > 0 && controls.cols() == 3 && T > 0,
          "extract_structure: need an n x 3 control table and T > 0");
  const double dt = T / n;

  int unresolved = 0;
  auto snap = [&](double value, double bound) {
    double best = -bound, dist = std::abs(value + bound);
    for (double level : {0.0, bound}) {
      if (std::abs(value - level) < dist) {
        dist = std::abs(value - level);
        best = level;
      }
    }
    if (dist > tol_fraction * bound) ++unresolved;
    return best;
  };

  StructureSpec spec;
  for (int i = 0; i < n; ++i) {
    const Vec3 f(snap(controls(i, 0), omega0), snap(controls(i, 1), omega1),
                 snap(controls(i, 2), omega0));
    if (!spec.stage_fields.empty() &&
        (spec.stage_fields.back() - f).norm() < 1e-12) {
      spec.durations.back() += dt;
    } else {
      spec.stage_fields.push_back(f);
      spec.durations.push_back(dt);
    }
  }
  spec.unresolved_fraction = static_cast<double>(unresolved) / (3.0 * n);

  // canonical sign: the first stage with an x control on gets a negative one.
  // Flipping the x and z channels together (y fixed) maps solutions to
  // solutions: it conjugates both species' trajectories by the same
  // reflection of the y axis, which leaves the terminal targets alone.
  for (const auto& f : spec.stage_fields) {
    if (f.x() == 0.0) continue;
    if (f.x() > 0.0) {
      for (auto& g : spec.stage_fields) {
        g.x() = -g.x();
        g.z() = -g.z();
      }
    }
    break;
  }
  return spec;
}

struct TimingRefinement {
  PulseSchedule schedule;
  double total_T = std::numeric_limits<double>::infinity();
  double constraint_residual = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

// Refine stage durations for a fixed bang structure: restore the terminal
// constraints exactly, then walk downhill in total time along the constraint
// manifold's tangent space until the durations are locally time-minimal.
inline TimingRefinement optimize_timings(const StructureSpec& structure,
                                         double s, double omega0,
                                         std::vector<double> init_durations = {}) {
  require(s > 0 && omega0 > 0, "optimize_timings: need s > 0, omega0 > 0");
  require(!structure.stage_fields.empty(), "optimize_timings: empty structure");
  std::vector<double> d =
      init_durations.empty() ? structure.durations : std::move(init_durations);
  require(d.size() == structure.stage_fields.size(),
          "optimize_timings: durations do not match the stages");
  const std::vector<Vec3>& fields = structure.stage_fields;
  const int k = static_cast<int>(fields.size());
  std::vector<int> all(k);
  for (int i = 0; i < k; ++i) all[i] = i;
  double total0 = 0.0;
  for (double x : d) total0 += x;
  const double d_max = 4.0 * total0 + 1.0;

  TimingRefinement out;
  if (!detail::refit_durations(fields, d, all, d_max)) return out;

  auto total_of = [](const std::vector<double>& v) {
    double t = 0.0;
    for (double x : v) t += x;
    return t;
  };

  int iter = 0;
  for (; iter < 80; ++iter) {
    // tangent directions: null space of the constraint Jacobian, with rows
    // pinning any zero-length stages
    Eigen::MatrixXd jac = detail::stage_jacobian(fields, d, all);
    std::vector<int> pinned;
    for (int i = 0; i < k; ++i)
      if (d[i] < 1e-12) pinned.push_back(i);
    Eigen::MatrixXd a(jac.rows() + pinned.size(), k);
    a.topRows(jac.rows()) = jac;
    a.bottomRows(pinned.size()).setZero();
    for (std::size_t r = 0; r < pinned.size(); ++r)
      a(jac.rows() + r, pinned[r]) = 1.0;

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double cutoff = 1e-9 * std::max(1.0, sv.size() ? sv(0) : 0.0);
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
      if (sv(i) > cutoff) ++rank;
    if (rank >= k) break;  // isolated solution, nothing to descend along

    const Eigen::MatrixXd null_basis = svd.matrixV().rightCols(k - rank);
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(k);
    Eigen::VectorXd dir = -null_basis * (null_basis.transpose() * ones);
    if (dir.norm() < 1e-10) break;

    const double total = total_of(d);
    double alpha = std::min(0.5 * total / dir.norm(), 1.0);
    bool accepted = false;
    for (int bt = 0; bt < 25 && !accepted; ++bt, alpha *= 0.5) {
      std::vector<double> d_try = d;
      std::vector<int> free_idx;
      for (int i = 0; i < k; ++i) {
        d_try[i] = std::max(0.0, d[i] + alpha * dir(i));
        if (d_try[i] > 0.0) free_idx.push_back(i);  // clamped stages stay pinned
      }
      if (free_idx.empty()) continue;
      if (!detail::refit_durations(fields, d_try, free_idx, d_max)) continue;
      if (total_of(d_try) < total - 1e-14) {
        d = d_try;
        accepted = true;
      }
    }
    if (!accepted) break;
  }

  out.iterations = iter;
  out.constraint_residual = detail::stage_residual(fields, d).norm();
  out.converged = out.constraint_residual < 1e-9;
  out.schedule.omega0 = omega0;
  out.schedule.omega1 = s * omega0;
  out.schedule.meta.protocol = "numeric";
  out.schedule.meta.s = s;
  for (int i = 0; i < k; ++i) {
    if (d[i] < 1e-12) continue;  // drop stages squeezed away by the descent
    PulseSegment seg;
    seg.dt = d[i];
    seg.op = fields[i].x();
    seg.oq = fields[i].y();
    seg.os = fields[i].z();
    out.schedule.segments.push_back(seg);
  }
  out.total_T = out.schedule.total_duration();
  if (out.converged) out.schedule.meta.objective = objective_two(out.schedule);
  return out;
}

struct MinimizeOptions {
  int n_segments = 64;
  int restarts = 8;
  int max_iters = 1500;
  double bisect_tol = 2e-3;  // absolute, on T
  double feasible_tol = 1e-10;
  std::uint64_t seed = 20260818;
  bool refine = true;
};

struct OptimizationResult {
  PulseSchedule schedule;  // refined when converged, else the free-form table
  double total_T = std::numeric_limits<double>::infinity();
  double free_form_T = std::numeric_limits<double>::infinity();
  double constraint_residual = std::numeric_limits<double>::infinity();
  int iterations = 0;  // feasibility solves spent in the bisection
  bool converged = false;
  StructureSpec extracted_structure;
  Eigen::MatrixXd free_controls;
  std::string message;
};

namespace detail {

inline PulseSchedule schedule_from_table(const Eigen::MatrixXd& u, double T,
                                         double s, double omega0) {
  PulseSchedule sched;
  sched.omega0 = omega0;
  sched.omega1 = s * omega0;
  sched.meta.protocol = "numeric";
  sched.meta.s = s;
  const int n = static_cast<int>(u.rows());
  for (int i = 0; i < n; ++i) {
    PulseSegment seg;
    seg.dt = T / n;
    seg.op = u(i, 0);
    seg.oq = u(i, 1);
    seg.os = u(i, 2);
    sched.segments.push_back(seg);
  }
  sched.meta.objective = objective_two(sched);
  return sched;
}

}  // namespace detail

// Bisect the shortest duration at which the pair is steerable to its targets,
// warm-starting each probe from the last feasible table, then read off the
// bang structure and polish its stage durations to an exact, locally
// time-minimal schedule.
inline OptimizationResult minimize_time(double s, double omega0,
                                        const MinimizeOptions& opts = {}) {
  require(s > 0 && omega0 > 0, "minimize_time: need s > 0, omega0 > 0");
  OptimizationResult out;

  FeasibilityOptions fopts;
  fopts.restarts = opts.restarts;
  fopts.max_iters = opts.max_iters;
  fopts.seed = opts.seed;
  fopts.feasible_tol = opts.feasible_tol;
  fopts.target = 1e-12;

  double t_hi = min_baseline_duration(s, omega0);
  double t_lo = delta_limit_duration(omega0);
  FeasibilityResult at_hi;
  for (int attempt = 0; attempt < 4; ++attempt) {
    at_hi = feasibility_at_fixed_T(s, omega0, t_hi, opts.n_segments, fopts);
    ++out.iterations;
    if (at_hi.feasible) break;
    t_hi *= 1.3;
  }
  if (!at_hi.feasible) {
    out.message = "no feasible control table found at the baseline duration";
    return out;
  }

  Eigen::MatrixXd u_best = at_hi.controls;
  while (t_hi - t_lo > opts.bisect_tol) {
    const double t_mid = 0.5 * (t_hi + t_lo);
    FeasibilityOptions mid_opts = fopts;
    mid_opts.warm_start = &u_best;
    const FeasibilityResult res =
        feasibility_at_fixed_T(s, omega0, t_mid, opts.n_segments, mid_opts);
    ++out.iterations;
    if (res.feasible) {
      t_hi = t_mid;
      u_best = res.controls;
    } else {
      t_lo = t_mid;
    }
  }

  out.free_form_T = t_hi;
  out.free_controls = u_best;
  out.extracted_structure =
      extract_structure(u_best, t_hi, omega0, s * omega0);

  if (opts.refine) {
    const TimingRefinement refined =
        optimize_timings(out.extracted_structure, s, omega0);
    if (refined.converged &&
        objective_two(refined.schedule) >= 1.0 - 1e-7) {
      out.schedule = refined.schedule;
      out.total_T = refined.total_T;
      out.constraint_residual = refined.constraint_residual;
      out.converged = true;
      out.message = "refined bang schedule meets the terminal constraints";
      return out;
    }
    out.message = "structure refinement failed; returning the free-form table";
  } else {
    out.message = "refinement disabled; returning the free-form table";
  }
  out.schedule = detail::schedule_from_table(u_best, t_hi, s, omega0);
  out.total_T = t_hi;
  out.constraint_residual = std::sqrt(terminal_cost(u_best, t_hi));
  return out;
}

}  // namespace chiralctl

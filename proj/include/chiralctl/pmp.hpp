#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>

#include "chiralctl/detail/nelder_mead.hpp"
#include "chiralctl/detail/rng.hpp"
#include "chiralctl/detail/stage_solver.hpp"
#include "chiralctl/spin.hpp"
#include "chiralctl/types.hpp"

namespace chiralctl {

struct AdjointPair {
  Vec3 lambda_plus = Vec3::Zero();
  Vec3 lambda_minus = Vec3::Zero();
};

// Angular-momentum sum and difference L+ +/- L-, whose components multiply
// the three controls in the control Hamiltonian.
struct SwitchVectors {
  Vec3 S = Vec3::Zero();
  Vec3 D = Vec3::Zero();
};

struct AdjointSample {
  double t;
  Vec3 lambda;
};

// Adjoints obey the same rotation dynamics as the states, so the propagation
// is exact per segment.
inline std::vector<AdjointSample> propagate_adjoint(const PulseSchedule& sched,
                                                    Chirality chi,
                                                    const Vec3& lambda0,
                                                    int samples_per_segment = 64) {
  std::vector<AdjointSample> out;
  out.push_back({0.0, lambda0});
  Vec3 lam = lambda0;
  double t = 0.0;
  for (const auto& seg : sched.segments) {
    const Vec3 b = field_vector(seg, chi);
    for (int k = 1; k <= samples_per_segment; ++k) {
      const double frac = static_cast<double>(k) / samples_per_segment;
      out.push_back({t + frac * seg.dt, rotation_about(b, frac * seg.dt) * lam});
    }
    lam = out.back().lambda;
    t += seg.dt;
    out.back().t = t;
  }
  return out;
}

struct SwitchSample {
  double t;
  int segment;
  SwitchVectors sw;
};

// Switching functions along the schedule, computed as cross products of the
// propagated states and adjoints (both species start at the north pole).
inline std::vector<SwitchSample> switch_trajectory(const PulseSchedule& sched,
                                                   const AdjointPair& adj0,
                                                   int samples_per_segment = 64) {
  std::vector<SwitchSample> out;
  Vec3 rp(0, 0, 1), rm(0, 0, 1);
  Vec3 lp = adj0.lambda_plus, lm = adj0.lambda_minus;
  double t = 0.0;
  auto emit = [&](double time, int seg, const Vec3& rpv, const Vec3& lpv,
                  const Vec3& rmv, const Vec3& lmv) {
    const Vec3 big_lp = rpv.cross(lpv);
    const Vec3 big_lm = rmv.cross(lmv);
    out.push_back({time, seg, {big_lp + big_lm, big_lp - big_lm}});
  };
  emit(0.0, 0, rp, lp, rm, lm);
  for (std::size_t i = 0; i < sched.segments.size(); ++i) {
    const auto& seg = sched.segments[i];
    const Vec3 bp = field_vector(seg, Chirality::Left);
    const Vec3 bm = field_vector(seg, Chirality::Right);
    for (int k = 1; k <= samples_per_segment; ++k) {
      const double frac = static_cast<double>(k) / samples_per_segment;
      const Mat3 qp = rotation_about(bp, frac * seg.dt);
      const Mat3 qm = rotation_about(bm, frac * seg.dt);
      emit(t + frac * seg.dt, static_cast<int>(i), qp * rp, qp * lp, qm * rm,
           qm * lm);
    }
    const Mat3 qp = rotation_about(bp, seg.dt);
    const Mat3 qm = rotation_about(bm, seg.dt);
    rp = qp * rp;
    lp = qp * lp;
    rm = qm * rm;
    lm = qm * lm;
    t += seg.dt;
    out.back().t = t;
  }
  return out;
}

// H_c = -1 + (S_x op + D_y oq + S_z os) / 2; zero along minimum-time
// extremals of this problem.
inline double control_hamiltonian(const SwitchVectors& sw,
                                  const PulseSegment& seg) {
  return -1.0 +
         0.5 * (sw.S.x() * seg.op + sw.D.y() * seg.oq + sw.S.z() * seg.os);
}

struct CertificateOptions {
  int samples_per_segment = 128;
  int starts = 32;           // random restarts on top of the least-squares seed
  std::uint64_t seed = 20260818;
  double converge_tol = 1e-5;
};

// Necessary-condition check, not an optimality proof: the best adjoints found
// make the report "consistent with the maximum principle" at most.
// Residual fields are meaningful only when precondition_ok.
struct CertificateReport {
  bool precondition_ok = false;
  bool converged = false;
  double hc_residual = 0.0;              // max |H_c| over all samples
  double transversality_residual = 0.0;  // |(lambda-_y(T), lambda-_z(T))|
  double singular_violations = 0.0;      // max |switching fn| on zero arcs
  int sign_violations = 0;               // bang samples with wrong-signed fn
  double sign_margin = 0.0;              // min of fn * sign(control) on bangs
  double total_residual = 0.0;
  AdjointPair found_adjoints;            // scale-fixed via H_c(0) = 0
  std::string message;
};

namespace detail {

using Vec6 = Eigen::Matrix<double, 6, 1>;

struct CertSample {
  Mat3 cp, cm;   // skew(r)*R for each species: L = cp * lambda0
  Vec6 m;        // H_c row: -1 + m . Lambda / 2
  double op, oq, os;
};

struct CertProblem {
  std::vector<CertSample> samples;
  Vec6 m0;                       // H_c row at t = 0 (scale anchor)
  Eigen::Matrix<double, 2, 6> trans_rows;
};

inline CertProblem build_certificate_problem(const PulseSchedule& sched,
                                             int samples_per_segment) {
  CertProblem prob;
  Mat3 rot_p = Mat3::Identity(), rot_m = Mat3::Identity();
  const Vec3 r0(0, 0, 1);
  bool anchored = false;
  for (const auto& seg : sched.segments) {
    const Vec3 bp = field_vector(seg, Chirality::Left);
    const Vec3 bm = field_vector(seg, Chirality::Right);
    auto hc_row = [&](const Mat3& cp, const Mat3& cm) {
      Vec6 m;
      m.head<3>() = seg.op * cp.row(0) + seg.oq * cp.row(1) + seg.os * cp.row(2);
      m.tail<3>() = seg.op * cm.row(0) - seg.oq * cm.row(1) + seg.os * cm.row(2);
      return m;
    };
    if (!anchored && seg.dt > 1e-12) {
      prob.m0 = hc_row(skew(rot_p * r0) * rot_p, skew(rot_m * r0) * rot_m);
      anchored = true;
    }
    if (seg.dt > 1e-12) {
      for (int k = 0; k < samples_per_segment; ++k) {
        const double frac = (k + 0.5) / samples_per_segment;
        const Mat3 rp = rotation_about(bp, frac * seg.dt) * rot_p;
        const Mat3 rm = rotation_about(bm, frac * seg.dt) * rot_m;
        CertSample sample;
        sample.cp = skew(rp * r0) * rp;
        sample.cm = skew(rm * r0) * rm;
        sample.m = hc_row(sample.cp, sample.cm);
        sample.op = seg.op;
        sample.oq = seg.oq;
        sample.os = seg.os;
        prob.samples.push_back(sample);
      }
    }
    rot_p = rotation_about(bp, seg.dt) * rot_p;
    rot_m = rotation_about(bm, seg.dt) * rot_m;
  }
  require(anchored, "certificate: schedule has no positive-duration segment");
  prob.trans_rows.setZero();
  prob.trans_rows.block<1, 3>(0, 3) = rot_m.row(1);  // lambda-_y(T)
  prob.trans_rows.block<1, 3>(1, 3) = rot_m.row(2);  // lambda-_z(T)
  return prob;
}

struct CertResidual {
  double hc = 0.0, trans = 0.0, singular = 0.0, margin = 0.0;
  int violations = 0;
  double total = 1e30;
};

inline CertResidual evaluate_certificate(const CertProblem& prob,
                                         const Vec6& raw, Vec6* fixed_out) {
  CertResidual res;
  const double g = 0.5 * prob.m0.dot(raw);
  if (std::abs(g) < 1e-12) return res;
  const Vec6 lam = raw / g;
  if (fixed_out) *fixed_out = lam;

  double margin = std::numeric_limits<double>::infinity();
  bool any_bang = false;
  for (const auto& sample : prob.samples) {
    res.hc = std::max(res.hc, std::abs(0.5 * sample.m.dot(lam) - 1.0));
    const Vec3 big_lp = sample.cp * lam.head<3>();
    const Vec3 big_lm = sample.cm * lam.tail<3>();
    const double sx = big_lp.x() + big_lm.x();
    const double dy = big_lp.y() - big_lm.y();
    const double sz = big_lp.z() + big_lm.z();
    auto bang = [&](double control, double fn) {
      any_bang = true;
      const double m = fn * (control > 0 ? 1.0 : -1.0);
      margin = std::min(margin, m);
      if (m < -1e-9) ++res.violations;
    };
    if (sample.op != 0.0) bang(sample.op, sx);
    else res.singular = std::max(res.singular, std::abs(sx));
    if (sample.oq != 0.0) bang(sample.oq, dy);
    else res.singular = std::max(res.singular, std::abs(dy));
    if (sample.os != 0.0) bang(sample.os, sz);
    else res.singular = std::max(res.singular, std::abs(sz));
  }
  res.margin = any_bang ? margin : 0.0;
  res.trans = (prob.trans_rows * lam).norm();
  res.total = res.hc + res.trans + res.singular +
              std::max(0.0, -(any_bang ? margin : 0.0));
  return res;
}

}  // namespace detail

// Search for initial adjoints consistent with the maximum principle: the
// residual stacks |H_c| everywhere, the terminal transversality of the
// suppressed species, the switching functions on zero arcs, and a hinge on
// wrong-signed bang arcs. A least-squares solve over all linear-in-lambda
// rows seeds the search; random unit starts plus a simplex polish handle the
// nonconvex sign terms. Deterministic for a fixed seed.
inline CertificateReport certificate_search(
    const PulseSchedule& sched, const std::pair<Vec3, Vec3>& chi_pair_terminals,
    const CertificateOptions& opts = {}) {
  require(sched.real_fields(),
          "certificate_search: adjoint machinery needs zero phase offsets");
  require(!sched.segments.empty(), "certificate_search: empty schedule");

  CertificateReport report;
  const Vec3 rp = propagate_bloch(sched.segments, Chirality::Left);
  const Vec3 rm = propagate_bloch(sched.segments, Chirality::Right);
  const double objective = std::abs(rp.x() * rp.x() - rm.x() * rm.x());
  if ((rp - chi_pair_terminals.first).norm() > 1e-6 ||
      (rm - chi_pair_terminals.second).norm() > 1e-6) {
    report.message = "terminal states do not match the requested pair";
    return report;
  }
  if (objective < 1.0 - 1e-6) {
    report.message = "schedule does not resolve to within 1e-6";
    return report;
  }
  report.precondition_ok = true;

  const detail::CertProblem prob =
      detail::build_certificate_problem(sched, opts.samples_per_segment);

  // least-squares seed over the linear rows (H_c = 0, transversality,
  // singular arcs), minimum-norm via SVD
  const int n_lin = static_cast<int>(prob.samples.size());
  int n_sing = 0;
  for (const auto& sample : prob.samples)
    n_sing += (sample.op == 0.0) + (sample.oq == 0.0) + (sample.os == 0.0);
  Eigen::MatrixXd a(n_lin + 2 + n_sing, 6);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(a.rows());
  int row = 0;
  for (const auto& sample : prob.samples) {
    a.row(row) = 0.5 * sample.m.transpose();
    b(row++) = 1.0;
  }
  a.block<2, 6>(row, 0) = prob.trans_rows;
  row += 2;
  for (const auto& sample : prob.samples) {
    if (sample.op == 0.0) {
      a.row(row).head<3>() = sample.cp.row(0);
      a.row(row++).tail<3>() = sample.cm.row(0);
    }
    if (sample.oq == 0.0) {
      a.row(row).head<3>() = sample.cp.row(1);
      a.row(row++).tail<3>() = -sample.cm.row(1);
    }
    if (sample.os == 0.0) {
      a.row(row).head<3>() = sample.cp.row(2);
      a.row(row++).tail<3>() = sample.cm.row(2);
    }
  }
  const detail::Vec6 seed_ls =
      Eigen::BDCSVD<Eigen::MatrixXd>(a, Eigen::ComputeThinU | Eigen::ComputeThinV)
          .solve(b);

  auto objective_fn = [&](const Eigen::VectorXd& x) {
    return detail::evaluate_certificate(prob, x, nullptr).total;
  };

  std::vector<detail::Vec6> starts;
  starts.push_back(seed_ls);
  detail::Rng rng(opts.seed);
  for (int k = 0; k < opts.starts; ++k) {
    detail::Vec6 u;
    for (int i = 0; i < 6; ++i) u(i) = rng.normal();
    starts.push_back(u.normalized());
  }

  detail::Vec6 best = seed_ls;
  double best_total = std::numeric_limits<double>::infinity();
  for (const auto& start : starts) {
    const Eigen::VectorXd polished = detail::nelder_mead(
        objective_fn, start, 0.05 * std::max(1.0, start.norm()), 600, 1e-14);
    const double total = objective_fn(polished);
    if (total < best_total) {
      best_total = total;
      best = polished;
    }
  }

  detail::Vec6 fixed = best;
  const detail::CertResidual res = detail::evaluate_certificate(prob, best, &fixed);
  report.hc_residual = res.hc;
  report.transversality_residual = res.trans;
  report.singular_violations = res.singular;
  report.sign_violations = res.violations;
  report.sign_margin = res.margin;
  report.total_residual = res.total;
  report.found_adjoints.lambda_plus = fixed.head<3>();
  report.found_adjoints.lambda_minus = fixed.tail<3>();
  report.converged = res.total < opts.converge_tol;
  report.message = report.converged
                       ? "consistent with the maximum principle"
                       : "residual above tolerance";
  return report;
}

// Convenience: certify against the schedule's own simulated terminals.
inline CertificateReport certificate_search(const PulseSchedule& sched,
                                            const CertificateOptions& opts = {}) {
  const Vec3 rp = propagate_bloch(sched.segments, Chirality::Left);
  const Vec3 rm = propagate_bloch(sched.segments, Chirality::Right);
  return certificate_search(sched, {rp, rm}, opts);
}

struct ProbeReport {
  double base_T = 0.0;
  double min_T = 0.0;
  bool pass = false;
  int attempted = 0;
  int solved = 0;
};

// First-order timing check: nudge each stage duration by +/- delta, hold it
// fixed, and ask the duration solver to restore the terminal constraints
// with the remaining stages. If any restored sequence is shorter than the
// original beyond tolerance, the schedule was not locally time-optimal.
inline ProbeReport local_optimality_probe(const PulseSchedule& sched,
                                          double delta) {
  require(sched.real_fields(),
          "local_optimality_probe: needs zero phase offsets");
  std::vector<Vec3> fields;
  std::vector<double> base;
  for (const auto& seg : sched.segments) {
    fields.emplace_back(seg.op, seg.oq, seg.os);
    base.push_back(seg.dt);
  }
  require(detail::stage_residual(fields, base).norm() < 1e-6,
          "local_optimality_probe: schedule misses the terminal constraints");

  ProbeReport report;
  report.base_T = sched.total_duration();
  report.min_T = report.base_T;
  const int n = static_cast<int>(fields.size());
  const double d_max = 3.0 * report.base_T + 1.0;
  for (int i = 0; i < n; ++i) {
    for (double sign : {+1.0, -1.0}) {
      const double fixed = base[i] + sign * delta;
      if (fixed < 0.0) continue;
      ++report.attempted;
      std::vector<double> durations = base;
      durations[i] = fixed;
      std::vector<int> free_idx;
      for (int j = 0; j < n; ++j)
        if (j != i) free_idx.push_back(j);
      if (detail::refit_durations(fields, durations, free_idx, d_max)) {
        ++report.solved;
        double total = 0.0;
        for (double d : durations) total += d;
        report.min_T = std::min(report.min_T, total);
      }
    }
  }
  report.pass = report.min_T >= report.base_T - 1e-6;
  return report;
}

}  // namespace chiralctl

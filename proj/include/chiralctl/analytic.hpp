#pragma once

#include "chiralctl/spin.hpp"
#include "chiralctl/types.hpp"

namespace chiralctl {

// Below this ratio the symmetric three-stage construction is no longer the
// shortest protocol; callers must switch to the numeric optimizer.
inline constexpr double kLowerBranchMinS = 0.86;

enum class Branch { Constant, Greater, Lower };

inline std::string branch_name(Branch b) {
  switch (b) {
    case Branch::Constant: return "constant";
    case Branch::Greater: return "greater";
    default: return "lower";
  }
}

// Every intermediate quantity of the closed-form construction, kept
// inspectable so formula transcription errors surface in tests rather than
// as silently wrong schedules.
struct DerivationTrace {
  Branch branch = Branch::Constant;
  double s = 1.0;
  double phi1 = 0.0, phi2 = 0.0;   // stage rotation angles
  double n_x = 0.0, n_y = 0.0;     // bang-stage axis components
  double w = 0.0;                  // axis normalization (lower branch)
  double chi_angle = 0.0;          // tan(chi) = s/sqrt(s^2+2) (lower branch)
  double delta = 0.0, delta_s = 0.0, delta_c = 0.0;  // angle-equation determinants
  int cond_branch = 0;             // which sign of the matching condition held

  std::map<std::string, double> as_map() const {
    std::map<std::string, double> m;
    m["s"] = s;
    m["phi1"] = phi1;
    m["phi2"] = phi2;
    m["n_x"] = n_x;
    m["n_y"] = n_y;
    if (branch == Branch::Lower) {
      m["w"] = w;
      m["chi_angle"] = chi_angle;
    }
    if (branch != Branch::Constant) {
      m["delta"] = delta;
      m["delta_s"] = delta_s;
      m["delta_c"] = delta_c;
    }
    if (cond_branch != 0) m["cond_branch"] = cond_branch;
    return m;
  }
};

struct AnalyticSolution {
  PulseSchedule schedule;
  double tau = 0.0;      // duration of the first and last stages
  double total_T = 0.0;
  DerivationTrace trace;
};

namespace detail {

inline PulseSchedule three_stage_schedule(double omega0, double omega1,
                                          const std::array<Vec3, 3>& fields,
                                          double tau, double mid,
                                          const DerivationTrace& trace,
                                          const std::string& protocol) {
  PulseSchedule sched;
  sched.omega0 = omega0;
  sched.omega1 = omega1;
  const double durs[3] = {tau, mid, tau};
  for (int i = 0; i < 3; ++i) {
    PulseSegment seg;
    seg.dt = durs[i];
    seg.op = fields[i].x();
    seg.oq = fields[i].y();
    seg.os = fields[i].z();
    sched.segments.push_back(seg);
  }
  sched.meta.protocol = protocol;
  sched.meta.s = trace.s;
  sched.meta.trace = trace.as_map();
  sched.meta.objective = objective_two(sched);
  return sched;
}

}  // namespace detail

// Constant controls at the common bound: the shortest single-stage protocol.
// Duration 4*pi/(3*sqrt(3)*omega0) with fields (-omega0, +omega0, -omega0).
inline AnalyticSolution constant_schedule(double omega0) {
  require(omega0 > 0, "constant_schedule: omega0 must be positive");
  const double total = 4.0 * kPi / (3.0 * std::sqrt(3.0) * omega0);

  DerivationTrace trace;
  trace.branch = Branch::Constant;
  trace.s = 1.0;
  const double r3 = 1.0 / std::sqrt(3.0);
  trace.n_x = -r3;
  trace.n_y = r3;
  trace.phi1 = 0.5 * omega0 * std::sqrt(3.0) * total;  // full rotation angle

  PulseSchedule sched;
  sched.omega0 = omega0;
  sched.omega1 = omega0;
  sched.segments.push_back({total, -omega0, omega0, -omega0});
  sched.meta.protocol = "constant";
  sched.meta.s = 1.0;
  sched.meta.trace = trace.as_map();
  sched.meta.objective = objective_two(sched);

  AnalyticSolution sol;
  sol.schedule = sched;
  sol.tau = total;
  sol.total_T = total;
  sol.trace = trace;
  return sol;
}

// Hard-pulse limit of the minimum duration: no protocol under the amplitude
// bounds can resolve faster than pi/(sqrt(2)*omega0).
inline double delta_limit_duration(double omega0) {
  require(omega0 > 0, "delta_limit_duration: omega0 must be positive");
  return kPi / (std::sqrt(2.0) * omega0);
}

// Shortest protocol when the two-photon bound dominates (s >= 1): bang
// stages of the q field around a middle arc where it is switched off, with
// both single-photon fields pinned at -omega0 throughout.
inline AnalyticSolution schedule_greater(double s, double omega0) {
  require(omega0 > 0, "schedule_greater: omega0 must be positive");
  require(s >= 1.0, "schedule_greater: requires s >= 1 (use the lower branch)");
  const double omega1 = s * omega0;
  const double root = std::sqrt(s * s + 2.0);

  const double tau =
      (4.0 / omega0) / root *
      std::atan(root / (s + std::sqrt(2.0 * (s * s + 2.0 * s - 1.0))));
  const double mid = (2.0 * std::sqrt(2.0) / omega0) *
                     std::asin((1.0 - 1.0 / s) / std::sqrt(2.0));
  const double total = 2.0 * tau + mid;

  DerivationTrace trace;
  trace.branch = Branch::Greater;
  trace.s = s;
  trace.n_x = -1.0 / root;
  trace.n_y = s / root;
  trace.phi1 = 0.5 * omega0 * tau * root;
  trace.phi2 = 0.25 * omega0 * mid * std::sqrt(2.0);

  // determinant form of the matching equations for the bang-stage angle
  const double sp2 = std::sin(trace.phi2), cp2 = std::cos(trace.phi2);
  const double nx = trace.n_x, ny = trace.n_y;
  trace.delta = 2.0 * nx * nx * sp2 * sp2 + cp2 * cp2;
  const double q = 1.0 / (2.0 * ny) - nx * std::sqrt(2.0) * sp2;
  trace.delta_s = nx * sp2 / std::sqrt(2.0) + cp2 * q;
  trace.delta_c = 0.5 * cp2 - nx * std::sqrt(2.0) * sp2 * q;

  const std::array<Vec3, 3> fields = {Vec3(-omega0, omega1, -omega0),
                                      Vec3(-omega0, 0.0, -omega0),
                                      Vec3(-omega0, omega1, -omega0)};
  AnalyticSolution sol;
  sol.schedule =
      detail::three_stage_schedule(omega0, omega1, fields, tau, mid, trace,
                                   "analytic");
  sol.tau = tau;
  sol.total_T = total;
  sol.trace = trace;
  return sol;
}

// Shortest symmetric protocol when the two-photon bound is the weaker one
// (0.86 <= s <= 1): the q field stays at its bound for the whole duration
// while the two single-photon fields hand over (p first, both in the middle,
// s last).
inline AnalyticSolution schedule_lower(double s, double omega0) {
  require(omega0 > 0, "schedule_lower: omega0 must be positive");
  require(s >= kLowerBranchMinS && s <= 1.0,
          "schedule_lower: requires 0.86 <= s <= 1 (use the optimizer below)");
  require(s * s * s * s + 2.0 * s * s - 1.0 >= 0.0,
          "schedule_lower: s below sqrt(sqrt(2)-1), construction undefined");
  const double omega1 = s * omega0;
  const double root1 = std::sqrt(s * s + 1.0);
  const double root2 = std::sqrt(s * s + 2.0);

  const double tau =
      (2.0 / omega0) / root1 *
      std::asin(std::sqrt((1.0 - std::pow(s, 4)) / 2.0) / s);
  const double mid =
      (4.0 / omega0) / root2 *
      (std::atan(std::sqrt((std::pow(s, 4) + 2.0 * s * s - 1.0) /
                           ((s * s + 2.0) * (1.0 - s * s)))) -
       std::atan(s / root2));
  const double total = 2.0 * tau + mid;

  DerivationTrace trace;
  trace.branch = Branch::Lower;
  trace.s = s;
  trace.n_x = -1.0 / root2;
  trace.n_y = s / root2;
  trace.w = root2 / root1;
  trace.chi_angle = std::atan(s / root2);
  trace.phi1 = 0.25 * omega0 * tau * root1;
  trace.phi2 = 0.25 * omega0 * mid * root2;

  // the matching condition fixes the middle angle up to a sign; try +1
  // first and keep whichever sign reproduces the closed-form phi2
  const double s2p = std::sin(2.0 * trace.phi1), c2p = std::cos(2.0 * trace.phi1);
  const double ny = trace.n_y, w = trace.w;
  trace.delta = 2.0 * ny * (w * w * s2p * s2p + c2p * c2p);
  for (int sign : {+1, -1}) {
    const double ds = -sign * (w * ny * s2p - c2p);
    const double dc = sign * (w * s2p + ny * c2p);
    if (std::abs(ds / trace.delta - std::sin(trace.phi2)) < 1e-8 &&
        std::abs(dc / trace.delta - std::cos(trace.phi2)) < 1e-8) {
      trace.delta_s = ds;
      trace.delta_c = dc;
      trace.cond_branch = sign;
      break;
    }
  }
  if (trace.cond_branch == 0)
    throw std::logic_error("schedule_lower: no sign branch matches phi2");

  const std::array<Vec3, 3> fields = {Vec3(-omega0, omega1, 0.0),
                                      Vec3(-omega0, omega1, -omega0),
                                      Vec3(0.0, omega1, -omega0)};
  AnalyticSolution sol;
  sol.schedule =
      detail::three_stage_schedule(omega0, omega1, fields, tau, mid, trace,
                                   "analytic");
  sol.tau = tau;
  sol.total_T = total;
  sol.trace = trace;
  return sol;
}

// Dispatch on s; s < 0.86 has no closed form and must use the optimizer.
inline AnalyticSolution analytic_solution(double s, double omega0) {
  if (s >= 1.0) return schedule_greater(s, omega0);
  return schedule_lower(s, omega0);
}

// Finite-amplitude version of the idealized limit sequence: two q bangs of
// area pi/2 bracketing the bare two-field arc, with both single-photon
// fields held at -omega0 for the whole duration. Pedagogical: its objective
// is below 1 at finite s and approaches 1 as s grows.
inline PulseSchedule delta_limit_schedule(double s, double omega0) {
  require(omega0 > 0, "delta_limit_schedule: omega0 must be positive");
  require(s >= 1.0, "delta_limit_schedule: requires s >= 1");
  const double omega1 = s * omega0;
  PulseSchedule sched;
  sched.omega0 = omega0;
  sched.omega1 = omega1;
  const double bang = 0.5 * kPi / omega1;
  const double mid = kPi / (std::sqrt(2.0) * omega0);
  sched.segments.push_back({bang, -omega0, omega1, -omega0});
  sched.segments.push_back({mid, -omega0, 0.0, -omega0});
  sched.segments.push_back({bang, -omega0, omega1, -omega0});
  sched.meta.protocol = "delta-limit";
  sched.meta.s = s;
  sched.meta.objective = objective_two(sched);
  return sched;
}

// Terminal two-level amplitudes of the suppressed (right-handed) species for
// the lower-branch construction, in the frame where they come out with the
// stated real/imaginary structure.
struct ReturnAmplitudes {
  double re_a = 0.0, im_a = 0.0;
  double re_b = 0.0, im_b = 0.0;
};

inline ReturnAmplitudes appendix_R_amplitudes(const DerivationTrace& trace) {
  require(trace.branch == Branch::Lower,
          "appendix_R_amplitudes: trace must come from the lower branch");
  const double c1 = std::cos(trace.phi1), s1 = std::sin(trace.phi1);
  const double c2 = std::cos(trace.phi2), s2 = std::sin(trace.phi2);
  const double nx = trace.n_x, ny = trace.n_y, w = trace.w;

  ReturnAmplitudes r;
  r.re_a = c1 * c1 * c2 - (2.0 / w) * c1 * s1 * s2 - w * w * ny * ny * s1 * s1 * c2 +
           w * w * nx * nx * ny * s1 * s1 * s2;
  r.im_a = -nx * c1 * c1 * s2 - w * nx * c1 * s1 * c2 +
           w * w * nx * nx * nx * s1 * s1 * s2 - w * nx * ny * c1 * s1 * s2 -
           w * w * nx * ny * s1 * s1 * c2;
  r.re_b = -ny * c1 * c1 * s2 - 2.0 * w * ny * c1 * s1 * c2 +
           2.0 * w * nx * nx * c1 * s1 * s2 + w * w * ny * s1 * s1 * s2 +
           w * w * nx * nx * s1 * s1 * c2;
  r.im_b = r.im_a;
  return r;
}

// Polar angle of the suppressed species' terminal point on the yz-meridian,
// computed from the closed-form amplitudes (not from simulation).
inline double terminal_polar_angle(double s) {
  const AnalyticSolution sol = schedule_lower(s, 1.0);
  const ReturnAmplitudes amp = appendix_R_amplitudes(sol.trace);
  double c = amp.re_a * amp.re_a - amp.re_b * amp.re_b;
  c = std::clamp(c, -1.0, 1.0);
  return std::acos(c);
}

}  // namespace chiralctl

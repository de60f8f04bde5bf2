#pragma once

#include <Eigen/Dense>
#include <complex>

#include "chiralctl/types.hpp"

namespace chiralctl {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec2c = Eigen::Vector2cd;
using Mat2c = Eigen::Matrix2cd;
using Vec3c = Eigen::Vector3cd;
using Mat3c = Eigen::Matrix3cd;

inline constexpr double kPi = 3.14159265358979323846264338327950288;

// Effective field seen by one handedness; only meaningful for real (zero
// phase-offset) segments, where the dynamics closes on two real subsystems.
inline Vec3 field_vector(const PulseSegment& seg, Chirality chi) {
  return Vec3(seg.op, coupling_sign(chi) * seg.oq, seg.os);
}

inline Mat3 skew(const Vec3& v) {
  Mat3 k;
  k << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return k;
}

// Rotation generated by a constant field over dt: angle |B| dt / 2 about B.
inline Mat3 rotation_about(const Vec3& b, double dt) {
  const double norm = b.norm();
  const double angle = 0.5 * norm * dt;
  if (norm * std::abs(dt) < 1e-300) return Mat3::Identity();
  const Vec3 axis = b / norm;
  const Mat3 k = skew(axis);
  return Mat3::Identity() + std::sin(angle) * k + (1.0 - std::cos(angle)) * k * k;
}

// U = cos(angle) I - i sin(angle) (axis . sigma); axis must be unit length.
inline Mat2c axis_angle_propagator(const Vec3& axis, double angle) {
  if (std::abs(axis.norm() - 1.0) > 1e-10)
    throw std::invalid_argument("axis_angle_propagator: axis must be unit length");
  const std::complex<double> i(0.0, 1.0);
  const std::complex<double> ms = -i * std::sin(angle);
  Mat2c ns;
  ns << axis.z(), axis.x() - i * axis.y(), axis.x() + i * axis.y(), -axis.z();
  return std::cos(angle) * Mat2c::Identity() + ms * ns;
}

// SU(2) propagator of H = (b . sigma)/4 over dt; identity for a zero field.
inline Mat2c su2_about(const Vec3& b, double dt) {
  const double norm = b.norm();
  if (norm * std::abs(dt) < 1e-300) return Mat2c::Identity();
  return axis_angle_propagator(b / norm, 0.25 * norm * dt);
}

inline Mat3 segment_rotation(const PulseSegment& seg, Chirality chi) {
  return rotation_about(field_vector(seg, chi), seg.dt);
}

inline Mat2c segment_propagator_2lv(const PulseSegment& seg, Chirality chi) {
  return su2_about(field_vector(seg, chi), seg.dt);
}

// Full three-level Hamiltonian of a segment. The two-photon coupling carries
// a fixed built-in pi/2 phase on top of the segment's offsets; its sign
// distinguishes the two handedness species.
inline Mat3c segment_hamiltonian(const PulseSegment& seg, Chirality chi) {
  const std::complex<double> i(0.0, 1.0);
  const double sgn = coupling_sign(chi);
  Mat3c h = Mat3c::Zero();
  h(0, 1) = 0.5 * seg.op * std::exp(i * seg.pp);
  h(0, 2) = 0.5 * sgn * seg.oq * std::exp(i * (0.5 * kPi + seg.pq));
  h(1, 2) = 0.5 * seg.os * std::exp(i * seg.ps);
  h(1, 0) = std::conj(h(0, 1));
  h(2, 0) = std::conj(h(0, 2));
  h(2, 1) = std::conj(h(1, 2));
  return h;
}

inline Mat3c segment_propagator_3lv(const PulseSegment& seg, Chirality chi) {
  const Mat3c h = segment_hamiltonian(seg, chi);
  Eigen::SelfAdjointEigenSolver<Mat3c> es(h);
  const std::complex<double> i(0.0, 1.0);
  Vec3c phases;
  for (int k = 0; k < 3; ++k)
    phases(k) = std::exp(-i * es.eigenvalues()(k) * seg.dt);
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

inline Mat3 propagator_bloch(const std::vector<PulseSegment>& segs, Chirality chi) {
  Mat3 r = Mat3::Identity();
  for (const auto& seg : segs) r = segment_rotation(seg, chi) * r;
  return r;
}

inline Mat2c propagator_2lv(const std::vector<PulseSegment>& segs, Chirality chi) {
  Mat2c u = Mat2c::Identity();
  for (const auto& seg : segs) u = segment_propagator_2lv(seg, chi) * u;
  return u;
}

inline Mat3c propagator_3lv(const std::vector<PulseSegment>& segs, Chirality chi) {
  Mat3c u = Mat3c::Identity();
  for (const auto& seg : segs) u = segment_propagator_3lv(seg, chi) * u;
  return u;
}

inline Vec3 propagate_bloch(const std::vector<PulseSegment>& segs, Chirality chi,
                            const Vec3& r0 = Vec3(0, 0, 1)) {
  Vec3 r = r0;
  for (const auto& seg : segs) r = segment_rotation(seg, chi) * r;
  return r;
}

inline Vec2c propagate_qubit(const std::vector<PulseSegment>& segs, Chirality chi,
                             const Vec2c& psi0 = Vec2c(1, 0)) {
  Vec2c psi = psi0;
  for (const auto& seg : segs) psi = segment_propagator_2lv(seg, chi) * psi;
  return psi;
}

inline Vec3c propagate_three(const std::vector<PulseSegment>& segs, Chirality chi,
                             const Vec3c& psi0 = Vec3c(1, 0, 0)) {
  Vec3c psi = psi0;
  for (const auto& seg : segs) psi = segment_propagator_3lv(seg, chi) * psi;
  return psi;
}

struct TwoLevelSample {
  double t;
  Vec2c psi;
};

// Two-level state history: states at every segment boundary plus
// samples_per_segment - 1 interior points per segment, all via exact
// in-segment propagators. The initial state must be normalized; violations
// raise instead of being silently renormalized.
inline std::vector<TwoLevelSample> propagate_schedule(const PulseSchedule& sched,
                                                      Chirality chi,
                                                      const Vec2c& initial,
                                                      int samples_per_segment = 64) {
  if (std::abs(initial.norm() - 1.0) > 1e-9)
    throw std::invalid_argument("propagate_schedule: initial state not normalized");
  std::vector<TwoLevelSample> out;
  out.push_back({0.0, initial});
  Vec2c psi = initial;
  double t = 0.0;
  for (const auto& seg : sched.segments) {
    const Vec3 b = field_vector(seg, chi);
    for (int k = 1; k <= samples_per_segment; ++k) {
      const double frac = static_cast<double>(k) / samples_per_segment;
      out.push_back({t + frac * seg.dt, su2_about(b, frac * seg.dt) * psi});
    }
    psi = out.back().psi;
    t += seg.dt;
    out.back().t = t;  // avoid accumulating rounding at the boundary
  }
  return out;
}

inline Vec3 bloch_from_amplitudes(const Vec2c& psi) {
  if (std::abs(psi.norm() - 1.0) > 1e-9)
    throw std::invalid_argument("bloch_from_amplitudes: state not normalized");
  const std::complex<double> cross = std::conj(psi(0)) * psi(1);
  return Vec3(2.0 * cross.real(), 2.0 * cross.imag(),
              std::norm(psi(0)) - std::norm(psi(1)));
}

// Coordinates used throughout: x = -Re c, y = Im b, z = Re a. Exact for
// real-field schedules (the state stays on {a real, b imaginary, c real});
// reported as-is otherwise.
inline Vec3 bloch_from_three(const Vec3c& psi) {
  return Vec3(-psi(2).real(), psi(1).imag(), psi(0).real());
}

// Contrast |x+^2 - x-^2| between the two final states.
inline double resolution_objective(const Vec2c& final_l, const Vec2c& final_r) {
  const double xl = bloch_from_amplitudes(final_l).x();
  const double xr = bloch_from_amplitudes(final_r).x();
  return std::abs(xl * xl - xr * xr);
}

// Contrast between the two handedness populations of the last level.
inline double objective_three(const PulseSchedule& sched) {
  const Vec3c pl = propagate_three(sched.segments, Chirality::Left);
  const Vec3c pr = propagate_three(sched.segments, Chirality::Right);
  return std::abs(std::norm(pl(2)) - std::norm(pr(2)));
}

// Same contrast computed on the reduced real dynamics; valid only when all
// phase offsets vanish.
inline double objective_two(const PulseSchedule& sched) {
  require(sched.real_fields(),
          "reduced objective requires zero phase offsets on every segment");
  const Vec3 rl = propagate_bloch(sched.segments, Chirality::Left);
  const Vec3 rr = propagate_bloch(sched.segments, Chirality::Right);
  return std::abs(rl.x() * rl.x() - rr.x() * rr.x());
}

struct BlochSample {
  double t;
  Vec3 r;
};

// Dense Bloch history with samples_per_segment points per segment (plus
// every boundary), using exact in-segment rotations.
inline std::vector<BlochSample> sample_bloch(const std::vector<PulseSegment>& segs,
                                             Chirality chi, int samples_per_segment,
                                             const Vec3& r0 = Vec3(0, 0, 1)) {
  std::vector<BlochSample> out;
  out.push_back({0.0, r0});
  Vec3 r = r0;
  double t = 0.0;
  for (const auto& seg : segs) {
    const Vec3 b = field_vector(seg, chi);
    for (int k = 1; k <= samples_per_segment; ++k) {
      const double frac = static_cast<double>(k) / samples_per_segment;
      out.push_back({t + frac * seg.dt, rotation_about(b, frac * seg.dt) * r});
    }
    r = rotation_about(b, seg.dt) * r;
    t += seg.dt;
    out.back() = {t, r};
  }
  return out;
}

struct ThreeLevelSample {
  double t;
  Vec3c psi;
};

inline std::vector<ThreeLevelSample> sample_three(
    const std::vector<PulseSegment>& segs, Chirality chi, int samples_per_segment,
    const Vec3c& psi0 = Vec3c(1, 0, 0)) {
  std::vector<ThreeLevelSample> out;
  out.push_back({0.0, psi0});
  Vec3c psi = psi0;
  double t = 0.0;
  for (const auto& seg : segs) {
    PulseSegment sub = seg;
    for (int k = 1; k <= samples_per_segment; ++k) {
      sub.dt = seg.dt * k / samples_per_segment;
      out.push_back({t + sub.dt, segment_propagator_3lv(sub, chi) * psi});
    }
    psi = out.back().psi;
    t += seg.dt;
    out.back().t = t;
  }
  return out;
}

// Integral of R(t) v dt over [0, dt], where R(t) is the rotation generated by
// the constant field b (angle |b| t / 2). Closed form via the axis
// decomposition of v; linear fallback for a vanishing field.
inline Vec3 rotating_integral(const Vec3& b, const Vec3& v, double dt) {
  const double w = 0.5 * b.norm();
  if (w < 1e-12) return v * dt;
  const Vec3 n = b.normalized();
  const double sw = std::sin(w * dt), cw = std::cos(w * dt);
  return v * (sw / w) + n.cross(v) * ((1.0 - cw) / w) +
         n * (n.dot(v) * (dt - sw / w));
}

}  // namespace chiralctl

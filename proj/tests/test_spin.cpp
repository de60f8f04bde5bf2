#include <catch2/catch_amalgamated.hpp>

#include "chiralctl/detail/rng.hpp"
#include "chiralctl/spin.hpp"

using namespace chiralctl;

namespace {

PulseSchedule random_schedule(detail::Rng& rng, bool with_phases) {
  PulseSchedule sched;
  sched.omega0 = 1.0;
  sched.omega1 = 2.0;
  const int n = 1 + rng.index(6);
  for (int i = 0; i < n; ++i) {
    PulseSegment seg;
    seg.dt = rng.uniform(0.01, 2.0);
    seg.op = rng.uniform(-1.0, 1.0);
    seg.oq = rng.uniform(-2.0, 2.0);
    seg.os = rng.uniform(-1.0, 1.0);
    if (with_phases) {
      seg.pp = rng.uniform(0.0, 2 * kPi);
      seg.pq = rng.uniform(0.0, 2 * kPi);
      seg.ps = rng.uniform(0.0, 2 * kPi);
    }
    sched.segments.push_back(seg);
  }
  return sched;
}

const std::complex<double> kI(0.0, 1.0);

Mat2c pauli_x() { return (Mat2c() << 0, 1, 1, 0).finished(); }
Mat2c pauli_y() { return (Mat2c() << 0, -kI, kI, 0).finished(); }
Mat2c pauli_z() { return (Mat2c() << 1, 0, 0, -1).finished(); }

}  // namespace

TEST_CASE("axis-angle propagator basics") {
  REQUIRE((axis_angle_propagator(Vec3(0, 0, 1), 0.0) - Mat2c::Identity()).norm() <
          1e-15);

  const double a = kPi / 8;
  Mat2c expect;
  expect << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  REQUIRE((axis_angle_propagator(Vec3(0, 1, 0), a) - expect).norm() < 1e-14);

  // the rotation that maps the initial pole onto the x-axis for the left
  // species: (1/2)(I + i sx - i sy + i sz)
  const double r3 = 1.0 / std::sqrt(3.0);
  const Mat2c u = axis_angle_propagator(Vec3(-r3, r3, -r3), kPi / 3);
  const Mat2c target =
      0.5 * (Mat2c::Identity() + kI * pauli_x() - kI * pauli_y() + kI * pauli_z());
  REQUIRE((u - target).norm() < 1e-14);

  REQUIRE_THROWS_AS(axis_angle_propagator(Vec3(0, 0, 2), 0.1),
                    std::invalid_argument);
}

TEST_CASE("segment propagators are unitary and compose") {
  detail::Rng rng(20260818);
  for (int trial = 0; trial < 1000; ++trial) {
    const PulseSchedule sched = random_schedule(rng, true);
    const Chirality chi = trial % 2 ? Chirality::Left : Chirality::Right;

    const Mat3c u3 = propagator_3lv(sched.segments, chi);
    REQUIRE((u3.adjoint() * u3 - Mat3c::Identity()).norm() < 1e-12);

    const Vec3c psi = propagate_three(sched.segments, chi);
    REQUIRE(std::abs(psi.norm() - 1.0) < 1e-12);

    // splitting the train anywhere gives the same end-to-end map
    const std::size_t cut = sched.segments.size() / 2;
    std::vector<PulseSegment> head(sched.segments.begin(),
                                   sched.segments.begin() + cut);
    std::vector<PulseSegment> tail(sched.segments.begin() + cut,
                                   sched.segments.end());
    const Mat3c split = propagator_3lv(tail, chi) * propagator_3lv(head, chi);
    REQUIRE((split - u3).norm() < 1e-12);
  }
}

TEST_CASE("bloch rotations are orthogonal with unit determinant") {
  detail::Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const PulseSchedule sched = random_schedule(rng, false);
    const Mat3 r = propagator_bloch(sched.segments, Chirality::Left);
    REQUIRE((r.transpose() * r - Mat3::Identity()).norm() < 1e-12);
    REQUIRE(std::abs(r.determinant() - 1.0) < 1e-12);
  }
}

TEST_CASE("two-level and three-level pictures agree on real fields") {
  detail::Rng rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    const PulseSchedule sched = random_schedule(rng, false);
    for (Chirality chi : {Chirality::Left, Chirality::Right}) {
      const Vec3 r_bloch = propagate_bloch(sched.segments, chi);
      const Vec3 r_qubit = bloch_from_amplitudes(propagate_qubit(sched.segments, chi));
      const Vec3 r_three = bloch_from_three(propagate_three(sched.segments, chi));
      REQUIRE((r_bloch - r_qubit).norm() < 1e-9);
      REQUIRE((r_bloch - r_three).norm() < 1e-9);
    }
    REQUIRE(std::abs(objective_two(sched) - objective_three(sched)) < 1e-9);
  }
}

TEST_CASE("chirality symmetry: flipping the q sign swaps the species") {
  detail::Rng rng(314);
  for (int trial = 0; trial < 50; ++trial) {
    const PulseSchedule sched = random_schedule(rng, true);
    PulseSchedule flipped = sched;
    for (auto& seg : flipped.segments) seg.oq = -seg.oq;
    REQUIRE((propagator_3lv(sched.segments, Chirality::Left) -
             propagator_3lv(flipped.segments, Chirality::Right))
                .norm() < 1e-12);
    REQUIRE((propagator_2lv(sched.segments, Chirality::Right) -
             propagator_2lv(flipped.segments, Chirality::Left))
                .norm() < 1e-12);
  }
}

TEST_CASE("reduced objective rejects phase offsets") {
  PulseSchedule sched;
  sched.segments.push_back({1.0, 1.0, 0.5, -1.0, 0.0, 0.3, 0.0});
  REQUIRE_THROWS_AS(objective_two(sched), std::domain_error);
}

TEST_CASE("bloch coordinates of reference amplitudes") {
  const double r2 = 1.0 / std::sqrt(2.0);
  REQUIRE((bloch_from_amplitudes(Vec2c(1, 0)) - Vec3(0, 0, 1)).norm() < 1e-15);
  REQUIRE((bloch_from_amplitudes(Vec2c(r2, r2)) - Vec3(1, 0, 0)).norm() < 1e-15);
  REQUIRE((bloch_from_amplitudes(Vec2c(r2, kI * r2)) - Vec3(0, 1, 0)).norm() <
          1e-15);
  REQUIRE_THROWS_AS(bloch_from_amplitudes(Vec2c(1, 1)), std::invalid_argument);

  // identical finals resolve nothing; x-axis vs meridian resolves fully
  REQUIRE(resolution_objective(Vec2c(r2, r2), Vec2c(r2, r2)) == 0.0);
  REQUIRE(std::abs(resolution_objective(Vec2c(r2, r2), Vec2c(1, 0)) - 1.0) <
          1e-15);
}

TEST_CASE("known single-segment rotations") {
  // field along z: angle |B| dt / 2
  PulseSegment seg{2 * kPi, 0.0, 0.0, 1.0};
  const Mat3 r = segment_rotation(seg, Chirality::Left);
  // angle pi about z: x -> -x, y -> -y
  REQUIRE((r * Vec3(1, 0, 0) + Vec3(1, 0, 0)).norm() < 1e-12);
  REQUIRE((r * Vec3(0, 0, 1) - Vec3(0, 0, 1)).norm() < 1e-12);

  // zero field: identity in every picture
  PulseSegment idle{1.7, 0.0, 0.0, 0.0};
  REQUIRE((segment_rotation(idle, Chirality::Left) - Mat3::Identity()).norm() <
          1e-15);
  REQUIRE((segment_propagator_2lv(idle, Chirality::Left) - Mat2c::Identity())
              .norm() < 1e-15);
  REQUIRE((segment_propagator_3lv(idle, Chirality::Left) - Mat3c::Identity())
              .norm() < 1e-12);

  // zero-duration segments are legal and act as identity
  PulseSegment instant{0.0, -1.0, 2.0, -1.0};
  REQUIRE((segment_propagator_3lv(instant, Chirality::Right) - Mat3c::Identity())
              .norm() < 1e-12);
}

TEST_CASE("handedness flips only the middle field component") {
  PulseSegment seg{0.9, 0.3, 0.7, -0.2};
  const Vec3 bl = field_vector(seg, Chirality::Left);
  const Vec3 br = field_vector(seg, Chirality::Right);
  REQUIRE(bl.x() == br.x());
  REQUIRE(bl.z() == br.z());
  REQUIRE(bl.y() == -br.y());
}

TEST_CASE("schedule trajectory sampling") {
  detail::Rng rng(7);
  const PulseSchedule sched = random_schedule(rng, false);

  const auto traj = propagate_schedule(sched, Chirality::Left, Vec2c(1, 0), 8);
  REQUIRE(traj.size() == 1 + 8 * sched.segments.size());
  REQUIRE(traj.front().t == 0.0);
  REQUIRE(std::abs(traj.back().t - sched.total_duration()) < 1e-12);
  const Vec2c direct = propagate_qubit(sched.segments, Chirality::Left);
  REQUIRE((traj.back().psi - direct).norm() < 1e-12);
  for (const auto& pt : traj) REQUIRE(std::abs(pt.psi.norm() - 1.0) < 1e-10);

  // empty schedule: initial state returned unchanged
  PulseSchedule empty;
  const auto none = propagate_schedule(empty, Chirality::Right, Vec2c(0, 1));
  REQUIRE(none.size() == 1);
  REQUIRE((none.front().psi - Vec2c(0, 1)).norm() == 0.0);

  REQUIRE_THROWS_AS(propagate_schedule(sched, Chirality::Left, Vec2c(1, 1)),
                    std::invalid_argument);

  const auto btraj = sample_bloch(sched.segments, Chirality::Left, 8);
  REQUIRE(btraj.size() == traj.size());
  const Vec3 bdirect = propagate_bloch(sched.segments, Chirality::Left);
  REQUIRE((btraj.back().r - bdirect).norm() < 1e-12);
  for (std::size_t i = 1; i < btraj.size(); ++i)
    REQUIRE(btraj[i].t > btraj[i - 1].t - 1e-15);
}

TEST_CASE("rotating integral matches numeric quadrature") {
  detail::Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec3 b(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
    const Vec3 v(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const double dt = rng.uniform(0.05, 3.0);

    // Simpson rule on a fine grid
    const int m = 2000;
    const double h = dt / m;
    Vec3 acc = Vec3::Zero();
    for (int k = 0; k <= m; ++k) {
      const double w = (k == 0 || k == m) ? 1.0 : (k % 2 ? 4.0 : 2.0);
      acc += w * (rotation_about(b, k * h) * v);
    }
    acc *= h / 3.0;

    const Vec3 closed = rotating_integral(b, v, dt);
    REQUIRE((closed - acc).norm() < 1e-9 * std::max(1.0, closed.norm()));
  }

  // vanishing field falls back to v * dt
  const Vec3 v(0.3, -0.2, 0.9);
  REQUIRE((rotating_integral(Vec3::Zero(), v, 1.3) - v * 1.3).norm() < 1e-15);
}

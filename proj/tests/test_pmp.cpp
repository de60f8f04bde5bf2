#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "chiralctl/analytic.hpp"
#include "chiralctl/detail/rng.hpp"
#include "chiralctl/pmp.hpp"

using namespace chiralctl;

namespace {

PulseSchedule random_real_schedule(detail::Rng& rng) {
  PulseSchedule sched;
  sched.omega0 = 1.0;
  sched.omega1 = 2.0;
  const int n = 1 + rng.index(5);
  for (int i = 0; i < n; ++i) {
    PulseSegment seg;
    seg.dt = rng.uniform(0.05, 1.5);
    seg.op = rng.uniform(-1.0, 1.0);
    seg.oq = rng.uniform(-2.0, 2.0);
    seg.os = rng.uniform(-1.0, 1.0);
    sched.segments.push_back(seg);
  }
  return sched;
}

}  // namespace

TEST_CASE("adjoint propagation is a rigid rotation") {
  detail::Rng rng(401);
  for (int trial = 0; trial < 20; ++trial) {
    const PulseSchedule sched = random_real_schedule(rng);
    Vec3 lam0(rng.normal(), rng.normal(), rng.normal());
    for (Chirality chi : {Chirality::Left, Chirality::Right}) {
      const auto lams = propagate_adjoint(sched, chi, lam0, 16);
      const auto rs = sample_bloch(sched.segments, chi, 16);
      REQUIRE(lams.size() == rs.size());
      for (std::size_t i = 0; i < lams.size(); ++i) {
        // rotations preserve the norm and the angle to the state
        CHECK(lams[i].lambda.norm() == Catch::Approx(lam0.norm()).epsilon(1e-12));
        CHECK(rs[i].r.dot(lams[i].lambda) ==
              Catch::Approx(rs[0].r.dot(lam0)).margin(1e-10));
      }
    }
  }

  PulseSchedule idle;
  idle.segments.push_back({1.7, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0});
  const auto lams = propagate_adjoint(idle, Chirality::Left, Vec3(0.3, -0.2, 0.9), 8);
  for (const auto& s : lams) CHECK((s.lambda - Vec3(0.3, -0.2, 0.9)).norm() < 1e-15);
}

TEST_CASE("switching vectors match independently propagated cross products") {
  detail::Rng rng(402);
  const int nsamp = 12;
  for (int trial = 0; trial < 20; ++trial) {
    const PulseSchedule sched = random_real_schedule(rng);
    AdjointPair adj0;
    adj0.lambda_plus = Vec3(rng.normal(), rng.normal(), rng.normal());
    adj0.lambda_minus = Vec3(rng.normal(), rng.normal(), rng.normal());
    const auto traj = switch_trajectory(sched, adj0, nsamp);
    REQUIRE(traj.size() == 1 + nsamp * sched.segments.size());

    Mat3 pre_p = Mat3::Identity(), pre_m = Mat3::Identity();
    std::size_t idx = 1;
    const Vec3 r0(0, 0, 1);
    for (const auto& seg : sched.segments) {
      const Vec3 bp = field_vector(seg, Chirality::Left);
      const Vec3 bm = field_vector(seg, Chirality::Right);
      for (int k = 1; k <= nsamp; ++k, ++idx) {
        const Mat3 qp = rotation_about(bp, k * seg.dt / nsamp) * pre_p;
        const Mat3 qm = rotation_about(bm, k * seg.dt / nsamp) * pre_m;
        const Vec3 lp = (qp * r0).cross(qp * adj0.lambda_plus);
        const Vec3 lm = (qm * r0).cross(qm * adj0.lambda_minus);
        CHECK((traj[idx].sw.S - (lp + lm)).norm() < 1e-9);
        CHECK((traj[idx].sw.D - (lp - lm)).norm() < 1e-9);
      }
      pre_p = rotation_about(bp, seg.dt) * pre_p;
      pre_m = rotation_about(bm, seg.dt) * pre_m;
    }
  }
}

TEST_CASE("switching vectors obey the sum/difference equations of motion") {
  PulseSchedule sched;
  sched.segments.push_back({2.0, 0.7, -1.3, 0.4, 0.0, 0.0, 0.0});
  AdjointPair adj0;
  adj0.lambda_plus = Vec3(0.4, -0.8, 0.33);
  adj0.lambda_minus = Vec3(-0.25, 0.6, 0.51);

  const int n = 4000;
  const auto traj = switch_trajectory(sched, adj0, n);
  const double h = sched.segments[0].dt / n;
  const double op = sched.segments[0].op;
  const double oq = sched.segments[0].oq;
  const double os = sched.segments[0].os;
  for (std::size_t i = 1; i + 1 < traj.size(); i += 37) {
    const Vec3 s = traj[i].sw.S;
    const Vec3 d = traj[i].sw.D;
    const Vec3 ds_fd = (traj[i + 1].sw.S - traj[i - 1].sw.S) / (2 * h);
    const Vec3 dd_fd = (traj[i + 1].sw.D - traj[i - 1].sw.D) / (2 * h);
    CHECK(ds_fd.x() == Catch::Approx(-0.5 * (os * s.y() - oq * d.z())).margin(1e-5));
    CHECK(ds_fd.y() == Catch::Approx(0.5 * (os * s.x() - op * s.z())).margin(1e-5));
    CHECK(ds_fd.z() == Catch::Approx(-0.5 * (oq * d.x() - op * s.y())).margin(1e-5));
    CHECK(dd_fd.x() == Catch::Approx(-0.5 * (os * d.y() - oq * s.z())).margin(1e-5));
    CHECK(dd_fd.y() == Catch::Approx(0.5 * (os * d.x() - op * d.z())).margin(1e-5));
    CHECK(dd_fd.z() == Catch::Approx(-0.5 * (oq * s.x() - op * d.y())).margin(1e-5));
  }
}

TEST_CASE("known adjoints make the constant protocol an extremal") {
  const AnalyticSolution sol = constant_schedule(1.0);
  AdjointPair adj;
  adj.lambda_plus = Vec3(2.0 / 3.0, 2.0 / 3.0, 0.0);
  adj.lambda_minus = Vec3(0.0, 2.0 / 3.0, 0.0);

  const auto traj = switch_trajectory(sol.schedule, adj, 256);
  const PulseSegment& seg = sol.schedule.segments[0];
  double min_margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < traj.size(); ++i) {
    CHECK(std::abs(control_hamiltonian(traj[i].sw, seg)) < 1e-9);
    if (i == 0 || i + 1 == traj.size()) continue;  // fns touch zero at t=0,T
    min_margin = std::min({min_margin, traj[i].sw.S.x() * -1.0,
                           traj[i].sw.D.y() * +1.0, traj[i].sw.S.z() * -1.0});
  }
  // controls sit strictly on the correct bounds in the interior
  CHECK(min_margin > 1e-3);

  // the suppressed species' adjoint ends in the x-only plane
  const auto lam_m = propagate_adjoint(sol.schedule, Chirality::Right,
                                       adj.lambda_minus, 4);
  CHECK(std::abs(lam_m.back().lambda.y()) < 1e-9);
  CHECK(std::abs(lam_m.back().lambda.z()) < 1e-9);
}

TEST_CASE("certificate converges on the constant protocol") {
  const AnalyticSolution sol = constant_schedule(1.0);
  const CertificateReport report = certificate_search(sol.schedule);
  CHECK(report.precondition_ok);
  CHECK(report.converged);
  CHECK(report.total_residual < 1e-5);
  CHECK(report.hc_residual < 1e-5);
  CHECK(report.transversality_residual < 1e-5);
  CHECK(report.singular_violations < 1e-5);
  CHECK(report.sign_violations == 0);
  CHECK(report.sign_margin > 0.0);

  // the reported adjoints must themselves reproduce a flat control
  // Hamiltonian, not just summarize one
  const auto traj = switch_trajectory(sol.schedule, report.found_adjoints, 64);
  for (const auto& sample : traj)
    CHECK(std::abs(control_hamiltonian(sample.sw, sol.schedule.segments[0])) < 1e-4);
}

TEST_CASE("certificate converges on both analytic branches") {
  SECTION("greater branch, s = 2") {
    const AnalyticSolution sol = schedule_greater(2.0, 1.0);
    const CertificateReport report = certificate_search(sol.schedule);
    CHECK(report.precondition_ok);
    CHECK(report.converged);
    CHECK(report.total_residual < 1e-5);
    // middle stage switches the y control off: its switching function must
    // vanish there
    CHECK(report.singular_violations < 1e-5);
    CHECK(report.sign_violations == 0);

    const auto traj = switch_trajectory(sol.schedule, report.found_adjoints, 64);
    for (const auto& sample : traj) {
      const double biggest =
          std::max({std::abs(sample.sw.S.x()), std::abs(sample.sw.D.y()),
                    std::abs(sample.sw.S.z())});
      CHECK(biggest > 1e-6);  // switching functions never vanish jointly
    }
  }
  SECTION("lower branch, s = 0.9") {
    const AnalyticSolution sol = schedule_lower(0.9, 1.0);
    const CertificateReport report = certificate_search(sol.schedule);
    CHECK(report.precondition_ok);
    CHECK(report.converged);
    CHECK(report.total_residual < 1e-5);
    CHECK(report.singular_violations < 1e-5);
    CHECK(report.sign_violations == 0);
  }
}

TEST_CASE("certificate reports precondition failures without throwing") {
  AnalyticSolution sol = schedule_greater(2.0, 1.0);

  SECTION("schedule that misses the targets") {
    sol.schedule.segments[1].dt *= 0.95;
    const CertificateReport report = certificate_search(sol.schedule);
    CHECK_FALSE(report.precondition_ok);
    CHECK_FALSE(report.converged);
    CHECK_FALSE(report.message.empty());
  }
  SECTION("terminal pair that disagrees with the simulation") {
    const CertificateReport report =
        certificate_search(sol.schedule, {Vec3(0, 1, 0), Vec3(0, 0, 1)});
    CHECK_FALSE(report.precondition_ok);
    CHECK_FALSE(report.converged);
  }
  SECTION("phase-bearing schedules are rejected outright") {
    sol.schedule.segments[0].pp = 0.3;
    CHECK_THROWS_AS(certificate_search(sol.schedule), std::domain_error);
  }
}

TEST_CASE("timing probe passes the analytic extremals") {
  for (double s : {2.0, 0.9}) {
    const AnalyticSolution sol = analytic_solution(s, 1.0);
    const ProbeReport report = local_optimality_probe(sol.schedule, 1e-3);
    INFO("s = " << s);
    CHECK(report.pass);
    CHECK(report.attempted == 6);
    // perturbing any stage leaves too few free durations to restore all
    // terminal constraints
    CHECK(report.solved == 0);
    CHECK(report.min_T == Catch::Approx(report.base_T));
  }

  const AnalyticSolution constant = constant_schedule(1.0);
  const ProbeReport report = local_optimality_probe(constant.schedule, 1e-3);
  CHECK(report.pass);
  CHECK(report.solved == 0);
}

TEST_CASE("timing probe rejects a slack four-stage schedule") {
  // same bang fields as the s = 2 extremal, but with a redundant fourth
  // stage: the feasible set is a curve, so time is not locally minimal
  std::vector<Vec3> fields = {Vec3(-1, 2, -1), Vec3(-1, 0, -1),
                              Vec3(-1, 2, -1), Vec3(-1, 0, -1)};
  std::vector<double> durations = {0.39481329, 0.85578014, 0.82191635,
                                   0.35681087};
  std::vector<int> all_free = {0, 1, 2, 3};
  REQUIRE(detail::refit_durations(fields, durations, all_free, 10.0));
  REQUIRE(detail::stage_residual(fields, durations).norm() < 1e-9);

  PulseSchedule sched;
  sched.omega0 = 1.0;
  sched.omega1 = 2.0;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    PulseSegment seg;
    seg.dt = durations[i];
    seg.op = fields[i].x();
    seg.oq = fields[i].y();
    seg.os = fields[i].z();
    sched.segments.push_back(seg);
  }

  const ProbeReport report = local_optimality_probe(sched, 1e-3);
  CHECK_FALSE(report.pass);
  CHECK(report.solved >= 1);
  CHECK(report.min_T < report.base_T - 1e-4);
}

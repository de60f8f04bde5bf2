#pragma once

#include <Eigen/Dense>
#include <vector>

#include "chiralctl/spin.hpp"

namespace chiralctl::detail {

// Terminal-constraint residual of a stage sequence: the target-reaching
// species must land exactly on the x-axis and the suppressed one on the
// yz-meridian, so c = (x+ - 1, y+, z+, x-).
inline Eigen::Vector4d stage_residual(const std::vector<Vec3>& fields,
                                      const std::vector<double>& durations) {
  Vec3 rp(0, 0, 1), rm(0, 0, 1);
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const Vec3 bp = fields[i];
    const Vec3 bm(fields[i].x(), -fields[i].y(), fields[i].z());
    rp = rotation_about(bp, durations[i]) * rp;
    rm = rotation_about(bm, durations[i]) * rm;
  }
  return Eigen::Vector4d(rp.x() - 1.0, rp.y(), rp.z(), rm.x());
}

// Exact Jacobian of the residual with respect to the free stage durations:
// d/dd [R(d) v] = (b/2) x (R(d) v), pushed through the later stages.
inline Eigen::MatrixXd stage_jacobian(const std::vector<Vec3>& fields,
                                      const std::vector<double>& durations,
                                      const std::vector<int>& free_idx) {
  const int n = static_cast<int>(fields.size());
  std::vector<Vec3> rp_end(n), rm_end(n);
  Vec3 rp(0, 0, 1), rm(0, 0, 1);
  for (int i = 0; i < n; ++i) {
    const Vec3 bp = fields[i];
    const Vec3 bm(fields[i].x(), -fields[i].y(), fields[i].z());
    rp = rotation_about(bp, durations[i]) * rp;
    rm = rotation_about(bm, durations[i]) * rm;
    rp_end[i] = rp;
    rm_end[i] = rm;
  }
  // suffix products of the rotations after each stage
  std::vector<Mat3> post_p(n), post_m(n);
  Mat3 accp = Mat3::Identity(), accm = Mat3::Identity();
  for (int i = n - 1; i >= 0; --i) {
    post_p[i] = accp;
    post_m[i] = accm;
    const Vec3 bp = fields[i];
    const Vec3 bm(fields[i].x(), -fields[i].y(), fields[i].z());
    accp = accp * rotation_about(bp, durations[i]);
    accm = accm * rotation_about(bm, durations[i]);
  }

  Eigen::MatrixXd jac(4, static_cast<int>(free_idx.size()));
  for (std::size_t k = 0; k < free_idx.size(); ++k) {
    const int j = free_idx[k];
    const Vec3 bp = fields[j];
    const Vec3 bm(fields[j].x(), -fields[j].y(), fields[j].z());
    const Vec3 tp = post_p[j] * (0.5 * bp.cross(rp_end[j]));
    const Vec3 tm = post_m[j] * (0.5 * bm.cross(rm_end[j]));
    jac(0, k) = tp.x();
    jac(1, k) = tp.y();
    jac(2, k) = tp.z();
    jac(3, k) = tm.x();
  }
  return jac;
}

// Levenberg-Marquardt refit of the free stage durations until the terminal
// constraints hold. Durations are clamped to [0, d_max]; returns true when
// the residual drops below tol.
inline bool refit_durations(const std::vector<Vec3>& fields,
                            std::vector<double>& durations,
                            const std::vector<int>& free_idx, double d_max,
                            double tol = 1e-11, int max_iters = 200) {
  if (free_idx.empty()) return stage_residual(fields, durations).norm() < tol;
  double mu = 1e-3;
  Eigen::Vector4d c = stage_residual(fields, durations);
  for (int it = 0; it < max_iters; ++it) {
    if (c.norm() < tol) return true;
    const Eigen::MatrixXd jac = stage_jacobian(fields, durations, free_idx);
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd jtc = jac.transpose() * c;
    bool accepted = false;
    for (int attempt = 0; attempt < 60; ++attempt) {
      const Eigen::MatrixXd damped =
          jtj + mu * Eigen::MatrixXd::Identity(jtj.rows(), jtj.cols());
      const Eigen::VectorXd step = damped.ldlt().solve(-jtc);
      std::vector<double> trial = durations;
      for (std::size_t k = 0; k < free_idx.size(); ++k)
        trial[free_idx[k]] =
            std::clamp(durations[free_idx[k]] + step(k), 0.0, d_max);
      const Eigen::Vector4d ctrial = stage_residual(fields, trial);
      if (ctrial.norm() < c.norm()) {
        durations = trial;
        c = ctrial;
        mu = std::max(mu / 3.0, 1e-14);
        accepted = true;
        break;
      }
      mu *= 2.0;
      if (mu > 1e14) return false;
    }
    if (!accepted) return false;
  }
  return c.norm() < tol;
}

}  // namespace chiralctl::detail

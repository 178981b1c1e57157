#pragma once

// Point-to-point ICP baseline: brute-force nearest neighbours and a
// closed-form SVD alignment per iteration.

#include <Eigen/Core>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <stdexcept>

#include "pcreg/cloud.hpp"
#include "pcreg/lie.hpp"
#include "pcreg/metrics.hpp"
#include "pcreg/result.hpp"

namespace pcreg::icp {

/// Least-squares rigid map taking rows of `from` onto matching rows of `to`.
[[nodiscard]] inline RigidTransform kabsch(const PointCloud& from, const PointCloud& to) {
  if (from.rows() != to.rows() || from.rows() == 0) {
    throw std::invalid_argument("kabsch: clouds must be non-empty and of equal size");
  }
  const Eigen::RowVector3d mf = from.colwise().mean();
  const Eigen::RowVector3d mt = to.colwise().mean();
  const Eigen::Matrix3d h = (from.rowwise() - mf).transpose() * (to.rowwise() - mt);
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  const Eigen::Matrix3d r = svd.matrixV() * d * svd.matrixU().transpose();
  return from_rotation_unchecked(r, mt.transpose() - r * mf.transpose());
}

struct IcpOptions {
  int max_iters = 50;
  /// Stop when the mean squared residual changes by less than this.
  double tolerance = 1e-10;
};

[[nodiscard]] inline RegistrationResult register_clouds(const PointCloud& source, const PointCloud& tmpl,
                                                        const IcpOptions& opts = {}) {
  require_valid_cloud(source, "source cloud");
  require_valid_cloud(tmpl, "template cloud");
  if (opts.max_iters < 1) throw std::invalid_argument("ICP max_iters must be >= 1");

  RegistrationResult result;
  RigidTransform g = RigidTransform::identity();
  PointCloud matched(source.rows(), 3);
  double prev_error = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= opts.max_iters; ++i) {
    const PointCloud moved = apply(g, source);
    double error = 0.0;
    for (Eigen::Index k = 0; k < moved.rows(); ++k) {
      const auto [j, d] = nearest_neighbor(tmpl, moved.row(k));
      matched.row(k) = tmpl.row(j);
      error += d;
    }
    error /= static_cast<double>(moved.rows());
    const RigidTransform step = kabsch(moved, matched);
    g = compose(step, g);
    result.iterations = i;
    result.twist_norms.push_back(error);  // ICP records the mean squared residual here
    result.transforms.push_back(g);
    if (error <= opts.tolerance || std::abs(prev_error - error) < opts.tolerance) {
      result.converged = true;
      break;
    }
    prev_error = error;
  }
  result.G = g;
  return result;
}

}  // namespace pcreg::icp

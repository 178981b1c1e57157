#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "pcreg/cloud.hpp"
#include "pcreg/lie.hpp"

namespace pcreg {

struct IsoError {
  double rotation_deg = 0.0;
  double translation = 0.0;
};

/// Rotation angle of R_est R_star^T in degrees and the translation distance.
[[nodiscard]] inline IsoError iso_error(const RigidTransform& estimate, const RigidTransform& truth) {
  const Eigen::Matrix3d d = estimate.rotation() * truth.rotation().transpose();
  // atan2 keeps full resolution near zero where acos of the trace does not.
  const double s = 0.5 * Eigen::Vector3d(d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1)).norm();
  const double c = 0.5 * (d.trace() - 1.0);
  return {std::atan2(s, c) * 180.0 / std::numbers::pi,
          (estimate.translation() - truth.translation()).norm()};
}

/// Index of the nearest row of `cloud` to `p` and its squared distance.
inline std::pair<Eigen::Index, double> nearest_neighbor(const PointCloud& cloud, const Eigen::RowVector3d& p) {
  Eigen::Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < cloud.rows(); ++j) {
    const double d = (cloud.row(j) - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return {best, best_d};
}

/// Symmetric mean of nearest-neighbour squared distances (brute force).
[[nodiscard]] inline double chamfer(const PointCloud& a, const PointCloud& b) {
  require_valid_cloud(a);
  require_valid_cloud(b);
  auto one_way = [](const PointCloud& from, const PointCloud& to) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < from.rows(); ++i) sum += nearest_neighbor(to, from.row(i)).second;
    return sum / static_cast<double>(from.rows());
  };
  return one_way(a, b) + one_way(b, a);
}

}  // namespace pcreg

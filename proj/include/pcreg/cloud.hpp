#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string>

namespace pcreg {

/// N x 3 array of point coordinates, one point per row.
using PointCloud = Eigen::Matrix<double, Eigen::Dynamic, 3>;

/// Global descriptor of a whole cloud.
using FeatureVector = Eigen::VectorXd;

inline void require_valid_cloud(const PointCloud& cloud, const char* what = "point cloud") {
  if (cloud.rows() == 0) {
    throw std::invalid_argument(std::string(what) + " is empty");
  }
  if (!cloud.allFinite()) {
    throw std::invalid_argument(std::string(what) + " has non-finite coordinates");
  }
}

inline Eigen::Vector3d centroid(const PointCloud& cloud) {
  return cloud.colwise().mean().transpose();
}

/// Zero-centers the cloud and scales it into the unit sphere.
inline PointCloud normalize_unit_sphere(const PointCloud& cloud) {
  require_valid_cloud(cloud);
  PointCloud out = cloud.rowwise() - centroid(cloud).transpose();
  const double radius = out.rowwise().norm().maxCoeff();
  if (radius > 0.0) out /= radius;
  return out;
}

}  // namespace pcreg

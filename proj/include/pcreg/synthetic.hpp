#pragma once

// Seeded synthetic data: primitive shapes and source/template pairs with a
// known ground-truth transform.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pcreg/cloud.hpp"
#include "pcreg/lie.hpp"

namespace pcreg::synthetic {

enum class Shape { sphere, box, table };

[[nodiscard]] inline Shape parse_shape(std::string_view s) {
  if (s == "sphere") return Shape::sphere;
  if (s == "box") return Shape::box;
  if (s == "table") return Shape::table;
  throw std::invalid_argument("unknown shape: " + std::string(s));
}

namespace detail {

// Uniform sample on the surface of an axis-aligned box centred at c.
inline Eigen::Vector3d box_surface(std::mt19937_64& rng, const Eigen::Vector3d& c,
                                   const Eigen::Vector3d& h) {
  const double axy = h.x() * h.y(), axz = h.x() * h.z(), ayz = h.y() * h.z();
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> pick(0.0, axy + axz + ayz);
  const double r = pick(rng);
  const double side = u(rng) < 0.0 ? -1.0 : 1.0;
  Eigen::Vector3d p(u(rng) * h.x(), u(rng) * h.y(), u(rng) * h.z());
  if (r < axy) {
    p.z() = side * h.z();
  } else if (r < axy + axz) {
    p.y() = side * h.y();
  } else {
    p.x() = side * h.x();
  }
  return c + p;
}

}  // namespace detail

/// n points on the surface of a primitive, normalized into the unit sphere.
/// The table (top plate, an off-centre shelf and four legs) has no rotational symmetry.
[[nodiscard]] inline PointCloud make_shape(Shape shape, Eigen::Index n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("make_shape: n must be >= 1");
  std::mt19937_64 rng(seed);
  PointCloud cloud(n, 3);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Vector3d p;
    switch (shape) {
      case Shape::sphere: {
        do {
          p = {normal(rng), normal(rng), normal(rng)};
        } while (p.norm() < 1e-12);
        p.normalize();
        break;
      }
      case Shape::box:
        p = detail::box_surface(rng, Eigen::Vector3d::Zero(), {0.8, 0.5, 0.3});
        break;
      case Shape::table: {
        const double r = unit(rng);
        if (r < 0.5) {
          p = detail::box_surface(rng, {0.0, 0.0, 0.4}, {0.8, 0.5, 0.03});
        } else if (r < 0.7) {
          p = detail::box_surface(rng, {0.25, 0.0, -0.1}, {0.45, 0.4, 0.02});
        } else {
          const int leg = static_cast<int>((r - 0.7) / 0.075);
          const double sx = (leg & 1) ? 0.7 : -0.7;
          const double sy = (leg & 2) ? 0.4 : -0.4;
          p = detail::box_surface(rng, {sx, sy, -0.05}, {0.04, 0.04, 0.42});
        }
        break;
      }
    }
    cloud.row(i) = p.transpose();
  }
  return normalize_unit_sphere(cloud);
}

/// n distinct rows chosen uniformly at random.
[[nodiscard]] inline PointCloud subsample(const PointCloud& base, Eigen::Index n, std::mt19937_64& rng) {
  if (n > base.rows()) throw std::invalid_argument("subsample: base has fewer points than requested");
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(base.rows()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  for (Eigen::Index i = 0; i < n; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, base.rows() - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  PointCloud out(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) out.row(i) = base.row(idx[static_cast<std::size_t>(i)]);
  return out;
}

/// Adds N(0, std) noise clipped to [-clip, clip] per coordinate.
inline void jitter(PointCloud& cloud, double std_dev, double clip, std::mt19937_64& rng) {
  if (!(std_dev > 0.0)) return;
  std::normal_distribution<double> noise(0.0, std_dev);
  for (Eigen::Index i = 0; i < cloud.rows(); ++i)
    for (Eigen::Index c = 0; c < 3; ++c) cloud(i, c) += std::clamp(noise(rng), -clip, clip);
}

struct PairSpec {
  Eigen::Index n = 1024;
  double theta_max_deg = 45.0;
  double t_max = 0.5;
  double r_std = 0.0;
  double r_clip = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (n < 4) throw std::invalid_argument("pair: N must be >= 4");
    if (!(theta_max_deg >= 0.0 && theta_max_deg <= 180.0)) {
      throw std::invalid_argument("pair: theta_max must be in [0, 180] degrees");
    }
    if (!(t_max >= 0.0)) throw std::invalid_argument("pair: t_max must be >= 0");
    if (!(r_std >= 0.0 && r_clip >= r_std)) {
      throw std::invalid_argument("pair: jitter needs r_clip >= r_std >= 0");
    }
  }
};

struct Pair {
  PointCloud source;
  PointCloud tmpl;
  RigidTransform truth;  // maps the source onto the template
};

/// Random G from Euler angles in [0, theta_max] and translation in [-t_max, t_max];
/// source = G . subsample, template = independent subsample, truth = G^-1.
[[nodiscard]] inline Pair gen_pair(const PairSpec& spec, const PointCloud& base) {
  spec.validate();
  require_valid_cloud(base, "base cloud");
  if (base.rows() < spec.n) throw std::invalid_argument("pair: base cloud has fewer than N points");
  std::mt19937_64 rng(spec.seed);
  const double theta = spec.theta_max_deg * std::numbers::pi / 180.0;
  std::uniform_real_distribution<double> angle(0.0, theta);
  std::uniform_real_distribution<double> shift(-spec.t_max, spec.t_max);
  const double ax = angle(rng), ay = angle(rng), az = angle(rng);
  const Eigen::Vector3d t(shift(rng), shift(rng), shift(rng));
  const RigidTransform g(rotation_z(az) * rotation_y(ay) * rotation_x(ax), t);

  Pair pair;
  pair.source = apply(g, subsample(base, spec.n, rng));
  pair.tmpl = subsample(base, spec.n, rng);
  jitter(pair.source, spec.r_std, spec.r_clip, rng);
  jitter(pair.tmpl, spec.r_std, spec.r_clip, rng);
  pair.truth = inverse(g);
  return pair;
}

}  // namespace pcreg::synthetic

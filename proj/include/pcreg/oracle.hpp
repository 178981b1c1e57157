#pragma once

// Analytic stand-ins for trained networks: a polynomial-moment global feature
// with an exact Jacobian, and a greedy expert for the ReAgent action heads.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "pcreg/actions.hpp"
#include "pcreg/cloud.hpp"
#include "pcreg/lie.hpp"

namespace pcreg::oracle {

/// Exponents (x, y, z) of one monomial.
using Monomial = std::array<int, 3>;

/// Monomials of degree 1..max_order. Within a degree they are listed as sorted
/// index tuples: x, y, z; xx, xy, xz, yy, yz, zz; xxx, xxy, xxz, xyy, xyz, xzz,
/// yyy, yyz, yzz, zzz.
[[nodiscard]] inline std::vector<Monomial> monomials(int max_order) {
  if (max_order < 1 || max_order > 3) {
    throw std::invalid_argument("moment feature order must be 1, 2 or 3");
  }
  std::vector<Monomial> out;
  for (int a = 0; a < 3; ++a) {
    Monomial m{};
    ++m[a];
    out.push_back(m);
  }
  if (max_order >= 2) {
    for (int a = 0; a < 3; ++a)
      for (int b = a; b < 3; ++b) {
        Monomial m{};
        ++m[a];
        ++m[b];
        out.push_back(m);
      }
  }
  if (max_order >= 3) {
    for (int a = 0; a < 3; ++a)
      for (int b = a; b < 3; ++b)
        for (int c = b; c < 3; ++c) {
          Monomial m{};
          ++m[a];
          ++m[b];
          ++m[c];
          out.push_back(m);
        }
  }
  return out;
}

struct MomentConfig {
  int max_order = 3;

  [[nodiscard]] Eigen::Index dimension() const {
    return static_cast<Eigen::Index>(monomials(max_order).size());
  }
};

namespace detail {

inline double ipow(double v, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= v;
  return r;
}

inline double eval(const Monomial& m, const Eigen::Vector3d& p) {
  return ipow(p.x(), m[0]) * ipow(p.y(), m[1]) * ipow(p.z(), m[2]);
}

inline Eigen::Vector3d gradient(const Monomial& m, const Eigen::Vector3d& p) {
  Eigen::Vector3d g;
  for (int axis = 0; axis < 3; ++axis) {
    if (m[axis] == 0) {
      g[axis] = 0.0;
      continue;
    }
    Monomial d = m;
    --d[axis];
    g[axis] = m[axis] * eval(d, p);
  }
  return g;
}

}  // namespace detail

/// Averages of the configured monomials over the cloud.
[[nodiscard]] inline FeatureVector moment_feature(const PointCloud& cloud, const MomentConfig& cfg) {
  require_valid_cloud(cloud);
  const auto mons = monomials(cfg.max_order);
  FeatureVector f = FeatureVector::Zero(static_cast<Eigen::Index>(mons.size()));
  for (Eigen::Index i = 0; i < cloud.rows(); ++i) {
    const Eigen::Vector3d p = cloud.row(i).transpose();
    for (std::size_t k = 0; k < mons.size(); ++k) f[static_cast<Eigen::Index>(k)] += detail::eval(mons[k], p);
  }
  return f / static_cast<double>(cloud.rows());
}

/// d phi(exp(-xi^) P) / d xi at xi = 0, column j for twist axis j.
[[nodiscard]] inline Eigen::MatrixXd moment_jacobian_analytic(const PointCloud& cloud,
                                                              const MomentConfig& cfg) {
  require_valid_cloud(cloud);
  const auto mons = monomials(cfg.max_order);
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(mons.size()), 6);
  for (Eigen::Index i = 0; i < cloud.rows(); ++i) {
    const Eigen::Vector3d p = cloud.row(i).transpose();
    // Velocity of p under e_j^: e_j x p for rotations, e_j for translations.
    Eigen::Matrix<double, 3, 6> c;
    for (int axis = 0; axis < 3; ++axis) {
      c.col(axis) = Eigen::Vector3d::Unit(axis).cross(p);
      c.col(axis + 3) = Eigen::Vector3d::Unit(axis);
    }
    for (std::size_t k = 0; k < mons.size(); ++k) {
      j.row(static_cast<Eigen::Index>(k)) -= detail::gradient(mons[k], p).transpose() * c;
    }
  }
  return j / static_cast<double>(cloud.rows());
}

class MomentExtractor {
 public:
  explicit MomentExtractor(MomentConfig cfg = {}) : cfg_(cfg) { (void)cfg_.dimension(); }

  [[nodiscard]] FeatureVector phi(const PointCloud& cloud, const RigidTransform& g,
                                  const ApplyMode& mode) const {
    return moment_feature(apply(g, cloud, mode), cfg_);
  }

  [[nodiscard]] const MomentConfig& config() const { return cfg_; }

 private:
  MomentConfig cfg_;
};

/// Angles (a, b, c) with R = Rx(a) Ry(b) Rz(c).
[[nodiscard]] inline Eigen::Vector3d euler_xyz(const Eigen::Matrix3d& r) {
  const double sb = std::clamp(r(0, 2), -1.0, 1.0);
  return {std::atan2(-r(1, 2), r(2, 2)), std::asin(sb), std::atan2(-r(0, 1), r(0, 0))};
}

enum class Head { translation, rotation };

/// Per-axis residual the expert tries to remove. Both transforms are in the
/// disentangled parameterization used by the ReAgent update.
[[nodiscard]] inline Eigen::Vector3d expert_residual(const RigidTransform& current,
                                                     const RigidTransform& target, Head head) {
  if (head == Head::translation) return target.translation() - current.translation();
  return euler_xyz(target.rotation() * current.rotation().transpose());
}

/// Label whose step best matches `residual`; ties go to the label nearer N_act.
[[nodiscard]] inline int best_label(double residual,
                                    const reagent::ActionTable& table = reagent::ActionTable::standard()) {
  constexpr double kTieSlack = 1e-12;
  int best = reagent::kActionHalfWidth;
  double best_err = std::abs(residual);
  for (int k = 1; k <= reagent::kActionHalfWidth; ++k) {
    for (int label : {reagent::kActionHalfWidth - k, reagent::kActionHalfWidth + k}) {
      const double err = std::abs(residual - table.step(label));
      if (err < best_err - kTieSlack) {
        best = label;
        best_err = err;
      }
    }
  }
  return best;
}

[[nodiscard]] inline reagent::Labels expert_action(
    const RigidTransform& current, const RigidTransform& target, Head head,
    const reagent::ActionTable& table = reagent::ActionTable::standard()) {
  const Eigen::Vector3d r = expert_residual(current, target, head);
  return {best_label(r.x(), table), best_label(r.y(), table), best_label(r.z(), table)};
}

}  // namespace pcreg::oracle

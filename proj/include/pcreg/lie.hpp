#pragma once

// SE(3) / SO(3) helpers: twists, the exponential map, composition and the
// two ways a transform can be applied to a cloud.

#include <Eigen/Core>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pcreg/cloud.hpp"

namespace pcreg {

using Vector6d = Eigen::Matrix<double, 6, 1>;

/// Below this rotation angle the Rodrigues / left-Jacobian coefficients switch
/// to their Taylor expansions.
inline constexpr double kSmallAngle = 1e-6;

/// Number of chained products after which a rotation is projected back onto SO(3).
inline constexpr int kReorthonormalizeAfter = 50;

[[nodiscard]] inline Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  // clang-format off
  s <<  0.0,   -v.z(),  v.y(),
        v.z(),  0.0,   -v.x(),
       -v.y(),  v.x(),  0.0;
  // clang-format on
  return s;
}

/// Element of se(3): rotational part first, translational part second.
struct Twist {
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();
  Eigen::Vector3d rho = Eigen::Vector3d::Zero();

  [[nodiscard]] static Twist from_vector(const Vector6d& v) {
    return Twist{v.head<3>(), v.tail<3>()};
  }
  [[nodiscard]] Vector6d to_vector() const {
    Vector6d v;
    v << omega, rho;
    return v;
  }
  [[nodiscard]] double norm() const { return to_vector().norm(); }
  [[nodiscard]] bool all_finite() const { return omega.allFinite() && rho.allFinite(); }
};

/// Projects an arbitrary 3x3 matrix onto the closest rotation (Frobenius sense).
[[nodiscard]] inline Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

[[nodiscard]] inline bool is_rotation(const Eigen::Matrix3d& r, double tol = 1e-6) {
  const Eigen::Matrix3d gram = r.transpose() * r;
  return ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= tol) &&
         std::abs(r.determinant() - 1.0) <= tol;
}

/// Rigid transform G = [R | t]. Construction from user data checks that R is a
/// proper rotation; products track how many multiplications produced them.
class RigidTransform {
 public:
  RigidTransform() = default;

  RigidTransform(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
      : rotation_(rotation), translation_(translation) {
    if (!rotation.allFinite() || !translation.allFinite()) {
      throw std::invalid_argument("RigidTransform: non-finite entries");
    }
    if (!is_rotation(rotation)) {
      throw std::invalid_argument("RigidTransform: matrix is not a proper rotation");
    }
  }

  [[nodiscard]] static RigidTransform identity() { return {}; }

  [[nodiscard]] static RigidTransform from_translation(const Eigen::Vector3d& t) {
    return RigidTransform(Eigen::Matrix3d::Identity(), t);
  }

  [[nodiscard]] const Eigen::Matrix3d& rotation() const { return rotation_; }
  [[nodiscard]] const Eigen::Vector3d& translation() const { return translation_; }
  [[nodiscard]] int chain_length() const { return chain_; }

  /// Same rotation (and chain count), different translation.
  [[nodiscard]] RigidTransform with_translation(const Eigen::Vector3d& t) const {
    if (!t.allFinite()) throw std::invalid_argument("RigidTransform: non-finite translation");
    RigidTransform out = *this;
    out.translation_ = t;
    return out;
  }

  [[nodiscard]] Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation_;
    m.topRightCorner<3, 1>() = translation_;
    return m;
  }

  [[nodiscard]] Eigen::Vector3d operator*(const Eigen::Vector3d& p) const {
    return rotation_ * p + translation_;
  }

  [[nodiscard]] bool is_approx(const RigidTransform& other, double tol) const {
    return (rotation_ - other.rotation_).cwiseAbs().maxCoeff() <= tol &&
           (translation_ - other.translation_).cwiseAbs().maxCoeff() <= tol;
  }

 private:
  struct Unchecked {};
  RigidTransform(Unchecked, const Eigen::Matrix3d& r, const Eigen::Vector3d& t, int chain)
      : rotation_(r), translation_(t), chain_(chain) {}

  friend RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
  friend RigidTransform inverse(const RigidTransform& g);
  friend RigidTransform exp_se3(const Twist& xi);
  friend RigidTransform from_rotation_unchecked(const Eigen::Matrix3d& r,
                                                const Eigen::Vector3d& t);

  Eigen::Matrix3d rotation_ = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation_ = Eigen::Vector3d::Zero();
  int chain_ = 0;
};

/// Builds a transform from a rotation the caller guarantees to be in SO(3)
/// up to rounding; it is projected once to make that exact.
[[nodiscard]] inline RigidTransform from_rotation_unchecked(const Eigen::Matrix3d& r,
                                                            const Eigen::Vector3d& t) {
  return RigidTransform(RigidTransform::Unchecked{}, nearest_rotation(r), t, 0);
}

/// Hat operator R^6 -> se(3) as a 4x4 matrix.
[[nodiscard]] inline Eigen::Matrix4d wedge(const Twist& xi) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
  m.topLeftCorner<3, 3>() = skew(xi.omega);
  m.topRightCorner<3, 1>() = xi.rho;
  return m;
}

namespace detail {

// Coefficients of R = I + a K + b K^2 and J_l = I + b K + c K^2, K = skew(omega).
struct RodriguesCoefficients {
  double a, b, c;
};

inline RodriguesCoefficients rodrigues_coefficients(double theta) {
  const double t2 = theta * theta;
  if (theta < kSmallAngle) {
    return {1.0 - t2 / 6.0, 0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0};
  }
  const double s = std::sin(theta);
  const double h = std::sin(0.5 * theta);
  // 2 sin^2(theta / 2) avoids the cancellation in 1 - cos(theta) at small angles.
  return {s / theta, 2.0 * h * h / t2, (theta - s) / (t2 * theta)};
}

}  // namespace detail

[[nodiscard]] inline Eigen::Matrix3d exp_so3(const Eigen::Vector3d& omega) {
  const auto k = detail::rodrigues_coefficients(omega.norm());
  const Eigen::Matrix3d w = skew(omega);
  return Eigen::Matrix3d::Identity() + k.a * w + k.b * w * w;
}

/// Left Jacobian of SO(3).
[[nodiscard]] inline Eigen::Matrix3d left_jacobian(const Eigen::Vector3d& omega) {
  const auto k = detail::rodrigues_coefficients(omega.norm());
  const Eigen::Matrix3d w = skew(omega);
  return Eigen::Matrix3d::Identity() + k.b * w + k.c * w * w;
}

/// exp: se(3) -> SE(3). R by Rodrigues' formula, t = J_l(omega) rho.
[[nodiscard]] inline RigidTransform exp_se3(const Twist& xi) {
  const auto k = detail::rodrigues_coefficients(xi.omega.norm());
  const Eigen::Matrix3d w = skew(xi.omega);
  const Eigen::Matrix3d w2 = w * w;
  const Eigen::Matrix3d r = Eigen::Matrix3d::Identity() + k.a * w + k.b * w2;
  const Eigen::Matrix3d jl = Eigen::Matrix3d::Identity() + k.b * w + k.c * w2;
  return RigidTransform(RigidTransform::Unchecked{}, r, jl * xi.rho, 0);
}

/// a * b: applies b first, then a.
[[nodiscard]] inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  Eigen::Matrix3d r = a.rotation_ * b.rotation_;
  int chain = std::max(a.chain_, b.chain_) + 1;
  if (chain > kReorthonormalizeAfter) {
    r = nearest_rotation(r);
    chain = 0;
  }
  return RigidTransform(RigidTransform::Unchecked{}, r,
                        a.rotation_ * b.translation_ + a.translation_, chain);
}

[[nodiscard]] inline RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
  return compose(a, b);
}

[[nodiscard]] inline RigidTransform inverse(const RigidTransform& g) {
  const Eigen::Matrix3d rt = g.rotation_.transpose();
  return RigidTransform(RigidTransform::Unchecked{}, rt, -rt * g.translation_, g.chain_);
}

[[nodiscard]] inline Eigen::Matrix3d rotation_x(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Eigen::Matrix3d r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}

[[nodiscard]] inline Eigen::Matrix3d rotation_y(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Eigen::Matrix3d r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}

[[nodiscard]] inline Eigen::Matrix3d rotation_z(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Eigen::Matrix3d r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

/// How a transform acts on a cloud. Disentangled mode rotates about the
/// supplied centre: p -> R (p - mu) + mu + t.
struct ApplyMode {
  enum class Kind { standard, disentangled };
  Kind kind = Kind::standard;
  Eigen::Vector3d mu = Eigen::Vector3d::Zero();

  [[nodiscard]] static ApplyMode standard() { return {}; }
  [[nodiscard]] static ApplyMode disentangled(const Eigen::Vector3d& mu) {
    return {Kind::disentangled, mu};
  }
  /// Effective translation of the equivalent standard-form map.
  [[nodiscard]] Eigen::Vector3d effective_translation(const RigidTransform& g) const {
    if (kind == Kind::standard) return g.translation();
    return g.translation() + mu - g.rotation() * mu;
  }
};

/// Transforms rows [begin, begin + count) of `cloud` into the first `count` rows of `out`,
/// growing `out` only if it has fewer rows.
inline void apply_rows(const RigidTransform& g, const PointCloud& cloud, const ApplyMode& mode,
                       Eigen::Index begin, Eigen::Index count, PointCloud& out) {
  const Eigen::Vector3d t = mode.effective_translation(g);
  const Eigen::Matrix3d& r = g.rotation();
  if (out.rows() < count) out.resize(count, 3);
  for (Eigen::Index i = 0; i < count; ++i) {
    const Eigen::Vector3d p = cloud.row(begin + i).transpose();
    out.row(i) = (r * p + t).transpose();
  }
}

[[nodiscard]] inline PointCloud apply(const RigidTransform& g, const PointCloud& cloud,
                                      const ApplyMode& mode = ApplyMode::standard()) {
  PointCloud out(cloud.rows(), 3);
  apply_rows(g, cloud, mode, 0, cloud.rows(), out);
  return out;
}

enum class Sign { plus, minus };

/// First-order perturbation I +/- step * e_j^ along twist axis j in 1..6,
/// with the rotation block projected onto SO(3).
[[nodiscard]] inline RigidTransform perturbation(int axis, double step, Sign sign) {
  if (axis < 1 || axis > 6) {
    throw std::invalid_argument("perturbation: axis must be in 1..6");
  }
  if (!(step > 0.0)) {
    throw std::invalid_argument("perturbation: step must be positive");
  }
  const double s = sign == Sign::plus ? step : -step;
  Vector6d e = Vector6d::Zero();
  e(axis - 1) = s;
  const Eigen::Matrix4d m = Eigen::Matrix4d::Identity() + wedge(Twist::from_vector(e));
  return from_rotation_unchecked(m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>());
}

}  // namespace pcreg

#pragma once

// Inverse-compositional Lucas-Kanade on global features: the Jacobian of the
// template feature is built once by finite differences, then reused.

#include <Eigen/Core>
#include <Eigen/LU>

#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "pcreg/cloud.hpp"
#include "pcreg/extractor.hpp"
#include "pcreg/lie.hpp"
#include "pcreg/result.hpp"

namespace pcreg::pointlk {

enum class JacobianMethod { forward, backward, central, five_point };

[[nodiscard]] inline std::string_view to_string(JacobianMethod m) {
  switch (m) {
    case JacobianMethod::forward: return "forward";
    case JacobianMethod::backward: return "backward";
    case JacobianMethod::central: return "central";
    case JacobianMethod::five_point: return "five_point";
  }
  return "?";
}

[[nodiscard]] inline JacobianMethod parse_jacobian_method(std::string_view s) {
  if (s == "forward") return JacobianMethod::forward;
  if (s == "backward") return JacobianMethod::backward;
  if (s == "central") return JacobianMethod::central;
  if (s == "five_point") return JacobianMethod::five_point;
  throw std::invalid_argument("unknown Jacobian method: " + std::string(s));
}

/// Feature extractions needed for one Jacobian, excluding phi(P_T) itself.
[[nodiscard]] constexpr int jacobian_feature_calls(JacobianMethod m) {
  switch (m) {
    case JacobianMethod::forward:
    case JacobianMethod::backward: return 6;
    case JacobianMethod::central: return 12;
    case JacobianMethod::five_point: return 24;
  }
  return 0;
}

class SingularJacobianError : public std::runtime_error {
 public:
  SingularJacobianError(const std::string& what, double relative_det)
      : std::runtime_error(what), relative_det_(relative_det) {}
  [[nodiscard]] double relative_determinant() const { return relative_det_; }

 private:
  double relative_det_;
};

class NonFiniteFeatureError : public std::runtime_error {
 public:
  NonFiniteFeatureError(const std::string& what, int iteration)
      : std::runtime_error(what), iteration_(iteration) {}
  /// 0 for the template feature or the Jacobian, otherwise the LK iteration.
  [[nodiscard]] int iteration() const { return iteration_; }

 private:
  int iteration_;
};

namespace detail {

template <FeatureExtractor E>
FeatureVector perturbed(const PointCloud& tmpl, const E& ex, int axis, double step, Sign sign) {
  return ex.phi(tmpl, perturbation(axis, step, sign), ApplyMode::standard());
}

}  // namespace detail

/// K x 6 estimate of d phi(exp(-xi^) P_T) / d xi. `template_feature` is phi(P_T),
/// shared with the caller so one-sided methods need only six extra features.
template <FeatureExtractor E>
[[nodiscard]] Eigen::MatrixXd numerical_jacobian(const PointCloud& tmpl, const E& ex,
                                                 JacobianMethod method, const Vector6d& steps,
                                                 const FeatureVector& template_feature) {
  if (!(steps.array() > 0.0).all()) {
    throw std::invalid_argument("numerical_jacobian: steps must be positive");
  }
  using detail::perturbed;
  Eigen::MatrixXd j(template_feature.size(), 6);
  for (int axis = 1; axis <= 6; ++axis) {
    const double t = steps[axis - 1];
    FeatureVector col;
    switch (method) {
      case JacobianMethod::backward:
        col = (perturbed(tmpl, ex, axis, t, Sign::minus) - template_feature) / t;
        break;
      case JacobianMethod::forward:
        col = (template_feature - perturbed(tmpl, ex, axis, t, Sign::plus)) / t;
        break;
      case JacobianMethod::central:
        col = (perturbed(tmpl, ex, axis, t, Sign::minus) -
               perturbed(tmpl, ex, axis, t, Sign::plus)) / (2.0 * t);
        break;
      case JacobianMethod::five_point:
        col = (-perturbed(tmpl, ex, axis, 2.0 * t, Sign::minus) +
               8.0 * perturbed(tmpl, ex, axis, t, Sign::minus) -
               8.0 * perturbed(tmpl, ex, axis, t, Sign::plus) +
               perturbed(tmpl, ex, axis, 2.0 * t, Sign::plus)) / (12.0 * t);
        break;
    }
    if (col.size() != j.rows()) {
      throw std::invalid_argument("numerical_jacobian: feature dimension changed");
    }
    j.col(axis - 1) = col;
  }
  return j;
}

template <FeatureExtractor E>
[[nodiscard]] Eigen::MatrixXd numerical_jacobian(const PointCloud& tmpl, const E& ex,
                                                 JacobianMethod method, const Vector6d& steps) {
  return numerical_jacobian(tmpl, ex, method, steps,
                            ex.phi(tmpl, RigidTransform::identity(), ApplyMode::standard()));
}

namespace detail {

inline Eigen::Matrix3d adjugate(const Eigen::Matrix3d& m) {
  Eigen::Matrix3d a;
  a(0, 0) = m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1);
  a(0, 1) = m(0, 2) * m(2, 1) - m(0, 1) * m(2, 2);
  a(0, 2) = m(0, 1) * m(1, 2) - m(0, 2) * m(1, 1);
  a(1, 0) = m(1, 2) * m(2, 0) - m(1, 0) * m(2, 2);
  a(1, 1) = m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0);
  a(1, 2) = m(0, 2) * m(1, 0) - m(0, 0) * m(1, 2);
  a(2, 0) = m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0);
  a(2, 1) = m(0, 1) * m(2, 0) - m(0, 0) * m(2, 1);
  a(2, 2) = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  return a;
}

/// |det M| / prod ||row_i of ref||. With ref = M this lies in [0, 1] by Hadamard's
/// inequality; a Schur complement is measured against the block it was derived from,
/// since its own rows may be pure rounding noise.
inline double relative_determinant(const Eigen::Matrix3d& ref, double det) {
  const double scale = ref.row(0).norm() * ref.row(1).norm() * ref.row(2).norm();
  if (!(scale > 0.0)) return 0.0;
  return std::abs(det) / scale;
}

inline Eigen::Matrix3d inverse_by_adjugate(const Eigen::Matrix3d& m, const Eigen::Matrix3d& ref,
                                           const char* block) {
  constexpr double kSingular = 1e-12;
  const Eigen::Matrix3d adj = adjugate(m);
  const double det = m.row(0).dot(adj.col(0));
  const double rel = relative_determinant(ref, det);
  if (!(rel >= kSingular) || !std::isfinite(det)) {
    std::ostringstream os;
    os << "singular Jacobian: block " << block << " has relative determinant " << rel;
    throw SingularJacobianError(os.str(), rel);
  }
  return adj / det;
}

}  // namespace detail

struct PinvOptions {
  /// Adds 1e-9 * trace(J^T J) to the diagonal before inverting.
  bool ridge = false;
};

/// (J^T J)^-1 J^T via the 2x2 block inverse of J^T J with 3x3 adjugates.
[[nodiscard]] inline Eigen::MatrixXd pinv6(const Eigen::MatrixXd& j, PinvOptions opts = {}) {
  if (j.cols() != 6) throw std::invalid_argument("pinv6: J must have 6 columns");
  if (j.rows() < 6) throw std::invalid_argument("pinv6: J needs at least 6 rows");
  if (!j.allFinite()) throw SingularJacobianError("singular Jacobian: non-finite entries", 0.0);
  Eigen::Matrix<double, 6, 6> h = j.transpose() * j;
  if (opts.ridge) h.diagonal().array() += 1e-9 * h.trace();
  const Eigen::Matrix3d a = h.topLeftCorner<3, 3>();
  const Eigen::Matrix3d b = h.topRightCorner<3, 3>();
  const Eigen::Matrix3d d = h.bottomRightCorner<3, 3>();

  const Eigen::Matrix3d a_inv = detail::inverse_by_adjugate(a, a, "A");
  const Eigen::Matrix3d a_inv_b = a_inv * b;
  const Eigen::Matrix3d schur = d - b.transpose() * a_inv_b;
  const Eigen::Matrix3d s_inv = detail::inverse_by_adjugate(schur, d, "S");

  Eigen::Matrix<double, 6, 6> h_inv;
  h_inv.topRightCorner<3, 3>() = -a_inv_b * s_inv;
  h_inv.bottomLeftCorner<3, 3>() = h_inv.topRightCorner<3, 3>().transpose();
  h_inv.topLeftCorner<3, 3>() = a_inv - h_inv.topRightCorner<3, 3>() * a_inv_b.transpose();
  h_inv.bottomRightCorner<3, 3>() = s_inv;
  return h_inv * j.transpose();
}

struct JacobianBundle {
  Eigen::MatrixXd J;
  Eigen::MatrixXd Jdag;
  JacobianMethod method = JacobianMethod::central;
  Vector6d steps = Vector6d::Constant(0.01);
};

struct LkOptions {
  int max_iters = 20;
  double epsilon = 1e-7;
  Vector6d steps = Vector6d::Constant(0.01);
  JacobianMethod method = JacobianMethod::central;
  PinvOptions pinv{};

  void validate() const {
    if (max_iters < 1) throw std::invalid_argument("LK max_iters must be >= 1");
    if (!(epsilon > 0.0)) throw std::invalid_argument("LK epsilon must be positive");
    if (!(steps.array() > 0.0).all()) throw std::invalid_argument("LK steps must be positive");
  }
};

/// Registration result plus the Jacobian that produced it.
struct LkResult : RegistrationResult {
  JacobianBundle jacobian;
};

template <FeatureExtractor E>
[[nodiscard]] LkResult register_clouds(const PointCloud& source, const PointCloud& tmpl, const E& ex,
                                       const LkOptions& opts = {}) {
  opts.validate();
  require_valid_cloud(source, "source cloud");
  require_valid_cloud(tmpl, "template cloud");

  const FeatureVector phi_t = ex.phi(tmpl, RigidTransform::identity(), ApplyMode::standard());
  if (!phi_t.allFinite()) throw NonFiniteFeatureError("template feature is not finite", 0);

  LkResult result;
  result.jacobian.method = opts.method;
  result.jacobian.steps = opts.steps;
  result.jacobian.J = numerical_jacobian(tmpl, ex, opts.method, opts.steps, phi_t);
  if (!result.jacobian.J.allFinite()) throw NonFiniteFeatureError("Jacobian is not finite", 0);
  result.jacobian.Jdag = pinv6(result.jacobian.J, opts.pinv);

  RigidTransform g = RigidTransform::identity();
  for (int i = 1; i <= opts.max_iters; ++i) {
    const FeatureVector phi = ex.phi(source, g, ApplyMode::standard());
    if (!phi.allFinite()) {
      throw NonFiniteFeatureError("source feature is not finite at iteration " + std::to_string(i), i);
    }
    const Vector6d dxi = result.jacobian.Jdag * (phi - phi_t);
    g = compose(exp_se3(Twist::from_vector(dxi)), g);
    const double norm = dxi.norm();
    result.iterations = i;
    result.twist_norms.push_back(norm);
    result.transforms.push_back(g);
    if (norm < opts.epsilon) {
      result.converged = true;
      break;
    }
  }
  result.G = g;
  return result;
}

}  // namespace pcreg::pointlk

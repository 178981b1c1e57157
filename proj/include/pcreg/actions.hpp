#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "pcreg/lie.hpp"

namespace pcreg::reagent {

inline constexpr int kActionHalfWidth = 5;  // N_act
inline constexpr int kNumActions = 2 * kActionHalfWidth + 1;

using Labels = std::array<int, 3>;

inline constexpr Labels kNoOp{kActionHalfWidth, kActionHalfWidth, kActionHalfWidth};

/// Discrete step sizes T(a): 0 at a = N_act, +/- 3^(|a - N_act| - 1) / 300 elsewhere,
/// with cached cos/sin for rotation steps.
class ActionTable {
 public:
  ActionTable() {
    for (int a = 0; a < kNumActions; ++a) {
      const int k = a - kActionHalfWidth;
      double step = 0.0;
      if (k != 0) step = (k > 0 ? 1.0 : -1.0) * std::pow(3.0, std::abs(k) - 1) / 300.0;
      steps_[a] = step;
      cos_[a] = std::cos(step);
      sin_[a] = std::sin(step);
    }
  }

  [[nodiscard]] static const ActionTable& standard() {
    static const ActionTable table;
    return table;
  }

  [[nodiscard]] double step(int label) const { return steps_[checked(label)]; }

  /// Rx(T(a_x)) Ry(T(a_y)) Rz(T(a_z)) built from the cached cos/sin.
  [[nodiscard]] Eigen::Matrix3d rotation(const Labels& labels) const {
    const auto ix = checked(labels[0]), iy = checked(labels[1]), iz = checked(labels[2]);
    Eigen::Matrix3d rx, ry, rz;
    rx << 1, 0, 0, 0, cos_[ix], -sin_[ix], 0, sin_[ix], cos_[ix];
    ry << cos_[iy], 0, sin_[iy], 0, 1, 0, -sin_[iy], 0, cos_[iy];
    rz << cos_[iz], -sin_[iz], 0, sin_[iz], cos_[iz], 0, 0, 0, 1;
    return rx * ry * rz;
  }

  [[nodiscard]] Eigen::Vector3d translation(const Labels& labels) const {
    return {step(labels[0]), step(labels[1]), step(labels[2])};
  }

 private:
  static std::size_t checked(int label) {
    if (label < 0 || label >= kNumActions) {
      throw std::out_of_range("action label must be in [0, " + std::to_string(kNumActions - 1) +
                              "], got " + std::to_string(label));
    }
    return static_cast<std::size_t>(label);
  }

  std::array<double, kNumActions> steps_{};
  std::array<double, kNumActions> cos_{};
  std::array<double, kNumActions> sin_{};
};

/// Disentangled update: R = R(a_r) R_prev, t = t(a_t) + t_prev.
[[nodiscard]] inline RigidTransform update_transform(const RigidTransform& prev,
                                                     const Labels& translation_labels,
                                                     const Labels& rotation_labels,
                                                     const ActionTable& table = ActionTable::standard()) {
  const Eigen::Vector3d t = table.translation(translation_labels) + prev.translation();
  if (rotation_labels == kNoOp) return prev.with_translation(t);
  const RigidTransform step(table.rotation(rotation_labels), Eigen::Vector3d::Zero());
  return compose(step, prev.with_translation(Eigen::Vector3d::Zero())).with_translation(t);
}

}  // namespace pcreg::reagent

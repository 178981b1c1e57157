#pragma once

// Reference implementations used only by tests. They are written from the
// defining formulas with plain loops and share no code paths with the library
// beyond its data types.

#include <Eigen/Core>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "pcreg/cloud.hpp"
#include "pcreg/featnet.hpp"
#include "pcreg/lie.hpp"

namespace pcreg_test {

using Vector6 = Eigen::Matrix<double, 6, 1>;
using Int64Matrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// 4x4 twist matrix, omega in xi[0..2] and rho in xi[3..5].
inline Eigen::Matrix4d hat(const Vector6& xi) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
  m(0, 1) = -xi[2];
  m(0, 2) = xi[1];
  m(1, 0) = xi[2];
  m(1, 2) = -xi[0];
  m(2, 0) = -xi[1];
  m(2, 1) = xi[0];
  m(0, 3) = xi[3];
  m(1, 3) = xi[4];
  m(2, 3) = xi[5];
  return m;
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
inline Eigen::Matrix4d expm(const Eigen::Matrix4d& a) {
  int squarings = 0;
  double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  while (norm > 0.125) {
    norm /= 2.0;
    ++squarings;
  }
  const Eigen::Matrix4d s = a / std::ldexp(1.0, squarings);
  Eigen::Matrix4d term = Eigen::Matrix4d::Identity();
  Eigen::Matrix4d sum = Eigen::Matrix4d::Identity();
  for (int k = 1; k <= 20; ++k) {
    term = term * s / static_cast<double>(k);
    sum += term;
  }
  for (int i = 0; i < squarings; ++i) sum = sum * sum;
  return sum;
}

inline pcreg::RigidTransform from_matrix(const Eigen::Matrix4d& m) {
  return {m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()};
}

/// Each point mapped by R p + t with explicit sums.
inline pcreg::PointCloud transform_points(const pcreg::PointCloud& p, const Eigen::Matrix3d& r,
                                          const Eigen::Vector3d& t) {
  pcreg::PointCloud out(p.rows(), 3);
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (int a = 0; a < 3; ++a) out(i, a) = r(a, 0) * p(i, 0) + r(a, 1) * p(i, 1) + r(a, 2) * p(i, 2) + t[a];
  return out;
}

/// Table index round(K Q clip(x / s, 0, 1)) with halves rounded up (inputs are non-negative).
inline std::int64_t activation_index(double x, double s, int granularity, std::int64_t levels) {
  double a = x / s;
  a = a < 0.0 || std::isnan(a) ? 0.0 : (a > 1.0 ? 1.0 : a);
  return static_cast<std::int64_t>(std::floor(static_cast<double>(granularity * levels) * a + 0.5));
}

/// Every intermediate stage of the feature network for the whole cloud at once.
struct OneShot {
  pcreg::PointCloud points;
  Int64Matrix q1, z2, q2, z3;
  Eigen::MatrixXd h3;
  Eigen::VectorXd phi;
};

inline OneShot one_shot_featnet(const pcreg::PointCloud& cloud, const Eigen::Matrix3d& r,
                                const Eigen::Vector3d& t, const pcreg::featnet::Weights& w) {
  OneShot o;
  o.points = transform_points(cloud, r, t);
  const Eigen::Index n = cloud.rows();
  auto quantize_rows = [](const Eigen::MatrixXd& real, const pcreg::quant::ActivationTable& table) {
    Int64Matrix q(real.rows(), real.cols());
    for (Eigen::Index i = 0; i < real.rows(); ++i)
      for (Eigen::Index c = 0; c < real.cols(); ++c)
        q(i, c) = table.entries()[static_cast<std::size_t>(
            activation_index(real(i, c), table.scale(), table.granularity(), table.levels()))];
    return q;
  };
  auto gemm = [](const Int64Matrix& x, const pcreg::quant::IntMatrix& wq) {
    Int64Matrix z(x.rows(), wq.rows());
    const std::int64_t bound = x.cols() * x.cwiseAbs().maxCoeff() * static_cast<std::int64_t>(wq.cwiseAbs().maxCoeff());
    if (bound > std::numeric_limits<std::int32_t>::max()) {
      for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index o = 0; o < wq.rows(); ++o) {
          std::int64_t acc = 0;
          for (Eigen::Index k = 0; k < x.cols(); ++k) acc += x(i, k) * static_cast<std::int64_t>(wq(o, k));
          z(i, o) = acc;
        }
      return z;
    }
    // Every partial sum fits in 32 bits, so accumulate row by row in that width.
    std::vector<std::int32_t> wt(static_cast<std::size_t>(wq.size()));
    for (Eigen::Index o = 0; o < wq.rows(); ++o)
      for (Eigen::Index k = 0; k < wq.cols(); ++k) wt[static_cast<std::size_t>(k * wq.rows() + o)] = wq(o, k);
    std::vector<std::int32_t> acc(static_cast<std::size_t>(wq.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      std::fill(acc.begin(), acc.end(), 0);
      for (Eigen::Index k = 0; k < x.cols(); ++k) {
        const auto xv = static_cast<std::int32_t>(x(i, k));
        if (xv == 0) continue;
        const std::int32_t* wrow = wt.data() + k * wq.rows();
        for (std::size_t o = 0; o < acc.size(); ++o) acc[o] += xv * wrow[o];
      }
      for (Eigen::Index o = 0; o < wq.rows(); ++o) z(i, o) = acc[static_cast<std::size_t>(o)];
    }
    return z;
  };
  auto dequant_affine_relu = [](const Int64Matrix& z, const pcreg::quant::QuantizedLayer& l,
                                const pcreg::featnet::Affine& a) {
    const double qa = static_cast<double>((std::int64_t{1} << l.activation_bits()) - 1);
    const double qw = static_cast<double>((std::int64_t{1} << (l.weight_bits() - 1)) - 1);
    const double s = l.activation_scale() * l.weight_scale() / (qa * qw);
    Eigen::MatrixXd h(z.rows(), z.cols());
    for (Eigen::Index i = 0; i < z.rows(); ++i)
      for (Eigen::Index c = 0; c < z.cols(); ++c) {
        const double v = a.scale[c] * (l.bias()[c] + s * static_cast<double>(z(i, c))) + a.shift[c];
        h(i, c) = std::max(v, 0.0);
      }
    return h;
  };

  Eigen::MatrixXd h1(n, pcreg::featnet::kConv1Width);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index c = 0; c < h1.cols(); ++c) {
      const double v = w.conv1.bias[c] + w.conv1.weight(c, 0) * o.points(i, 0) +
                       w.conv1.weight(c, 1) * o.points(i, 1) + w.conv1.weight(c, 2) * o.points(i, 2);
      h1(i, c) = std::max(w.affine1.scale[c] * v + w.affine1.shift[c], 0.0);
    }
  o.q1 = quantize_rows(h1, w.qconv2.input_table());
  o.z2 = gemm(o.q1, w.qconv2.weights());
  o.q2 = quantize_rows(dequant_affine_relu(o.z2, w.qconv2, w.affine2), w.qconv3.input_table());
  o.z3 = gemm(o.q2, w.qconv3.weights());
  o.h3 = dequant_affine_relu(o.z3, w.qconv3, w.affine3);
  o.phi = o.h3.colwise().maxCoeff().transpose();
  return o;
}

/// Derivative of f at 0 by Richardson extrapolation of central differences.
template <typename F>
Eigen::VectorXd richardson_derivative(F&& f, double h) {
  auto central = [&](double s) { return Eigen::VectorXd((f(s) - f(-s)) / (2.0 * s)); };
  const Eigen::VectorXd d1 = central(h), d2 = central(h / 2.0), d3 = central(h / 4.0);
  const Eigen::VectorXd r1 = (4.0 * d2 - d1) / 3.0, r2 = (4.0 * d3 - d2) / 3.0;
  return (16.0 * r2 - r1) / 15.0;
}

/// Least-squares slope of log(err) against log(t).
inline double loglog_slope(const std::vector<double>& t, const std::vector<double>& err) {
  const std::size_t n = t.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = std::log(t[i]), y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (static_cast<double>(n) * sxy - sx * sy) / (static_cast<double>(n) * sxx - sx * sx);
}

inline pcreg::PointCloud random_cloud(Eigen::Index n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  pcreg::PointCloud p(n, 3);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) p(i, c) = u(rng);
  return p;
}

}  // namespace pcreg_test

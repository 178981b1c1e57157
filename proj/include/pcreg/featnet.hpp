#pragma once

// Streaming PointNet global feature: Conv(3,64) -> Quant -> QuantConv(64,128)
// -> Quant -> QuantConv(128,1024) -> MaxPool, processed B points at a time.

#include <Eigen/Core>

#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <stdexcept>
#include <utility>
#include <variant>

#include "pcreg/cloud.hpp"
#include "pcreg/lie.hpp"
#include "pcreg/quant.hpp"

namespace pcreg::featnet {

inline constexpr Eigen::Index kConv1Width = 64;
inline constexpr Eigen::Index kConv2Width = 128;
inline constexpr Eigen::Index kFeatureDim = 1024;

/// Per-channel y = scale * x + shift, typically a folded batch norm.
struct Affine {
  Eigen::VectorXd scale;
  Eigen::VectorXd shift;

  [[nodiscard]] static Affine identity(Eigen::Index n) {
    return {Eigen::VectorXd::Ones(n), Eigen::VectorXd::Zero(n)};
  }
  [[nodiscard]] Eigen::Index size() const { return scale.size(); }
};

/// Folds batch-norm statistics into an affine map.
[[nodiscard]] inline Affine fold_batchnorm(const Eigen::VectorXd& gamma, const Eigen::VectorXd& beta,
                                           const Eigen::VectorXd& mean, const Eigen::VectorXd& var,
                                           double eps = 1e-5) {
  const auto n = gamma.size();
  if (beta.size() != n || mean.size() != n || var.size() != n) {
    throw std::invalid_argument("fold_batchnorm: parameter lengths differ");
  }
  Affine a;
  a.scale = gamma.array() / (var.array() + eps).sqrt();
  a.shift = beta.array() - mean.array() * a.scale.array();
  return a;
}

/// Full-precision layer, weight is n x m.
struct DenseLayer {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

/// Full-precision network, used as a reference and as the source for quantization.
struct FloatWeights {
  DenseLayer conv1;
  Affine affine1;
  DenseLayer conv2;
  Affine affine2;
  DenseLayer conv3;
  Affine affine3;
};

struct Weights {
  DenseLayer conv1;
  Affine affine1;
  quant::QuantizedLayer qconv2;
  Affine affine2;
  quant::QuantizedLayer qconv3;
  Affine affine3;
};

namespace detail {

inline void check_dense(const DenseLayer& l, Eigen::Index m, Eigen::Index n, const char* name) {
  if (l.weight.rows() != n || l.weight.cols() != m || l.bias.size() != n) {
    throw std::invalid_argument(std::string("featnet: ") + name + " has wrong shape");
  }
}

inline void check_affine(const Affine& a, Eigen::Index n, const char* name) {
  if (a.scale.size() != n || a.shift.size() != n) {
    throw std::invalid_argument(std::string("featnet: ") + name + " has wrong length");
  }
}

inline void check_quant(const quant::QuantizedLayer& l, Eigen::Index m, Eigen::Index n,
                        const char* name) {
  if (l.inputs() != m || l.outputs() != n) {
    throw std::invalid_argument(std::string("featnet: ") + name + " has wrong shape");
  }
}

}  // namespace detail

inline void validate(const FloatWeights& w) {
  detail::check_dense(w.conv1, 3, kConv1Width, "conv1");
  detail::check_affine(w.affine1, kConv1Width, "affine1");
  detail::check_dense(w.conv2, kConv1Width, kConv2Width, "conv2");
  detail::check_affine(w.affine2, kConv2Width, "affine2");
  detail::check_dense(w.conv3, kConv2Width, kFeatureDim, "conv3");
  detail::check_affine(w.affine3, kFeatureDim, "affine3");
}

inline void validate(const Weights& w) {
  detail::check_dense(w.conv1, 3, kConv1Width, "conv1");
  detail::check_affine(w.affine1, kConv1Width, "affine1");
  detail::check_quant(w.qconv2, kConv1Width, kConv2Width, "qconv2");
  detail::check_affine(w.affine2, kConv2Width, "affine2");
  detail::check_quant(w.qconv3, kConv2Width, kFeatureDim, "qconv3");
  detail::check_affine(w.affine3, kFeatureDim, "affine3");
  if (w.qconv2.activation_bits() != w.qconv3.activation_bits()) {
    throw std::invalid_argument("featnet: quantized layers disagree on bit width");
  }
}

/// Z = Q_a(X) Q_w(W)^T for one tile.
[[nodiscard]] inline quant::IntMatrix layer_forward_quant(const quant::IntMatrix& tile,
                                                         const quant::QuantizedLayer& layer) {
  if (tile.cols() != layer.inputs()) {
    throw std::invalid_argument("layer_forward_quant: tile width does not match layer input");
  }
  if (tile.size() > 0 && (tile.minCoeff() < 0 || tile.maxCoeff() > layer.input_table().levels())) {
    throw std::invalid_argument("layer_forward_quant: tile entries outside [0, Q_a]");
  }
  quant::IntMatrix z(tile.rows(), layer.outputs());
  z.noalias() = tile * layer.weights().transpose();
  return z;
}

/// One Quant submodule: dequantize (with the preceding layer's bias and scale),
/// affine, ReLU, quantize (with the next layer's table). Absent pieces are skipped.
struct QuantStage {
  const quant::QuantizedLayer* dequantize_from = nullptr;
  const Affine* affine = nullptr;
  bool relu = false;
  const quant::ActivationTable* quantize_with = nullptr;

  [[nodiscard]] double real_value(double v, Eigen::Index channel) const {
    if (affine != nullptr) v = affine->scale[channel] * v + affine->shift[channel];
    if (relu && v < 0.0) v = 0.0;
    return v;
  }

  [[nodiscard]] double dequantized(std::int64_t acc, Eigen::Index channel) const {
    return quant::dequantize(acc, dequantize_from->bias()[channel],
                             dequantize_from->combined_scale());
  }
};

using StageOutput = std::variant<Eigen::MatrixXd, quant::IntMatrix>;

namespace detail {

template <typename Get>
StageOutput run_stage(Eigen::Index rows, Eigen::Index cols, const QuantStage& s, Get&& get) {
  if (s.affine != nullptr && s.affine->size() != cols) {
    throw std::invalid_argument("quant_stage: affine length does not match tile width");
  }
  if (s.quantize_with != nullptr) {
    quant::IntMatrix out(rows, cols);
    for (Eigen::Index b = 0; b < rows; ++b)
      for (Eigen::Index c = 0; c < cols; ++c)
        out(b, c) = (*s.quantize_with)(s.real_value(get(b, c), c));
    return out;
  }
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index b = 0; b < rows; ++b)
    for (Eigen::Index c = 0; c < cols; ++c) out(b, c) = s.real_value(get(b, c), c);
  return out;
}

}  // namespace detail

/// Stage on real input; `dequantize_from` must be unset.
[[nodiscard]] inline StageOutput quant_stage(const Eigen::MatrixXd& tile, const QuantStage& s) {
  if (s.dequantize_from != nullptr) {
    throw std::invalid_argument("quant_stage: real input cannot be dequantized");
  }
  return detail::run_stage(tile.rows(), tile.cols(), s,
                           [&](Eigen::Index b, Eigen::Index c) { return tile(b, c); });
}

/// Stage on an integer accumulator tile; `dequantize_from` is required.
[[nodiscard]] inline StageOutput quant_stage(const quant::IntMatrix& tile, const QuantStage& s) {
  if (s.dequantize_from == nullptr) {
    throw std::invalid_argument("quant_stage: integer input needs a layer to dequantize from");
  }
  if (s.dequantize_from->outputs() != tile.cols()) {
    throw std::invalid_argument("quant_stage: tile width does not match dequantization layer");
  }
  return detail::run_stage(tile.rows(), tile.cols(), s, [&](Eigen::Index b, Eigen::Index c) {
    return s.dequantized(tile(b, c), c);
  });
}

/// Intermediate buffers for one tile. Their size depends on B and the layer
/// widths only, never on the number of points.
class Workspace {
 public:
  explicit Workspace(Eigen::Index tile) : tile_(tile) {
    if (tile < 1) throw std::invalid_argument("tile size must be >= 1");
    points.resize(tile, 3);
    h1.resize(tile, kConv1Width);
    q1.resize(tile, kConv1Width);
    z2.resize(tile, kConv2Width);
    q2.resize(tile, kConv2Width);
    z3.resize(tile, kFeatureDim);
  }

  [[nodiscard]] Eigen::Index tile() const { return tile_; }

  [[nodiscard]] std::size_t bytes() const {
    return sizeof(double) * static_cast<std::size_t>(points.size() + h1.size()) +
           sizeof(std::int32_t) * static_cast<std::size_t>(q1.size() + z2.size() + q2.size() + z3.size());
  }

  PointCloud points;
  Eigen::MatrixXd h1;
  quant::IntMatrix q1, z2, q2, z3;

 private:
  Eigen::Index tile_;
};

/// Default per-tile callback: does nothing.
struct NoTileObserver {
  void operator()(Eigen::Index, Eigen::Index, const Workspace&) const {}
};

/// Global feature of g . cloud, max-pooled over ceil(N / B) tiles. `on_tile(begin, count, ws)`
/// runs after each tile, while the workspace still holds that tile's intermediates.
template <typename Observer = NoTileObserver>
[[nodiscard]] FeatureVector extract(const PointCloud& cloud, const RigidTransform& g, const ApplyMode& mode,
                                    const Weights& w, Workspace& ws, Observer&& on_tile = {}) {
  require_valid_cloud(cloud);
  const Eigen::Index n = cloud.rows();
  const Eigen::Index tile = ws.tile();
  const auto& table2 = w.qconv2.input_table();
  const auto& table3 = w.qconv3.input_table();
  const double s2 = w.qconv2.combined_scale();
  const double s3 = w.qconv3.combined_scale();

  FeatureVector phi = FeatureVector::Constant(kFeatureDim, -std::numeric_limits<double>::infinity());
  for (Eigen::Index begin = 0; begin < n; begin += tile) {
    const Eigen::Index count = std::min(tile, n - begin);
    apply_rows(g, cloud, mode, begin, count, ws.points);
    const PointCloud& moved = ws.points;

    // Conv(3, 64) + Quant: fixed evaluation order keeps results tile-independent.
    for (Eigen::Index b = 0; b < count; ++b) {
      const double x = moved(b, 0), y = moved(b, 1), z = moved(b, 2);
      for (Eigen::Index c = 0; c < kConv1Width; ++c) {
        double v = w.conv1.bias[c] + w.conv1.weight(c, 0) * x + w.conv1.weight(c, 1) * y +
                   w.conv1.weight(c, 2) * z;
        ws.h1(b, c) = v;
        v = w.affine1.scale[c] * v + w.affine1.shift[c];
        ws.q1(b, c) = table2(v > 0.0 ? v : 0.0);
      }
    }

    w.qconv2.accumulate(ws.q1.topRows(count), ws.z2.topRows(count));

    for (Eigen::Index b = 0; b < count; ++b) {
      for (Eigen::Index c = 0; c < kConv2Width; ++c) {
        double v = quant::dequantize(ws.z2(b, c), w.qconv2.bias()[c], s2);
        v = w.affine2.scale[c] * v + w.affine2.shift[c];
        ws.q2(b, c) = table3(v > 0.0 ? v : 0.0);
      }
    }

    w.qconv3.accumulate(ws.q2.topRows(count), ws.z3.topRows(count));

    // MaxPool: dequantize, affine, ReLU, running max.
    for (Eigen::Index b = 0; b < count; ++b) {
      for (Eigen::Index c = 0; c < kFeatureDim; ++c) {
        double v = quant::dequantize(ws.z3(b, c), w.qconv3.bias()[c], s3);
        v = w.affine3.scale[c] * v + w.affine3.shift[c];
        if (v < 0.0) v = 0.0;
        if (v > phi[c]) phi[c] = v;
      }
    }
    on_tile(begin, count, static_cast<const Workspace&>(ws));
  }
  return phi;
}

[[nodiscard]] inline FeatureVector extract(const PointCloud& cloud, const RigidTransform& g,
                                           const ApplyMode& mode, const Weights& w,
                                           Eigen::Index tile) {
  Workspace ws(tile);
  return extract(cloud, g, mode, w, ws);
}

/// Full-precision forward pass over the whole cloud at once.
[[nodiscard]] inline FeatureVector extract_float(const PointCloud& cloud, const RigidTransform& g,
                                                 const ApplyMode& mode, const FloatWeights& w) {
  require_valid_cloud(cloud);
  const PointCloud p = apply(g, cloud, mode);
  auto layer = [](const Eigen::MatrixXd& x, const DenseLayer& l, const Affine& a) {
    Eigen::MatrixXd y = (x * l.weight.transpose()).rowwise() + l.bias.transpose();
    y = (y.array().rowwise() * a.scale.transpose().array()).rowwise() + a.shift.transpose().array();
    return Eigen::MatrixXd(y.cwiseMax(0.0));
  };
  const Eigen::MatrixXd h1 = layer(p, w.conv1, w.affine1);
  const Eigen::MatrixXd h2 = layer(h1, w.conv2, w.affine2);
  const Eigen::MatrixXd h3 = layer(h2, w.conv3, w.affine3);
  return h3.colwise().maxCoeff().transpose();
}

/// Largest post-ReLU activations entering conv2 and conv3 on a calibration cloud.
[[nodiscard]] inline std::pair<double, double> calibrate_activation_scales(const FloatWeights& w,
                                                                          const PointCloud& cloud) {
  auto layer = [](const Eigen::MatrixXd& x, const DenseLayer& l, const Affine& a) {
    Eigen::MatrixXd y = (x * l.weight.transpose()).rowwise() + l.bias.transpose();
    y = (y.array().rowwise() * a.scale.transpose().array()).rowwise() + a.shift.transpose().array();
    return Eigen::MatrixXd(y.cwiseMax(0.0));
  };
  const Eigen::MatrixXd h1 = layer(cloud, w.conv1, w.affine1);
  const Eigen::MatrixXd h2 = layer(h1, w.conv2, w.affine2);
  const double s2 = h1.maxCoeff();
  const double s3 = h2.maxCoeff();
  return {s2 > 0.0 ? s2 : 1.0, s3 > 0.0 ? s3 : 1.0};
}

/// Quantizes conv2/conv3 with identity tables, s_w = max |W| per layer.
[[nodiscard]] inline Weights quantize(const FloatWeights& w, int bits, double s_a2, double s_a3,
                                      int granularity = quant::kDefaultGranularity) {
  validate(w);
  const auto wt = quant::WeightTable::identity(bits, granularity);
  auto scale_of = [](const Eigen::MatrixXd& m) {
    const double s = m.cwiseAbs().maxCoeff();
    return s > 0.0 ? s : 1.0;
  };
  auto q2 = quant::quantize_layer(w.conv2.weight, w.conv2.bias, scale_of(w.conv2.weight), wt,
                                  quant::ActivationTable::identity(bits, s_a2, granularity));
  auto q3 = quant::quantize_layer(w.conv3.weight, w.conv3.bias, scale_of(w.conv3.weight), wt,
                                  quant::ActivationTable::identity(bits, s_a3, granularity));
  return Weights{w.conv1, w.affine1, std::move(q2), w.affine2, std::move(q3), w.affine3};
}

/// Seeded random network. Values are rounded to float so they survive a
/// round trip through the f32 weight file unchanged.
[[nodiscard]] inline FloatWeights random_float_weights(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto dense = [&](Eigen::Index m, Eigen::Index n) {
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(m)));
    std::uniform_real_distribution<double> small(-0.05, 0.05);
    DenseLayer l{Eigen::MatrixXd(n, m), Eigen::VectorXd(n)};
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < m; ++j) l.weight(i, j) = static_cast<float>(normal(rng));
    for (Eigen::Index i = 0; i < n; ++i) l.bias[i] = static_cast<float>(small(rng));
    return l;
  };
  auto affine = [&](Eigen::Index n) {
    std::uniform_real_distribution<double> scale(0.8, 1.2), shift(-0.05, 0.05);
    Affine a{Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (Eigen::Index i = 0; i < n; ++i) a.scale[i] = static_cast<float>(scale(rng));
    for (Eigen::Index i = 0; i < n; ++i) a.shift[i] = static_cast<float>(shift(rng));
    return a;
  };
  FloatWeights w;
  w.conv1 = dense(3, kConv1Width);
  w.affine1 = affine(kConv1Width);
  w.conv2 = dense(kConv1Width, kConv2Width);
  w.affine2 = affine(kConv2Width);
  w.conv3 = dense(kConv2Width, kFeatureDim);
  w.affine3 = affine(kFeatureDim);
  return w;
}

/// Quantized PointNet backbone as a feature extractor.
class PointNetExtractor {
 public:
  PointNetExtractor(std::shared_ptr<const Weights> weights, Eigen::Index tile)
      : weights_(std::move(weights)), tile_(tile) {
    if (!weights_) throw std::invalid_argument("PointNetExtractor: null weights");
    validate(*weights_);
    if (tile_ < 1) throw std::invalid_argument("tile size must be >= 1");
  }

  [[nodiscard]] FeatureVector phi(const PointCloud& cloud, const RigidTransform& g,
                                  const ApplyMode& mode) const {
    return extract(cloud, g, mode, *weights_, tile_);
  }

  [[nodiscard]] Eigen::Index tile() const { return tile_; }
  [[nodiscard]] const Weights& weights() const { return *weights_; }

 private:
  std::shared_ptr<const Weights> weights_;
  Eigen::Index tile_;
};

/// Full-precision PointNet backbone.
class FloatPointNetExtractor {
 public:
  explicit FloatPointNetExtractor(std::shared_ptr<const FloatWeights> weights)
      : weights_(std::move(weights)) {
    if (!weights_) throw std::invalid_argument("FloatPointNetExtractor: null weights");
    validate(*weights_);
  }

  [[nodiscard]] FeatureVector phi(const PointCloud& cloud, const RigidTransform& g,
                                  const ApplyMode& mode) const {
    return extract_float(cloud, g, mode, *weights_);
  }

 private:
  std::shared_ptr<const FloatWeights> weights_;
};

}  // namespace pcreg::featnet

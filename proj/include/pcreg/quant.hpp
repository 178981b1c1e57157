#pragma once

// Lookup-table (LLT style) quantization: inputs are scaled and clipped, turned
// into a table index at granularity K, and mapped through a monotone table to
// low-bit integers. Layers multiply the integers and rescale once at the end.

#include <Eigen/Core>

#include <cassert>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pcreg::quant {

inline constexpr int kDefaultGranularity = 9;
inline constexpr int kDefaultBits = 8;
inline constexpr int kMinBits = 4;
inline constexpr int kMaxBits = 10;

/// Q_a = 2^b - 1.
[[nodiscard]] constexpr std::int64_t activation_levels(int bits) { return (std::int64_t{1} << bits) - 1; }
/// Q_w = 2^(b-1) - 1.
[[nodiscard]] constexpr std::int64_t weight_levels(int bits) { return (std::int64_t{1} << (bits - 1)) - 1; }

inline void require_bits(int bits) {
  if (bits < kMinBits || bits > kMaxBits) {
    throw std::invalid_argument("quantization bits must be in [" + std::to_string(kMinBits) +
                                ", " + std::to_string(kMaxBits) + "], got " +
                                std::to_string(bits));
  }
}

/// Rounds to nearest, halves away from zero.
[[nodiscard]] inline std::int64_t round_index(double v) { return std::llround(v); }

/// Integers up to 2^24 in magnitude are exact in single precision.
inline constexpr int kFloatExactBits = 24;

using IntMatrix = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Monotone table mapping an index in [0, K Q_a] to an unsigned level in [0, Q_a].
class ActivationTable {
 public:
  ActivationTable(int bits, int granularity, std::vector<std::int32_t> entries, double scale)
      : bits_(bits), granularity_(granularity), entries_(std::move(entries)), scale_(scale) {
    require_bits(bits_);
    if (granularity_ < 1) throw std::invalid_argument("table granularity must be >= 1");
    if (!(scale_ > 0.0) || !std::isfinite(scale_)) {
      throw std::invalid_argument("activation scale must be positive");
    }
    const auto q = levels();
    if (static_cast<std::int64_t>(entries_.size()) != granularity_ * q + 1) {
      throw std::invalid_argument("activation table must have K*Q_a + 1 entries");
    }
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i] < 0 || entries_[i] > q) {
        throw std::invalid_argument("activation table entry out of [0, Q_a]");
      }
      if (i > 0 && entries_[i] < entries_[i - 1]) {
        throw std::invalid_argument("activation table is not monotone");
      }
    }
  }

  /// Uniform quantizer expressed as a table: entry i = round(i / K).
  [[nodiscard]] static ActivationTable identity(int bits, double scale,
                                                int granularity = kDefaultGranularity) {
    require_bits(bits);
    const auto q = activation_levels(bits);
    std::vector<std::int32_t> entries(static_cast<std::size_t>(granularity * q + 1));
    for (std::size_t i = 0; i < entries.size(); ++i) {
      entries[i] = static_cast<std::int32_t>(
          round_index(static_cast<double>(i) / granularity));
    }
    return ActivationTable(bits, granularity, std::move(entries), scale);
  }

  [[nodiscard]] int bits() const { return bits_; }
  [[nodiscard]] int granularity() const { return granularity_; }
  [[nodiscard]] double scale() const { return scale_; }
  [[nodiscard]] std::int64_t levels() const { return activation_levels(bits_); }
  [[nodiscard]] std::span<const std::int32_t> entries() const { return entries_; }

  /// Table index for a real input: round(K Q_a clip(x / s_a, 0, 1)).
  [[nodiscard]] std::int64_t index(double x) const {
    double a = x / scale_;
    if (!(a > 0.0)) a = 0.0;  // also maps NaN to the lower clip
    if (a > 1.0) a = 1.0;
    return round_index(static_cast<double>(granularity_ * levels()) * a);
  }

  [[nodiscard]] std::int32_t operator()(double x) const {
    return entries_[static_cast<std::size_t>(index(x))];
  }

  friend bool operator==(const ActivationTable&, const ActivationTable&) = default;

 private:
  int bits_;
  int granularity_;
  std::vector<std::int32_t> entries_;
  double scale_;
};

/// Monotone table mapping an index in [0, 2 K Q_w] to a signed level in [-Q_w, Q_w].
class WeightTable {
 public:
  WeightTable(int bits, int granularity, std::vector<std::int32_t> entries)
      : bits_(bits), granularity_(granularity), entries_(std::move(entries)) {
    require_bits(bits_);
    const auto q = levels();
    if (static_cast<std::int64_t>(entries_.size()) != 2 * granularity_ * q + 1) {
      throw std::invalid_argument("weight table must have 2*K*Q_w + 1 entries");
    }
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i] < -q || entries_[i] > q) {
        throw std::invalid_argument("weight table entry out of [-Q_w, Q_w]");
      }
      if (i > 0 && entries_[i] < entries_[i - 1]) {
        throw std::invalid_argument("weight table is not monotone");
      }
    }
  }

  /// entry i = round(i / K) - Q_w.
  [[nodiscard]] static WeightTable identity(int bits, int granularity = kDefaultGranularity) {
    require_bits(bits);
    const auto q = weight_levels(bits);
    std::vector<std::int32_t> entries(static_cast<std::size_t>(2 * granularity * q + 1));
    for (std::size_t i = 0; i < entries.size(); ++i) {
      entries[i] = static_cast<std::int32_t>(
          round_index(static_cast<double>(i) / granularity) - q);
    }
    return WeightTable(bits, granularity, std::move(entries));
  }

  [[nodiscard]] int bits() const { return bits_; }
  [[nodiscard]] int granularity() const { return granularity_; }
  [[nodiscard]] std::int64_t levels() const { return weight_levels(bits_); }
  [[nodiscard]] std::span<const std::int32_t> entries() const { return entries_; }

 private:
  int bits_;
  int granularity_;
  std::vector<std::int32_t> entries_;
};

[[nodiscard]] inline std::int32_t quantize_activation(double x, const ActivationTable& table) {
  return table(x);
}

/// Index round(K Q_w (clip(w / s_w, -1, 1) + 1)), looked up in `table`.
[[nodiscard]] inline std::int32_t quantize_weight(double w, double weight_scale,
                                                  const WeightTable& table) {
  if (!(weight_scale > 0.0)) throw std::invalid_argument("weight scale must be positive");
  double v = w / weight_scale;
  if (v < -1.0) v = -1.0;
  if (v > 1.0) v = 1.0;
  const auto idx = round_index(static_cast<double>(table.granularity() * table.levels()) * (v + 1.0));
  return table.entries()[static_cast<std::size_t>(idx)];
}

/// Bits needed to hold an m-term product sum of b_a- and b_w-bit integers.
[[nodiscard]] constexpr int accumulator_bits(int activation_bits, int weight_bits, std::int64_t m) {
  int log2m = 0;
  while ((std::int64_t{1} << log2m) < m) ++log2m;
  return activation_bits + weight_bits + log2m;
}

/// Exact integer dot product. The result must fit the declared hardware width
/// b_a + b_w + ceil(log2 m); storage is 64-bit regardless.
[[nodiscard]] inline std::int64_t integer_accumulate(std::span<const std::int32_t> qx,
                                                     std::span<const std::int32_t> qw,
                                                     int activation_bits = kDefaultBits,
                                                     int weight_bits = kDefaultBits) {
  if (qx.size() != qw.size()) throw std::invalid_argument("integer_accumulate: length mismatch");
  std::int64_t acc = 0;
  for (std::size_t j = 0; j < qx.size(); ++j) {
    acc += static_cast<std::int64_t>(qx[j]) * static_cast<std::int64_t>(qw[j]);
  }
  [[maybe_unused]] const int width =
      accumulator_bits(activation_bits, weight_bits, static_cast<std::int64_t>(qx.size()));
  assert(acc < (std::int64_t{1} << width) && acc > -(std::int64_t{1} << width));
  return acc;
}

[[nodiscard]] constexpr double dequantize(std::int64_t acc, double bias, double combined_scale) {
  return bias + combined_scale * static_cast<double>(acc);
}

/// A layer whose inputs pass through `input_table` and whose weights are stored
/// as signed integers. Output y_i = bias_i + s_aw * sum_j qx_j qw_ij.
class QuantizedLayer {
 public:
  QuantizedLayer(IntMatrix weights, Eigen::VectorXd bias, double activation_scale,
                 double weight_scale, int weight_bits, ActivationTable input_table)
      : weights_(std::move(weights)),
        bias_(std::move(bias)),
        weight_scale_(weight_scale),
        weight_bits_(weight_bits),
        input_table_(std::move(input_table)) {
    require_bits(weight_bits_);
    if (bias_.size() != weights_.rows()) {
      throw std::invalid_argument("QuantizedLayer: bias length must equal output width");
    }
    if (!(weight_scale_ > 0.0)) throw std::invalid_argument("QuantizedLayer: s_w must be positive");
    if (activation_scale != input_table_.scale()) {
      throw std::invalid_argument("QuantizedLayer: s_a disagrees with input table scale");
    }
    const auto q = weight_levels(weight_bits_);
    if (weights_.size() > 0 && (weights_.maxCoeff() > q || weights_.minCoeff() < -q)) {
      throw std::invalid_argument("QuantizedLayer: weight entry out of [-Q_w, Q_w]");
    }
    if (accumulator_bits(input_table_.bits(), weight_bits_, weights_.cols()) > 31) {
      throw std::invalid_argument("QuantizedLayer: accumulator would exceed 32 bits");
    }
    if (accumulator_bits(input_table_.bits(), weight_bits_, weights_.cols()) <= kFloatExactBits) {
      weights_float_t_ = weights_.transpose().cast<float>();
    }
  }

  /// Z = X Q_w^T with X holding table levels. When every partial sum fits the
  /// float mantissa the product runs in single precision, which yields the same
  /// integers; otherwise it runs in int32.
  template <typename In, typename Out>
  void accumulate(const Eigen::MatrixBase<In>& x, const Eigen::MatrixBase<Out>& z_out) const {
    auto& z = const_cast<Eigen::MatrixBase<Out>&>(z_out);
    if (weights_float_t_.size() > 0) {
      const Eigen::MatrixXf xf = x.template cast<float>();
      Eigen::MatrixXf zf(xf.rows(), weights_float_t_.cols());
      zf.noalias() = xf * weights_float_t_;
      z = zf.cast<std::int32_t>();
    } else {
      z.noalias() = x * weights_.transpose();
    }
  }

  [[nodiscard]] Eigen::Index inputs() const { return weights_.cols(); }
  [[nodiscard]] Eigen::Index outputs() const { return weights_.rows(); }
  [[nodiscard]] const IntMatrix& weights() const { return weights_; }
  [[nodiscard]] const Eigen::VectorXd& bias() const { return bias_; }
  [[nodiscard]] const ActivationTable& input_table() const { return input_table_; }
  [[nodiscard]] double activation_scale() const { return input_table_.scale(); }
  [[nodiscard]] double weight_scale() const { return weight_scale_; }
  [[nodiscard]] int weight_bits() const { return weight_bits_; }
  [[nodiscard]] int activation_bits() const { return input_table_.bits(); }

  /// s_aw = s_a s_w / (Q_a Q_w).
  [[nodiscard]] double combined_scale() const {
    return input_table_.scale() * weight_scale_ /
           static_cast<double>(input_table_.levels() * weight_levels(weight_bits_));
  }

 private:
  IntMatrix weights_;
  Eigen::VectorXd bias_;
  double weight_scale_;
  int weight_bits_;
  ActivationTable input_table_;
  Eigen::MatrixXf weights_float_t_;
};

/// Quantizes a real n x m weight matrix with the given scale and table.
[[nodiscard]] inline QuantizedLayer quantize_layer(const Eigen::MatrixXd& weights,
                                                   const Eigen::VectorXd& bias,
                                                   double weight_scale,
                                                   const WeightTable& weight_table,
                                                   ActivationTable input_table) {
  IntMatrix q(weights.rows(), weights.cols());
  for (Eigen::Index i = 0; i < weights.rows(); ++i) {
    for (Eigen::Index j = 0; j < weights.cols(); ++j) {
      q(i, j) = quantize_weight(weights(i, j), weight_scale, weight_table);
    }
  }
  const double s_a = input_table.scale();
  return QuantizedLayer(std::move(q), bias, s_a, weight_scale, weight_table.bits(),
                        std::move(input_table));
}

}  // namespace pcreg::quant

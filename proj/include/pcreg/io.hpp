#pragma once

// Point cloud text files and the RGKW binary weight container.
//
// Point cloud file: first line is the point count N, then N lines "x y z".
//
// Weight file (all integers little-endian):
//   "RGKW"  u16 version  u32 tensor_count
//   per tensor: u32 name_length, UTF-8 name, u8 dtype, u8 rank, u32 dims[rank],
//               raw little-endian data (row-major)
// dtype: 0 f32, 1 i8, 2 u8, 3 i16, 4 u16.

#include <Eigen/Core>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pcreg/cloud.hpp"
#include "pcreg/featnet.hpp"
#include "pcreg/lie.hpp"
#include "pcreg/quant.hpp"
#include "pcreg/reagent.hpp"

namespace pcreg::io {

// ---------------------------------------------------------------- point clouds

inline void write_cloud(std::ostream& out, const PointCloud& cloud) {
  out << cloud.rows() << '\n';
  char buf[96];
  for (Eigen::Index i = 0; i < cloud.rows(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", cloud(i, 0), cloud(i, 1), cloud(i, 2));
    out << buf;
  }
}

[[nodiscard]] inline PointCloud read_cloud(std::istream& in) {
  long long n = 0;
  if (!(in >> n) || n < 1) throw std::runtime_error("point cloud file: missing or invalid point count");
  PointCloud cloud(n, 3);
  for (long long i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      if (!(in >> cloud(i, c))) {
        throw std::runtime_error("point cloud file: expected " + std::to_string(n) + " points, got " +
                                 std::to_string(i));
      }
    }
  }
  std::string rest;
  if (in >> rest) throw std::runtime_error("point cloud file: trailing data after declared points");
  require_valid_cloud(cloud, "point cloud file");
  return cloud;
}

inline void save_cloud(const std::string& path, const PointCloud& cloud) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_cloud(out, cloud);
}

[[nodiscard]] inline PointCloud load_cloud(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_cloud(in);
}

/// Rigid transform as three lines "r00 r01 r02 t0" etc.
inline void write_transform(std::ostream& out, const RigidTransform& g) {
  char buf[160];
  for (int r = 0; r < 3; ++r) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g\n", g.rotation()(r, 0), g.rotation()(r, 1),
                  g.rotation()(r, 2), g.translation()(r));
    out << buf;
  }
}

[[nodiscard]] inline RigidTransform read_transform(std::istream& in) {
  Eigen::Matrix3d r;
  Eigen::Vector3d t;
  for (int i = 0; i < 3; ++i) {
    if (!(in >> r(i, 0) >> r(i, 1) >> r(i, 2) >> t(i))) {
      throw std::runtime_error("transform file: expected 3 rows of 4 numbers");
    }
  }
  return RigidTransform(r, t);
}

// ---------------------------------------------------------------- tensors

enum class DType : std::uint8_t { f32 = 0, i8 = 1, u8 = 2, i16 = 3, u16 = 4 };

[[nodiscard]] inline const char* dtype_name(DType t) {
  switch (t) {
    case DType::f32: return "f32";
    case DType::i8: return "i8";
    case DType::u8: return "u8";
    case DType::i16: return "i16";
    case DType::u16: return "u16";
  }
  return "?";
}

[[nodiscard]] inline std::size_t dtype_size(DType t) {
  return (t == DType::i8 || t == DType::u8) ? 1 : (t == DType::f32 ? 4 : 2);
}

struct Tensor {
  std::string name;
  DType dtype = DType::f32;
  std::vector<std::uint32_t> dims;
  std::vector<double> values;  // exact for every supported dtype

  [[nodiscard]] std::size_t count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

inline constexpr std::uint16_t kWeightFileVersion = 1;

struct WeightFile {
  std::vector<Tensor> tensors;

  [[nodiscard]] const Tensor* find(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  }

  [[nodiscard]] const Tensor& at(const std::string& name) const {
    if (const Tensor* t = find(name)) return *t;
    throw std::runtime_error("weight file: missing tensor '" + name + "'");
  }
};

namespace detail {

inline void put_u(std::ostream& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t get_u(std::istream& in, int bytes, const char* what) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) {
      throw std::runtime_error(std::string("weight file: truncated while reading ") + what);
    }
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

inline void check_range(const Tensor& t, double v, double lo, double hi) {
  if (!(v >= lo && v <= hi) || v != std::floor(v)) {
    throw std::invalid_argument("weight file: tensor '" + t.name + "' value " + std::to_string(v) +
                                " does not fit " + dtype_name(t.dtype));
  }
}

}  // namespace detail

inline void write_weights(std::ostream& out, const WeightFile& file) {
  out.write("RGKW", 4);
  detail::put_u(out, kWeightFileVersion, 2);
  detail::put_u(out, file.tensors.size(), 4);
  for (const auto& t : file.tensors) {
    if (t.values.size() != t.count()) {
      throw std::invalid_argument("weight file: tensor '" + t.name + "' has wrong element count");
    }
    if (t.dims.size() > 255) throw std::invalid_argument("weight file: rank too large");
    detail::put_u(out, t.name.size(), 4);
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    detail::put_u(out, static_cast<std::uint8_t>(t.dtype), 1);
    detail::put_u(out, t.dims.size(), 1);
    for (auto d : t.dims) detail::put_u(out, d, 4);
    for (double v : t.values) {
      switch (t.dtype) {
        case DType::f32: {
          const auto f = static_cast<float>(v);
          if (static_cast<double>(f) != v && std::isfinite(v)) {
            throw std::invalid_argument("weight file: tensor '" + t.name + "' value is not float-exact");
          }
          detail::put_u(out, std::bit_cast<std::uint32_t>(f), 4);
          break;
        }
        case DType::i8:
          detail::check_range(t, v, -128, 127);
          detail::put_u(out, static_cast<std::uint8_t>(static_cast<std::int8_t>(v)), 1);
          break;
        case DType::u8:
          detail::check_range(t, v, 0, 255);
          detail::put_u(out, static_cast<std::uint8_t>(v), 1);
          break;
        case DType::i16:
          detail::check_range(t, v, -32768, 32767);
          detail::put_u(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)), 2);
          break;
        case DType::u16:
          detail::check_range(t, v, 0, 65535);
          detail::put_u(out, static_cast<std::uint16_t>(v), 2);
          break;
      }
    }
  }
}

[[nodiscard]] inline WeightFile read_weights(std::istream& in) {
  char magic[4] = {};
  if (!in.read(magic, 4) || std::string(magic, 4) != "RGKW") {
    throw std::runtime_error("weight file: bad magic (expected RGKW)");
  }
  const auto version = detail::get_u(in, 2, "version");
  if (version != kWeightFileVersion) {
    throw std::runtime_error("weight file: unsupported version " + std::to_string(version));
  }
  const auto count = detail::get_u(in, 4, "tensor count");
  WeightFile file;
  for (std::uint64_t k = 0; k < count; ++k) {
    Tensor t;
    const auto name_len = detail::get_u(in, 4, "name length");
    if (name_len > (1u << 16)) throw std::runtime_error("weight file: tensor name too long");
    t.name.resize(name_len);
    if (!in.read(t.name.data(), static_cast<std::streamsize>(name_len))) {
      throw std::runtime_error("weight file: truncated tensor name");
    }
    const auto tag = detail::get_u(in, 1, "dtype");
    if (tag > 4) throw std::runtime_error("weight file: unknown dtype tag " + std::to_string(tag));
    t.dtype = static_cast<DType>(tag);
    const auto rank = detail::get_u(in, 1, "rank");
    for (std::uint64_t r = 0; r < rank; ++r) t.dims.push_back(static_cast<std::uint32_t>(detail::get_u(in, 4, "dims")));
    const std::size_t n = t.count();
    if (n > (std::size_t{1} << 28)) throw std::runtime_error("weight file: tensor '" + t.name + "' too large");
    t.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto raw = detail::get_u(in, static_cast<int>(dtype_size(t.dtype)), "tensor data");
      switch (t.dtype) {
        case DType::f32: t.values[i] = std::bit_cast<float>(static_cast<std::uint32_t>(raw)); break;
        case DType::i8: t.values[i] = static_cast<std::int8_t>(raw); break;
        case DType::u8: t.values[i] = static_cast<std::uint8_t>(raw); break;
        case DType::i16: t.values[i] = static_cast<std::int16_t>(raw); break;
        case DType::u16: t.values[i] = static_cast<std::uint16_t>(raw); break;
      }
    }
    if (file.find(t.name)) throw std::runtime_error("weight file: duplicate tensor '" + t.name + "'");
    file.tensors.push_back(std::move(t));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw std::runtime_error("weight file: trailing bytes");
  return file;
}

inline void save_weights(const std::string& path, const WeightFile& file) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_weights(out, file);
}

[[nodiscard]] inline WeightFile load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_weights(in);
}

/// One line per tensor: name, dtype, dims.
[[nodiscard]] inline std::string describe(const WeightFile& file) {
  std::ostringstream os;
  for (const auto& t : file.tensors) {
    os << t.name << ' ' << dtype_name(t.dtype) << " [";
    for (std::size_t i = 0; i < t.dims.size(); ++i) os << (i ? "," : "") << t.dims[i];
    os << "]\n";
  }
  return os.str();
}

// ---------------------------------------------------------------- model <-> tensors

namespace detail {

inline Tensor matrix_tensor(std::string name, const Eigen::MatrixXd& m) {
  Tensor t{std::move(name), DType::f32, {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())}, {}};
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) t.values.push_back(m(i, j));
  return t;
}

inline Tensor vector_tensor(std::string name, const Eigen::VectorXd& v) {
  return {std::move(name), DType::f32, {static_cast<std::uint32_t>(v.size())}, {v.data(), v.data() + v.size()}};
}

inline void add_dense(WeightFile& f, const std::string& prefix, const featnet::DenseLayer& l) {
  f.tensors.push_back(matrix_tensor(prefix + ".weight", l.weight));
  f.tensors.push_back(vector_tensor(prefix + ".bias", l.bias));
}

inline void add_affine(WeightFile& f, const std::string& name, const featnet::Affine& a) {
  Eigen::MatrixXd m(2, a.size());
  m.row(0) = a.scale.transpose();
  m.row(1) = a.shift.transpose();
  f.tensors.push_back(matrix_tensor(name, m));
}

inline void add_quantized(WeightFile& f, const std::string& prefix, const quant::QuantizedLayer& l) {
  const bool wide = l.weight_bits() > 8;
  Tensor w{prefix + ".weight", wide ? DType::i16 : DType::i8,
           {static_cast<std::uint32_t>(l.outputs()), static_cast<std::uint32_t>(l.inputs())}, {}};
  for (Eigen::Index i = 0; i < l.outputs(); ++i)
    for (Eigen::Index j = 0; j < l.inputs(); ++j) w.values.push_back(l.weights()(i, j));
  f.tensors.push_back(std::move(w));
  f.tensors.push_back(vector_tensor(prefix + ".bias", l.bias()));
  f.tensors.push_back({prefix + ".scale", DType::f32, {2}, {l.activation_scale(), l.weight_scale()}});
  const auto entries = l.input_table().entries();
  f.tensors.push_back({prefix + ".lut", l.activation_bits() > 8 ? DType::u16 : DType::u8,
                       {static_cast<std::uint32_t>(entries.size())}, {entries.begin(), entries.end()}});
}

inline Eigen::MatrixXd to_matrix(const Tensor& t, Eigen::Index rows, Eigen::Index cols) {
  if (t.dims.size() != 2 || t.dims[0] != rows || t.dims[1] != cols) {
    throw std::runtime_error("weight file: tensor '" + t.name + "' must be [" + std::to_string(rows) + "," +
                             std::to_string(cols) + "]");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = t.values[static_cast<std::size_t>(i * cols + j)];
  return m;
}

inline Eigen::VectorXd to_vector(const Tensor& t, Eigen::Index n) {
  if (t.dims.size() != 1 || t.dims[0] != n) {
    throw std::runtime_error("weight file: tensor '" + t.name + "' must be [" + std::to_string(n) + "]");
  }
  return Eigen::Map<const Eigen::VectorXd>(t.values.data(), n);
}

inline featnet::DenseLayer read_dense(const WeightFile& f, const std::string& prefix, Eigen::Index m,
                                      Eigen::Index n) {
  return {to_matrix(f.at(prefix + ".weight"), n, m), to_vector(f.at(prefix + ".bias"), n)};
}

inline featnet::Affine read_affine(const WeightFile& f, const std::string& name, Eigen::Index n) {
  const Eigen::MatrixXd m = to_matrix(f.at(name), 2, n);
  return {m.row(0).transpose(), m.row(1).transpose()};
}

inline quant::QuantizedLayer read_quantized(const WeightFile& f, const std::string& prefix, Eigen::Index m,
                                            Eigen::Index n, int bits, int granularity) {
  const Eigen::MatrixXd w = to_matrix(f.at(prefix + ".weight"), n, m);
  const Eigen::VectorXd scale = to_vector(f.at(prefix + ".scale"), 2);
  const Tensor& lut = f.at(prefix + ".lut");
  if (lut.dims.size() != 1) throw std::runtime_error("weight file: '" + lut.name + "' must be rank 1");
  std::vector<std::int32_t> entries(lut.values.begin(), lut.values.end());
  quant::ActivationTable table(bits, granularity, std::move(entries), scale[0]);
  return quant::QuantizedLayer(w.cast<std::int32_t>(), to_vector(f.at(prefix + ".bias"), n), scale[0], scale[1],
                               bits, std::move(table));
}

}  // namespace detail

struct QuantConfig {
  int bits = quant::kDefaultBits;
  int granularity = quant::kDefaultGranularity;
};

[[nodiscard]] inline QuantConfig read_config(const WeightFile& f) {
  const Tensor& t = f.at("meta.config");
  if (t.dims.size() != 1 || t.dims[0] != 2) throw std::runtime_error("weight file: meta.config must be [2]");
  QuantConfig c{static_cast<int>(t.values[0]), static_cast<int>(t.values[1])};
  quant::require_bits(c.bits);
  if (c.granularity < 1) throw std::runtime_error("weight file: granularity must be >= 1");
  return c;
}

struct ActorHeads {
  reagent::ActorHead translation;
  reagent::ActorHead rotation;
};

/// Tensors in canonical order, so encode(decode(bytes)) reproduces the bytes.
[[nodiscard]] inline WeightFile encode(const featnet::Weights& net, const ActorHeads* actors = nullptr) {
  featnet::validate(net);
  WeightFile f;
  f.tensors.push_back({"meta.config", DType::u8, {2},
                       {static_cast<double>(net.qconv2.weight_bits()),
                        static_cast<double>(net.qconv2.input_table().granularity())}});
  detail::add_dense(f, "featnet.conv1", net.conv1);
  detail::add_affine(f, "featnet.conv1.affine", net.affine1);
  detail::add_quantized(f, "featnet.qconv2", net.qconv2);
  detail::add_affine(f, "featnet.qconv2.affine", net.affine2);
  detail::add_quantized(f, "featnet.qconv3", net.qconv3);
  detail::add_affine(f, "featnet.qconv3.affine", net.affine3);
  if (actors != nullptr) {
    for (const auto& [prefix, head] : {std::pair{"actor.trans", &actors->translation},
                                       std::pair{"actor.rot", &actors->rotation}}) {
      reagent::validate(*head);
      detail::add_quantized(f, std::string(prefix) + ".fc1", head->fc1);
      detail::add_quantized(f, std::string(prefix) + ".fc2", head->fc2);
      detail::add_dense(f, std::string(prefix) + ".fc3", head->fc3);
    }
  }
  return f;
}

[[nodiscard]] inline featnet::Weights decode_featnet(const WeightFile& f) {
  const QuantConfig c = read_config(f);
  using featnet::kConv1Width, featnet::kConv2Width, featnet::kFeatureDim;
  featnet::Weights w{detail::read_dense(f, "featnet.conv1", 3, kConv1Width),
                     detail::read_affine(f, "featnet.conv1.affine", kConv1Width),
                     detail::read_quantized(f, "featnet.qconv2", kConv1Width, kConv2Width, c.bits, c.granularity),
                     detail::read_affine(f, "featnet.qconv2.affine", kConv2Width),
                     detail::read_quantized(f, "featnet.qconv3", kConv2Width, kFeatureDim, c.bits, c.granularity),
                     detail::read_affine(f, "featnet.qconv3.affine", kFeatureDim)};
  featnet::validate(w);
  return w;
}

[[nodiscard]] inline bool has_actors(const WeightFile& f) { return f.find("actor.trans.fc1.weight") != nullptr; }

[[nodiscard]] inline ActorHeads decode_actors(const WeightFile& f) {
  const QuantConfig c = read_config(f);
  auto head = [&](const std::string& prefix) {
    const Tensor& w1 = f.at(prefix + ".fc1.weight");
    if (w1.dims.size() != 2) throw std::runtime_error("weight file: '" + w1.name + "' must be rank 2");
    const Eigen::Index state = w1.dims[1];
    reagent::ActorHead h{
        detail::read_quantized(f, prefix + ".fc1", state, reagent::kFc1Width, c.bits, c.granularity),
        detail::read_quantized(f, prefix + ".fc2", reagent::kFc1Width, reagent::kFc2Width, c.bits, c.granularity),
        detail::read_dense(f, prefix + ".fc3", reagent::kFc2Width, reagent::kLogits)};
    reagent::validate(h);
    return h;
  };
  return {head("actor.trans"), head("actor.rot")};
}

}  // namespace pcreg::io

#pragma once

// Analytical latency / resource model of the two accelerator cores and a
// brute-force search over tile size and unrolling factors.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pcreg::dse {

// ---------------------------------------------------------------- primitives

inline constexpr std::int64_t kBramBits = 18 * 1024;
inline constexpr std::int64_t kBramMaxWidth = 36;
inline constexpr std::int64_t kUramBits = 288 * 1024;
inline constexpr std::int64_t kUramMaxWidth = 72;

[[nodiscard]] constexpr std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

/// 18Kb BRAM blocks for a buffer of s entries of w bits with partition factor P.
[[nodiscard]] constexpr std::int64_t bram_blocks(std::int64_t s, std::int64_t w, std::int64_t p) {
  if (s < 1 || w < 1 || p < 1) throw std::invalid_argument("bram_blocks: arguments must be >= 1");
  const std::int64_t lanes = ceil_div(w, kBramMaxWidth);
  return p * ceil_div(s * w, p * lanes * kBramBits) * lanes;
}

/// URAM blocks (4K x 72) for the same buffer description.
[[nodiscard]] constexpr std::int64_t uram_blocks(std::int64_t s, std::int64_t w, std::int64_t p) {
  if (s < 1 || w < 1 || p < 1) throw std::invalid_argument("uram_blocks: arguments must be >= 1");
  const std::int64_t lanes = ceil_div(w, kUramMaxWidth);
  return p * ceil_div(s * w, p * lanes * kUramBits) * lanes;
}

/// Entries of an activation lookup table: K (2^b - 1) + 1.
[[nodiscard]] constexpr std::int64_t lut_size(int bits, int granularity) {
  return granularity * ((std::int64_t{1} << bits) - 1) + 1;
}

/// Parameter storage of a quantized convolution in bits.
[[nodiscard]] constexpr std::int64_t quantconv_buffer_bits(std::int64_t m, std::int64_t n, int b_w, int b_a,
                                                           int b_v, int granularity) {
  return b_w * m * n + b_a * lut_size(b_a, granularity) + b_v * n + b_v;
}

/// Parameter storage of a full-precision convolution in bits.
[[nodiscard]] constexpr std::int64_t conv_buffer_bits(std::int64_t m, std::int64_t n, int b_v) {
  return b_v * m * n + b_v * n;
}

// ---------------------------------------------------------------- constants

struct ModelConstants {
  double ii_loop = 1.0;
  double c_loop = 12.0;
  double eta_quantconv = 1.0;
  double eta_conv = 3.0;
  double eta_elementwise = 2.0;  // Quant and MaxPool
  double eta_transform = 27.0;
  double c_pinv = 20000.0;       // cycles, fixed unroll
  double c_update = 1300.0;
  double dsp_pinv = 48.0;
  double dsp_update = 35.0;
  double frequency_hz = 200e6;
  double bandwidth_bytes = 3.2e9;
  int bits = 8;
  int granularity = 9;
  int value_bits = 32;
  std::int64_t n_points = 1024;
  int i_jacobi = 12;
  int i_max_pointlk = 20;
  int i_max_reagent = 10;
};

struct ResourceBudget {
  double dsp = 1728;
  double bram = 312;  // 36Kb blocks
  double uram = 96;
  double cap = 0.8;

  void validate() const {
    if (!(cap > 0.0 && cap <= 1.0)) throw std::invalid_argument("utilization cap must be in (0, 1]");
    if (dsp < 0 || bram < 0 || uram < 0) throw std::invalid_argument("resource totals must be >= 0");
  }
};

// ---------------------------------------------------------------- stages

enum class StageKind { transform, conv, quantconv, quant, maxpool, fc };

/// One pipeline stage with its chosen unrolling factors.
struct Stage {
  std::string name;
  StageKind kind;
  std::int64_t m = 1;  // input width (1 for element-wise stages)
  std::int64_t n = 1;  // output width
  std::int64_t pp = 1;
  std::int64_t po = 1;
  double cycles = 0;
  double ops = 0;      // per point (feature extractor) or per call (actor)
  double dsp = 0;
  std::int64_t bram18 = 0;
  std::int64_t uram = 0;
};

[[nodiscard]] inline bool is_matmul(StageKind k) {
  return k == StageKind::conv || k == StageKind::quantconv || k == StageKind::fc;
}

/// Latency of a stage over `rows` rows: matrix stages run ceil(rows/Pp) ceil(n/Po)
/// inner loops over m; element-wise stages are a single pipelined loop.
[[nodiscard]] inline double stage_cycles(StageKind kind, std::int64_t m, std::int64_t n, std::int64_t rows,
                                         std::int64_t pp, std::int64_t po, const ModelConstants& k) {
  const double outer = static_cast<double>(ceil_div(rows, pp) * ceil_div(n, po));
  if (is_matmul(kind)) return outer * (k.ii_loop * static_cast<double>(m - 1) + k.c_loop);
  return k.ii_loop * (outer - 1.0) + k.c_loop;
}

[[nodiscard]] inline double eta(StageKind kind, const ModelConstants& k) {
  switch (kind) {
    case StageKind::quantconv: return k.eta_quantconv;
    case StageKind::conv:
    case StageKind::fc: return k.eta_conv;
    case StageKind::transform: return k.eta_transform;
    case StageKind::quant:
    case StageKind::maxpool: return k.eta_elementwise;
  }
  return 1.0;
}

namespace detail {

inline std::int64_t round_up_to_divisor(std::int64_t v, std::int64_t of) {
  v = std::clamp<std::int64_t>(v, 1, of);
  while (of % v != 0) ++v;
  return v;
}

inline std::int64_t round_up_to_pow2(std::int64_t v) {
  std::int64_t p = 1;
  while (p < v) p *= 2;
  return p;
}

}  // namespace detail

// ---------------------------------------------------------------- design points

enum class Core { pointlk, reagent };

[[nodiscard]] inline std::string_view to_string(Core c) { return c == Core::pointlk ? "pointlk" : "reagent"; }

[[nodiscard]] inline Core parse_core(std::string_view s) {
  if (s == "pointlk") return Core::pointlk;
  if (s == "reagent") return Core::reagent;
  throw std::invalid_argument("unknown core model: " + std::string(s));
}

struct DesignPoint {
  Core core = Core::pointlk;
  std::int64_t B = 1;
  std::int64_t P_p = 1;  // dominant stage
  std::int64_t P_o = 1;
  std::int64_t P_actor = 0;  // 0 for PointNetLK
  std::vector<Stage> pipeline;
  std::vector<Stage> actor;  // one head
  double featnet_cycles = 0;
  double actor_cycles = 0;
  double cycles = 0;
  double ops = 0;
  double bytes = 0;
  double dsp = 0;
  double bram = 0;  // 36Kb units
  double uram = 0;
  bool feasible = false;

  [[nodiscard]] double milliseconds(const ModelConstants& k) const { return cycles / k.frequency_hz * 1e3; }
};

/// Feature extractor cycle count for N points given per-stage latencies.
[[nodiscard]] inline double featnet_cycles(std::int64_t n_points, std::int64_t tile,
                                           const std::vector<double>& stage_cycles) {
  if (stage_cycles.empty()) return 0.0;
  double sum = 0.0, peak = 0.0;
  for (double c : stage_cycles) {
    sum += c;
    peak = std::max(peak, c);
  }
  return static_cast<double>(ceil_div(n_points, tile) - 1) * peak + sum;
}

/// Bytes moved per feature extraction: N points as 128-bit packets.
[[nodiscard]] constexpr std::int64_t featnet_bytes(std::int64_t n_points) { return 16 * n_points; }

inline constexpr std::int64_t kTransformBytes = 48;

[[nodiscard]] constexpr std::int64_t pointlk_bytes(int i_jacobi, int i_max, std::int64_t n_points) {
  return (i_jacobi + i_max + 1) * featnet_bytes(n_points) + (i_max + 1) * kTransformBytes;
}

[[nodiscard]] constexpr std::int64_t reagent_bytes(int i_max, std::int64_t n_points) {
  return (i_max + 1) * featnet_bytes(n_points) + (i_max + 1) * kTransformBytes;
}

[[nodiscard]] constexpr double pointlk_cycles(double c_featnet, int i_jacobi, int i_max, double c_pinv,
                                              double c_update) {
  return (i_jacobi + 1) * c_featnet + c_pinv + i_max * (c_featnet + c_update);
}

[[nodiscard]] constexpr double reagent_cycles(double c_featnet, int i_max, double c_actor) {
  return c_featnet + i_max * (c_featnet + 2.0 * c_actor);
}

namespace detail {

inline Stage make_stage(std::string name, StageKind kind, std::int64_t m, std::int64_t n) {
  Stage s;
  s.name = std::move(name);
  s.kind = kind;
  s.m = m;
  s.n = n;
  return s;
}

// Smallest admissible factor whose latency does not exceed the target.
template <typename Next, typename Cost>
std::int64_t smallest_factor(std::int64_t limit, double target, Next next, Cost cost) {
  std::int64_t f = 1;
  while (f < limit && cost(f) > target) f = next(f);
  return std::min(f, limit);
}

inline void finish_stage(Stage& s, std::int64_t rows, const ModelConstants& k) {
  s.cycles = stage_cycles(s.kind, s.m, s.n, rows, s.pp, s.po, k);
  s.ops = is_matmul(s.kind) ? 2.0 * static_cast<double>(s.m * s.n)
                            : (s.kind == StageKind::transform ? 18.0 : 2.0 * static_cast<double>(s.n));
  s.dsp = eta(s.kind, k) * static_cast<double>(s.pp * s.po);
}

inline std::int64_t weight_partition(std::int64_t po) { return std::max<std::int64_t>(1, po / 2); }

}  // namespace detail

/// Evaluates one design point: balances all other stages against the dominant
/// QuantConv(128, 1024) stage (and the actor against QuantFC(2048, 512)).
[[nodiscard]] inline DesignPoint evaluate(Core core, std::int64_t B, std::int64_t P_p, std::int64_t P_o,
                                          std::int64_t P_actor, const ModelConstants& k,
                                          const ResourceBudget& budget) {
  budget.validate();
  if (B < 1 || P_p < 1 || P_o < 1 || B % P_p != 0 || 1024 % P_o != 0) {
    throw std::invalid_argument("evaluate: need P_p | B and P_o | 1024");
  }
  if (core == Core::reagent && (P_actor < 1 || 512 % P_actor != 0)) {
    throw std::invalid_argument("evaluate: ReAgent needs an actor factor dividing 512");
  }
  using detail::make_stage;
  DesignPoint d;
  d.core = core;
  d.B = B;
  d.P_p = P_p;
  d.P_o = P_o;
  d.P_actor = core == Core::reagent ? P_actor : 0;

  d.pipeline = {make_stage("Transform", StageKind::transform, 3, 1),
                make_stage("Conv(3,64)", StageKind::conv, 3, 64),
                make_stage("Quant(64)", StageKind::quant, 1, 64),
                make_stage("QuantConv(64,128)", StageKind::quantconv, 64, 128),
                make_stage("Quant(128)", StageKind::quant, 1, 128),
                make_stage("QuantConv(128,1024)", StageKind::quantconv, 128, 1024),
                make_stage("MaxPool(1024)", StageKind::maxpool, 1, 1024)};
  Stage& star = d.pipeline[5];
  star.pp = P_p;
  star.po = P_o;
  detail::finish_stage(star, B, k);
  const double target = star.cycles;

  for (std::size_t i = 0; i < d.pipeline.size(); ++i) {
    if (i == 5) continue;
    Stage& s = d.pipeline[i];
    if (s.kind == StageKind::maxpool) {
      s.pp = 1;
    } else {
      const double ratio = stage_cycles(s.kind, s.m, s.n, B, 1, 1, k) / target;
      s.pp = detail::round_up_to_divisor(static_cast<std::int64_t>(std::ceil(ratio - 1e-12)), B);
    }
    s.po = detail::smallest_factor(
        s.n, target, [&](std::int64_t f) { return detail::round_up_to_divisor(f + 1, s.n); },
        [&](std::int64_t f) { return stage_cycles(s.kind, s.m, s.n, B, s.pp, f, k); });
    detail::finish_stage(s, B, k);
  }

  // BRAM (18Kb blocks): weights partitioned by P_o / 2, lookup tables replicated
  // per parallel lane of the Quant stage that uses them.
  const auto lut = lut_size(k.bits, k.granularity);
  std::int64_t bram18 = 0;
  for (Stage& s : d.pipeline) {
    if (s.kind == StageKind::conv) s.bram18 = bram_blocks(s.m * s.n, k.value_bits, detail::weight_partition(s.po));
    if (s.kind == StageKind::quantconv) s.bram18 = bram_blocks(s.m * s.n, k.bits, detail::weight_partition(s.po));
    if (s.kind == StageKind::quant) s.bram18 = bram_blocks(s.pp * s.po * lut, k.bits, s.pp * s.po);
    bram18 += s.bram18;
  }
  const std::int64_t feature_partition = detail::weight_partition(d.pipeline[6].po);

  std::vector<double> stage_lat;
  double dsp = 0.0, ops_per_point = 0.0;
  for (const Stage& s : d.pipeline) {
    stage_lat.push_back(s.cycles);
    dsp += s.dsp;
    ops_per_point += s.ops;
  }
  d.featnet_cycles = featnet_cycles(k.n_points, B, stage_lat);
  const double ops_featnet = static_cast<double>(k.n_points) * ops_per_point;
  const double kdim = 1024.0;

  double uram = 0.0;
  if (core == Core::pointlk) {
    d.cycles = pointlk_cycles(d.featnet_cycles, k.i_jacobi, k.i_max_pointlk, k.c_pinv, k.c_update);
    const double ops_pinv = 4.0 * 36.0 * kdim;
    const double ops_update = 12.0 * kdim + 200.0;
    d.ops = (k.i_jacobi + 1) * ops_featnet + ops_pinv + k.i_max_pointlk * (ops_featnet + ops_update);
    d.bytes = static_cast<double>(pointlk_bytes(k.i_jacobi, k.i_max_pointlk, k.n_points));
    dsp += k.dsp_pinv + k.dsp_update;
    bram18 += bram_blocks(1024, k.value_bits, feature_partition);  // feature
    bram18 += bram_blocks(6 * 1024, k.value_bits, 1);              // J
    bram18 += bram_blocks(6 * 1024, k.value_bits, 1);              // J pseudoinverse
  } else {
    d.actor = {make_stage("Quant(2048)", StageKind::quant, 1, 2048),
               make_stage("QuantFC(2048,512)", StageKind::quantconv, 2048, 512),
               make_stage("Quant(512)", StageKind::quant, 1, 512),
               make_stage("QuantFC(512,256)", StageKind::quantconv, 512, 256),
               make_stage("Quant(256)", StageKind::quant, 1, 256),
               make_stage("FC(256,33)", StageKind::fc, 256, 33)};
    Stage& lstar = d.actor[1];
    lstar.po = P_actor;
    detail::finish_stage(lstar, 1, k);
    for (std::size_t i = 0; i < d.actor.size(); ++i) {
      Stage& s = d.actor[i];
      if (i != 1) {
        s.po = detail::smallest_factor(
            detail::round_up_to_pow2(s.n), lstar.cycles, [](std::int64_t f) { return 2 * f; },
            [&](std::int64_t f) { return stage_cycles(s.kind, s.m, s.n, 1, 1, f, k); });
        if (s.kind == StageKind::quant) s.po = 1;
        detail::finish_stage(s, 1, k);
      }
    }
    // Per head: fc1 weights in URAM packed P_o weights per word; fc2 in BRAM;
    // fc3 in full precision; tables for the two quantized FC inputs.
    const Stage& fc1 = d.actor[1];
    const Stage& fc2 = d.actor[3];
    const Stage& fc3 = d.actor[5];
    const std::int64_t head_uram = uram_blocks(fc1.m * fc1.n / fc1.po, k.bits * fc1.po, 1);
    std::int64_t head_bram = bram_blocks(fc2.m * fc2.n, k.bits, detail::weight_partition(fc2.po)) +
                             bram_blocks(fc3.m * fc3.n, k.value_bits, detail::weight_partition(fc3.po)) +
                             2 * bram_blocks(lut, k.bits, 1);
    d.actor_cycles = 0.0;
    double actor_dsp = 0.0, actor_ops = 0.0;
    for (const Stage& s : d.actor) {
      d.actor_cycles += s.cycles;
      actor_dsp += s.dsp;
      actor_ops += s.ops;
    }
    d.cycles = reagent_cycles(d.featnet_cycles, k.i_max_reagent, d.actor_cycles);
    d.ops = ops_featnet + k.i_max_reagent * (ops_featnet + 2.0 * actor_ops);
    d.bytes = static_cast<double>(reagent_bytes(k.i_max_reagent, k.n_points));
    dsp += actor_dsp;  // both heads run on the same actor datapath
    bram18 += 2 * head_bram + bram_blocks(2048, k.value_bits, feature_partition);
    uram = 2.0 * static_cast<double>(head_uram);
  }
  d.dsp = dsp;
  d.bram = static_cast<double>(bram18) / 2.0;
  d.uram = uram;
  d.feasible = d.dsp <= budget.cap * budget.dsp && d.bram <= budget.cap * budget.bram &&
               d.uram <= budget.cap * budget.uram;
  return d;
}

// ---------------------------------------------------------------- search

struct Grid {
  std::vector<std::int64_t> B;
  std::vector<std::int64_t> P_o;
  std::vector<std::int64_t> P_actor;  // ignored for PointNetLK

  /// B in 1..max_tile, P_o and P_actor powers of two.
  [[nodiscard]] static Grid standard(std::int64_t max_tile = 64) {
    Grid g;
    for (std::int64_t b = 1; b <= max_tile; ++b) g.B.push_back(b);
    for (std::int64_t p = 1; p <= 1024; p *= 2) g.P_o.push_back(p);
    for (std::int64_t p = 1; p <= 512; p *= 2) g.P_actor.push_back(p);
    return g;
  }
};

[[nodiscard]] inline std::vector<std::int64_t> divisors(std::int64_t v) {
  std::vector<std::int64_t> out;
  for (std::int64_t d = 1; d <= v; ++d)
    if (v % d == 0) out.push_back(d);
  return out;
}

struct Exploration {
  std::optional<DesignPoint> best;
  std::vector<DesignPoint> frontier;  // every evaluated point, in enumeration order
};

/// True if a is preferred to b: lower latency, then lexicographic (B, P_p, P_o, P_actor).
[[nodiscard]] inline bool better(const DesignPoint& a, const DesignPoint& b) {
  if (a.cycles != b.cycles) return a.cycles < b.cycles;
  if (a.B != b.B) return a.B < b.B;
  if (a.P_p != b.P_p) return a.P_p < b.P_p;
  if (a.P_o != b.P_o) return a.P_o < b.P_o;
  return a.P_actor < b.P_actor;
}

[[nodiscard]] inline Exploration explore(const ResourceBudget& budget, Core core, const ModelConstants& k,
                                         const Grid& grid, bool keep_frontier = true) {
  budget.validate();
  Exploration ex;
  const std::vector<std::int64_t> no_actor{0};
  const auto& actors = core == Core::reagent ? grid.P_actor : no_actor;
  for (std::int64_t b : grid.B) {
    for (std::int64_t pp : divisors(b)) {
      for (std::int64_t po : grid.P_o) {
        for (std::int64_t pa : actors) {
          DesignPoint d = evaluate(core, b, pp, po, pa, k, budget);
          if (d.feasible && (!ex.best || better(d, *ex.best))) ex.best = d;
          if (keep_frontier) ex.frontier.push_back(std::move(d));
        }
      }
    }
  }
  return ex;
}

// ---------------------------------------------------------------- roofline

enum class Bound { compute, memory };

struct Roofline {
  double perf;          // ops / s
  double cp;            // computational performance, ops / s
  double ctc_bw;        // CTC * BW_max, ops / s
  Bound bound;
};

[[nodiscard]] inline Roofline roofline_from_rates(double cp, double ctc_bw) {
  if (!(cp > 0.0) || !(ctc_bw >= 0.0)) throw std::invalid_argument("roofline: rates must be positive");
  return {std::min(cp, ctc_bw), cp, ctc_bw, cp < ctc_bw ? Bound::compute : Bound::memory};
}

/// Perf = min(CP, CTC * BW) with CP = OP / (C / f), CTC = OP / D.
[[nodiscard]] inline Roofline roofline(double ops, double cycles, double bytes, double frequency_hz,
                                       double bandwidth) {
  if (!(ops > 0.0 && cycles > 0.0 && bytes > 0.0 && frequency_hz > 0.0 && bandwidth > 0.0)) {
    throw std::invalid_argument("roofline: inputs must be positive");
  }
  const double cp = ops / (cycles / frequency_hz);
  const double ctc = std::isinf(bytes) ? 0.0 : ops / bytes;
  return roofline_from_rates(cp, ctc * bandwidth);
}

// ---------------------------------------------------------------- config I/O

/// Reads `key = value` lines ('#' starts a comment) into constants and budget.
inline void read_config(std::istream& in, ModelConstants& k, ResourceBudget& budget) {
  std::map<std::string, double*> reals{
      {"ii_loop", &k.ii_loop},           {"c_loop", &k.c_loop},
      {"eta_quantconv", &k.eta_quantconv}, {"eta_conv", &k.eta_conv},
      {"eta_elementwise", &k.eta_elementwise}, {"eta_transform", &k.eta_transform},
      {"c_pinv", &k.c_pinv},             {"c_update", &k.c_update},
      {"dsp_pinv", &k.dsp_pinv},         {"dsp_update", &k.dsp_update},
      {"frequency_hz", &k.frequency_hz}, {"bandwidth_bytes", &k.bandwidth_bytes},
      {"budget_dsp", &budget.dsp},       {"budget_bram", &budget.bram},
      {"budget_uram", &budget.uram},     {"cap", &budget.cap}};
  std::map<std::string, int*> ints{{"bits", &k.bits},
                                   {"granularity", &k.granularity},
                                   {"value_bits", &k.value_bits},
                                   {"i_jacobi", &k.i_jacobi},
                                   {"i_max_pointlk", &k.i_max_pointlk},
                                   {"i_max_reagent", &k.i_max_reagent}};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    if (trim(line).empty()) continue;
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != value.size()) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": bad number '" + value + "'");
    }
    if (key == "n_points") {
      k.n_points = static_cast<std::int64_t>(v);
    } else if (auto r = reals.find(key); r != reals.end()) {
      *r->second = v;
    } else if (auto i = ints.find(key); i != ints.end()) {
      *i->second = static_cast<int>(v);
    } else {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  budget.validate();
}

inline void read_config_file(const std::string& path, ModelConstants& k, ResourceBudget& budget) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  read_config(in, k, budget);
}

inline void write_config(std::ostream& out, const ModelConstants& k, const ResourceBudget& budget) {
  std::ostringstream os;
  os.precision(10);
  os << "ii_loop = " << k.ii_loop << "\nc_loop = " << k.c_loop << "\neta_quantconv = " << k.eta_quantconv
     << "\neta_conv = " << k.eta_conv << "\neta_elementwise = " << k.eta_elementwise
     << "\neta_transform = " << k.eta_transform << "\nc_pinv = " << k.c_pinv << "\nc_update = " << k.c_update
     << "\ndsp_pinv = " << k.dsp_pinv << "\ndsp_update = " << k.dsp_update
     << "\nfrequency_hz = " << k.frequency_hz << "\nbandwidth_bytes = " << k.bandwidth_bytes
     << "\nbits = " << k.bits << "\ngranularity = " << k.granularity << "\nvalue_bits = " << k.value_bits
     << "\nn_points = " << k.n_points << "\ni_jacobi = " << k.i_jacobi
     << "\ni_max_pointlk = " << k.i_max_pointlk << "\ni_max_reagent = " << k.i_max_reagent
     << "\nbudget_dsp = " << budget.dsp << "\nbudget_bram = " << budget.bram
     << "\nbudget_uram = " << budget.uram << "\ncap = " << budget.cap << "\n";
  out << os.str();
}

inline void write_frontier_csv(std::ostream& out, const std::vector<DesignPoint>& points,
                               const ModelConstants& k) {
  out << "B,P_p,P_o,P_actor,C_cycles,ms,DSP,BRAM,URAM,feasible\n";
  std::ostringstream os;
  os.precision(10);
  for (const auto& d : points) {
    os << d.B << ',' << d.P_p << ',' << d.P_o << ',' << d.P_actor << ',' << d.cycles << ','
       << d.milliseconds(k) << ',' << d.dsp << ',' << d.bram << ',' << d.uram << ','
       << (d.feasible ? 1 : 0) << '\n';
  }
  out << os.str();
}

// ---------------------------------------------------------------- calibration

/// The published design points.
struct ReferencePoints {
  std::int64_t lk_B = 2, lk_pp = 2, lk_po = 512;
  std::int64_t ra_B = 14, ra_pp = 14, ra_po = 64, ra_actor = 128;
  double lk_ms = 23.84;
  double ra_ms = 11.54;
  double featnet_over_update = 108.5;
  double featnet_over_pinv = 6.9;
};

/// Fits c_loop (integer cycles) and the fixed PInv / Update latencies so the
/// reference points reproduce the reported runtimes.
[[nodiscard]] inline ModelConstants calibrate(ModelConstants k, const ResourceBudget& budget,
                                              const ReferencePoints& ref = {}, double max_c_loop = 40) {
  double best_err = std::numeric_limits<double>::infinity();
  ModelConstants best = k;
  for (double c = 1; c <= max_c_loop; c += 1) {
    ModelConstants t = k;
    t.c_loop = c;
    const DesignPoint lk = evaluate(Core::pointlk, ref.lk_B, ref.lk_pp, ref.lk_po, 0, t, budget);
    t.c_update = std::round(lk.featnet_cycles / ref.featnet_over_update);
    t.c_pinv = std::round(lk.featnet_cycles / ref.featnet_over_pinv);
    const double lk_ms = evaluate(Core::pointlk, ref.lk_B, ref.lk_pp, ref.lk_po, 0, t, budget).milliseconds(t);
    const double ra_ms =
        evaluate(Core::reagent, ref.ra_B, ref.ra_pp, ref.ra_po, ref.ra_actor, t, budget).milliseconds(t);
    const double err = std::pow(lk_ms / ref.lk_ms - 1.0, 2) + std::pow(ra_ms / ref.ra_ms - 1.0, 2);
    if (err < best_err) {
      best_err = err;
      best = t;
    }
  }
  return best;
}

}  // namespace pcreg::dse

#pragma once

// Command implementations behind the `pcreg` executable. Each command writes
// its primary output to `out`, diagnostics to `err`, and returns an exit code.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pcreg/dse.hpp"
#include "pcreg/featnet.hpp"
#include "pcreg/icp.hpp"
#include "pcreg/io.hpp"
#include "pcreg/metrics.hpp"
#include "pcreg/oracle.hpp"
#include "pcreg/pointlk.hpp"
#include "pcreg/reagent.hpp"
#include "pcreg/synthetic.hpp"

namespace pcreg::app {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// ---------------------------------------------------------------- gen

struct PairOptions {
  synthetic::PairSpec spec{};
  std::string shape = "table";
  std::string base_file;         // optional; replaces the synthetic shape
  Eigen::Index base_points = 0;  // 0: 2 N
};

[[nodiscard]] inline synthetic::Pair make_pair(const PairOptions& o) {
  PointCloud base;
  if (!o.base_file.empty()) {
    base = normalize_unit_sphere(io::load_cloud(o.base_file));
  } else {
    const Eigen::Index n = o.base_points > 0 ? o.base_points : 2 * o.spec.n;
    base = synthetic::make_shape(synthetic::parse_shape(o.shape), n, o.spec.seed ^ 0x5eedULL);
  }
  return synthetic::gen_pair(o.spec, base);
}

/// Writes <prefix>.source.txt, <prefix>.template.txt and <prefix>.truth.txt.
inline int cmd_gen(const PairOptions& o, const std::string& prefix, std::ostream& out) {
  const auto pair = make_pair(o);
  io::save_cloud(prefix + ".source.txt", pair.source);
  io::save_cloud(prefix + ".template.txt", pair.tmpl);
  std::ofstream truth(prefix + ".truth.txt");
  if (!truth) throw std::runtime_error("cannot write " + prefix + ".truth.txt");
  io::write_transform(truth, pair.truth);
  out << "wrote " << prefix << ".{source,template,truth}.txt (N=" << o.spec.n << ")\n";
  return 0;
}

// ---------------------------------------------------------------- backbones

enum class Backbone { moments, pointnet };

[[nodiscard]] inline Backbone parse_backbone(const std::string& s) {
  if (s == "moments") return Backbone::moments;
  if (s == "pointnet") return Backbone::pointnet;
  throw std::invalid_argument("unknown backbone: " + s);
}

struct RandomModel {
  featnet::Weights net;
  std::optional<io::ActorHeads> actors;
};

/// Deterministic random network quantized with identity tables; activation
/// scales are calibrated on a synthetic cloud and rounded to float.
[[nodiscard]] inline RandomModel random_model(std::uint64_t seed, int bits, bool with_actors) {
  const auto fw = featnet::random_float_weights(seed);
  const PointCloud calib = synthetic::make_shape(synthetic::Shape::table, 1024, seed + 1);
  const auto [s2, s3] = featnet::calibrate_activation_scales(fw, calib);
  RandomModel m{featnet::quantize(fw, bits, static_cast<float>(s2), static_cast<float>(s3)), std::nullopt};
  if (with_actors) {
    const Eigen::Index state_dim = 2 * featnet::kFeatureDim;
    Eigen::MatrixXd states(state_dim, 8);
    for (Eigen::Index c = 0; c < states.cols(); ++c) {
      const PointCloud p = synthetic::make_shape(synthetic::Shape::table, 512, seed + 10 + static_cast<std::uint64_t>(c));
      states.col(c) << featnet::extract_float(p, RigidTransform::identity(), ApplyMode::standard(), fw),
          featnet::extract_float(calib, RigidTransform::identity(), ApplyMode::standard(), fw);
    }
    auto head = [&](std::uint64_t s) {
      const auto fh = reagent::random_float_actor(s, state_dim);
      const auto [a1, a2] = reagent::calibrate_activation_scales(fh, states);
      return reagent::quantize(fh, bits, static_cast<float>(a1), static_cast<float>(a2));
    };
    m.actors = io::ActorHeads{head(seed + 2), head(seed + 3)};
  }
  return m;
}

// ---------------------------------------------------------------- register

enum class Method { pointlk, reagent, icp };

[[nodiscard]] inline Method parse_method(const std::string& s) {
  if (s == "pointlk") return Method::pointlk;
  if (s == "reagent") return Method::reagent;
  if (s == "icp") return Method::icp;
  throw std::invalid_argument("unknown method: " + s);
}

struct RegisterOptions {
  PairOptions pair{};
  std::string source_file, template_file, truth_file;  // optional, all or none
  Method method = Method::pointlk;
  Backbone backbone = Backbone::moments;
  pointlk::JacobianMethod jacobian = pointlk::JacobianMethod::central;
  int bits = quant::kDefaultBits;
  Eigen::Index tile = 0;   // 0: 2 for PointNetLK, 14 for ReAgent
  int iters = 0;           // 0: method default
  std::string weights_file;
  int moment_order = 3;
};

struct RegisterRun {
  RegistrationResult result;
  std::optional<RigidTransform> truth;
  PointCloud source, tmpl;
};

[[nodiscard]] inline RegisterRun run_register(const RegisterOptions& o) {
  RegisterRun run;
  if (!o.source_file.empty() || !o.template_file.empty()) {
    if (o.source_file.empty() || o.template_file.empty()) {
      throw std::invalid_argument("register: --source and --template must be given together");
    }
    run.source = io::load_cloud(o.source_file);
    run.tmpl = io::load_cloud(o.template_file);
    if (!o.truth_file.empty()) {
      std::ifstream in(o.truth_file);
      if (!in) throw std::runtime_error("cannot open " + o.truth_file);
      run.truth = io::read_transform(in);
    }
  } else {
    auto pair = make_pair(o.pair);
    run.source = std::move(pair.source);
    run.tmpl = std::move(pair.tmpl);
    run.truth = pair.truth;
  }

  std::shared_ptr<const featnet::Weights> net;
  std::optional<io::ActorHeads> actors;
  const bool need_net = o.backbone == Backbone::pointnet && o.method != Method::icp;
  if (!o.weights_file.empty()) {
    const auto file = io::load_weights(o.weights_file);
    net = std::make_shared<const featnet::Weights>(io::decode_featnet(file));
    if (io::has_actors(file)) actors = io::decode_actors(file);
  } else if (need_net) {
    auto m = random_model(o.pair.spec.seed, o.bits, o.method == Method::reagent);
    net = std::make_shared<const featnet::Weights>(std::move(m.net));
    actors = std::move(m.actors);
  }

  auto run_with = [&](const auto& ex) {
    if (o.method == Method::pointlk) {
      pointlk::LkOptions lk;
      lk.method = o.jacobian;
      if (o.iters > 0) lk.max_iters = o.iters;
      return static_cast<RegistrationResult>(pointlk::register_clouds(run.source, run.tmpl, ex, lk));
    }
    reagent::ReAgentOptions ra;
    if (o.iters > 0) ra.max_iters = o.iters;
    if (o.backbone == Backbone::pointnet && actors) {
      const reagent::LearnedPolicy policy(actors->translation, actors->rotation);
      return reagent::register_clouds(run.source, run.tmpl, ex, policy, ra);
    }
    if (!run.truth) throw std::invalid_argument("register: the expert policy needs a ground-truth transform");
    return reagent::register_clouds(run.source, run.tmpl, ex, reagent::ExpertPolicy(*run.truth), ra);
  };

  if (o.method == Method::icp) {
    icp::IcpOptions io_;
    if (o.iters > 0) io_.max_iters = o.iters;
    run.result = icp::register_clouds(run.source, run.tmpl, io_);
  } else if (o.backbone == Backbone::moments) {
    run.result = run_with(oracle::MomentExtractor(oracle::MomentConfig{o.moment_order}));
  } else {
    const Eigen::Index tile = o.tile > 0 ? o.tile : (o.method == Method::reagent ? 14 : 2);
    run.result = run_with(featnet::PointNetExtractor(net, tile));
  }
  return run;
}

/// Per-iteration trace followed by a summary line.
inline int cmd_register(const RegisterOptions& o, std::ostream& out) {
  const auto run = run_register(o);
  out << "iter,step_norm,rot_err_deg,trans_err\n";
  for (std::size_t i = 0; i < run.result.transforms.size(); ++i) {
    out << (i + 1) << ',' << fmt(run.result.twist_norms[i]);
    if (run.truth) {
      const auto e = iso_error(run.result.transforms[i], *run.truth);
      out << ',' << fmt(e.rotation_deg) << ',' << fmt(e.translation);
    } else {
      out << ",,";
    }
    out << '\n';
  }
  out << "iterations=" << run.result.iterations << " converged=" << (run.result.converged ? 1 : 0);
  if (run.truth) {
    const auto e = iso_error(run.result.G, *run.truth);
    out << " iso_rot_deg=" << fmt(e.rotation_deg) << " iso_trans=" << fmt(e.translation);
  }
  out << " chamfer=" << fmt(chamfer(apply(run.result.G, run.source), run.tmpl)) << '\n';
  return 0;
}

// ---------------------------------------------------------------- benchmark

struct BenchmarkOptions {
  std::vector<Eigen::Index> sizes{512, 1024, 2048, 4096, 8192};
  std::vector<Method> methods{Method::pointlk, Method::reagent, Method::icp};
  Backbone backbone = Backbone::moments;
  int trials = 1;
  std::uint64_t seed = 0;
  double theta_max_deg = 45.0;
  double t_max = 0.5;
  int bits = quant::kDefaultBits;
};

inline std::string to_string(Method m) {
  switch (m) {
    case Method::pointlk: return "pointlk";
    case Method::reagent: return "reagent";
    case Method::icp: return "icp";
  }
  return "?";
}

/// CSV: method,N,trial,seconds,iterations,rot_err_deg,trans_err. Trial seeds
/// are derived from (seed, trial) only.
inline int cmd_benchmark(const BenchmarkOptions& o, std::ostream& out) {
  out << "method,N,trial,seconds,iterations,rot_err_deg,trans_err\n";
  for (Method m : o.methods) {
    for (Eigen::Index n : o.sizes) {
      for (int trial = 0; trial < o.trials; ++trial) {
        RegisterOptions r;
        r.method = m;
        r.backbone = o.backbone;
        r.bits = o.bits;
        r.pair.spec.n = n;
        r.pair.spec.theta_max_deg = o.theta_max_deg;
        r.pair.spec.t_max = o.t_max;
        r.pair.spec.seed = o.seed * 1000003ULL + static_cast<std::uint64_t>(trial);
        const auto t0 = std::chrono::steady_clock::now();
        const auto run = run_register(r);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const auto e = iso_error(run.result.G, *run.truth);
        out << to_string(m) << ',' << n << ',' << trial << ',' << fmt(secs) << ',' << run.result.iterations << ','
            << fmt(e.rotation_deg) << ',' << fmt(e.translation) << '\n';
      }
    }
  }
  return 0;
}

// ---------------------------------------------------------------- dse

struct DseOptions {
  dse::Core core = dse::Core::pointlk;
  std::string config_file;  // optional
  std::string frontier_csv;  // optional
  std::int64_t max_tile = 64;
};

inline void load_dse_config(const std::string& path, dse::ModelConstants& k, dse::ResourceBudget& b) {
  if (!path.empty()) dse::read_config_file(path, k, b);
}

inline void print_point(std::ostream& out, const dse::DesignPoint& d, const dse::ModelConstants& k) {
  out << "B=" << d.B << " P_p=" << d.P_p << " P_o=" << d.P_o;
  if (d.core == dse::Core::reagent) out << " P_actor=" << d.P_actor;
  out << " cycles=" << fmt(d.cycles) << " ms=" << fmt(d.milliseconds(k)) << " DSP=" << fmt(d.dsp)
      << " BRAM=" << fmt(d.bram) << " URAM=" << fmt(d.uram) << '\n';
  for (const auto& s : d.pipeline)
    out << "  " << s.name << " (" << s.pp << "," << s.po << ") cycles=" << fmt(s.cycles) << '\n';
  for (const auto& s : d.actor) out << "  actor " << s.name << " (" << s.po << ") cycles=" << fmt(s.cycles) << '\n';
}

/// Returns 3 when no design point fits the budget.
inline int cmd_dse(const DseOptions& o, std::ostream& out, std::ostream& err) {
  dse::ModelConstants k;
  dse::ResourceBudget b;
  load_dse_config(o.config_file, k, b);
  const auto ex = dse::explore(b, o.core, k, dse::Grid::standard(o.max_tile), !o.frontier_csv.empty());
  if (!o.frontier_csv.empty()) {
    std::ofstream csv(o.frontier_csv);
    if (!csv) throw std::runtime_error("cannot write " + o.frontier_csv);
    dse::write_frontier_csv(csv, ex.frontier, k);
  }
  if (!ex.best) {
    err << "dse: no feasible design point under the given budget\n";
    return 3;
  }
  out << "best " << dse::to_string(o.core) << ": ";
  print_point(out, *ex.best, k);
  const auto r = dse::roofline(ex.best->ops, ex.best->cycles, ex.best->bytes, k.frequency_hz, k.bandwidth_bytes);
  out << "roofline: CP=" << fmt(r.cp / 1e9) << " Gops/s CTC*BW=" << fmt(r.ctc_bw / 1e9) << " Gops/s "
      << (r.bound == dse::Bound::compute ? "compute-bound" : "memory-bound") << '\n';
  return 0;
}

/// Fits the latency constants and writes them as a config file.
inline int cmd_dse_calibrate(const std::string& config_in, const std::string& config_out, std::ostream& out) {
  dse::ModelConstants k;
  dse::ResourceBudget b;
  load_dse_config(config_in, k, b);
  k = dse::calibrate(k, b);
  const dse::ReferencePoints ref;
  const auto lk = dse::evaluate(dse::Core::pointlk, ref.lk_B, ref.lk_pp, ref.lk_po, 0, k, b);
  const auto ra = dse::evaluate(dse::Core::reagent, ref.ra_B, ref.ra_pp, ref.ra_po, ref.ra_actor, k, b);
  out << "c_loop=" << fmt(k.c_loop) << " c_pinv=" << fmt(k.c_pinv) << " c_update=" << fmt(k.c_update)
      << " pointlk_ms=" << fmt(lk.milliseconds(k)) << " reagent_ms=" << fmt(ra.milliseconds(k)) << '\n';
  if (!config_out.empty()) {
    std::ofstream f(config_out);
    if (!f) throw std::runtime_error("cannot write " + config_out);
    dse::write_config(f, k, b);
  } else {
    dse::write_config(out, k, b);
  }
  return 0;
}

// ---------------------------------------------------------------- weights

inline int cmd_weights_gen_random(std::uint64_t seed, int bits, bool with_actors, const std::string& path,
                                  std::ostream& out) {
  const auto m = random_model(seed, bits, with_actors);
  const auto file = io::encode(m.net, m.actors ? &*m.actors : nullptr);
  io::save_weights(path, file);
  out << "wrote " << path << " (" << file.tensors.size() << " tensors)\n";
  return 0;
}

inline int cmd_weights_inspect(const std::string& path, std::ostream& out) {
  const auto file = io::load_weights(path);
  const auto cfg = io::read_config(file);
  out << "bits=" << cfg.bits << " granularity=" << cfg.granularity << '\n' << io::describe(file);
  (void)io::decode_featnet(file);
  if (io::has_actors(file)) (void)io::decode_actors(file);
  return 0;
}

}  // namespace pcreg::app

// Command-line front end. Exit codes: 0 success, 1 runtime error,
// 2 usage error, 3 infeasible DSE budget.

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "pcreg/app.hpp"

namespace {

void add_pair_options(CLI::App& cmd, pcreg::app::PairOptions& p) {
  cmd.add_option("-N,--points", p.spec.n, "points per cloud")->check(CLI::Range(4, 1 << 24));
  cmd.add_option("--theta-max", p.spec.theta_max_deg, "max Euler angle per axis (degrees)");
  cmd.add_option("--t-max", p.spec.t_max, "max translation per axis");
  cmd.add_option("--noise-std", p.spec.r_std, "jitter standard deviation");
  cmd.add_option("--noise-clip", p.spec.r_clip, "jitter clip");
  cmd.add_option("--seed", p.spec.seed, "random seed");
  cmd.add_option("--shape", p.shape, "synthetic shape: sphere, box, table");
  cmd.add_option("--base", p.base_file, "base cloud file instead of a synthetic shape");
  cmd.add_option("--base-points", p.base_points, "points in the synthetic base (default 2N)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pcreg: quantized point cloud registration and accelerator design-space exploration"};
  app.require_subcommand(1);

  pcreg::app::PairOptions gen_opts;
  std::string gen_prefix = "pair";
  auto* gen = app.add_subcommand("gen", "generate a source/template pair with ground truth");
  add_pair_options(*gen, gen_opts);
  gen->add_option("--out", gen_prefix, "output prefix");

  pcreg::app::RegisterOptions reg;
  std::string method = "pointlk", backbone = "moments", jacobian = "central";
  auto* regc = app.add_subcommand("register", "register a pair and print the per-iteration trace");
  add_pair_options(*regc, reg.pair);
  regc->add_option("--method", method, "pointlk, reagent or icp");
  regc->add_option("--backbone", backbone, "moments or pointnet");
  regc->add_option("--jacobian", jacobian, "backward, forward, central or five_point");
  regc->add_option("--bits", reg.bits, "quantization bit width")->check(CLI::Range(4, 10));
  regc->add_option("--tile", reg.tile, "points per feature-extractor tile");
  regc->add_option("--iters", reg.iters, "maximum iterations");
  regc->add_option("--weights", reg.weights_file, "weight file");
  regc->add_option("--moment-order", reg.moment_order, "moment backbone order")->check(CLI::Range(1, 3));
  regc->add_option("--source", reg.source_file, "source cloud file");
  regc->add_option("--template", reg.template_file, "template cloud file");
  regc->add_option("--truth", reg.truth_file, "ground-truth transform file");

  pcreg::app::BenchmarkOptions bench;
  std::vector<std::string> bench_methods;
  std::string bench_backbone = "moments";
  auto* benc = app.add_subcommand("benchmark", "time registration over point counts (CSV)");
  benc->add_option("--sizes", bench.sizes, "point counts")->delimiter(',');
  benc->add_option("--methods", bench_methods, "methods to run")->delimiter(',');
  benc->add_option("--backbone", bench_backbone, "moments or pointnet");
  benc->add_option("--trials", bench.trials, "trials per size")->check(CLI::PositiveNumber);
  benc->add_option("--seed", bench.seed, "random seed");
  benc->add_option("--theta-max", bench.theta_max_deg, "max Euler angle per axis (degrees)");
  benc->add_option("--t-max", bench.t_max, "max translation per axis");
  benc->add_option("--bits", bench.bits, "quantization bit width")->check(CLI::Range(4, 10));

  pcreg::app::DseOptions dse_opts;
  std::string model = "pointlk";
  auto* dsec = app.add_subcommand("dse", "search tiling and parallelism under a resource budget");
  dsec->add_option("--model", model, "pointlk or reagent");
  dsec->add_option("--config", dse_opts.config_file, "model constants and budget");
  dsec->add_option("--out", dse_opts.frontier_csv, "write every evaluated point as CSV");
  dsec->add_option("--max-tile", dse_opts.max_tile, "largest tile size B")->check(CLI::Range(1, 4096));
  std::string cal_in, cal_out;
  auto* calc = dsec->add_subcommand("calibrate", "fit latency constants to the reference design points");
  calc->add_option("--out", cal_out, "write the fitted config here");

  std::uint64_t w_seed = 0;
  int w_bits = pcreg::quant::kDefaultBits;
  bool w_no_actors = false;
  std::string w_out = "weights.rgkw", w_in;
  auto* wc = app.add_subcommand("weights", "weight file utilities");
  wc->require_subcommand(1);
  auto* wgen = wc->add_subcommand("gen-random", "write a deterministic random model");
  wgen->add_option("--seed", w_seed, "random seed");
  wgen->add_option("--bits", w_bits, "quantization bit width")->check(CLI::Range(4, 10));
  wgen->add_flag("--no-actors", w_no_actors, "omit the actor heads");
  wgen->add_option("--out", w_out, "output path");
  auto* winsp = wc->add_subcommand("inspect", "validate a weight file and list its tensors");
  winsp->add_option("file", w_in, "weight file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  namespace a = pcreg::app;
  try {
    if (*gen) return a::cmd_gen(gen_opts, gen_prefix, std::cout);
    if (*regc) {
      reg.method = a::parse_method(method);
      reg.backbone = a::parse_backbone(backbone);
      reg.jacobian = pcreg::pointlk::parse_jacobian_method(jacobian);
      return a::cmd_register(reg, std::cout);
    }
    if (*benc) {
      if (!bench_methods.empty()) {
        bench.methods.clear();
        for (const auto& m : bench_methods) bench.methods.push_back(a::parse_method(m));
      }
      bench.backbone = a::parse_backbone(bench_backbone);
      return a::cmd_benchmark(bench, std::cout);
    }
    if (*dsec) {
      if (*calc) return a::cmd_dse_calibrate(dse_opts.config_file, cal_out, std::cout);
      dse_opts.core = pcreg::dse::parse_core(model);
      return a::cmd_dse(dse_opts, std::cout, std::cerr);
    }
    if (*wgen) return a::cmd_weights_gen_random(w_seed, w_bits, !w_no_actors, w_out, std::cout);
    if (*winsp) return a::cmd_weights_inspect(w_in, std::cout);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "pcreg/dse.hpp"

using namespace pcreg::dse;

namespace {

// Integer re-derivation of the block count without the library's helpers.
std::int64_t blocks_by_hand(std::int64_t s, std::int64_t w, std::int64_t p, std::int64_t capacity,
                            std::int64_t width) {
  std::int64_t lanes = 0;
  while (lanes * width < w) ++lanes;
  const std::int64_t per_bank = p * lanes * capacity;
  std::int64_t depth = 0;
  while (depth * per_bank < s * w) ++depth;
  return p * depth * lanes;
}

ModelConstants calibrated() { return calibrate(ModelConstants{}, ResourceBudget{}); }

}  // namespace

TEST(BramBlocks, Examples) {
  EXPECT_EQ(bram_blocks(131072, 8, 2), 58);
  EXPECT_EQ(bram_blocks(1, 8, 1), 1);
  EXPECT_EQ(bram_blocks(1024, 72, 1), 4);  // two 36-bit lanes, two blocks deep
  EXPECT_THROW((void)bram_blocks(0, 8, 1), std::invalid_argument);
  EXPECT_THROW((void)uram_blocks(1, 0, 1), std::invalid_argument);
}

TEST(BramBlocks, MatchesHandDerivationAndIsMonotoneInPartition) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::int64_t> us(1, 300000), uw(1, 80), up(1, 64);
  for (int i = 0; i < 1000; ++i) {
    const auto s = us(rng), w = uw(rng), p = up(rng);
    EXPECT_EQ(bram_blocks(s, w, p), blocks_by_hand(s, w, p, 18 * 1024, 36));
    EXPECT_EQ(uram_blocks(s, w, p), blocks_by_hand(s, w, p, 288 * 1024, 72));
    EXPECT_LE(bram_blocks(s, w, p), bram_blocks(s, w, 2 * p));
  }
}

TEST(BufferBits, Examples) {
  EXPECT_EQ(lut_size(8, 9), 2296);
  EXPECT_EQ(quantconv_buffer_bits(128, 1024, 8, 8, 32, 9), 1048576 + 18368 + 32768 + 32);
  EXPECT_EQ(quantconv_buffer_bits(128, 1024, 8, 8, 32, 9), 1099744);
  EXPECT_EQ(conv_buffer_bits(128, 1024, 32), 4227072);
}

TEST(BufferBits, QuantizedSmallerExactlyUpTo14ActivationBits) {
  const auto full = conv_buffer_bits(128, 1024, 32);
  for (int ba = 1; ba <= 20; ++ba) {
    EXPECT_EQ(quantconv_buffer_bits(128, 1024, 8, ba, 32, 9) < full, ba <= 14) << ba;
  }
}

TEST(FeatnetCycles, Examples) {
  EXPECT_DOUBLE_EQ(featnet_cycles(8, 1, {10, 20, 40}), 350.0);
  EXPECT_DOUBLE_EQ(featnet_cycles(64, 8, {10, 20, 40}), 350.0);
  EXPECT_DOUBLE_EQ(featnet_cycles(64, 64, {10, 20, 40}), 70.0);
  EXPECT_DOUBLE_EQ(featnet_cycles(10, 3, {5}), 4 * 5.0);
  EXPECT_EQ(featnet_bytes(1024), 16384);
}

TEST(CoreModels, Arithmetic) {
  EXPECT_EQ(pointlk_bytes(12, 10, 1024), 23 * 16384 + 11 * 48);
  EXPECT_EQ(pointlk_bytes(12, 10, 1024), 377360);
  EXPECT_EQ(pointlk_bytes(6, 0, 1024), 7 * 16384 + 48);
  EXPECT_EQ(reagent_bytes(10, 1024), 11 * 16384 + 11 * 48);
  EXPECT_DOUBLE_EQ(pointlk_cycles(100, 12, 0, 50, 7), 13 * 100 + 50);
  EXPECT_DOUBLE_EQ(pointlk_cycles(100, 12, 20, 50, 7), 13 * 100 + 50 + 20 * 107);
  EXPECT_DOUBLE_EQ(reagent_cycles(100, 10, 30), 100 + 10 * 160);
}

TEST(Evaluate, RejectsIndivisibleFactors) {
  const ModelConstants k;
  const ResourceBudget b;
  EXPECT_THROW((void)evaluate(Core::pointlk, 4, 3, 8, 0, k, b), std::invalid_argument);
  EXPECT_THROW((void)evaluate(Core::pointlk, 4, 2, 3, 0, k, b), std::invalid_argument);
  EXPECT_THROW((void)evaluate(Core::reagent, 4, 2, 8, 3, k, b), std::invalid_argument);
  EXPECT_THROW((void)evaluate(Core::reagent, 4, 2, 8, 0, k, b), std::invalid_argument);
}

TEST(Evaluate, StageCyclesFollowLoopModel) {
  const ModelConstants k;
  const auto d = evaluate(Core::pointlk, 2, 2, 512, 0, k, ResourceBudget{});
  ASSERT_EQ(d.pipeline.size(), 7u);
  const Stage& star = d.pipeline[5];
  EXPECT_EQ(star.pp, 2);
  EXPECT_EQ(star.po, 512);
  // One outer iteration over rows and two over outputs, each running the 128-deep loop.
  EXPECT_DOUBLE_EQ(star.cycles, stage_cycles(StageKind::quantconv, 128, 1024, 2, 2, 512, k));
  EXPECT_DOUBLE_EQ(star.dsp, 1.0 * 2 * 512);
  double peak = 0, sum = 0;
  for (const auto& s : d.pipeline) {
    peak = std::max(peak, s.cycles);
    sum += s.cycles;
  }
  EXPECT_DOUBLE_EQ(d.featnet_cycles, 511 * peak + sum);
}

TEST(Evaluate, DisplayedTableTwoPointsAreFeasible) {
  const auto k = calibrated();
  const ResourceBudget budget;
  const auto lk = evaluate(Core::pointlk, 2, 2, 512, 0, k, budget);
  const auto ra = evaluate(Core::reagent, 14, 14, 64, 128, k, budget);
  EXPECT_TRUE(lk.feasible);
  EXPECT_TRUE(ra.feasible);
  EXPECT_LE(lk.dsp, 0.8 * 1728);
  EXPECT_LE(lk.bram, 0.8 * 312);
  EXPECT_LE(ra.uram, 0.8 * 96);
  EXPECT_GT(ra.uram, 0.0);
  EXPECT_EQ(lk.uram, 0.0);
}

TEST(Evaluate, MonotoneInUnrollFactors) {
  const ModelConstants k;
  const ResourceBudget b;
  for (std::int64_t B : {1, 2, 4, 6, 8, 12}) {
    const auto ds = divisors(B);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      for (std::int64_t po = 1; po < 1024; po *= 2) {
        const auto base = evaluate(Core::pointlk, B, ds[i], po, 0, k, b);
        const auto wider = evaluate(Core::pointlk, B, ds[i], 2 * po, 0, k, b);
        EXPECT_LE(wider.cycles, base.cycles) << B << ' ' << ds[i] << ' ' << po;
        EXPECT_GE(wider.dsp, base.dsp) << B << ' ' << ds[i] << ' ' << po;
        if (i + 1 < ds.size()) {
          const auto deeper = evaluate(Core::pointlk, B, ds[i + 1], po, 0, k, b);
          EXPECT_LE(deeper.cycles, base.cycles) << B << ' ' << ds[i] << ' ' << po;
          EXPECT_GE(deeper.dsp, base.dsp) << B << ' ' << ds[i] << ' ' << po;
        }
      }
    }
  }
}

TEST(Explore, MatchesIndependentScan) {
  const auto k = calibrated();
  const ResourceBudget budget;
  Grid grid;
  grid.B = {1, 2, 3, 4, 6, 8, 14, 16};
  for (std::int64_t p = 1; p <= 1024; p *= 2) grid.P_o.push_back(p);
  grid.P_actor = {16, 32, 64, 128, 256};
  for (Core core : {Core::pointlk, Core::reagent}) {
    const auto ex = explore(budget, core, k, grid);
    ASSERT_TRUE(ex.best.has_value());
    double best = std::numeric_limits<double>::infinity();
    std::size_t n_best = 0, points = 0;
    for (std::int64_t b : grid.B)
      for (std::int64_t pp = 1; pp <= b; ++pp) {
        if (b % pp != 0) continue;
        for (std::int64_t po : grid.P_o)
          for (std::int64_t pa : core == Core::reagent ? grid.P_actor : std::vector<std::int64_t>{0}) {
            ++points;
            const auto d = evaluate(core, b, pp, po, pa, k, budget);
            const bool ok = d.dsp <= 0.8 * budget.dsp && d.bram <= 0.8 * budget.bram && d.uram <= 0.8 * budget.uram;
            EXPECT_EQ(ok, d.feasible);
            if (!ok) continue;
            if (d.cycles < best) {
              best = d.cycles;
              n_best = 1;
            } else if (d.cycles == best) {
              ++n_best;
            }
          }
      }
    EXPECT_LE(points, 10000u);
    EXPECT_EQ(ex.frontier.size(), points);
    EXPECT_EQ(ex.best->cycles, best);
    for (const auto& d : ex.frontier)
      if (d.feasible) {
        EXPECT_FALSE(better(d, *ex.best));
      }
    EXPECT_GE(n_best, 1u);
  }
}

TEST(Explore, RelaxingCapNeverHurts) {
  const auto k = calibrated();
  Grid grid;
  grid.B = {1, 2, 4, 8, 16};
  for (std::int64_t p = 1; p <= 1024; p *= 4) grid.P_o.push_back(p);
  grid.P_actor = {32, 128};
  for (Core core : {Core::pointlk, Core::reagent}) {
    ResourceBudget tight, loose;
    loose.cap = 1.0;
    const auto a = explore(tight, core, k, grid, false);
    const auto b = explore(loose, core, k, grid, false);
    ASSERT_TRUE(a.best && b.best);
    EXPECT_LE(b.best->cycles, a.best->cycles);
    EXPECT_TRUE(a.frontier.empty());
  }
}

TEST(Explore, ZeroDspBudgetIsInfeasible) {
  ResourceBudget none;
  none.dsp = 0;
  Grid grid;
  grid.B = {1, 2};
  grid.P_o = {1, 2};
  grid.P_actor = {1};
  EXPECT_FALSE(explore(none, Core::pointlk, ModelConstants{}, grid).best.has_value());
  EXPECT_FALSE(explore(none, Core::reagent, ModelConstants{}, grid).best.has_value());
}

TEST(Explore, StandardPointLkSearchLandsOnTableTwo) {
  const auto k = calibrated();
  Grid grid = Grid::standard(16);
  const auto ex = explore(ResourceBudget{}, Core::pointlk, k, grid, false);
  ASSERT_TRUE(ex.best);
  EXPECT_EQ(ex.best->B, 2);
  EXPECT_EQ(ex.best->P_p, 2);
  EXPECT_EQ(ex.best->P_o, 512);
}

TEST(Calibrate, RuntimesInReportedRange) {
  const auto k = calibrated();
  const ResourceBudget b;
  const double lk = evaluate(Core::pointlk, 2, 2, 512, 0, k, b).milliseconds(k);
  const double ra = evaluate(Core::reagent, 14, 14, 64, 128, k, b).milliseconds(k);
  EXPECT_GE(lk, 20.0);
  EXPECT_LE(lk, 28.0);
  EXPECT_GE(ra, 9.0);
  EXPECT_LE(ra, 14.0);
  EXPECT_EQ(k.c_loop, std::round(k.c_loop));
}

TEST(Roofline, PublishedRates) {
  const auto lk = roofline_from_rates(404.8e9, 5.7e13);
  EXPECT_EQ(lk.bound, Bound::compute);
  EXPECT_EQ(lk.perf, 404.8e9);
  const auto ra = roofline_from_rates(280.6e9, 5.25e13);
  EXPECT_EQ(ra.bound, Bound::compute);
  EXPECT_EQ(ra.perf, 280.6e9);
}

TEST(Roofline, FromModelQuantities) {
  const auto r = roofline(1e9, 2e6, 1e5, 200e6, 3.2e9);
  EXPECT_DOUBLE_EQ(r.cp, 1e9 / (2e6 / 200e6));
  EXPECT_DOUBLE_EQ(r.ctc_bw, 1e9 / 1e5 * 3.2e9);
  EXPECT_EQ(r.bound, Bound::compute);
  const auto m = roofline(1e9, 2e6, std::numeric_limits<double>::infinity(), 200e6, 3.2e9);
  EXPECT_EQ(m.bound, Bound::memory);
  EXPECT_EQ(m.perf, 0.0);
  EXPECT_THROW((void)roofline(0, 1, 1, 1, 1), std::invalid_argument);
}

TEST(Config, RoundTrip) {
  ModelConstants k = calibrated();
  k.bits = 6;
  ResourceBudget b;
  b.cap = 0.9;
  std::stringstream ss;
  write_config(ss, k, b);
  ModelConstants k2;
  ResourceBudget b2;
  read_config(ss, k2, b2);
  EXPECT_EQ(k2.c_loop, k.c_loop);
  EXPECT_EQ(k2.c_pinv, k.c_pinv);
  EXPECT_EQ(k2.c_update, k.c_update);
  EXPECT_EQ(k2.bits, 6);
  EXPECT_EQ(b2.cap, 0.9);
}

TEST(Config, RejectsMalformedInput) {
  ModelConstants k;
  ResourceBudget b;
  std::istringstream unknown("c_loop = 3\nwarp = 9\n");
  EXPECT_THROW(read_config(unknown, k, b), std::invalid_argument);
  std::istringstream bad("c_loop = three\n");
  EXPECT_THROW(read_config(bad, k, b), std::invalid_argument);
  std::istringstream no_eq("c_loop 3\n");
  EXPECT_THROW(read_config(no_eq, k, b), std::invalid_argument);
  std::istringstream cap("cap = 1.5\n");
  EXPECT_THROW(read_config(cap, k, b), std::invalid_argument);
  std::istringstream ok("# comment\n\n c_loop = 7 # trailing\n");
  b = ResourceBudget{};
  EXPECT_NO_THROW(read_config(ok, k, b));
  EXPECT_EQ(k.c_loop, 7.0);
}

TEST(FrontierCsv, HeaderAndUniqueArgmin) {
  const auto k = calibrated();
  Grid grid;
  grid.B = {1, 2, 4};
  grid.P_o = {64, 256, 512};
  const auto ex = explore(ResourceBudget{}, Core::pointlk, k, grid);
  std::ostringstream out;
  write_frontier_csv(out, ex.frontier, k);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "B,P_p,P_o,P_actor,C_cycles,ms,DSP,BRAM,URAM,feasible");
  std::size_t rows = 0, argmin_rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    ASSERT_EQ(cells.size(), 10u);
    if (std::stoll(cells[0]) == ex.best->B && std::stoll(cells[1]) == ex.best->P_p &&
        std::stoll(cells[2]) == ex.best->P_o && cells[9] == "1")
      ++argmin_rows;
  }
  EXPECT_EQ(rows, ex.frontier.size());
  EXPECT_EQ(argmin_rows, 1u);
}

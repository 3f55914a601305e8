#include "gridshaper/controller.hpp"
#include "gridshaper/io.hpp"
#include "gridshaper/pnp.hpp"
#include "gridshaper/scenario.hpp"

#include <benchmark/benchmark.h>

using namespace gridshaper;

namespace {

const std::string kData = GRIDSHAPER_DATA_DIR;

struct Setup {
  NetworkModel model = load_network(kData + "/feeders/feeder12.json");
  RadialTopology topo = RadialTopology::build(model);
  ControllerConfig config = load_config(kData + "/config/default.json");
  ReferenceTrajectory reference = solve_stage1(model, topo, config);

  std::vector<double> soc(int k) const {
    std::vector<double> out;
    for (std::size_t b = 0; b < model.batteries.size(); ++b) out.push_back(reference.battery_soc(k, static_cast<int>(b)));
    return out;
  }

  Fleet fleet(int loads, int k) const {
    Fleet f;
    for (int j = 0; j < loads; ++j)
      f.add_shapeable({"ev" + std::to_string(j), 1 + (3 * j) % 12, 0.02, 0.0, 1.0, 0.14, 0.06, 0.9, k, k + 20});
    return f;
  }
};

const Setup& setup() {
  static const Setup s;
  return s;
}

void BM_Stage1(benchmark::State& state) {
  const auto& s = setup();
  ControllerConfig cfg = s.config;
  cfg.horizon.N_r = static_cast<int>(state.range(0));
  cfg.price = PriceSignal::time_of_use(cfg.horizon.dt, cfg.horizon.N_r);
  for (auto _ : state) benchmark::DoNotOptimize(solve_stage1(s.model, s.topo, cfg));
}
BENCHMARK(BM_Stage1)->Arg(48)->Arg(96)->Unit(benchmark::kMillisecond);

void BM_Stage2(benchmark::State& state) {
  const auto& s = setup();
  const int k = 30;
  const Fleet fleet = s.fleet(static_cast<int>(state.range(0)), k);
  const auto soc = s.soc(k);
  for (auto _ : state) benchmark::DoNotOptimize(solve_stage2(s.model, s.topo, fleet, s.reference, s.config, soc, k));
}
BENCHMARK(BM_Stage2)->Arg(0)->Arg(4)->Arg(12)->Unit(benchmark::kMillisecond);

void BM_AdmitDeferrable(benchmark::State& state) {
  const auto& s = setup();
  const int k = 20;
  const ControllerContext ctx{s.model, s.topo, s.config, s.reference};
  const SystemState sys{k, s.fleet(4, k), s.soc(k)};
  PlugRequest req;
  req.kind = RequestKind::Deferrable;
  req.step = k;
  req.deferrable.id = "dryer";
  req.deferrable.bus = 6;
  req.deferrable.profile = {0.05, 0.05, 0.05, 0.05};
  req.deferrable.request_step = k;
  req.deferrable.d_max = 4;
  for (auto _ : state) benchmark::DoNotOptimize(admit(req, sys, ctx));
}
BENCHMARK(BM_AdmitDeferrable)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();

#include <benchmark/benchmark.h>

#include "qscf/net_harness.hpp"
#include "qscf/security_analysis.hpp"

using namespace qscf;

namespace {

ScenarioConfig table1_scenario(std::uint64_t k = 50000) {
  ScenarioConfig sc;
  sc.source = SourceSpec{SourceKind::Sps, 0.0013, 0.03};
  sc.link = LinkBudget{0.0, 0.5, 0.85, 4e-7, 0.028};
  sc.pulses_per_flip = k;
  sc.state_param_a = 0.9;
  sc.clock_hz = 80e6;
  sc.rng = ScenarioRng::from_master_seed(1);
  return sc;
}

void BM_HonestFlip(benchmark::State& state) {
  const ScenarioConfig sc = table1_scenario();
  const FlipModel model = FlipModel::build(sc);
  RngBundle rng = RngBundle::open(sc.rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_honest_flip(model, rng));
  }
}
BENCHMARK(BM_HonestFlip);

void BM_Session10k(benchmark::State& state) {
  const ScenarioConfig sc = table1_scenario();
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_session(sc, 10000));
  }
  state.SetItemsProcessed(state.iterations() * 10000);
}
BENCHMARK(BM_Session10k);

void BM_QuantumGain(benchmark::State& state) {
  const ScenarioConfig sc = table1_scenario();
  for (auto _ : state) {
    benchmark::DoNotOptimize(quantum_gain(sc));
  }
}
BENCHMARK(BM_QuantumGain);

void BM_SolveFairA(benchmark::State& state) {
  const PhotonStatistics stats = sps_statistics(0.0013, 0.03);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_fair_a(stats, 50000));
  }
}
BENCHMARK(BM_SolveFairA);

void BM_SamplePhotonNumber(benchmark::State& state) {
  const PhotonStatistics stats = wcp_statistics(0.0013);
  BitSource rng = BitSource::seeded(2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_photon_number(stats, rng));
  }
}
BENCHMARK(BM_SamplePhotonNumber);

void BM_FrameRoundTrip(benchmark::State& state) {
  net::WireFrame f;
  f.type = net::FrameType::Challenge;
  f.round_id = 17;
  f.payload["j"] = 17;
  f.payload["b"] = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(net::decode_frame(net::encode_frame(f)));
  }
}
BENCHMARK(BM_FrameRoundTrip);

void BM_PackLabels(benchmark::State& state) {
  BitSource bits = BitSource::seeded(9);
  std::vector<StateLabel> labels(state.range(0));
  for (auto& l : labels) l = draw_state_choice(bits);
  for (auto _ : state) {
    benchmark::DoNotOptimize(net::pack_labels(labels));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PackLabels)->Arg(2000)->Arg(50000);

}  // namespace

BENCHMARK_MAIN();

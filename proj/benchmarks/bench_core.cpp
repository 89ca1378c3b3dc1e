#include <benchmark/benchmark.h>

#include "ozlab/cluster_geometry.hpp"
#include "ozlab/estimator.hpp"
#include "ozlab/polymer.hpp"
#include "ozlab/rc_measure.hpp"
#include "ozlab/rng.hpp"
#include "ozlab/sampler.hpp"
#include "ozlab/transfer.hpp"

namespace {

using namespace oz;

void BM_ComponentLabeling(benchmark::State& state) {
  LatticeSpec spec{3, 32, false};
  auto edges = edges_of_box(spec);
  Rng rng(7);
  BondConfig config;
  config.open.resize(edges.size());
  for (auto& o : config.open) o = rng.bernoulli(0.7) ? 1 : 0;
  for (auto _ : state) {
    Components comps = components(config, spec);
    benchmark::DoNotOptimize(comps.clusters.size());
  }
}
BENCHMARK(BM_ComponentLabeling)->Unit(benchmark::kMillisecond);

void BM_SwendsenWangSweep(benchmark::State& state) {
  LatticeSpec spec{2, 32, false};
  RCParams params{2.0, 0.6};
  RCSampler sampler(spec, params, BoundaryCondition::free_(), Dynamics::swendsen_wang);
  ChainState chain = sampler.make_chain(11);
  for (auto _ : state) {
    sampler.sweep(chain);
    benchmark::DoNotOptimize(chain.config.open.data());
  }
}
BENCHMARK(BM_SwendsenWangSweep)->Unit(benchmark::kMicrosecond);

void BM_ChayesMachtaSweep(benchmark::State& state) {
  LatticeSpec spec{2, 32, false};
  RCParams params{1.5, 0.6};
  RCSampler sampler(spec, params, BoundaryCondition::free_(), Dynamics::chayes_machta);
  ChainState chain = sampler.make_chain(13);
  for (auto _ : state) {
    sampler.sweep(chain);
    benchmark::DoNotOptimize(chain.config.open.data());
  }
}
BENCHMARK(BM_ChayesMachtaSweep)->Unit(benchmark::kMicrosecond);

void BM_ExactEnumeration(benchmark::State& state) {
  LatticeSpec spec{2, 3, false};
  RCParams params{1.5, 0.55};
  Event event = [](const BondConfig& c) { return c.count_open() >= 6; };
  for (auto _ : state) {
    double v = exact_probability(event, spec, params, BoundaryCondition::free_());
    benchmark::DoNotOptimize(v);
  }
}
BENCHMARK(BM_ExactEnumeration)->Unit(benchmark::kMillisecond);

void BM_PolymerCounting(benchmark::State& state) {
  for (auto _ : state) {
    PlaquetteCounts counts = count_plaquette_polymers(5);
    benchmark::DoNotOptimize(counts.by_stars.data());
  }
}
BENCHMARK(BM_PolymerCounting)->Unit(benchmark::kMillisecond);

void BM_RenewalMass(benchmark::State& state) {
  Alphabet alpha = builtin_alphabet_d3();
  Potential pot;
  RVec t = RVec::axis(3, 0);
  for (auto _ : state) {
    RenewalMassTable table = renewal_mass(alpha, pot, t, 100);
    benchmark::DoNotOptimize(table.level_mass.data());
  }
}
BENCHMARK(BM_RenewalMass)->Unit(benchmark::kMillisecond);

void BM_ClusterGrowth(benchmark::State& state) {
  Vec x = Vec::unit(2, 0) * 3;
  LatticeSpec spec = connectivity_box(x);
  RCParams params{1.0, 0.6};
  uint64_t seed = 21;
  for (auto _ : state) {
    ConnectivityRow row = finite_two_point_mc(x, spec, params, BoundaryCondition::free_(),
                                              10000, seed++);
    benchmark::DoNotOptimize(row.estimate);
  }
}
BENCHMARK(BM_ClusterGrowth)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

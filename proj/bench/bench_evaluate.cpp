#include <benchmark/benchmark.h>

#include "cbm/harness.hpp"

namespace {

struct Fixture {
  cbm::EmbeddingDataset novel;
  cbm::BaseMatrix base;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    cbm::SyntheticSpec spec;
    spec.dim = 128;
    spec.base_classes = 64;
    spec.base_samples = 20;
    spec.novel_samples = 40;
    spec.novel_noise = 0.5;
    auto [b, n] = cbm::generate_synthetic(spec, 1);
    cbm::BaseMatrix base = cbm::build_base_matrix(b);
    return Fixture{std::move(n), std::move(base)};
  }();
  return f;
}

cbm::Method method_for(int which) {
  switch (which) {
    case 0: return cbm::InductiveMethod{};
    case 1: return cbm::CbmMethod{cbm::CbmConfig::defaults()};
    default: return cbm::CbmLleMethod{cbm::LleConfig{}, cbm::CbmConfig::defaults()};
  }
}

const cbm::ProtocolConfig kProtocol{5, 1, 15, 200, 0};

void BM_EvaluateSerial(benchmark::State& state) {
  const auto& f = fixture();
  const auto method = method_for(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(cbm::evaluate_serial(f.novel, f.base, method, kProtocol));
  state.SetItemsProcessed(state.iterations() * kProtocol.n_tasks);
}

void BM_EvaluateParallel(benchmark::State& state) {
  const auto& f = fixture();
  const auto method = method_for(static_cast<int>(state.range(0)));
  const cbm::EvalOptions options{static_cast<int>(state.range(1))};
  for (auto _ : state) benchmark::DoNotOptimize(cbm::evaluate(f.novel, f.base, method, kProtocol, options));
  state.SetItemsProcessed(state.iterations() * kProtocol.n_tasks);
}

}  // namespace

// range(0): 0 inductive, 1 cbm, 2 cbm-lle
BENCHMARK(BM_EvaluateSerial)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateParallel)->ArgsProduct({{0, 1, 2}, {1, 2, 4}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

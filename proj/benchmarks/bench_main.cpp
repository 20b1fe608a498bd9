#include <benchmark/benchmark.h>

#include <random>

#include "dtc/admm.hpp"
#include "dtc/dataset.hpp"
#include "dtc/sampling.hpp"

namespace {

dtc::Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  dtc::Matrix M(rows, cols);
  for (Eigen::Index i = 0; i < M.size(); ++i) M.data()[i] = normal(rng);
  return M;
}

void BM_KhatriRao(benchmark::State& state) {
  const auto rows = static_cast<Eigen::Index>(state.range(0));
  const dtc::Matrix M = gaussian(rows, 8, 1), N = gaussian(72, 8, 2);
  for (auto _ : state) benchmark::DoNotOptimize(dtc::khatri_rao(M, N));
}
BENCHMARK(BM_KhatriRao)->Arg(5)->Arg(64)->Arg(263);

void BM_Reconstruct(benchmark::State& state) {
  const auto I = static_cast<Eigen::Index>(state.range(0));
  const dtc::FactorTriple f(gaussian(I, 7, 1), gaussian(5, 7, 2), gaussian(72, 7, 3));
  for (auto _ : state) benchmark::DoNotOptimize(dtc::reconstruct(f));
}
BENCHMARK(BM_Reconstruct)->Arg(87)->Arg(263);

struct AreaFixture {
  dtc::MaskedTensor3 tensor;
  dtc::UpdateWorkspace ws;
  dtc::AdmmAreaState state;
  dtc::NeighborMatrices nb_B, nb_C;
  dtc::AdmmConfig cfg;

  explicit AreaFixture(std::size_t phases) {
    const dtc::Dims3 d{phases, 5, 72};
    auto data = dtc::synthesize_lowrank(d, 7, 3).truth;
    dtc::Mask3 mask(d);
    std::mt19937_64 rng(4);
    std::bernoulli_distribution keep(0.3);
    for (auto& v : mask.values()) v = keep(rng);
    tensor = dtc::MaskedTensor3(std::move(data), std::move(mask));
    ws = dtc::UpdateWorkspace(tensor);
    cfg.rank = 7;
    state = dtc::make_area_state(
        dtc::FactorTriple(gaussian(static_cast<Eigen::Index>(phases), 7, 5), gaussian(5, 7, 6),
                          gaussian(72, 7, 7)),
        {1, 2});
    for (std::size_t n : {1, 2}) {
      nb_B[n] = gaussian(5, 7, 10 + n);
      nb_C[n] = gaussian(72, 7, 20 + n);
    }
  }
};

void BM_UpdateA(benchmark::State& state) {
  AreaFixture fx(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(dtc::update_a(fx.ws, fx.state, fx.cfg));
}
BENCHMARK(BM_UpdateA)->Arg(87)->Arg(263);

void BM_PrimalStep(benchmark::State& state) {
  AreaFixture fx(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    dtc::AdmmAreaState s = fx.state;
    dtc::primal_step(fx.ws, s, fx.nb_B, fx.nb_C, fx.cfg);
    benchmark::DoNotOptimize(s.C.data());
  }
}
BENCHMARK(BM_PrimalStep)->Arg(87)->Arg(263);

void BM_AdmmRounds(benchmark::State& state) {
  const dtc::Dims3 d{60, 5, 72};
  const auto truth = dtc::synthesize_lowrank(d, 4, 1).truth;
  const auto p = dtc::Partition::contiguous({20, 20, 20}, dtc::Partition::chain(3));
  dtc::SamplingScheme s;
  s.areas.resize(3);
  for (std::size_t a = 0; a < 3; ++a)
    s.areas[a].components.push_back(dtc::FrontalSlab{dtc::one_based_range(1 + 4 * a, 6, 72)});
  const dtc::MaskedTensor3 t(truth, dtc::build_mask(p, s, d));
  dtc::AdmmConfig cfg;
  cfg.rank = 4;
  cfg.max_iters = static_cast<std::size_t>(state.range(0));
  cfg.kkt_tol = 1e-300;
  cfg.init_restarts = 1;
  cfg.init_iters = 20;
  for (auto _ : state) benchmark::DoNotOptimize(dtc::run_admm(t, p, cfg).iterations);
}
BENCHMARK(BM_AdmmRounds)->Arg(10)->Arg(50)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

// Serial reference kernels against their OpenMP versions. Run with
// --benchmark_filter to select a kernel; the thread count follows
// OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "kamtori/evaluate.hpp"
#include "kamtori/kernels.hpp"
#include "kamtori/series.hpp"

using namespace kamtori;

namespace {

Series dense_series(std::mt19937_64& rng, Dims d, int deg, int K) {
  Series s(d, deg, K);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const Mode& k : modes_in_ball(d.n, K, true)) {
    for (std::size_t i = 0; i < s.block_size(); ++i) s.add_term(k, i, cplx(u(rng), u(rng)));
  }
  return s;
}

void BM_Convolve(benchmark::State& state, bool parallel) {
  std::mt19937_64 rng(1);
  const Dims d{2, 1, 1};
  const int K = static_cast<int>(state.range(0));
  const Series a = dense_series(rng, d, 2, K);
  const Series b = dense_series(rng, d, 2, K);
  for (auto _ : state) {
    Series kept(d, 4, 2 * K), tail(d, 4, 2 * K);
    if (parallel) {
      kernels::convolve_parallel(a, b, 4, 2 * K, kept, tail);
    } else {
      kernels::convolve_serial(a, b, 4, 2 * K, kept, tail);
    }
    benchmark::DoNotOptimize(kept);
  }
  state.counters["threads"] = parallel ? kernels::thread_count() : 1;
}

void BM_Sieve(benchmark::State& state, bool parallel) {
  const auto count = static_cast<std::size_t>(state.range(0));
  std::vector<double> omegas(2 * count);
  for (std::size_t i = 0; i < count; ++i) {
    omegas[2 * i] = 1.0;
    omegas[2 * i + 1] = 1.0 + (static_cast<double>(i) + 0.5) / static_cast<double>(count);
  }
  std::vector<Mode> modes;
  for (const Mode& k : modes_in_ball(2, 30, false))
    if (is_representative(k)) modes.push_back(k);
  std::vector<std::uint8_t> mask(count);
  for (auto _ : state) {
    if (parallel) {
      kernels::sieve_mask_parallel(omegas, 2, modes, 0.01, 2.0, mask);
    } else {
      kernels::sieve_mask_serial(omegas, 2, modes, 0.01, 2.0, mask);
    }
    benchmark::DoNotOptimize(mask.data());
  }
  state.counters["threads"] = parallel ? kernels::thread_count() : 1;
}

void BM_Evaluate(benchmark::State& state, bool parallel) {
  std::mt19937_64 rng(2);
  const Dims d{2, 1, 1};
  std::vector<Series> comps;
  for (int c = 0; c < d.phase_dim(); ++c) comps.push_back(dense_series(rng, d, 2, 8));
  const FieldEvaluator field(comps);
  const auto count = static_cast<std::size_t>(state.range(0));
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  std::vector<double> states(count * static_cast<std::size_t>(d.phase_dim()));
  for (double& s : states) s = u(rng);
  std::vector<double> out(count * comps.size());
  for (auto _ : state) {
    if (parallel) {
      evaluate_points_parallel(field, states, out);
    } else {
      evaluate_points_serial(field, states, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.counters["threads"] = parallel ? kernels::thread_count() : 1;
}

}  // namespace

BENCHMARK_CAPTURE(BM_Convolve, serial, false)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Convolve, parallel, true)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Sieve, serial, false)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Sieve, parallel, true)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Evaluate, serial, false)->Arg(4096)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Evaluate, parallel, true)->Arg(4096)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

// Serial reference vs OpenMP kernels on trunk-sized layers.

#include <benchmark/benchmark.h>

#include "rankforge/kernels.hpp"

using namespace rankforge;

namespace {

Mat random_mat(std::size_t r, std::size_t c, std::uint64_t seed) {
  Mat m(r, c);
  RngStream rng(seed, 0);
  for (double& v : m.data) v = rng.uniform(-1, 1);
  return m;
}

struct Shapes {
  Mat X, W, dY, Y, dX, dW;
  Vec b, db;
  Shapes(std::size_t batch, std::size_t in, std::size_t out)
      : X(random_mat(batch, in, 1)),
        W(random_mat(out, in, 2)),
        dY(random_mat(batch, out, 3)),
        Y(batch, out),
        dX(batch, in),
        dW(out, in),
        b(out, 0.1),
        db(out, 0.0) {}
};

template <auto Fn>
void forward(benchmark::State& state) {
  Shapes s(state.range(0), state.range(1), state.range(2));
  for (auto _ : state) {
    Fn(s.X, s.W, s.b, s.Y);
    benchmark::DoNotOptimize(s.Y.data.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(1) * state.range(2));
}

template <auto Fn>
void backward_input(benchmark::State& state) {
  Shapes s(state.range(0), state.range(1), state.range(2));
  for (auto _ : state) {
    Fn(s.dY, s.W, s.dX);
    benchmark::DoNotOptimize(s.dX.data.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(1) * state.range(2));
}

template <auto Fn>
void backward_params(benchmark::State& state) {
  Shapes s(state.range(0), state.range(1), state.range(2));
  for (auto _ : state) {
    Fn(s.dY, s.X, s.dW, s.db);
    benchmark::DoNotOptimize(s.dW.data.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(1) * state.range(2));
}

// batch, in, out: the two trunk layers at minibatch and full-list size.
void shapes(benchmark::internal::Benchmark* b) {
  b->Args({32, 64, 512})->Args({32, 512, 128})->Args({300, 64, 512})->Args({300, 512, 128});
}

}  // namespace

BENCHMARK(forward<kernels::serial::linear_forward>)->Name("forward/serial")->Apply(shapes);
BENCHMARK(forward<kernels::parallel::linear_forward>)->Name("forward/parallel")->Apply(shapes)->UseRealTime();
BENCHMARK(backward_input<kernels::serial::linear_backward_input>)->Name("backward_input/serial")->Apply(shapes);
BENCHMARK(backward_input<kernels::parallel::linear_backward_input>)->Name("backward_input/parallel")->Apply(shapes)->UseRealTime();
BENCHMARK(backward_params<kernels::serial::linear_backward_params>)->Name("backward_params/serial")->Apply(shapes);
BENCHMARK(backward_params<kernels::parallel::linear_backward_params>)->Name("backward_params/parallel")->Apply(shapes)->UseRealTime();

BENCHMARK_MAIN();

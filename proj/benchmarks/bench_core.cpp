#include <benchmark/benchmark.h>

#include <vector>

#include "evae/divergences.hpp"
#include "evae/kernels.hpp"
#include "evae/models.hpp"
#include "evae/rng.hpp"
#include "evae/sampling.hpp"
#include "evae/tensor.hpp"

using namespace evae;

namespace {

void bm_epanechnikov_draws(benchmark::State& state) {
  Rng rng(1);
  std::vector<double> out(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    sample_std_epanechnikov(rng, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_epanechnikov_draws)->Arg(1000)->Arg(100000);

void bm_affine_forward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  std::vector<double> xv(n * 784), wv(784 * 256), bv(256);
  for (double& v : xv) v = rng.uniform01();
  for (double& v : wv) v = rng.uniform(-0.05, 0.05);
  Tensor x = Tensor::from_data({n, 784}, std::move(xv));
  Tensor w = Tensor::from_data({784, 256}, std::move(wv));
  Tensor b = Tensor::from_data({256}, std::move(bv));
  GradGuard guard;
  for (auto _ : state) {
    Tensor y = affine(x, w, b);
    benchmark::DoNotOptimize(y.data().data());
  }
}
BENCHMARK(bm_affine_forward)->Arg(16)->Arg(100);

void bm_affine_backward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  std::vector<double> xv(n * 784), wv(784 * 256), bv(256);
  for (double& v : xv) v = rng.uniform01();
  for (double& v : wv) v = rng.uniform(-0.05, 0.05);
  Tensor x = Tensor::from_data({n, 784}, std::move(xv));
  for (auto _ : state) {
    Tensor w = Tensor::from_data({784, 256}, wv, true);
    Tensor b = Tensor::from_data({256}, bv, true);
    Tensor loss = sum(relu(affine(x, w, b)));
    loss.backward();
    benchmark::DoNotOptimize(w.grad().data());
  }
}
BENCHMARK(bm_affine_backward)->Arg(16)->Arg(100);

void bm_resample_minibatch(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  SamplerConfig cfg;
  Rng rng(4);
  Tensor mu = Tensor::zeros({m, 16});
  Tensor r = Tensor::full({m, 16}, 0.7);
  GradGuard guard;
  for (auto _ : state) {
    LatentBatch batch = resample_minibatch(mu, r, cfg, rng);
    benchmark::DoNotOptimize(batch.values.data().data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 16);
}
BENCHMARK(bm_resample_minibatch)->Arg(100)->Arg(1000);

void bm_roughness_quadrature(benchmark::State& state) {
  const Kernel k = Kernel::epanechnikov(0.0, 1.0);
  QuadratureSpec q;
  q.points = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(functional_I(k, q));
  }
}
BENCHMARK(bm_roughness_quadrature)->Arg(1001)->Arg(4001);

void bm_ise_replication(benchmark::State& state) {
  IseStatSpec spec;
  spec.density = [](double) { return 1.0; };
  spec.sampler = [](Rng& rng) { return rng.uniform01(); };
  spec.m = static_cast<std::size_t>(state.range(0));
  spec.R = 4;
  for (auto _ : state) {
    Rng rng(5);
    IseStatResult res = simulate_ise_stat(spec, rng, 1);
    benchmark::DoNotOptimize(res.mean);
  }
}
BENCHMARK(bm_ise_replication)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

void bm_evae_loss_step(benchmark::State& state) {
  EvaeConfig cfg;
  cfg.image_h = 8;
  cfg.image_w = 8;
  cfg.d_z = 4;
  cfg.hidden = {64, 32};
  cfg.M = static_cast<int>(state.range(0));
  Rng init(6);
  Model model = Model::random_init(cfg, init);
  Rng data_rng(7);
  std::vector<double> xv(static_cast<std::size_t>(cfg.M) * 64);
  for (double& v : xv) v = data_rng.uniform01();
  Tensor x = Tensor::from_data({static_cast<std::size_t>(cfg.M), 64}, std::move(xv));
  Rng rng(8);
  for (auto _ : state) {
    for (auto& t : model.parameters()) t.zero_grad();
    LossTerms terms = loss_evae(x, model, rng);
    terms.total.backward();
    benchmark::DoNotOptimize(terms.recon);
  }
}
BENCHMARK(bm_evae_loss_step)->Arg(16)->Arg(100)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();

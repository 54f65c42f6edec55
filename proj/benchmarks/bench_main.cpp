#include <benchmark/benchmark.h>

#include "wmlab/hybrid.hpp"
#include "wmlab/language_model.hpp"
#include "wmlab/metrics.hpp"
#include "wmlab/randomness.hpp"
#include "wmlab/watermark.hpp"

using namespace wmlab;

namespace {

MemorylessModel flat(std::size_t pieces) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < pieces; ++i) names.push_back("w" + std::to_string(i));
  std::vector<double> p(pieces + 2, 0.0);
  for (std::size_t i = 0; i < pieces; ++i) p[i + 2] = 1.0 / static_cast<double>(pieces);
  return MemorylessModel(Vocabulary(names, false), p);
}

TokenSequence text(std::size_t n) {
  const auto lm = flat(200);
  return sample(lm, {}, {n, n}, 1);
}

void BM_PrfUniform(benchmark::State& st) {
  const auto key = WatermarkKey::from_integer(1);
  const std::vector<std::uint32_t> ids{3, 4, 5, 6};
  const auto ctx = encode_ids(ids);
  for (auto _ : st) benchmark::DoNotOptimize(prf_uniform(key, ctx));
}
BENCHMARK(BM_PrfUniform);

void BM_AaronsonScore(benchmark::State& st) {
  const auto t = text(static_cast<std::size_t>(st.range(0)));
  AaronsonConfig cfg;
  for (auto _ : st) benchmark::DoNotOptimize(aaronson_score(t, cfg));
}
BENCHMARK(BM_AaronsonScore)->Arg(100)->Arg(200);

void BM_KirchenbauerScore(benchmark::State& st) {
  const auto t = text(static_cast<std::size_t>(st.range(0)));
  KirchenbauerConfig cfg;
  for (auto _ : st) benchmark::DoNotOptimize(kirchenbauer_score(t, cfg));
}
BENCHMARK(BM_KirchenbauerScore)->Arg(100)->Arg(200);

void BM_BahriScore(benchmark::State& st) {
  const auto t = text(100);
  BahriConfig cfg;
  cfg.m = static_cast<std::size_t>(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(bahri_score(t, cfg));
}
BENCHMARK(BM_BahriScore)->Arg(32)->Arg(64);

void BM_KuditipudiMinCost(benchmark::State& st) {
  const auto t = text(100);
  const auto cfg = KuditipudiConfig::from_key(WatermarkKey::from_integer(2), static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(kuditipudi_min_cost(t, cfg));
}
BENCHMARK(BM_KuditipudiMinCost)->Arg(64)->Arg(256);

std::vector<LabeledFeature> features(std::size_t n) {
  Rng rng(4);
  std::vector<LabeledFeature> out;
  for (std::size_t i = 0; i < n; ++i) {
    const bool y = i % 2 == 0;
    out.push_back({{rng.normal() + (y ? 1.0 : 0.0), rng.normal() + (y ? 0.5 : 0.0)}, y});
  }
  return out;
}

void BM_SweepCascade2S(benchmark::State& st) {
  const auto d = features(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(sweep_cascade_grid(d, CascadeKind::TwoStage, 1.0));
}
BENCHMARK(BM_SweepCascade2S)->Arg(500)->Arg(2000);

void BM_FitLogistic(benchmark::State& st) {
  const auto d = features(1000);
  for (auto _ : st) benchmark::DoNotOptimize(fit_logistic(d));
}
BENCHMARK(BM_FitLogistic);

}  // namespace

BENCHMARK_MAIN();

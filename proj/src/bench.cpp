#include "msn/bench.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>
#include <vector>

#include "msn/kernels.hpp"

namespace msn {

namespace {

using Clock = std::chrono::steady_clock;

struct Timing {
  double median = 0.0;
  double p99 = 0.0;
};

Timing summarize(std::vector<double> ns) {
  std::sort(ns.begin(), ns.end());
  const auto at = [&](double q) {
    const auto i = static_cast<std::size_t>(q * static_cast<double>(ns.size() - 1) + 0.5);
    return ns[std::min(i, ns.size() - 1)];
  };
  return {at(0.5), at(0.99)};
}

template <typename Fn>
Timing time_reps(int reps, int instances, Fn&& fn) {
  std::vector<double> ns;
  ns.reserve(static_cast<std::size_t>(reps));
  for (int r = 0; r < reps; ++r) {
    const auto t0 = Clock::now();
    fn(r % instances);
    const auto t1 = Clock::now();
    ns.push_back(std::chrono::duration<double, std::nano>(t1 - t0).count());
  }
  return summarize(std::move(ns));
}

// Keeps results observable so the timed calls are not optimized out.
volatile double g_sink = 0.0;

std::vector<Index> sort_topk(const VectorXd& s, Index k) {
  std::vector<Index> order(static_cast<std::size_t>(s.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return s[a] > s[b]; });
  order.resize(static_cast<std::size_t>(k));
  return order;
}

BenchReport bench_topk(const BenchConfig& cfg, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::vector<VectorXd> inputs;
  for (int i = 0; i < cfg.instances; ++i) {
    VectorXd s(cfg.m);
    for (Index j = 0; j < cfg.m; ++j) s[j] = normal(rng);
    // a few exact ties so the tie rule is exercised
    if (cfg.m >= 4) s[cfg.m - 1] = s[0];
    inputs.push_back(std::move(s));
  }

  BenchReport r;
  r.oracle_ok = true;
  for (const auto& s : inputs)
    if (partial_topk<double>(s, cfg.k).indices != sort_topk(s, cfg.k)) r.oracle_ok = false;

  const auto kernel = time_reps(cfg.reps, cfg.instances, [&](int i) {
    g_sink = g_sink + partial_topk<double>(inputs[static_cast<std::size_t>(i)], cfg.k).scores[0];
  });
  const auto baseline = time_reps(cfg.reps, cfg.instances, [&](int i) {
    const auto& s = inputs[static_cast<std::size_t>(i)];
    g_sink = g_sink + s[sort_topk(s, cfg.k)[0]];
  });
  r.median_ns = kernel.median;
  r.p99_ns = kernel.p99;
  r.baseline_median_ns = baseline.median;
  r.baseline_p99_ns = baseline.p99;
  return r;
}

VectorXd unfused_gather_sum(const GatherPlan<double>& plan, const MatrixXd& table) {
  MatrixXd gathered(static_cast<Index>(plan.indices.size()), table.cols());
  for (std::size_t t = 0; t < plan.indices.size(); ++t) gathered.row(static_cast<Index>(t)) = table.row(plan.indices[t]);
  VectorXd out = VectorXd::Zero(table.cols());
  for (std::size_t t = 0; t < plan.indices.size(); ++t)
    for (Index j = 0; j < table.cols(); ++j) out[j] += plan.weights[t] * gathered(static_cast<Index>(t), j);
  return out;
}

BenchReport bench_gather(const BenchConfig& cfg, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  MatrixXd table(cfg.m, cfg.d);
  for (Index i = 0; i < table.size(); ++i) table.data()[i] = normal(rng);
  std::vector<GatherPlan<double>> plans;
  std::vector<Index> all(static_cast<std::size_t>(cfg.m));
  std::iota(all.begin(), all.end(), Index{0});
  for (int i = 0; i < cfg.instances; ++i) {
    std::shuffle(all.begin(), all.end(), rng);
    GatherPlan<double> p;
    p.indices.assign(all.begin(), all.begin() + cfg.k);
    for (Index t = 0; t < cfg.k; ++t) p.weights.push_back(normal(rng));
    plans.push_back(std::move(p));
  }

  BenchReport r;
  r.oracle_ok = true;
  for (const auto& p : plans)
    if (fused_gather_sum(p, table) != unfused_gather_sum(p, table)) r.oracle_ok = false;

  const auto kernel = time_reps(cfg.reps, cfg.instances, [&](int i) {
    g_sink = g_sink + fused_gather_sum(plans[static_cast<std::size_t>(i)], table)[0];
  });
  const auto baseline = time_reps(cfg.reps, cfg.instances, [&](int i) {
    g_sink = g_sink + unfused_gather_sum(plans[static_cast<std::size_t>(i)], table)[0];
  });
  r.median_ns = kernel.median;
  r.p99_ns = kernel.p99;
  r.baseline_median_ns = baseline.median;
  r.baseline_p99_ns = baseline.p99;
  return r;
}

}  // namespace

void BenchConfig::validate() const {
  require(kernel == "topk" || kernel == "gather", "bench: kernel must be topk or gather, got '" + kernel + "'");
  require(m >= 1, "bench: m must be >= 1");
  require(k >= 1 && k <= m, "bench: k must satisfy 1 <= k <= m");
  require(d >= 1, "bench: d must be >= 1");
  require(reps >= 1, "bench: reps must be >= 1");
  require(instances >= 1, "bench: instances must be >= 1");
}

nlohmann::json BenchReport::to_json() const {
  return {{"kernel", kernel},
          {"m", m},
          {"k", k},
          {"reps", reps},
          {"median_ns", median_ns},
          {"p99_ns", p99_ns},
          {"baseline_median_ns", baseline_median_ns},
          {"baseline_p99_ns", baseline_p99_ns},
          {"oracle_ok", oracle_ok}};
}

BenchReport run_bench(const BenchConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  auto r = cfg.kernel == "topk" ? bench_topk(cfg, rng) : bench_gather(cfg, rng);
  r.kernel = cfg.kernel;
  r.m = cfg.m;
  r.k = cfg.k;
  r.reps = cfg.reps;
  return r;
}

}  // namespace msn

// Micro-benchmarks for the retrieval kernels against straightforward
// baselines. Every run also checks the kernel's output against its baseline.
//
//   topk:   partial_topk vs stable full sort of all m candidates
//   gather: fused_gather_sum vs gathering k rows into a buffer, then summing
#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "msn/numerics.hpp"

namespace msn {

struct BenchConfig {
  std::string kernel = "topk";  // topk | gather
  Index m = 1024;               // candidates (topk) or table rows (gather)
  Index k = 32;
  Index d = 32;                 // value width (gather)
  int reps = 200;
  int instances = 16;           // distinct random inputs cycled through
  std::uint64_t seed = 1;

  void validate() const;
};

struct BenchReport {
  std::string kernel;
  Index m = 0;
  Index k = 0;
  int reps = 0;
  double median_ns = 0.0;
  double p99_ns = 0.0;
  double baseline_median_ns = 0.0;
  double baseline_p99_ns = 0.0;
  bool oracle_ok = false;

  nlohmann::json to_json() const;
};

BenchReport run_bench(const BenchConfig& cfg);

}  // namespace msn

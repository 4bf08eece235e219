#pragma once

#include <cstdint>

#include "litecan/model.hpp"

namespace litecan {

struct BenchReport {
    int batch = 1;
    int n_iters = 0;
    double mean_ms = 0.0;  // per-sample: batch latency / batch size
    double p50_ms = 0.0;
    double p99_ms = 0.0;
    double samples_per_sec = 0.0;
    int64_t param_count = 0;
    int64_t checkpoint_bytes = 0;
};

// Times eval-mode forward passes on one fixed random batch, single
// threaded, after `n_warmup` untimed iterations. Latencies are per sample;
// percentiles use the nearest-rank rule on the sorted per-iteration times.
BenchReport run_bench(const ModelParamsT<float>& params, const ModelConfig& cfg, int n_warmup,
                      int n_iters, int batch, uint64_t seed, int64_t checkpoint_bytes);

}  // namespace litecan

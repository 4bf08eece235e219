#include "litecan/bench.hpp"

#include <algorithm>
#include <chrono>
#include <vector>

#include "litecan/errors.hpp"

namespace litecan {

BenchReport run_bench(const ModelParamsT<float>& params, const ModelConfig& cfg, int n_warmup,
                      int n_iters, int batch, uint64_t seed, int64_t checkpoint_bytes) {
    if (n_warmup < 1) throw ConfigError("bench warmup must be >= 1");
    if (n_iters < 100) throw ConfigError("bench needs at least 100 iterations");
    if (batch < 1) throw ConfigError("bench batch must be >= 1");

    SplitMix64 rng(mix_seed(seed, seed_stream::kBench));
    Tensor input = zeros<float>({batch, cfg.window, cfg.d_in});
    for (int64_t i = 0; i < input.numel(); ++i)
        input.ptr()[i] = static_cast<float>(rng.uniform());

    Tape tape(false);
    for (int i = 0; i < n_warmup; ++i) {
        Tensor logits = forward(tape, params, cfg, input, false, nullptr);
        (void)logits;
    }

    using clock = std::chrono::steady_clock;
    std::vector<double> per_iter_ms(static_cast<size_t>(n_iters));
    const auto total_start = clock::now();
    for (int i = 0; i < n_iters; ++i) {
        const auto t0 = clock::now();
        Tensor logits = forward(tape, params, cfg, input, false, nullptr);
        const auto t1 = clock::now();
        (void)logits;
        per_iter_ms[static_cast<size_t>(i)] =
            std::chrono::duration<double, std::milli>(t1 - t0).count();
    }
    const double total_ms =
        std::chrono::duration<double, std::milli>(clock::now() - total_start).count();

    std::sort(per_iter_ms.begin(), per_iter_ms.end());
    auto pct = [&](double q) {
        const size_t rank = static_cast<size_t>(q * static_cast<double>(n_iters - 1));
        return per_iter_ms[rank] / static_cast<double>(batch);
    };
    BenchReport r;
    r.batch = batch;
    r.n_iters = n_iters;
    r.mean_ms = total_ms / static_cast<double>(n_iters) / static_cast<double>(batch);
    r.p50_ms = pct(0.50);
    r.p99_ms = pct(0.99);
    r.samples_per_sec = 1000.0 / r.mean_ms;
    r.param_count = params.total_params();
    r.checkpoint_bytes = checkpoint_bytes;
    return r;
}

}  // namespace litecan

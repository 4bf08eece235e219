#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "litecan/can_data.hpp"
#include "litecan/errors.hpp"
#include "litecan/metrics.hpp"
#include "litecan/model.hpp"
#include "litecan/rng.hpp"
#include "litecan/tensor.hpp"

namespace litecan {

struct TrainConfig {
    double lr = 0.001;
    int batch = 128;
    int max_epochs = 200;
    int patience = 15;
    double gamma = 2.0;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    uint64_t seed = 1;

    void validate() const;
};

// Square-root inverse frequency weights, rescaled so the mean over classes
// present in the data is 1; absent classes inherit the largest present weight.
std::vector<double> alpha_weights(const std::vector<int64_t>& counts);

// Mean over the batch of alpha_y * (1 - p_y)^gamma * (-log p_y), with the
// softmax computed from the logits. Internals run in double; log is clamped
// at 1e-12. Differentiable with respect to the logits.
template <typename T>
TensorT<T> focal_loss(TapeT<T>& tape, const TensorT<T>& logits, const std::vector<int>& labels,
                      const std::vector<double>& alpha, double gamma) {
    detail::require(logits.rank() == 2, "focal_loss: logits must be [B, C], got " +
                                            detail::shape_str(logits.shape));
    const int64_t b = logits.shape[0], c = logits.shape[1];
    detail::require(static_cast<int64_t>(labels.size()) == b,
                    "focal_loss: " + std::to_string(labels.size()) + " labels for batch " +
                        std::to_string(b));
    detail::require(static_cast<int64_t>(alpha.size()) == c,
                    "focal_loss: alpha size " + std::to_string(alpha.size()) + " for " +
                        std::to_string(c) + " classes");
    if (gamma < 0.0) throw ConfigError("focal_loss: gamma must be >= 0");
    for (int64_t i = 0; i < b; ++i)
        if (labels[static_cast<size_t>(i)] < 0 || labels[static_cast<size_t>(i)] >= c)
            throw DataError("focal_loss: label " + std::to_string(labels[static_cast<size_t>(i)]) +
                            " out of [0," + std::to_string(c) + ")");

    auto probs = std::make_shared<std::vector<double>>(static_cast<size_t>(b * c));
    double total = 0.0;
    for (int64_t i = 0; i < b; ++i) {
        const T* row = logits.ptr() + i * c;
        double mx = static_cast<double>(row[0]);
        for (int64_t j = 1; j < c; ++j) mx = std::max(mx, static_cast<double>(row[j]));
        double sum = 0.0;
        for (int64_t j = 0; j < c; ++j) {
            const double e = std::exp(static_cast<double>(row[j]) - mx);
            (*probs)[static_cast<size_t>(i * c + j)] = e;
            sum += e;
        }
        for (int64_t j = 0; j < c; ++j) (*probs)[static_cast<size_t>(i * c + j)] /= sum;
        const int y = labels[static_cast<size_t>(i)];
        const double u = (*probs)[static_cast<size_t>(i * c + y)];
        const double ue = std::max(u, 1e-12);
        const double focus = gamma == 0.0 ? 1.0 : std::pow(1.0 - u, gamma);
        total += alpha[static_cast<size_t>(y)] * focus * (-std::log(ue));
    }
    TensorT<T> out = zeros<T>({1});
    out.ptr()[0] = static_cast<T>(total / static_cast<double>(b));

    if (detail::track(tape, {&logits})) {
        detail::mark_output(out);
        std::vector<int> labels_copy = labels;
        std::vector<double> alpha_copy = alpha;
        tape.record([logits, out, probs, labels_copy, alpha_copy, gamma, b, c]() {
            const double g = static_cast<double>(out.gptr()[0]) / static_cast<double>(b);
            T* dz = logits.grad->data();
            for (int64_t i = 0; i < b; ++i) {
                const int y = labels_copy[static_cast<size_t>(i)];
                const double a = alpha_copy[static_cast<size_t>(y)];
                const double u = (*probs)[static_cast<size_t>(i * c + y)];
                const double ue = std::max(u, 1e-12);
                double dl_du;
                if (gamma == 0.0) {
                    dl_du = -a / ue;
                } else if (u >= 1.0) {
                    dl_du = 0.0;
                } else {
                    dl_du = a * (gamma * std::pow(1.0 - u, gamma - 1.0) * std::log(ue) -
                                 std::pow(1.0 - u, gamma) / ue);
                }
                for (int64_t j = 0; j < c; ++j) {
                    const double pj = (*probs)[static_cast<size_t>(i * c + j)];
                    const double du_dz = u * ((j == y ? 1.0 : 0.0) - pj);
                    dz[i * c + j] += static_cast<T>(g * dl_du * du_dz);
                }
            }
        });
    }
    return out;
}

// Packs windows[idx[from..to)] into a [B, W, 9] tensor scaled by 1/2304.
template <typename T>
TensorT<T> windows_to_batch(const std::vector<WindowSample>& windows,
                            const std::vector<int64_t>& idx, int64_t from, int64_t to,
                            int window) {
    const int64_t b = to - from;
    const int64_t per = static_cast<int64_t>(window) * kFeaturesPerMessage;
    TensorT<T> batch = zeros<T>({b, window, kFeaturesPerMessage});
    constexpr T inv = T(1) / T(2304);
    for (int64_t i = 0; i < b; ++i) {
        const WindowSample& w = windows[static_cast<size_t>(idx[static_cast<size_t>(from + i)])];
        T* dst = batch.ptr() + i * per;
        for (int64_t j = 0; j < per; ++j)
            dst[j] = static_cast<T>(w.features[static_cast<size_t>(j)]) * inv;
    }
    return batch;
}

template <typename T>
std::vector<int> batch_labels(const std::vector<WindowSample>& windows,
                              const std::vector<int64_t>& idx, int64_t from, int64_t to) {
    std::vector<int> out(static_cast<size_t>(to - from));
    for (int64_t i = from; i < to; ++i)
        out[static_cast<size_t>(i - from)] =
            windows[static_cast<size_t>(idx[static_cast<size_t>(i)])].label;
    return out;
}

template <typename T>
struct AdamWStateT {
    std::vector<std::vector<T>> m, v;
    int64_t step = 0;
};

template <typename T>
AdamWStateT<T> init_adamw(ModelParamsT<T>& params) {
    AdamWStateT<T> state;
    for (auto& kv : params.named()) {
        state.m.emplace_back(static_cast<size_t>(kv.second->numel()), T(0));
        state.v.emplace_back(static_cast<size_t>(kv.second->numel()), T(0));
    }
    return state;
}

// Decoupled-weight-decay Adam. Bias-corrected moments; weight decay applied
// directly to the parameter, not through the gradient.
template <typename T>
void adamw_step(ModelParamsT<T>& params, AdamWStateT<T>& state, const TrainConfig& cfg) {
    ++state.step;
    const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
    const T lr = static_cast<T>(cfg.lr), eps = static_cast<T>(cfg.eps);
    const T wd = static_cast<T>(cfg.weight_decay);
    const T corr1 = T(1) - static_cast<T>(std::pow(cfg.beta1, static_cast<double>(state.step)));
    const T corr2 = T(1) - static_cast<T>(std::pow(cfg.beta2, static_cast<double>(state.step)));
    auto named = params.named();
    for (size_t t = 0; t < named.size(); ++t) {
        TensorT<T>& p = *named[t].second;
        const T* g = p.gptr();
        T* m = state.m[t].data();
        T* v = state.v[t].data();
        T* w = p.ptr();
        const int64_t n = p.numel();
        for (int64_t i = 0; i < n; ++i) {
            m[i] = b1 * m[i] + (T(1) - b1) * g[i];
            v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
            const T mhat = m[i] / corr1;
            const T vhat = v[i] / corr2;
            w[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + wd * w[i]);
        }
    }
}

// One epoch of shuffled mini-batch training; shared by centralized and
// federated paths so their trajectories coincide exactly. When mu > 0 each
// step adds mu * (w - anchor) to the gradient before the optimizer update
// (the proximal pull toward the round's broadcast weights). Returns the mean
// training loss over all samples. Throws DivergenceError on non-finite loss.
double run_train_epoch(ModelParamsT<float>& params, AdamWStateT<float>& opt,
                       const ModelConfig& mcfg, const TrainConfig& tcfg,
                       const std::vector<WindowSample>& windows, const std::vector<double>& alpha,
                       const ModelParamsT<float>* prox_anchor, double mu, SplitMix64& rng);

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_macro_f1 = 0.0;
};

struct TrainResult {
    ModelParamsT<float> best_params;   // weights at the best validation loss
    ModelParamsT<float> final_params;  // weights after the last executed epoch
    std::vector<EpochStats> history;
    int best_epoch = 0;   // 1-based epoch index of the snapshot
    double best_val_loss = 0.0;
    std::vector<double> alpha;
};

// Centralized training: initializes from tcfg.seed, runs mini-batch epochs
// with per-epoch validation, stops early after `patience` epochs without a
// validation-loss improvement, and restores the best snapshot.
TrainResult train(const ModelConfig& mcfg, const TrainConfig& tcfg,
                  const std::vector<WindowSample>& train_windows,
                  const std::vector<WindowSample>& val_windows);

struct EvalResult {
    double loss = 0.0;
    MetricsReport metrics;
    std::vector<int> predictions;
    std::vector<int> labels;
};

EvalResult evaluate(const ModelParamsT<float>& params, const ModelConfig& mcfg,
                    const std::vector<WindowSample>& windows, const std::vector<double>& alpha,
                    double gamma, int batch);

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history);
std::vector<EpochStats> read_history_csv(const std::string& path);

}  // namespace litecan

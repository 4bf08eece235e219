#include "litecan/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

namespace litecan {

void TrainConfig::validate() const {
    if (lr <= 0.0) throw ConfigError("lr must be positive");
    if (batch < 1) throw ConfigError("batch must be >= 1");
    if (max_epochs < 1) throw ConfigError("epochs must be >= 1");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (gamma < 0.0) throw ConfigError("gamma must be >= 0");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        throw ConfigError("betas must be in [0,1)");
    if (eps <= 0.0) throw ConfigError("eps must be positive");
}

std::vector<double> alpha_weights(const std::vector<int64_t>& counts) {
    bool any = false;
    for (int64_t c : counts) {
        if (c < 0) throw DataError("negative class count");
        if (c > 0) any = true;
    }
    if (!any) throw DataError("alpha weights need at least one nonzero class count");
    std::vector<double> alpha(counts.size(), 0.0);
    double sum = 0.0;
    int present = 0;
    for (size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] == 0) continue;
        alpha[i] = 1.0 / std::sqrt(static_cast<double>(counts[i]));
        sum += alpha[i];
        ++present;
    }
    const double mean = sum / present;
    double max_alpha = 0.0;
    for (size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] == 0) continue;
        alpha[i] /= mean;
        max_alpha = std::max(max_alpha, alpha[i]);
    }
    for (size_t i = 0; i < counts.size(); ++i)
        if (counts[i] == 0) alpha[i] = max_alpha;
    return alpha;
}

double run_train_epoch(ModelParamsT<float>& params, AdamWStateT<float>& opt,
                       const ModelConfig& mcfg, const TrainConfig& tcfg,
                       const std::vector<WindowSample>& windows, const std::vector<double>& alpha,
                       const ModelParamsT<float>* prox_anchor, double mu, SplitMix64& rng) {
    const int64_t n = static_cast<int64_t>(windows.size());
    if (n == 0) throw DataError("cannot train on an empty window set");
    std::vector<int64_t> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    for (int64_t i = n - 1; i > 0; --i) {
        const int64_t j = static_cast<int64_t>(rng.uniform_int(static_cast<uint64_t>(i + 1)));
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
    double total = 0.0;
    for (int64_t start = 0; start < n; start += tcfg.batch) {
        const int64_t end = std::min(n, start + tcfg.batch);
        Tensor batch = windows_to_batch<float>(windows, idx, start, end, mcfg.window);
        const std::vector<int> labels = batch_labels<float>(windows, idx, start, end);
        Tape tape;
        Tensor logits = forward(tape, params, mcfg, batch, true, &rng);
        Tensor loss = focal_loss(tape, logits, labels, alpha, tcfg.gamma);
        const double lv = static_cast<double>(loss.ptr()[0]);
        if (!std::isfinite(lv))
            throw DivergenceError("training loss became non-finite at sample offset " +
                                  std::to_string(start));
        params.zero_grads();
        tape.backward(loss);
        if (mu > 0.0 && prox_anchor != nullptr) {
            const float muf = static_cast<float>(mu);
            auto cur = params.named();
            auto anchor = prox_anchor->named();
            for (size_t t = 0; t < cur.size(); ++t) {
                float* g = cur[t].second->gptr();
                const float* w = cur[t].second->ptr();
                const float* a = anchor[t].second->ptr();
                const int64_t len = cur[t].second->numel();
                for (int64_t i = 0; i < len; ++i) g[i] += muf * (w[i] - a[i]);
            }
        }
        adamw_step(params, opt, tcfg);
        total += lv * static_cast<double>(end - start);
    }
    return total / static_cast<double>(n);
}

EvalResult evaluate(const ModelParamsT<float>& params, const ModelConfig& mcfg,
                    const std::vector<WindowSample>& windows, const std::vector<double>& alpha,
                    double gamma, int batch) {
    const int64_t n = static_cast<int64_t>(windows.size());
    if (n == 0) throw DataError("cannot evaluate on an empty window set");
    std::vector<int64_t> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    EvalResult res;
    double total = 0.0;
    for (int64_t start = 0; start < n; start += batch) {
        const int64_t end = std::min(n, start + batch);
        Tensor x = windows_to_batch<float>(windows, idx, start, end, mcfg.window);
        const std::vector<int> labels = batch_labels<float>(windows, idx, start, end);
        Tape tape(false);
        Tensor logits = forward(tape, params, mcfg, x, false, nullptr);
        Tensor loss = focal_loss(tape, logits, labels, alpha, gamma);
        total += static_cast<double>(loss.ptr()[0]) * static_cast<double>(end - start);
        const std::vector<int> preds = argmax_lastdim(logits);
        res.predictions.insert(res.predictions.end(), preds.begin(), preds.end());
        res.labels.insert(res.labels.end(), labels.begin(), labels.end());
    }
    res.loss = total / static_cast<double>(n);
    res.metrics = compute_metrics(res.predictions, res.labels, mcfg.n_classes);
    return res;
}

TrainResult train(const ModelConfig& mcfg, const TrainConfig& tcfg,
                  const std::vector<WindowSample>& train_windows,
                  const std::vector<WindowSample>& val_windows) {
    mcfg.validate();
    tcfg.validate();
    if (train_windows.empty()) throw DataError("training split is empty");
    if (val_windows.empty()) throw DataError("validation split is empty");
    const std::vector<int64_t> counts = class_frequencies(train_windows, mcfg.n_classes);
    TrainResult res;
    res.alpha = alpha_weights(counts);
    ModelParamsT<float> params = init_params<float>(mcfg, tcfg.seed);
    AdamWStateT<float> opt = init_adamw(params);
    SplitMix64 rng(mix_seed(tcfg.seed, seed_stream::kTrain, 0, 0));
    double best = std::numeric_limits<double>::infinity();
    ModelParamsT<float> best_params = clone_params(params);
    int since_improve = 0;
    for (int epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
        const double train_loss =
            run_train_epoch(params, opt, mcfg, tcfg, train_windows, res.alpha, nullptr, 0.0, rng);
        const EvalResult ev = evaluate(params, mcfg, val_windows, res.alpha, tcfg.gamma, tcfg.batch);
        res.history.push_back({epoch, train_loss, ev.loss, ev.metrics.macro_f1});
        if (ev.loss < best) {
            best = ev.loss;
            res.best_epoch = epoch;
            best_params = clone_params(params);
            since_improve = 0;
        } else if (++since_improve >= tcfg.patience) {
            break;
        }
    }
    res.best_val_loss = best;
    res.best_params = std::move(best_params);
    res.final_params = std::move(params);
    return res;
}

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write history file: " + path);
    out << "epoch,train_loss,val_loss,val_macro_f1\n";
    char buf[128];
    for (const EpochStats& e : history) {
        std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g\n", e.epoch, e.train_loss, e.val_loss,
                      e.val_macro_f1);
        out << buf;
    }
    if (!out) throw DataError("write failed: " + path);
}

std::vector<EpochStats> read_history_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open history file: " + path);
    std::string line;
    if (!std::getline(in, line) || trim(line) != "epoch,train_loss,val_loss,val_macro_f1")
        throw DataError(path + ": missing history header");
    std::vector<EpochStats> out;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const std::vector<std::string> f = split(line, ',');
        if (f.size() != 4)
            throw DataError(path + ":" + std::to_string(lineno) + ": expected 4 fields");
        EpochStats e;
        const std::string where = path + ":" + std::to_string(lineno);
        e.epoch = static_cast<int>(parse_int(f[0], where));
        e.train_loss = parse_double(f[1], where);
        e.val_loss = parse_double(f[2], where);
        e.val_macro_f1 = parse_double(f[3], where);
        out.push_back(e);
    }
    return out;
}

}  // namespace litecan

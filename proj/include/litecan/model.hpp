#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <utility>
#include <vector>

#include "litecan/errors.hpp"
#include "litecan/rng.hpp"
#include "litecan/tensor.hpp"

namespace litecan {

struct ModelConfig {
    int d_in = 9;
    int d_model = 64;
    int n_heads = 2;
    int n_layers = 2;
    int d_ff = 256;
    double dropout = 0.15;
    int window = 10;
    int n_classes = 4;
    std::string pos_encoding = "sinusoidal";

    int d_k() const { return d_model / n_heads; }
    int seq_len() const { return window + 1; }  // CLS token prepended
    void validate() const;
};

int64_t param_count(const ModelConfig& cfg);
int64_t size_bytes(const ModelConfig& cfg);

template <typename T>
struct LayerParamsT {
    TensorT<T> wq, bq, wk, bk, wv, bv, wo, bo;
    TensorT<T> w1, b1, w2, b2;
    TensorT<T> ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;
};

template <typename T>
struct ModelParamsT {
    TensorT<T> w_in, b_in;
    TensorT<T> cls;
    std::vector<LayerParamsT<T>> layers;
    TensorT<T> w_out, b_out;

    // Stable name/tensor pairing that fixes serialization, initialization,
    // and optimizer ordering.
    std::vector<std::pair<std::string, TensorT<T>*>> named() {
        std::vector<std::pair<std::string, TensorT<T>*>> out;
        out.emplace_back("w_in", &w_in);
        out.emplace_back("b_in", &b_in);
        out.emplace_back("cls", &cls);
        for (size_t l = 0; l < layers.size(); ++l) {
            const std::string p = "layers." + std::to_string(l) + ".";
            LayerParamsT<T>& lp = layers[l];
            out.emplace_back(p + "wq", &lp.wq);
            out.emplace_back(p + "bq", &lp.bq);
            out.emplace_back(p + "wk", &lp.wk);
            out.emplace_back(p + "bk", &lp.bk);
            out.emplace_back(p + "wv", &lp.wv);
            out.emplace_back(p + "bv", &lp.bv);
            out.emplace_back(p + "wo", &lp.wo);
            out.emplace_back(p + "bo", &lp.bo);
            out.emplace_back(p + "w1", &lp.w1);
            out.emplace_back(p + "b1", &lp.b1);
            out.emplace_back(p + "w2", &lp.w2);
            out.emplace_back(p + "b2", &lp.b2);
            out.emplace_back(p + "ln1_gamma", &lp.ln1_gamma);
            out.emplace_back(p + "ln1_beta", &lp.ln1_beta);
            out.emplace_back(p + "ln2_gamma", &lp.ln2_gamma);
            out.emplace_back(p + "ln2_beta", &lp.ln2_beta);
        }
        out.emplace_back("w_out", &w_out);
        out.emplace_back("b_out", &b_out);
        return out;
    }

    std::vector<std::pair<std::string, const TensorT<T>*>> named() const {
        auto mut = const_cast<ModelParamsT<T>*>(this)->named();
        std::vector<std::pair<std::string, const TensorT<T>*>> out;
        out.reserve(mut.size());
        for (auto& kv : mut) out.emplace_back(kv.first, kv.second);
        return out;
    }

    int64_t total_params() const {
        int64_t n = 0;
        for (const auto& kv : named()) n += kv.second->numel();
        return n;
    }

    void zero_grads() {
        for (auto& kv : named()) kv.second->zero_grad();
    }
};

namespace detail {

template <typename T>
TensorT<T> param_tensor(const std::vector<int64_t>& shape) {
    return zeros<T>(shape, true);
}

}  // namespace detail

// Allocates all parameter tensors (zero-filled) with requires_grad set.
template <typename T>
ModelParamsT<T> make_params(const ModelConfig& cfg) {
    cfg.validate();
    const int64_t d = cfg.d_model, din = cfg.d_in, dff = cfg.d_ff, c = cfg.n_classes;
    ModelParamsT<T> p;
    p.w_in = detail::param_tensor<T>({din, d});
    p.b_in = detail::param_tensor<T>({d});
    p.cls = detail::param_tensor<T>({d});
    p.layers.resize(static_cast<size_t>(cfg.n_layers));
    for (auto& lp : p.layers) {
        lp.wq = detail::param_tensor<T>({d, d});
        lp.bq = detail::param_tensor<T>({d});
        lp.wk = detail::param_tensor<T>({d, d});
        lp.bk = detail::param_tensor<T>({d});
        lp.wv = detail::param_tensor<T>({d, d});
        lp.bv = detail::param_tensor<T>({d});
        lp.wo = detail::param_tensor<T>({d, d});
        lp.bo = detail::param_tensor<T>({d});
        lp.w1 = detail::param_tensor<T>({d, dff});
        lp.b1 = detail::param_tensor<T>({dff});
        lp.w2 = detail::param_tensor<T>({dff, d});
        lp.b2 = detail::param_tensor<T>({d});
        lp.ln1_gamma = full<T>({d}, T(1), true);
        lp.ln1_beta = detail::param_tensor<T>({d});
        lp.ln2_gamma = full<T>({d}, T(1), true);
        lp.ln2_beta = detail::param_tensor<T>({d});
    }
    p.w_out = detail::param_tensor<T>({d, c});
    p.b_out = detail::param_tensor<T>({c});
    return p;
}

// Uniform(-sqrt(1/fan_in), sqrt(1/fan_in)) for weight matrices, zeros for
// biases, N(0, 0.02) for the CLS token, ones/zeros for layer-norm affine.
// Draws happen in declaration order so initialization is seed-stable.
template <typename T>
ModelParamsT<T> init_params(const ModelConfig& cfg, uint64_t seed) {
    ModelParamsT<T> p = make_params<T>(cfg);
    SplitMix64 rng(mix_seed(seed, seed_stream::kInit));
    for (auto& kv : p.named()) {
        TensorT<T>& t = *kv.second;
        if (kv.first == "cls") {
            for (int64_t i = 0; i < t.numel(); ++i)
                t.ptr()[i] = static_cast<T>(rng.normal() * 0.02);
        } else if (t.rank() == 2) {
            const double bound = std::sqrt(1.0 / static_cast<double>(t.shape[0]));
            for (int64_t i = 0; i < t.numel(); ++i)
                t.ptr()[i] = static_cast<T>(rng.uniform_range(-bound, bound));
        }
        // rank-1 tensors keep their make_params values (zeros, or ones for gamma)
    }
    return p;
}

template <typename T>
ModelParamsT<T> clone_params(const ModelParamsT<T>& src) {
    ModelParamsT<T> dst;
    dst.w_in = src.w_in;
    dst.b_in = src.b_in;
    dst.cls = src.cls;
    dst.layers = src.layers;
    dst.w_out = src.w_out;
    dst.b_out = src.b_out;
    for (auto& kv : dst.named()) {
        TensorT<T>& t = *kv.second;
        t.data = std::make_shared<std::vector<T>>(*t.data);
        if (t.requires_grad)
            t.grad = std::make_shared<std::vector<T>>(static_cast<size_t>(t.numel()), T(0));
    }
    return dst;
}

template <typename T>
bool params_bitwise_equal(const ModelParamsT<T>& a, const ModelParamsT<T>& b) {
    auto na = a.named();
    auto nb = b.named();
    if (na.size() != nb.size()) return false;
    for (size_t i = 0; i < na.size(); ++i) {
        if (na[i].first != nb[i].first) return false;
        if (na[i].second->shape != nb[i].second->shape) return false;
        const T* pa = na[i].second->ptr();
        const T* pb = nb[i].second->ptr();
        if (std::memcmp(pa, pb, sizeof(T) * static_cast<size_t>(na[i].second->numel())) != 0)
            return false;
    }
    return true;
}

// Fixed sinusoidal positional encoding table of shape [seq_len, d_model].
template <typename T>
TensorT<T> sinusoidal_pe(int seq_len, int d_model) {
    TensorT<T> pe = zeros<T>({seq_len, d_model});
    for (int pos = 0; pos < seq_len; ++pos)
        for (int i = 0; i < d_model; i += 2) {
            const double angle =
                pos / std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d_model));
            pe.ptr()[pos * d_model + i] = static_cast<T>(std::sin(angle));
            if (i + 1 < d_model) pe.ptr()[pos * d_model + i + 1] = static_cast<T>(std::cos(angle));
        }
    return pe;
}

namespace detail {

template <typename T>
TensorT<T> encoder_layer(TapeT<T>& tape, const LayerParamsT<T>& lp, const ModelConfig& cfg,
                         const TensorT<T>& z, bool train_mode, SplitMix64* rng) {
    const int64_t b = z.shape[0], s = z.shape[1], d = cfg.d_model;
    const int64_t h = cfg.n_heads, dk = cfg.d_k();
    auto project = [&](const TensorT<T>& w, const TensorT<T>& bias) {
        TensorT<T> flat = reshape(tape, z, {b * s, d});
        TensorT<T> proj = add_bias(tape, matmul(tape, flat, w), bias);
        TensorT<T> heads = reshape(tape, proj, {b, s, h, dk});
        heads = permute(tape, heads, {0, 2, 1, 3});
        return reshape(tape, heads, {b * h, s, dk});
    };
    TensorT<T> q = project(lp.wq, lp.bq);
    TensorT<T> k = project(lp.wk, lp.bk);
    TensorT<T> v = project(lp.wv, lp.bv);
    TensorT<T> kt = permute(tape, k, {0, 2, 1});
    TensorT<T> scores = scale(tape, bmm(tape, q, kt), T(1.0 / std::sqrt(static_cast<double>(dk))));
    TensorT<T> attn = softmax_lastdim(tape, scores);
    TensorT<T> ctx = bmm(tape, attn, v);
    ctx = reshape(tape, ctx, {b, h, s, dk});
    ctx = permute(tape, ctx, {0, 2, 1, 3});
    ctx = reshape(tape, ctx, {b * s, d});
    TensorT<T> proj = add_bias(tape, matmul(tape, ctx, lp.wo), lp.bo);
    proj = reshape(tape, proj, {b, s, d});
    if (train_mode) proj = dropout(tape, proj, cfg.dropout, *rng);
    TensorT<T> u = layer_norm(tape, add(tape, z, proj), lp.ln1_gamma, lp.ln1_beta);

    TensorT<T> f = reshape(tape, u, {b * s, d});
    f = relu(tape, add_bias(tape, matmul(tape, f, lp.w1), lp.b1));
    f = add_bias(tape, matmul(tape, f, lp.w2), lp.b2);
    f = reshape(tape, f, {b, s, d});
    if (train_mode) f = dropout(tape, f, cfg.dropout, *rng);
    return layer_norm(tape, add(tape, u, f), lp.ln2_gamma, lp.ln2_beta);
}

}  // namespace detail

// Full forward pass: input projection, CLS prepend, positional encoding,
// encoder stack, classification head on the CLS position. Expects batch
// values already scaled into [0,1]. `train_mode` enables dropout and then
// requires an rng.
template <typename T>
TensorT<T> forward(TapeT<T>& tape, const ModelParamsT<T>& p, const ModelConfig& cfg,
                   const TensorT<T>& batch, bool train_mode = false, SplitMix64* rng = nullptr) {
    detail::require(batch.rank() == 3, "forward: batch must be [B, W, d_in], got " +
                                           detail::shape_str(batch.shape));
    detail::require(batch.shape[1] == cfg.window && batch.shape[2] == cfg.d_in,
                    "forward: batch " + detail::shape_str(batch.shape) + " does not match window " +
                        std::to_string(cfg.window) + " x d_in " + std::to_string(cfg.d_in));
    if (train_mode && cfg.dropout > 0.0 && rng == nullptr)
        throw ConfigError("forward: train mode with dropout needs an rng");
    const int64_t b = batch.shape[0], w = cfg.window, d = cfg.d_model, s = cfg.seq_len();

    TensorT<T> flat = reshape(tape, batch, {b * w, cfg.d_in});
    TensorT<T> h = add_bias(tape, matmul(tape, flat, p.w_in), p.b_in);
    h = reshape(tape, h, {b, w, d});

    TensorT<T> cls_row = expand_front(tape, p.cls, b);
    cls_row = reshape(tape, cls_row, {b, 1, d});
    TensorT<T> e = concat(tape, cls_row, h, 1);

    if (cfg.pos_encoding == "sinusoidal") {
        TensorT<T> pe = sinusoidal_pe<T>(static_cast<int>(s), static_cast<int>(d));
        TensorT<T> pe_flat = reshape(tape, pe, {s * d});
        e = reshape(tape, add_bias(tape, reshape(tape, e, {b, s * d}), pe_flat), {b, s, d});
    }
    if (train_mode) e = dropout(tape, e, cfg.dropout, *rng);

    for (const auto& lp : p.layers)
        e = detail::encoder_layer(tape, lp, cfg, e, train_mode, rng);

    TensorT<T> cls_out = reshape(tape, slice(tape, e, 1, 0, 1), {b, d});
    return add_bias(tape, matmul(tape, cls_out, p.w_out), p.b_out);
}

template <typename T>
struct PredictionT {
    std::vector<int> classes;
    TensorT<T> probs;
};

template <typename T>
PredictionT<T> predict(const ModelParamsT<T>& p, const ModelConfig& cfg, const TensorT<T>& batch) {
    TapeT<T> tape(false);
    TensorT<T> logits = forward(tape, p, cfg, batch, false, nullptr);
    PredictionT<T> out;
    out.probs = softmax_lastdim(tape, logits);
    out.classes = argmax_lastdim(out.probs);
    return out;
}

struct LoadedModel {
    ModelParamsT<float> params;
    ModelConfig config;
};

void save_checkpoint(const ModelParamsT<float>& params, const ModelConfig& cfg,
                     const std::string& path);
LoadedModel load_checkpoint(const std::string& path);

}  // namespace litecan

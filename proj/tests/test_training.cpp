#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "litecan/model.hpp"
#include "litecan/rng.hpp"
#include "litecan/training.hpp"

using namespace litecan;

namespace {

ModelConfig toy_config() {
    ModelConfig cfg;
    cfg.d_model = 16;
    cfg.n_heads = 2;
    cfg.n_layers = 1;
    cfg.d_ff = 32;
    cfg.window = 4;
    cfg.n_classes = 2;
    cfg.dropout = 0.0;
    return cfg;
}

// Two trivially separable classes: all-zero features vs all-padding features.
std::vector<WindowSample> separable_windows(int per_class, int window) {
    std::vector<WindowSample> out;
    for (int i = 0; i < 2 * per_class; ++i) {
        WindowSample w;
        w.label = i % 2;
        w.features.assign(static_cast<size_t>(window) * kFeaturesPerMessage,
                          w.label == 0 ? 0 : 2304);
        w.file_id = 0;
        w.start_index = i;
        out.push_back(std::move(w));
    }
    return out;
}

double reference_cross_entropy(const TensorT<double>& logits, const std::vector<int>& labels) {
    const int64_t b = logits.shape[0], c = logits.shape[1];
    double total = 0.0;
    for (int64_t i = 0; i < b; ++i) {
        const double* row = logits.ptr() + i * c;
        double mx = row[0];
        for (int64_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        double lse = 0.0;
        for (int64_t j = 0; j < c; ++j) lse += std::exp(row[j] - mx);
        total += (mx + std::log(lse)) - row[labels[static_cast<size_t>(i)]];
    }
    return total / static_cast<double>(b);
}

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) : path("/tmp/litecan_test_" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("train config validation") {
    TrainConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.lr = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.batch = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.gamma = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.patience = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("alpha weights follow inverse square-root frequency with mean one") {
    std::vector<double> a = alpha_weights({4, 1});
    CHECK(a[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
    CHECK(a[1] == doctest::Approx(4.0 / 3.0).epsilon(1e-9));

    std::vector<double> uniform = alpha_weights({100, 100, 100, 100});
    for (double v : uniform) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));

    // Absent classes take the largest present weight.
    std::vector<double> with_gap = alpha_weights({4, 1, 0});
    CHECK(with_gap[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
    CHECK(with_gap[1] == doctest::Approx(4.0 / 3.0).epsilon(1e-9));
    CHECK(with_gap[2] == doctest::Approx(4.0 / 3.0).epsilon(1e-9));

    CHECK_THROWS_AS(alpha_weights({0, 0}), DataError);
    CHECK_THROWS_AS(alpha_weights({3, -1}), DataError);
    CHECK_THROWS_AS(alpha_weights({}), DataError);
}

TEST_CASE("focal loss known scalar values") {
    TapeT<double> tape(false);
    {
        TensorT<double> logits = from_vector<double>({1, 2}, {0.0, 0.0});
        TensorT<double> l = focal_loss(tape, logits, {0}, {1.0, 1.0}, 0.0);
        CHECK(l.ptr()[0] == doctest::Approx(0.6931472).epsilon(1e-5));
    }
    {
        TensorT<double> logits = from_vector<double>({1, 2}, {0.0, 0.0});
        TensorT<double> l = focal_loss(tape, logits, {0}, {1.0, 1.0}, 2.0);
        CHECK(l.ptr()[0] == doctest::Approx(0.1732868).epsilon(1e-5));
    }
    {
        TensorT<double> logits = from_vector<double>({1, 2}, {std::log(9.0), 0.0});
        TensorT<double> l = focal_loss(tape, logits, {0}, {0.5, 1.5}, 2.0);
        CHECK(l.ptr()[0] == doctest::Approx(5.268e-4).epsilon(1e-3));
        CHECK(std::abs(l.ptr()[0] - 5.268e-4) < 1e-5);
    }
    {
        // A perfectly confident correct prediction contributes nothing.
        TensorT<double> logits = from_vector<double>({1, 2}, {60.0, -60.0});
        TensorT<double> l = focal_loss(tape, logits, {0}, {1.0, 1.0}, 2.0);
        CHECK(std::abs(l.ptr()[0]) < 1e-20);
    }
    {
        // Batch mean: one perfect row and one uniform row.
        TensorT<double> logits = from_vector<double>({2, 2}, {60.0, -60.0, 0.0, 0.0});
        TensorT<double> l = focal_loss(tape, logits, {0, 1}, {1.0, 1.0}, 0.0);
        CHECK(l.ptr()[0] == doctest::Approx(0.6931472 / 2.0).epsilon(1e-5));
    }
}

TEST_CASE("focal loss with gamma 0 and unit alpha is cross-entropy") {
    SplitMix64 rng(55);
    TapeT<double> tape(false);
    for (int trial = 0; trial < 1000; ++trial) {
        const int64_t b = 1 + static_cast<int64_t>(rng.uniform_int(8));
        const int64_t c = 2 + static_cast<int64_t>(rng.uniform_int(5));
        TensorT<double> logits = zeros<double>({b, c});
        for (int64_t i = 0; i < logits.numel(); ++i)
            logits.ptr()[i] = rng.uniform_range(-6.0, 6.0);
        std::vector<int> labels(static_cast<size_t>(b));
        for (auto& l : labels) l = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(c)));
        const std::vector<double> alpha(static_cast<size_t>(c), 1.0);
        TensorT<double> fl = focal_loss(tape, logits, labels, alpha, 0.0);
        const double ce = reference_cross_entropy(logits, labels);
        CHECK(std::abs(fl.ptr()[0] - ce) < 1e-6);
    }
}

TEST_CASE("focal loss gradient matches finite differences") {
    SplitMix64 rng(77);
    for (double gamma : {0.0, 0.5, 2.0}) {
        TensorT<double> logits = zeros<double>({4, 5}, true);
        for (int64_t i = 0; i < logits.numel(); ++i)
            logits.ptr()[i] = rng.uniform_range(-3.0, 3.0);
        const std::vector<int> labels = {0, 3, 2, 4};
        const std::vector<double> alpha = {0.5, 1.0, 1.5, 0.75, 1.25};
        TapeT<double> tape(true);
        TensorT<double> loss = focal_loss(tape, logits, labels, alpha, gamma);
        logits.zero_grad();
        tape.backward(loss);
        const double h = 1e-6;
        for (int64_t i = 0; i < logits.numel(); ++i) {
            const double keep = logits.ptr()[i];
            TapeT<double> off(false);
            logits.ptr()[i] = keep + h;
            const double up = focal_loss(off, logits, labels, alpha, gamma).ptr()[0];
            logits.ptr()[i] = keep - h;
            const double dn = focal_loss(off, logits, labels, alpha, gamma).ptr()[0];
            logits.ptr()[i] = keep;
            const double fd = (up - dn) / (2.0 * h);
            CHECK(std::abs(fd - logits.gptr()[i]) < 1e-7);
        }
    }
}

TEST_CASE("focal loss input validation") {
    TapeT<double> tape(false);
    TensorT<double> logits = zeros<double>({2, 3});
    CHECK_THROWS_AS((void)focal_loss(tape, logits, {0}, {1.0, 1.0, 1.0}, 2.0), ShapeError);
    CHECK_THROWS_AS((void)focal_loss(tape, logits, {0, 1}, {1.0, 1.0}, 2.0), ShapeError);
    CHECK_THROWS_AS((void)focal_loss(tape, logits, {0, 3}, {1.0, 1.0, 1.0}, 2.0), DataError);
    CHECK_THROWS_AS((void)focal_loss(tape, logits, {0, -1}, {1.0, 1.0, 1.0}, 2.0), DataError);
    CHECK_THROWS_AS((void)focal_loss(tape, logits, {0, 1}, {1.0, 1.0, 1.0}, -0.5), ConfigError);
}

TEST_CASE("windows_to_batch scales features into [0,1]") {
    std::vector<WindowSample> ws = separable_windows(2, 4);
    std::vector<int64_t> idx = {0, 1, 2, 3};
    Tensor batch = windows_to_batch<float>(ws, idx, 1, 3, 4);
    CHECK(batch.shape == std::vector<int64_t>{2, 4, 9});
    for (int64_t j = 0; j < 36; ++j) {
        CHECK(batch.ptr()[j] == 1.0f);       // class-1 window: 2304/2304
        CHECK(batch.ptr()[36 + j] == 0.0f);  // class-0 window
    }
    std::vector<int> labels = batch_labels<float>(ws, idx, 1, 3);
    CHECK(labels == std::vector<int>{1, 0});
    // Index order drives the packing.
    std::vector<int64_t> rev = {3, 2, 1, 0};
    std::vector<int> rlabels = batch_labels<float>(ws, rev, 0, 2);
    CHECK(rlabels == std::vector<int>{1, 0});
}

TEST_CASE("adamw closed-form single steps") {
    ModelConfig cfg = toy_config();
    TrainConfig tcfg;
    tcfg.lr = 0.01;

    // Zero gradient, zero decay: nothing moves.
    {
        ModelParamsT<float> p = init_params<float>(cfg, 3);
        ModelParamsT<float> before = clone_params(p);
        AdamWStateT<float> st = init_adamw(p);
        p.zero_grads();
        TrainConfig no_decay = tcfg;
        no_decay.weight_decay = 0.0;
        adamw_step(p, st, no_decay);
        CHECK(params_bitwise_equal(p, before));
    }

    // Zero gradient with decay: every weight shrinks by exactly lr*wd*w.
    {
        ModelParamsT<float> p = init_params<float>(cfg, 3);
        ModelParamsT<float> before = clone_params(p);
        AdamWStateT<float> st = init_adamw(p);
        p.zero_grads();
        adamw_step(p, st, tcfg);
        auto named = p.named();
        auto before_named = before.named();
        for (size_t t = 0; t < named.size(); ++t)
            for (int64_t i = 0; i < named[t].second->numel(); ++i) {
                const float w0 = before_named[t].second->ptr()[i];
                const float expected =
                    w0 - static_cast<float>(tcfg.lr * tcfg.weight_decay) * w0;
                CHECK(named[t].second->ptr()[i] == doctest::Approx(expected).epsilon(1e-6));
            }
    }

    // Constant gradient, no decay: the first step is -lr * g/(|g| + eps), about
    // -lr * sign(g), independent of the gradient magnitude.
    {
        ModelParamsT<float> p = make_params<float>(cfg);  // zeros and ones
        AdamWStateT<float> st = init_adamw(p);
        p.zero_grads();
        for (int64_t i = 0; i < p.w_in.numel(); ++i)
            p.w_in.grad->at(static_cast<size_t>(i)) = (i % 2 == 0) ? 0.5f : -2.0f;
        TrainConfig no_decay = tcfg;
        no_decay.weight_decay = 0.0;
        adamw_step(p, st, no_decay);
        for (int64_t i = 0; i < p.w_in.numel(); ++i) {
            const float expected = (i % 2 == 0) ? -0.01f : 0.01f;
            CHECK(p.w_in.ptr()[i] == doctest::Approx(expected).epsilon(1e-4));
        }
    }
}

TEST_CASE("training overfits a separable toy problem") {
    ModelConfig mcfg = toy_config();
    TrainConfig tcfg;
    tcfg.lr = 0.005;
    tcfg.batch = 8;
    tcfg.max_epochs = 80;
    tcfg.patience = 80;
    tcfg.gamma = 2.0;
    tcfg.seed = 3;
    std::vector<WindowSample> train_w = separable_windows(16, mcfg.window);
    std::vector<WindowSample> val_w = separable_windows(4, mcfg.window);
    TrainResult r = train(mcfg, tcfg, train_w, val_w);
    CHECK(r.best_val_loss < 0.01);
    CHECK(r.history.back().val_macro_f1 == doctest::Approx(1.0));
    CHECK(r.best_epoch >= 1);
    CHECK(r.alpha.size() == 2);
    CHECK(r.alpha[0] == doctest::Approx(1.0));  // balanced corpus

    // Evaluating the best snapshot reproduces the recorded best loss exactly.
    EvalResult ev = evaluate(r.best_params, mcfg, val_w, r.alpha, tcfg.gamma, tcfg.batch);
    bool found = false;
    for (const EpochStats& e : r.history)
        if (e.val_loss == ev.loss) found = true;
    CHECK(found);
}

TEST_CASE("training is deterministic given a seed") {
    ModelConfig mcfg = toy_config();
    TrainConfig tcfg;
    tcfg.lr = 0.01;
    tcfg.batch = 4;
    tcfg.max_epochs = 5;
    tcfg.patience = 5;
    tcfg.seed = 11;
    std::vector<WindowSample> train_w = separable_windows(8, mcfg.window);
    std::vector<WindowSample> val_w = separable_windows(2, mcfg.window);
    TrainResult a = train(mcfg, tcfg, train_w, val_w);
    TrainResult b = train(mcfg, tcfg, train_w, val_w);
    CHECK(params_bitwise_equal(a.best_params, b.best_params));
    CHECK(params_bitwise_equal(a.final_params, b.final_params));
    REQUIRE(a.history.size() == b.history.size());
    for (size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].train_loss == b.history[i].train_loss);
        CHECK(a.history[i].val_loss == b.history[i].val_loss);
    }
    TrainConfig other = tcfg;
    other.seed = 12;
    TrainResult c = train(mcfg, other, train_w, val_w);
    CHECK_FALSE(params_bitwise_equal(a.final_params, c.final_params));
}

TEST_CASE("early stopping waits exactly patience epochs past the best") {
    ModelConfig mcfg = toy_config();
    TrainConfig tcfg;
    tcfg.lr = 1e-30;  // updates vanish below float resolution: no epoch improves on the first
    tcfg.batch = 8;
    tcfg.max_epochs = 50;
    tcfg.patience = 3;
    std::vector<WindowSample> train_w = separable_windows(8, mcfg.window);
    std::vector<WindowSample> val_w = separable_windows(2, mcfg.window);
    TrainResult r = train(mcfg, tcfg, train_w, val_w);
    CHECK(r.best_epoch == 1);
    CHECK(r.history.size() == 4);  // epoch 1 is best, then patience misses
    CHECK(r.history[0].val_loss == r.best_val_loss);
}

TEST_CASE("training rejects empty splits") {
    ModelConfig mcfg = toy_config();
    TrainConfig tcfg;
    std::vector<WindowSample> some = separable_windows(4, mcfg.window);
    CHECK_THROWS_AS(train(mcfg, tcfg, {}, some), DataError);
    CHECK_THROWS_AS(train(mcfg, tcfg, some, {}), DataError);
}

TEST_CASE("exploding learning rate raises a divergence error") {
    ModelConfig mcfg = toy_config();
    TrainConfig tcfg;
    tcfg.lr = 1e30;
    tcfg.batch = 8;
    tcfg.max_epochs = 10;
    tcfg.patience = 10;
    std::vector<WindowSample> train_w = separable_windows(8, mcfg.window);
    std::vector<WindowSample> val_w = separable_windows(2, mcfg.window);
    CHECK_THROWS_AS(train(mcfg, tcfg, train_w, val_w), DivergenceError);
}

TEST_CASE("evaluate reports loss, metrics, and aligned predictions") {
    ModelConfig mcfg = toy_config();
    ModelParamsT<float> p = init_params<float>(mcfg, 21);
    std::vector<WindowSample> ws = separable_windows(6, mcfg.window);
    EvalResult ev = evaluate(p, mcfg, ws, {1.0, 1.0}, 2.0, 5);
    CHECK(ev.predictions.size() == ws.size());
    CHECK(ev.labels.size() == ws.size());
    for (size_t i = 0; i < ws.size(); ++i) CHECK(ev.labels[i] == ws[i].label);
    CHECK(ev.loss >= 0.0);
    CHECK(ev.metrics.total == static_cast<int64_t>(ws.size()));
    // Batch size must not affect results.
    EvalResult ev2 = evaluate(p, mcfg, ws, {1.0, 1.0}, 2.0, 100);
    CHECK(ev2.predictions == ev.predictions);
}

TEST_CASE("history csv round trip") {
    std::vector<EpochStats> h;
    h.push_back({1, 0.5, 0.4, 0.75});
    h.push_back({2, 0.25, 0.2, 0.875});
    TempFile f("history.csv");
    write_history_csv(f.path, h);
    std::vector<EpochStats> back = read_history_csv(f.path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].epoch == 1);
    CHECK(back[1].epoch == 2);
    CHECK(back[0].train_loss == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(back[1].val_macro_f1 == doctest::Approx(0.875).epsilon(1e-9));
}

#include "litecan/config.hpp"
#include "litecan/metrics.hpp"

TEST_CASE("metrics on a hand-built confusion") {
    std::vector<int> preds, labels;
    auto emit = [&](int p, int l, int times) {
        for (int i = 0; i < times; ++i) {
            preds.push_back(p);
            labels.push_back(l);
        }
    };
    emit(0, 0, 98);  // class-0 true positives
    emit(0, 1, 2);   // class-0 false positives
    emit(1, 0, 1);   // class-0 false negative, class-1 false positive
    emit(1, 1, 47);
    emit(2, 2, 10);
    MetricsReport r = compute_metrics(preds, labels, 3);
    const double p0 = 98.0 / 100.0, r0 = 98.0 / 99.0;
    CHECK(r.precision[0] == doctest::Approx(p0).epsilon(1e-12));
    CHECK(r.recall[0] == doctest::Approx(r0).epsilon(1e-12));
    CHECK(r.f1[0] == doctest::Approx(2.0 * p0 * r0 / (p0 + r0)).epsilon(1e-12));
    CHECK(r.precision[2] == doctest::Approx(1.0));
    CHECK(r.recall[2] == doctest::Approx(1.0));
    CHECK(r.total == 158);
    CHECK(r.overall_accuracy == doctest::Approx((98.0 + 47.0 + 10.0) / 158.0).epsilon(1e-12));
    CHECK(r.confusion[0][0] == 98);
    CHECK(r.confusion[1][0] == 2);  // rows are true labels, columns predictions
    CHECK(r.confusion[0][1] == 1);
    const double macro = (r.f1[0] + r.f1[1] + r.f1[2]) / 3.0;
    CHECK(r.macro_f1 == doctest::Approx(macro).epsilon(1e-12));
    // Per-class accuracy counts true negatives too.
    CHECK(r.class_accuracy[2] == doctest::Approx(1.0));
}

TEST_CASE("metrics zero-denominator conventions") {
    // Class 2 never appears and is never predicted; class 1 is predicted but
    // never right.
    std::vector<int> preds = {0, 1, 1, 0};
    std::vector<int> labels = {0, 0, 0, 0};
    MetricsReport r = compute_metrics(preds, labels, 3);
    CHECK(r.precision[1] == 0.0);
    CHECK(r.recall[1] == 0.0);  // no positives of class 1 at all
    CHECK(r.f1[1] == 0.0);
    CHECK(r.precision[2] == 0.0);
    CHECK(r.recall[2] == 0.0);
    CHECK(r.f1[2] == 0.0);
    CHECK(r.class_accuracy[2] == doctest::Approx(1.0));  // all true negatives
    CHECK(r.overall_accuracy == doctest::Approx(0.5));
}

TEST_CASE("metrics input validation") {
    CHECK_THROWS_AS(compute_metrics({}, {}, 3), DataError);
    CHECK_THROWS_AS(compute_metrics({0, 1}, {0}, 3), DataError);
    CHECK_THROWS_AS(compute_metrics({0, 3}, {0, 1}, 3), DataError);
    CHECK_THROWS_AS(compute_metrics({0, -1}, {0, 1}, 3), DataError);
    CHECK_THROWS_AS(compute_metrics({0, 0}, {0, 0}, 0), ConfigError);
}

TEST_CASE("binary detection accuracy collapses classes to attack or not") {
    const std::vector<int> preds = {0, 1, 2, 0};
    const std::vector<int> labels = {0, 3, 0, 0};
    CHECK(binary_detection_accuracy(preds, labels) == doctest::Approx(0.75));
    CHECK(binary_detection_accuracy({1}, {2}) == doctest::Approx(1.0));
    CHECK_THROWS_AS(binary_detection_accuracy({}, {}), DataError);
    CHECK_THROWS_AS(binary_detection_accuracy({0}, {0, 1}), DataError);
}

TEST_CASE("formatted metrics mention every class and the kv dump parses back") {
    std::vector<int> preds = {0, 1, 1, 2, 0};
    std::vector<int> labels = {0, 1, 0, 2, 2};
    MetricsReport r = compute_metrics(preds, labels, 3);
    const std::vector<std::string> names = {"Normal", "Flooding", "Fuzzy"};
    const std::string text = format_metrics(r, names);
    for (const std::string& n : names) CHECK(text.find(n) != std::string::npos);
    CHECK(text.find("overall accuracy") != std::string::npos);
    CHECK(text.find("macro") != std::string::npos);

    std::ostringstream kv;
    write_metrics_kv(kv, r, names);
    KvConfig parsed = KvConfig::parse_string(kv.str(), "metrics");
    CHECK(parsed.get_int("samples") == 5);
    CHECK(parsed.get_double("overall_accuracy") == doctest::Approx(0.6));
    CHECK(parsed.has("precision.Flooding"));
    CHECK(parsed.has("macro_f1"));
    CHECK(parsed.get_int("confusion.Normal.Flooding") == 1);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "doctest.h"
#include "litecan/federated.hpp"
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

std::vector<WindowSample> separable_windows(int per_class, int window, uint16_t hi = 2304) {
    std::vector<WindowSample> out;
    for (int i = 0; i < 2 * per_class; ++i) {
        WindowSample w;
        w.label = i % 2;
        w.features.assign(static_cast<size_t>(window) * kFeaturesPerMessage,
                          w.label == 0 ? 0 : hi);
        w.start_index = i;
        out.push_back(std::move(w));
    }
    return out;
}

TrainConfig toy_train_config() {
    TrainConfig tcfg;
    tcfg.lr = 0.01;
    tcfg.batch = 8;
    tcfg.seed = 5;
    return tcfg;
}

double param_distance(const ModelParamsT<float>& a, const ModelParamsT<float>& b) {
    auto an = a.named();
    auto bn = b.named();
    double sum = 0.0;
    for (size_t t = 0; t < an.size(); ++t)
        for (int64_t i = 0; i < an[t].second->numel(); ++i) {
            const double d = static_cast<double>(an[t].second->ptr()[i]) -
                             static_cast<double>(bn[t].second->ptr()[i]);
            sum += d * d;
        }
    return std::sqrt(sum);
}

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) : path("/tmp/litecan_test_" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("strategy names round trip") {
    CHECK(fed_strategy_from_string("fedavg") == FedStrategy::FedAvg);
    CHECK(fed_strategy_from_string("FedProx") == FedStrategy::FedProx);
    CHECK(fed_strategy_to_string(FedStrategy::FedAvg) == "fedavg");
    CHECK(fed_strategy_to_string(FedStrategy::FedProx) == "fedprox");
    CHECK_THROWS_AS(fed_strategy_from_string("gossip"), ConfigError);
}

TEST_CASE("federation config validation") {
    FedConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.mu = 0.1;  // proximal term under plain averaging is contradictory
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.strategy = FedStrategy::FedProx;
    CHECK_NOTHROW(cfg.validate());
    cfg.mu = -0.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = FedConfig{};
    cfg.n_clients = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = FedConfig{};
    cfg.rounds = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = FedConfig{};
    cfg.local_epochs = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("aggregate computes the data-size-weighted mean exactly") {
    ModelConfig cfg = toy_config();
    ModelParamsT<float> a = make_params<float>(cfg);
    ModelParamsT<float> b = make_params<float>(cfg);
    for (auto& kv : a.named())
        for (int64_t i = 0; i < kv.second->numel(); ++i) kv.second->ptr()[i] = 1.0f;
    for (auto& kv : b.named())
        for (int64_t i = 0; i < kv.second->numel(); ++i) kv.second->ptr()[i] = 3.0f;
    ModelParamsT<float> mean = aggregate({a, b}, {1, 3});
    for (const auto& kv : mean.named())
        for (int64_t i = 0; i < kv.second->numel(); ++i)
            CHECK(kv.second->ptr()[i] == 2.5f);  // (1*1 + 3*3) / 4
    ModelParamsT<float> equal = aggregate({a, b}, {5, 5});
    for (const auto& kv : equal.named())
        for (int64_t i = 0; i < kv.second->numel(); ++i) CHECK(kv.second->ptr()[i] == 2.0f);
}

TEST_CASE("aggregating identical weights is a fixed point") {
    ModelConfig cfg = toy_config();
    ModelParamsT<float> w = init_params<float>(cfg, 31);
    ModelParamsT<float> out =
        aggregate({clone_params(w), clone_params(w), clone_params(w)}, {7, 900, 13});
    CHECK(params_bitwise_equal(out, w));
}

TEST_CASE("aggregating a single client returns its weights unchanged") {
    ModelConfig cfg = toy_config();
    ModelParamsT<float> w = init_params<float>(cfg, 33);
    ModelParamsT<float> out = aggregate({clone_params(w)}, {12345});
    CHECK(params_bitwise_equal(out, w));
}

TEST_CASE("aggregate input validation") {
    ModelConfig cfg = toy_config();
    ModelParamsT<float> w = init_params<float>(cfg, 1);
    CHECK_THROWS_AS(aggregate({}, {}), ConfigError);
    CHECK_THROWS_AS(aggregate({w}, {1, 2}), ConfigError);
    CHECK_THROWS_AS(aggregate({w}, {0}), ConfigError);
    CHECK_THROWS_AS(aggregate({w}, {-5}), ConfigError);
    ModelConfig other = toy_config();
    other.d_model = 8;
    other.d_ff = 16;
    ModelParamsT<float> small = init_params<float>(other, 1);
    CHECK_THROWS_AS(aggregate({w, small}, {1, 1}), ShapeError);
}

TEST_CASE("one-client federation equals centralized training bit for bit") {
    ModelConfig mcfg = toy_config();
    TrainConfig tcfg = toy_train_config();
    std::vector<WindowSample> data = separable_windows(12, mcfg.window);
    std::vector<WindowSample> val = separable_windows(3, mcfg.window);

    FedConfig fcfg;
    fcfg.n_clients = 1;
    fcfg.rounds = 1;
    fcfg.local_epochs = 3;
    fcfg.seed = tcfg.seed;
    FedResult fed = run_federation(fcfg, mcfg, tcfg, {{data, val}});

    TrainConfig central = tcfg;
    central.max_epochs = 3;
    central.patience = 3;
    TrainResult ctr = train(mcfg, central, data, val);
    CHECK(params_bitwise_equal(fed.global, ctr.final_params));
}

TEST_CASE("fedprox with mu zero reproduces fedavg exactly") {
    ModelConfig mcfg = toy_config();
    TrainConfig tcfg = toy_train_config();
    std::vector<ClientData> clients;
    clients.push_back({separable_windows(10, mcfg.window), separable_windows(2, mcfg.window)});
    clients.push_back({separable_windows(6, mcfg.window), separable_windows(2, mcfg.window)});

    FedConfig avg;
    avg.n_clients = 2;
    avg.rounds = 3;
    avg.local_epochs = 2;
    avg.seed = 9;
    FedResult a = run_federation(avg, mcfg, tcfg, clients);

    FedConfig prox = avg;
    prox.strategy = FedStrategy::FedProx;
    prox.mu = 0.0;
    FedResult b = run_federation(prox, mcfg, tcfg, clients);
    CHECK(params_bitwise_equal(a.global, b.global));
    REQUIRE(a.rounds.size() == b.rounds.size());
    for (size_t r = 0; r < a.rounds.size(); ++r)
        CHECK(a.rounds[r].global_val_loss == b.rounds[r].global_val_loss);
}

TEST_CASE("a large proximal coefficient pins local updates near the anchor") {
    ModelConfig mcfg = toy_config();
    TrainConfig tcfg = toy_train_config();
    std::vector<WindowSample> data = separable_windows(16, mcfg.window);
    ModelParamsT<float> global = init_params<float>(mcfg, 41);

    ModelParamsT<float> free_run =
        local_update(global, mcfg, tcfg, data, {1.0, 1.0}, 4, 0.0, 777);
    ModelParamsT<float> pinned =
        local_update(global, mcfg, tcfg, data, {1.0, 1.0}, 4, 1000.0, 777);
    const double drift_free = param_distance(free_run, global);
    const double drift_pinned = param_distance(pinned, global);
    CHECK(drift_pinned < 0.5 * drift_free);
}

TEST_CASE("sequential and threaded rounds produce identical globals") {
    ModelConfig mcfg = toy_config();
    TrainConfig tcfg = toy_train_config();
    std::vector<ClientData> clients;
    clients.push_back({separable_windows(8, mcfg.window), separable_windows(2, mcfg.window)});
    clients.push_back({separable_windows(5, mcfg.window), separable_windows(2, mcfg.window)});
    clients.push_back({separable_windows(11, mcfg.window), separable_windows(2, mcfg.window)});

    FedConfig fcfg;
    fcfg.n_clients = 3;
    fcfg.rounds = 2;
    fcfg.local_epochs = 1;
    fcfg.seed = 21;
    fcfg.sequential = true;
    FedResult seq = run_federation(fcfg, mcfg, tcfg, clients);
    fcfg.sequential = false;
    FedResult par = run_federation(fcfg, mcfg, tcfg, clients);
    CHECK(params_bitwise_equal(seq.global, par.global));
}

TEST_CASE("round reports carry per-client sample counts and 1-based rounds") {
    ModelConfig mcfg = toy_config();
    TrainConfig tcfg = toy_train_config();
    std::vector<ClientData> clients;
    clients.push_back({separable_windows(9, mcfg.window), separable_windows(2, mcfg.window)});
    clients.push_back({separable_windows(4, mcfg.window), separable_windows(2, mcfg.window)});

    FedConfig fcfg;
    fcfg.n_clients = 2;
    fcfg.rounds = 3;
    fcfg.local_epochs = 1;
    fcfg.seed = 2;
    FedResult r = run_federation(fcfg, mcfg, tcfg, clients);
    REQUIRE(r.rounds.size() == 3);
    for (size_t i = 0; i < r.rounds.size(); ++i) {
        CHECK(r.rounds[i].round == static_cast<int>(i) + 1);
        REQUIRE(r.rounds[i].locals.size() == 2);
        CHECK(r.rounds[i].locals[0].n_samples == 18);
        CHECK(r.rounds[i].locals[1].n_samples == 8);
        CHECK(std::isfinite(r.rounds[i].global_val_loss));
        CHECK(std::isfinite(r.rounds[i].locals[0].train_loss));
    }
    CHECK(r.pooled_alpha.size() == 2);

    TempFile f("rounds.csv");
    write_round_reports_csv(f.path, r.rounds);
    std::vector<RoundReport> back = read_round_reports_csv(f.path);
    REQUIRE(back.size() == 3);
    CHECK(back[2].round == 3);
    REQUIRE(back[1].locals.size() == 2);
    CHECK(back[1].locals[1].n_samples == 8);
    CHECK(back[0].global_val_loss == doctest::Approx(r.rounds[0].global_val_loss).epsilon(1e-9));
}

TEST_CASE("federation input validation") {
    ModelConfig mcfg = toy_config();
    TrainConfig tcfg = toy_train_config();
    FedConfig fcfg;
    fcfg.n_clients = 2;
    fcfg.rounds = 1;
    std::vector<ClientData> one_client;
    one_client.push_back({separable_windows(4, mcfg.window), separable_windows(2, mcfg.window)});
    CHECK_THROWS_AS(run_federation(fcfg, mcfg, tcfg, one_client), ConfigError);

    std::vector<ClientData> empty_train;
    empty_train.push_back({separable_windows(4, mcfg.window), separable_windows(2, mcfg.window)});
    empty_train.push_back({{}, separable_windows(2, mcfg.window)});
    CHECK_THROWS_AS(run_federation(fcfg, mcfg, tcfg, empty_train), DataError);

    std::vector<ClientData> no_val;
    no_val.push_back({separable_windows(4, mcfg.window), {}});
    no_val.push_back({separable_windows(4, mcfg.window), {}});
    CHECK_THROWS_AS(run_federation(fcfg, mcfg, tcfg, no_val), DataError);
}

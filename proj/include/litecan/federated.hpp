#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "litecan/can_data.hpp"
#include "litecan/model.hpp"
#include "litecan/training.hpp"

namespace litecan {

enum class FedStrategy { FedAvg, FedProx };

FedStrategy fed_strategy_from_string(const std::string& name);
std::string fed_strategy_to_string(FedStrategy s);

struct FedConfig {
    int n_clients = 4;
    int rounds = 40;
    int local_epochs = 5;
    FedStrategy strategy = FedStrategy::FedAvg;
    double mu = 0.0;  // proximal coefficient, used by FedProx only
    uint64_t seed = 1;
    bool sequential = true;  // false runs clients on threads within a round

    void validate() const;
};

struct ClientData {
    std::vector<WindowSample> train, val;
};

struct LocalReport {
    int client = 0;
    int64_t n_samples = 0;
    double train_loss = 0.0;  // mean loss of the final local epoch
};

struct RoundReport {
    int round = 0;  // 1-based
    std::vector<LocalReport> locals;
    double global_val_loss = 0.0;
    double global_val_macro_f1 = 0.0;
};

struct FedResult {
    ModelParamsT<float> global;
    std::vector<RoundReport> rounds;
    std::vector<double> pooled_alpha;
};

// One client's contribution to a round: clones the broadcast weights, runs
// local_epochs of mini-batch training with a fresh optimizer, and returns
// the final weights. Under FedProx (mu > 0) every gradient step pulls toward
// the broadcast weights, which stay fixed for the whole local run.
ModelParamsT<float> local_update(const ModelParamsT<float>& global_weights,
                                 const ModelConfig& mcfg, const TrainConfig& tcfg,
                                 const std::vector<WindowSample>& train_windows,
                                 const std::vector<double>& alpha, int local_epochs, double mu,
                                 uint64_t stream_seed, double* final_epoch_loss = nullptr);

// Data-size-weighted elementwise mean of client weights. Accumulates in
// double, so equal inputs are an exact fixed point.
ModelParamsT<float> aggregate(const std::vector<ModelParamsT<float>>& client_weights,
                              const std::vector<int64_t>& client_counts);

// Full simulation: rounds of broadcast, local updates (sequential or
// threaded), and aggregation, with global validation on the pooled client
// validation sets after each round. Any client failure aborts the run.
FedResult run_federation(const FedConfig& fcfg, const ModelConfig& mcfg, const TrainConfig& tcfg,
                         const std::vector<ClientData>& clients);

void write_round_reports_csv(const std::string& path, const std::vector<RoundReport>& rounds);
std::vector<RoundReport> read_round_reports_csv(const std::string& path);

}  // namespace litecan

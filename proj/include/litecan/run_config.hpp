#pragma once

#include <string>
#include <vector>

#include "litecan/can_data.hpp"
#include "litecan/config.hpp"
#include "litecan/federated.hpp"
#include "litecan/model.hpp"
#include "litecan/training.hpp"

namespace litecan {

// Merged run settings for the train/fedtrain/preprocess commands. Defaults
// are the documented hyperparameters; a config file overrides defaults and
// command-line flags override the file.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    FedConfig fed;
    std::string label_space = "Unified4";
    SplitRatios ratios;
    int stride = 1;
    std::string data;                      // capture refs, `path[:class]` comma list
    std::vector<std::string> client_data;  // per-client capture refs for fedtrain
    std::string out_dir = ".";
};

// Applies `overrides` on top of `file_cfg`, validates the merged keys
// against the schema, and materializes typed settings. Unknown keys are
// rejected; `client_<n>` keys carry per-client datasets.
RunConfig load_run_config(const KvConfig& file_cfg, const KvConfig& overrides);

}  // namespace litecan

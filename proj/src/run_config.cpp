#include "litecan/run_config.hpp"

#include <cctype>

namespace litecan {

namespace {

bool is_client_key(const std::string& key) {
    if (key.rfind("client_", 0) != 0 || key.size() == 7) return false;
    for (size_t i = 7; i < key.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(key[i]))) return false;
    return true;
}

}  // namespace

RunConfig load_run_config(const KvConfig& file_cfg, const KvConfig& overrides) {
    KvConfig merged = file_cfg;
    for (const auto& kv : overrides.entries()) merged.set(kv.first, kv.second);

    static const std::vector<std::string> schema = {
        "d_model",     "n_heads",      "n_layers", "d_ff",      "dropout",     "window",
        "pos_encoding", "label_space", "lr",       "batch",     "epochs",      "patience",
        "gamma",       "weight_decay", "seed",     "clients",   "rounds",      "local_epochs",
        "strategy",    "mu",           "split_train", "split_val", "split_test", "stride",
        "data",        "out_dir",      "sequential"};
    {
        std::string unknown;
        for (const auto& kv : merged.entries()) {
            bool known = is_client_key(kv.first);
            for (const auto& s : schema)
                if (kv.first == s) {
                    known = true;
                    break;
                }
            if (!known) unknown += (unknown.empty() ? "" : ", ") + kv.first;
        }
        if (!unknown.empty()) throw ConfigError("unknown config keys: " + unknown);
    }

    RunConfig rc;
    rc.label_space = merged.get_string("label_space", "Unified4");
    const LabelSpace space = LabelSpace::by_name(rc.label_space);

    rc.model.d_in = kFeaturesPerMessage;
    rc.model.d_model = static_cast<int>(merged.get_int("d_model", 64));
    rc.model.n_heads = static_cast<int>(merged.get_int("n_heads", 2));
    rc.model.n_layers = static_cast<int>(merged.get_int("n_layers", 2));
    rc.model.d_ff = static_cast<int>(merged.get_int("d_ff", 256));
    rc.model.dropout = merged.get_double("dropout", 0.15);
    rc.model.window = static_cast<int>(merged.get_int("window", 10));
    rc.model.n_classes = space.size();
    rc.model.pos_encoding = merged.get_string("pos_encoding", "sinusoidal");
    rc.model.validate();

    rc.train.lr = merged.get_double("lr", 0.001);
    rc.train.batch = static_cast<int>(merged.get_int("batch", 128));
    rc.train.max_epochs = static_cast<int>(merged.get_int("epochs", 200));
    rc.train.patience = static_cast<int>(merged.get_int("patience", 15));
    rc.train.gamma = merged.get_double("gamma", 2.0);
    rc.train.weight_decay = merged.get_double("weight_decay", 0.01);
    rc.train.seed = static_cast<uint64_t>(merged.get_int("seed", 1));
    rc.train.validate();

    rc.fed.n_clients = static_cast<int>(merged.get_int("clients", 4));
    rc.fed.rounds = static_cast<int>(merged.get_int("rounds", 40));
    rc.fed.local_epochs = static_cast<int>(merged.get_int("local_epochs", 5));
    rc.fed.strategy = fed_strategy_from_string(merged.get_string("strategy", "fedavg"));
    rc.fed.mu = merged.get_double("mu", 0.0);
    rc.fed.seed = rc.train.seed;
    rc.fed.sequential = merged.get_bool("sequential", true);
    rc.fed.validate();

    rc.ratios.train = merged.get_double("split_train", 0.70);
    rc.ratios.val = merged.get_double("split_val", 0.15);
    rc.ratios.test = merged.get_double("split_test", 0.15);
    for (double v : {rc.ratios.train, rc.ratios.val, rc.ratios.test})
        if (v < 0.0 || v > 1.0) throw ConfigError("split ratios must lie in [0, 1]");
    if (rc.ratios.train <= 0.0) throw ConfigError("split_train must be positive");
    if (rc.ratios.train + rc.ratios.val + rc.ratios.test > 1.0 + 1e-9)
        throw ConfigError("split ratios must not sum past 1");
    rc.stride = static_cast<int>(merged.get_int("stride", 1));
    if (rc.stride < 1) throw ConfigError("stride must be >= 1");
    rc.data = merged.get_string("data", "");
    rc.out_dir = merged.get_string("out_dir", ".");

    rc.client_data.assign(static_cast<size_t>(rc.fed.n_clients), "");
    for (const auto& kv : merged.entries()) {
        if (!is_client_key(kv.first)) continue;
        const int idx = static_cast<int>(parse_int(kv.first.substr(7), "client index"));
        if (idx < 1 || idx > rc.fed.n_clients)
            throw ConfigError("config key '" + kv.first + "' outside 1.." +
                              std::to_string(rc.fed.n_clients) + " (clients = " +
                              std::to_string(rc.fed.n_clients) + ")");
        rc.client_data[static_cast<size_t>(idx - 1)] = kv.second;
    }
    return rc;
}

}  // namespace litecan

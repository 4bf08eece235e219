#include <cctype>
#include "litecan/federated.hpp"

#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <thread>

namespace litecan {

FedStrategy fed_strategy_from_string(const std::string& name) {
    std::string lower = name;
    for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (lower == "fedavg") return FedStrategy::FedAvg;
    if (lower == "fedprox") return FedStrategy::FedProx;
    throw ConfigError("unknown federation strategy '" + name + "' (expected fedavg or fedprox)");
}

std::string fed_strategy_to_string(FedStrategy s) {
    return s == FedStrategy::FedAvg ? "fedavg" : "fedprox";
}

void FedConfig::validate() const {
    if (n_clients < 1) throw ConfigError("clients must be >= 1");
    if (rounds < 1) throw ConfigError("rounds must be >= 1");
    if (local_epochs < 1) throw ConfigError("local_epochs must be >= 1");
    if (strategy == FedStrategy::FedProx && mu < 0.0)
        throw ConfigError("fedprox mu must be >= 0");
    if (strategy == FedStrategy::FedAvg && mu != 0.0)
        throw ConfigError("mu is only meaningful with fedprox");
}

ModelParamsT<float> local_update(const ModelParamsT<float>& global_weights,
                                 const ModelConfig& mcfg, const TrainConfig& tcfg,
                                 const std::vector<WindowSample>& train_windows,
                                 const std::vector<double>& alpha, int local_epochs, double mu,
                                 uint64_t stream_seed, double* final_epoch_loss) {
    ModelParamsT<float> params = clone_params(global_weights);
    AdamWStateT<float> opt = init_adamw(params);
    SplitMix64 rng(stream_seed);
    const ModelParamsT<float>* anchor = mu > 0.0 ? &global_weights : nullptr;
    double loss = 0.0;
    for (int e = 0; e < local_epochs; ++e)
        loss = run_train_epoch(params, opt, mcfg, tcfg, train_windows, alpha, anchor, mu, rng);
    if (final_epoch_loss) *final_epoch_loss = loss;
    return params;
}

ModelParamsT<float> aggregate(const std::vector<ModelParamsT<float>>& client_weights,
                              const std::vector<int64_t>& client_counts) {
    if (client_weights.empty()) throw ConfigError("aggregate needs at least one client");
    if (client_weights.size() != client_counts.size())
        throw ConfigError("aggregate: weight/count list size mismatch");
    int64_t total = 0;
    for (int64_t c : client_counts) {
        if (c <= 0) throw ConfigError("aggregate: client counts must be positive");
        total += c;
    }
    ModelParamsT<float> out = clone_params(client_weights[0]);
    auto out_named = out.named();
    std::vector<std::vector<std::pair<std::string, const TensorT<float>*>>> named;
    named.reserve(client_weights.size());
    for (const auto& w : client_weights) named.push_back(w.named());
    for (size_t t = 0; t < out_named.size(); ++t) {
        for (size_t c = 1; c < named.size(); ++c)
            if (named[c][t].second->shape != named[0][t].second->shape)
                throw ShapeError("aggregate: tensor " + out_named[t].first +
                                 " has mismatched shapes across clients");
        float* dst = out_named[t].second->ptr();
        const int64_t n = out_named[t].second->numel();
        for (int64_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (size_t c = 0; c < named.size(); ++c)
                acc += static_cast<double>(client_counts[c]) *
                       static_cast<double>(named[c][t].second->ptr()[i]);
            dst[i] = static_cast<float>(acc / static_cast<double>(total));
        }
    }
    return out;
}

FedResult run_federation(const FedConfig& fcfg, const ModelConfig& mcfg, const TrainConfig& tcfg,
                         const std::vector<ClientData>& clients) {
    fcfg.validate();
    mcfg.validate();
    tcfg.validate();
    if (static_cast<int>(clients.size()) != fcfg.n_clients)
        throw ConfigError("federation configured for " + std::to_string(fcfg.n_clients) +
                          " clients but " + std::to_string(clients.size()) + " datasets given");
    std::vector<int64_t> counts;
    std::vector<std::vector<double>> alphas;
    std::vector<WindowSample> pooled_val;
    for (size_t c = 0; c < clients.size(); ++c) {
        if (clients[c].train.empty())
            throw DataError("client " + std::to_string(c) + " has an empty training set");
        counts.push_back(static_cast<int64_t>(clients[c].train.size()));
        alphas.push_back(alpha_weights(class_frequencies(clients[c].train, mcfg.n_classes)));
        pooled_val.insert(pooled_val.end(), clients[c].val.begin(), clients[c].val.end());
    }
    if (pooled_val.empty()) throw DataError("no client provided validation windows");

    FedResult res;
    {
        std::vector<WindowSample> pooled_train;
        for (const ClientData& c : clients)
            pooled_train.insert(pooled_train.end(), c.train.begin(), c.train.end());
        res.pooled_alpha = alpha_weights(class_frequencies(pooled_train, mcfg.n_classes));
    }
    ModelParamsT<float> global = init_params<float>(mcfg, fcfg.seed);
    const double mu = fcfg.strategy == FedStrategy::FedProx ? fcfg.mu : 0.0;

    for (int round = 0; round < fcfg.rounds; ++round) {
        std::vector<ModelParamsT<float>> updated(clients.size());
        std::vector<double> losses(clients.size(), 0.0);
        auto run_client = [&](size_t c) {
            const uint64_t stream = mix_seed(fcfg.seed, seed_stream::kTrain,
                                             static_cast<uint64_t>(round), static_cast<uint64_t>(c));
            updated[c] = local_update(global, mcfg, tcfg, clients[c].train, alphas[c],
                                      fcfg.local_epochs, mu, stream, &losses[c]);
        };
        if (fcfg.sequential || clients.size() == 1) {
            for (size_t c = 0; c < clients.size(); ++c) run_client(c);
        } else {
            std::vector<std::thread> threads;
            std::vector<std::exception_ptr> errors(clients.size());
            for (size_t c = 0; c < clients.size(); ++c)
                threads.emplace_back([&, c]() {
                    try {
                        run_client(c);
                    } catch (...) {
                        errors[c] = std::current_exception();
                    }
                });
            for (auto& t : threads) t.join();
            for (const auto& e : errors)
                if (e) std::rethrow_exception(e);
        }
        global = aggregate(updated, counts);

        RoundReport report;
        report.round = round + 1;
        for (size_t c = 0; c < clients.size(); ++c)
            report.locals.push_back({static_cast<int>(c), counts[c], losses[c]});
        const EvalResult ev =
            evaluate(global, mcfg, pooled_val, res.pooled_alpha, tcfg.gamma, tcfg.batch);
        report.global_val_loss = ev.loss;
        report.global_val_macro_f1 = ev.metrics.macro_f1;
        res.rounds.push_back(std::move(report));
    }
    res.global = std::move(global);
    return res;
}

void write_round_reports_csv(const std::string& path, const std::vector<RoundReport>& rounds) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write round report file: " + path);
    out << "round,client,n_samples,local_train_loss,global_val_loss,global_val_macro_f1\n";
    char buf[160];
    for (const RoundReport& r : rounds)
        for (const LocalReport& l : r.locals) {
            std::snprintf(buf, sizeof buf, "%d,%d,%lld,%.9g,%.9g,%.9g\n", r.round, l.client,
                          static_cast<long long>(l.n_samples), l.train_loss, r.global_val_loss,
                          r.global_val_macro_f1);
            out << buf;
        }
    if (!out) throw DataError("write failed: " + path);
}

std::vector<RoundReport> read_round_reports_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open round report file: " + path);
    std::string line;
    if (!std::getline(in, line) ||
        trim(line) != "round,client,n_samples,local_train_loss,global_val_loss,global_val_macro_f1")
        throw DataError(path + ": missing round report header");
    std::map<int, RoundReport> by_round;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const std::vector<std::string> f = split(line, ',');
        const std::string where = path + ":" + std::to_string(lineno);
        if (f.size() != 6) throw DataError(where + ": expected 6 fields");
        const int round = static_cast<int>(parse_int(f[0], where));
        RoundReport& r = by_round[round];
        r.round = round;
        LocalReport l;
        l.client = static_cast<int>(parse_int(f[1], where));
        l.n_samples = parse_int(f[2], where);
        l.train_loss = parse_double(f[3], where);
        r.global_val_loss = parse_double(f[4], where);
        r.global_val_macro_f1 = parse_double(f[5], where);
        r.locals.push_back(l);
    }
    std::vector<RoundReport> out;
    out.reserve(by_round.size());
    for (auto& kv : by_round) out.push_back(std::move(kv.second));
    return out;
}

}  // namespace litecan

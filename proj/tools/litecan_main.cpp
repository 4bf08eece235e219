#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "litecan/bench.hpp"
#include "litecan/can_data.hpp"
#include "litecan/config.hpp"
#include "litecan/errors.hpp"
#include "litecan/federated.hpp"
#include "litecan/metrics.hpp"
#include "litecan/model.hpp"
#include "litecan/run_config.hpp"
#include "litecan/training.hpp"

namespace {

using namespace litecan;

namespace fs = std::filesystem;

// Flag values are collected as raw strings into an override KvConfig so the
// run-config loader applies one precedence rule: flag > file > default.
void add_override(CLI::App* cmd, KvConfig& ov, const std::string& flag, const std::string& key,
                  const std::string& help) {
    cmd->add_option_function<std::string>(
        flag, [&ov, key](const std::string& v) { ov.set(key, v); }, help);
}

std::vector<Capture> load_captures(const std::string& refs, const LabelSpace& space) {
    const std::vector<CaptureRef> list = parse_capture_refs(refs, space);
    std::vector<Capture> caps;
    int32_t file_id = 0;
    for (const CaptureRef& ref : list) {
        std::vector<std::string> warnings;
        Capture cap;
        cap.messages = parse_can_csv(ref.path, space, ref.attack_class, &warnings);
        cap.file_id = file_id++;
        for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
        if (cap.messages.empty()) throw DataError("capture is empty: " + ref.path);
        caps.push_back(std::move(cap));
    }
    return caps;
}

void ensure_out_dir(const std::string& dir) {
    if (dir.empty() || dir == ".") return;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory " + dir + ": " + ec.message());
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

void print_run_header(const RunConfig& rc) {
    char buf[128];
    std::cout << "run config:\n";
    auto kv = [&](const char* key, const std::string& value) {
        std::cout << "  " << key << " = " << value << "\n";
    };
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%g", v);
        return std::string(buf);
    };
    kv("label_space", rc.label_space);
    kv("d_model", std::to_string(rc.model.d_model));
    kv("n_heads", std::to_string(rc.model.n_heads));
    kv("n_layers", std::to_string(rc.model.n_layers));
    kv("d_ff", std::to_string(rc.model.d_ff));
    kv("dropout", num(rc.model.dropout));
    kv("window", std::to_string(rc.model.window));
    kv("stride", std::to_string(rc.stride));
    kv("pos_encoding", rc.model.pos_encoding);
    kv("lr", num(rc.train.lr));
    kv("batch", std::to_string(rc.train.batch));
    kv("epochs", std::to_string(rc.train.max_epochs));
    kv("patience", std::to_string(rc.train.patience));
    kv("gamma", num(rc.train.gamma));
    kv("weight_decay", num(rc.train.weight_decay));
    kv("seed", std::to_string(rc.train.seed));
    kv("parameters", std::to_string(param_count(rc.model)));
}

void report_split_sizes(const DatasetSplits& splits) {
    std::cout << "windows: train " << splits.train.size() << ", val " << splits.val.size()
              << ", test " << splits.test.size() << "\n";
}

int cmd_synth(const std::string& out_path, const std::string& profile_path, double duration,
              const KvConfig& overrides) {
    KvConfig cfg = profile_path.empty() ? KvConfig() : KvConfig::parse_file(profile_path);
    for (const auto& kv : overrides.entries()) cfg.set(kv.first, kv.second);
    const SynthSetup setup = synth_setup_from_config(cfg);
    const std::vector<CanMessage> messages = generate_synthetic(setup.profile, duration, setup.attack);
    if (messages.empty()) throw DataError("generated capture is empty; increase duration");
    write_can_csv(out_path, messages);
    int64_t attacks = 0;
    for (const CanMessage& m : messages)
        if (m.flag == Flag::Attack) ++attacks;
    std::cout << "wrote " << messages.size() << " messages (" << attacks << " attack-flagged) to "
              << out_path << "\n";
    return 0;
}

int cmd_preprocess(const std::string& config_path, const KvConfig& overrides) {
    const KvConfig file_cfg =
        config_path.empty() ? KvConfig() : KvConfig::parse_file(config_path);
    const RunConfig rc = load_run_config(file_cfg, overrides);
    if (rc.data.empty()) throw ConfigError("preprocess needs --data (or a data key in the config)");
    const LabelSpace space = LabelSpace::by_name(rc.label_space);
    const std::vector<Capture> captures = load_captures(rc.data, space);
    const DatasetSplits splits =
        build_split_windows(captures, rc.ratios, rc.model.window, rc.stride);
    ensure_out_dir(rc.out_dir);
    write_windows_csv(join_path(rc.out_dir, "train_windows.csv"), splits.train);
    write_windows_csv(join_path(rc.out_dir, "val_windows.csv"), splits.val);
    write_windows_csv(join_path(rc.out_dir, "test_windows.csv"), splits.test);
    report_split_sizes(splits);
    std::ofstream summary(join_path(rc.out_dir, "summary.kv"));
    if (!summary) throw DataError("cannot write summary file");
    auto counts_line = [&](const char* name, const std::vector<WindowSample>& w) {
        summary << name << "_windows = " << w.size() << "\n";
        if (w.empty()) return;
        const std::vector<int64_t> counts = class_frequencies(w, space.size());
        for (int c = 0; c < space.size(); ++c)
            summary << name << "_count." << space.class_name(c) << " = "
                    << counts[static_cast<size_t>(c)] << "\n";
    };
    counts_line("train", splits.train);
    counts_line("val", splits.val);
    counts_line("test", splits.test);
    std::cout << "wrote window splits to " << rc.out_dir << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const KvConfig& overrides) {
    const KvConfig file_cfg =
        config_path.empty() ? KvConfig() : KvConfig::parse_file(config_path);
    const RunConfig rc = load_run_config(file_cfg, overrides);
    if (rc.data.empty()) throw ConfigError("train needs --data (or a data key in the config)");
    print_run_header(rc);
    const LabelSpace space = LabelSpace::by_name(rc.label_space);
    const std::vector<Capture> captures = load_captures(rc.data, space);
    const DatasetSplits splits =
        build_split_windows(captures, rc.ratios, rc.model.window, rc.stride);
    report_split_sizes(splits);

    const TrainResult result = train(rc.model, rc.train, splits.train, splits.val);
    for (const EpochStats& e : result.history) {
        char line[160];
        std::snprintf(line, sizeof line,
                      "epoch %3d  train_loss %.6f  val_loss %.6f  val_macro_f1 %.4f\n", e.epoch,
                      e.train_loss, e.val_loss, e.val_macro_f1);
        std::cout << line;
    }
    std::cout << "best epoch " << result.best_epoch << " (val_loss "
              << result.best_val_loss << ")\n";

    ensure_out_dir(rc.out_dir);
    const std::string ckpt = join_path(rc.out_dir, "model.fltc");
    save_checkpoint(result.best_params, rc.model, ckpt);
    write_history_csv(join_path(rc.out_dir, "history.csv"), result.history);
    std::cout << "checkpoint " << ckpt << "\n";

    if (!splits.test.empty()) {
        const EvalResult test_ev = evaluate(result.best_params, rc.model, splits.test,
                                            result.alpha, rc.train.gamma, rc.train.batch);
        std::cout << "test metrics:\n" << format_metrics(test_ev.metrics, space.classes);
        std::ofstream kv(join_path(rc.out_dir, "metrics.kv"));
        if (!kv) throw DataError("cannot write metrics file");
        kv << "split = test\n";
        write_metrics_kv(kv, test_ev.metrics, space.classes);
    }
    return 0;
}

int cmd_fedtrain(const std::string& config_path, const std::vector<std::string>& client_flags,
                 const KvConfig& overrides) {
    KvConfig all_overrides = overrides;
    for (size_t i = 0; i < client_flags.size(); ++i)
        all_overrides.set("client_" + std::to_string(i + 1), client_flags[i]);
    if (!client_flags.empty() && !all_overrides.has("clients"))
        all_overrides.set("clients", std::to_string(client_flags.size()));
    const KvConfig file_cfg =
        config_path.empty() ? KvConfig() : KvConfig::parse_file(config_path);
    const RunConfig rc = load_run_config(file_cfg, all_overrides);
    print_run_header(rc);
    std::cout << "  clients = " << rc.fed.n_clients << "\n  rounds = " << rc.fed.rounds
              << "\n  local_epochs = " << rc.fed.local_epochs
              << "\n  strategy = " << fed_strategy_to_string(rc.fed.strategy);
    if (rc.fed.strategy == FedStrategy::FedProx) std::cout << " (mu " << rc.fed.mu << ")";
    std::cout << "\n  mode = " << (rc.fed.sequential ? "sequential" : "parallel") << "\n";

    const LabelSpace space = LabelSpace::by_name(rc.label_space);
    std::vector<ClientData> clients;
    for (int c = 0; c < rc.fed.n_clients; ++c) {
        const std::string& refs = rc.client_data[static_cast<size_t>(c)];
        if (refs.empty())
            throw ConfigError("no dataset for client " + std::to_string(c + 1) +
                              " (use client_" + std::to_string(c + 1) + " or --client)");
        const std::vector<Capture> captures = load_captures(refs, space);
        const DatasetSplits splits =
            build_split_windows(captures, rc.ratios, rc.model.window, rc.stride);
        std::cout << "client " << (c + 1) << ": train " << splits.train.size() << ", val "
                  << splits.val.size() << " windows\n";
        clients.push_back({std::move(splits.train), std::move(splits.val)});
    }

    const FedResult result = run_federation(rc.fed, rc.model, rc.train, clients);
    for (const RoundReport& r : result.rounds) {
        char line[160];
        std::snprintf(line, sizeof line, "round %3d  val_loss %.6f  val_macro_f1 %.4f\n", r.round,
                      r.global_val_loss, r.global_val_macro_f1);
        std::cout << line;
    }

    ensure_out_dir(rc.out_dir);
    const std::string ckpt = join_path(rc.out_dir, "model.fltc");
    save_checkpoint(result.global, rc.model, ckpt);
    write_round_reports_csv(join_path(rc.out_dir, "rounds.csv"), result.rounds);
    std::cout << "checkpoint " << ckpt << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data, const std::string& space_name,
             const std::string& split, bool binary_detection, int batch, const KvConfig& split_cfg,
             const std::string& out_dir) {
    const LoadedModel loaded = load_checkpoint(ckpt_path);
    const LabelSpace space = LabelSpace::by_name(space_name);
    if (!binary_detection && space.size() != loaded.config.n_classes)
        throw ConfigError("checkpoint has " + std::to_string(loaded.config.n_classes) +
                          " classes but label space " + space.name + " has " +
                          std::to_string(space.size()) + " (use --binary-detection)");
    const std::vector<Capture> captures = load_captures(data, space);

    std::vector<WindowSample> windows;
    if (split == "all") {
        for (const Capture& cap : captures) {
            std::vector<WindowSample> w = make_windows(
                cap.messages, loaded.config.window,
                static_cast<int>(split_cfg.get_int("stride", 1)), cap.file_id);
            windows.insert(windows.end(), std::make_move_iterator(w.begin()),
                           std::make_move_iterator(w.end()));
        }
    } else {
        SplitRatios ratios;
        ratios.train = split_cfg.get_double("split_train", 0.70);
        ratios.val = split_cfg.get_double("split_val", 0.15);
        ratios.test = split_cfg.get_double("split_test", 0.15);
        DatasetSplits splits =
            build_split_windows(captures, ratios, loaded.config.window,
                                static_cast<int>(split_cfg.get_int("stride", 1)));
        if (split == "train")
            windows = std::move(splits.train);
        else if (split == "val")
            windows = std::move(splits.val);
        else if (split == "test")
            windows = std::move(splits.test);
        else
            throw ConfigError("unknown split '" + split + "' (expected all, train, val, or test)");
    }
    if (windows.empty()) throw DataError("no windows to evaluate");

    const std::vector<double> alpha(static_cast<size_t>(loaded.config.n_classes), 1.0);
    // Labels can index past the model's classes when spaces differ; metrics
    // are then computed over the wider space for the binary report.
    const int metric_classes = std::max(loaded.config.n_classes, space.size());
    std::vector<int> predictions, labels;
    {
        std::vector<int64_t> idx(windows.size());
        for (size_t i = 0; i < windows.size(); ++i) idx[i] = static_cast<int64_t>(i);
        for (int64_t start = 0; start < static_cast<int64_t>(windows.size()); start += batch) {
            const int64_t end =
                std::min<int64_t>(static_cast<int64_t>(windows.size()), start + batch);
            Tensor x = windows_to_batch<float>(windows, idx, start, end, loaded.config.window);
            Tape tape(false);
            Tensor logits = forward(tape, loaded.params, loaded.config, x, false, nullptr);
            const std::vector<int> preds = argmax_lastdim(logits);
            predictions.insert(predictions.end(), preds.begin(), preds.end());
            for (int64_t i = start; i < end; ++i)
                labels.push_back(windows[static_cast<size_t>(i)].label);
        }
    }

    std::ostringstream kv_out;
    kv_out << "samples_evaluated = " << windows.size() << "\n";
    if (space.size() == loaded.config.n_classes) {
        const MetricsReport report = compute_metrics(predictions, labels, metric_classes);
        std::cout << format_metrics(report, space.classes);
        write_metrics_kv(kv_out, report, space.classes);
    }
    if (binary_detection) {
        const double acc = binary_detection_accuracy(predictions, labels);
        char line[96];
        std::snprintf(line, sizeof line, "binary detection accuracy %.6f\n", acc);
        std::cout << line;
        std::snprintf(line, sizeof line, "binary_detection_accuracy = %.9g\n", acc);
        kv_out << line;
    }
    if (!out_dir.empty()) {
        ensure_out_dir(out_dir);
        std::ofstream f(join_path(out_dir, "eval.kv"));
        if (!f) throw DataError("cannot write eval report");
        f << kv_out.str();
    }
    return 0;
}

int cmd_bench(const std::string& ckpt_path, int warmup, int iters, int batch, uint64_t seed) {
    const LoadedModel loaded = load_checkpoint(ckpt_path);
    std::error_code ec;
    const auto fsize = fs::file_size(ckpt_path, ec);
    const int64_t ckpt_bytes = ec ? size_bytes(loaded.config) : static_cast<int64_t>(fsize);
    char line[96];
    auto print_report = [&](const BenchReport& r, const std::string& prefix) {
        std::snprintf(line, sizeof line, "%sbatch = %d\n", prefix.c_str(), r.batch);
        std::cout << line;
        std::snprintf(line, sizeof line, "%siters = %d\n", prefix.c_str(), r.n_iters);
        std::cout << line;
        std::snprintf(line, sizeof line, "%smean_ms_per_sample = %.6f\n", prefix.c_str(), r.mean_ms);
        std::cout << line;
        std::snprintf(line, sizeof line, "%sp50_ms_per_sample = %.6f\n", prefix.c_str(), r.p50_ms);
        std::cout << line;
        std::snprintf(line, sizeof line, "%sp99_ms_per_sample = %.6f\n", prefix.c_str(), r.p99_ms);
        std::cout << line;
        std::snprintf(line, sizeof line, "%ssamples_per_sec = %.1f\n", prefix.c_str(),
                      r.samples_per_sec);
        std::cout << line;
    };
    const BenchReport main_report =
        run_bench(loaded.params, loaded.config, warmup, iters, batch, seed, ckpt_bytes);
    print_report(main_report, "");
    if (batch != 1) {
        const BenchReport b1 =
            run_bench(loaded.params, loaded.config, warmup, iters, 1, seed, ckpt_bytes);
        print_report(b1, "batch1_");
    }
    std::cout << "param_count = " << main_report.param_count << "\n";
    std::cout << "checkpoint_bytes = " << main_report.checkpoint_bytes << "\n";
    return 0;
}

int cmd_inspect(const std::string& ckpt_path) {
    const LoadedModel loaded = load_checkpoint(ckpt_path);
    std::error_code ec;
    const auto fsize = fs::file_size(ckpt_path, ec);
    const ModelConfig& cfg = loaded.config;
    std::cout << "checkpoint " << ckpt_path << "\n";
    std::cout << "  format version 1\n";
    std::cout << "  d_in = " << cfg.d_in << "\n  d_model = " << cfg.d_model
              << "\n  n_heads = " << cfg.n_heads << "\n  n_layers = " << cfg.n_layers
              << "\n  d_ff = " << cfg.d_ff << "\n  window = " << cfg.window
              << "\n  n_classes = " << cfg.n_classes << "\n  dropout = " << cfg.dropout
              << "\n  pos_encoding = " << cfg.pos_encoding << "\n";
    std::cout << "tensors:\n";
    int64_t total = 0;
    for (const auto& kv : loaded.params.named()) {
        std::cout << "  " << kv.first << "  " << detail::shape_str(kv.second->shape) << "  "
                  << kv.second->numel() << "\n";
        total += kv.second->numel();
    }
    std::cout << "total parameters " << total << " (closed form " << param_count(cfg) << ")\n";
    if (!ec) std::cout << "file bytes " << fsize << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CAN-bus intrusion detection: transformer training, federation, and tooling"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic CAN capture");
    std::string synth_out, synth_profile;
    double synth_duration = 60.0;
    KvConfig synth_ov;
    synth->add_option("--out", synth_out, "Output CSV path")->required();
    synth->add_option("--profile", synth_profile, "Profile config file (key = value)");
    synth->add_option("--duration", synth_duration, "Capture length in seconds");
    add_override(synth, synth_ov, "--attack", "attack", "none|flooding|fuzzy|malfunction");
    add_override(synth, synth_ov, "--seed", "seed", "Generation seed");
    add_override(synth, synth_ov, "--variant", "variant", "Built-in vehicle profile (a or b)");
    add_override(synth, synth_ov, "--rate-hz", "rate_hz", "Attack injection rate");
    add_override(synth, synth_ov, "--burst-s", "burst_s", "Attack burst length (seconds)");
    add_override(synth, synth_ov, "--interval-s", "interval_s", "Burst start spacing (seconds)");

    auto add_run_flags = [](CLI::App* cmd, KvConfig& ov) {
        add_override(cmd, ov, "--data", "data", "Captures: path[:class], comma separated");
        add_override(cmd, ov, "--label-space", "label_space", "CarHacking5|Survival4|Unified4");
        add_override(cmd, ov, "--window", "window", "Window size");
        add_override(cmd, ov, "--stride", "stride", "Window stride");
        add_override(cmd, ov, "--split-train", "split_train", "Train split ratio");
        add_override(cmd, ov, "--split-val", "split_val", "Validation split ratio");
        add_override(cmd, ov, "--split-test", "split_test", "Test split ratio");
        add_override(cmd, ov, "--out-dir", "out_dir", "Artifact directory");
        add_override(cmd, ov, "--seed", "seed", "Run seed");
        add_override(cmd, ov, "--lr", "lr", "Learning rate");
        add_override(cmd, ov, "--batch", "batch", "Batch size");
        add_override(cmd, ov, "--epochs", "epochs", "Maximum epochs");
        add_override(cmd, ov, "--patience", "patience", "Early stopping patience");
        add_override(cmd, ov, "--gamma", "gamma", "Focal loss focusing parameter");
        add_override(cmd, ov, "--weight-decay", "weight_decay", "AdamW weight decay");
        add_override(cmd, ov, "--d-model", "d_model", "Model width");
        add_override(cmd, ov, "--heads", "n_heads", "Attention heads");
        add_override(cmd, ov, "--layers", "n_layers", "Encoder layers");
        add_override(cmd, ov, "--d-ff", "d_ff", "Feed-forward width");
        add_override(cmd, ov, "--dropout", "dropout", "Dropout rate");
    };

    // preprocess
    auto* preprocess = app.add_subcommand("preprocess", "Parse, window, and split captures");
    std::string preprocess_config;
    KvConfig preprocess_ov;
    preprocess->add_option("--config", preprocess_config, "Run config file");
    add_run_flags(preprocess, preprocess_ov);

    // train
    auto* train_cmd = app.add_subcommand("train", "Centralized training");
    std::string train_config;
    KvConfig train_ov;
    train_cmd->add_option("--config", train_config, "Run config file");
    add_run_flags(train_cmd, train_ov);

    // fedtrain
    auto* fed = app.add_subcommand("fedtrain", "Federated training simulation");
    std::string fed_config;
    std::vector<std::string> fed_clients;
    KvConfig fed_ov;
    fed->add_option("--config", fed_config, "Run config file");
    fed->add_option("--client", fed_clients,
                    "One client's captures (repeatable, overrides client_<n> keys)");
    add_run_flags(fed, fed_ov);
    add_override(fed, fed_ov, "--clients", "clients", "Number of clients");
    add_override(fed, fed_ov, "--rounds", "rounds", "Communication rounds");
    add_override(fed, fed_ov, "--local-epochs", "local_epochs", "Local epochs per round");
    add_override(fed, fed_ov, "--strategy", "strategy", "fedavg|fedprox");
    add_override(fed, fed_ov, "--mu", "mu", "FedProx proximal coefficient");
    fed->add_flag_function(
        "--sequential", [&fed_ov](int64_t) { fed_ov.set("sequential", "true"); },
        "Run clients one after another (bit-reproducible)");
    fed->add_flag_function(
        "--parallel-clients", [&fed_ov](int64_t) { fed_ov.set("sequential", "false"); },
        "Run clients on threads within each round");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on captures");
    std::string eval_ckpt, eval_data, eval_space = "Unified4", eval_split = "all",
                eval_out_dir;
    bool eval_binary = false;
    int eval_batch = 128;
    KvConfig eval_split_cfg;
    eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint path")->required();
    eval_cmd->add_option("--data", eval_data, "Captures: path[:class], comma separated")
        ->required();
    eval_cmd->add_option("--label-space", eval_space, "Label space of the captures");
    eval_cmd->add_option("--split", eval_split, "all|train|val|test");
    eval_cmd->add_flag("--binary-detection", eval_binary,
                       "Score detection as prediction != Normal vs label != Normal");
    eval_cmd->add_option("--batch", eval_batch, "Evaluation batch size");
    eval_cmd->add_option("--out-dir", eval_out_dir, "Write eval.kv here");
    add_override(eval_cmd, eval_split_cfg, "--stride", "stride", "Window stride");
    add_override(eval_cmd, eval_split_cfg, "--split-train", "split_train", "Train split ratio");
    add_override(eval_cmd, eval_split_cfg, "--split-val", "split_val", "Validation split ratio");
    add_override(eval_cmd, eval_split_cfg, "--split-test", "split_test", "Test split ratio");

    // bench
    auto* bench = app.add_subcommand("bench", "Inference latency microbenchmark");
    std::string bench_ckpt;
    int bench_warmup = 10, bench_iters = 1000, bench_batch = 1;
    uint64_t bench_seed = 1;
    bench->add_option("--checkpoint", bench_ckpt, "Checkpoint path")->required();
    bench->add_option("--warmup", bench_warmup, "Warmup iterations");
    bench->add_option("--iters", bench_iters, "Timed iterations");
    bench->add_option("--batch", bench_batch, "Batch size");
    bench->add_option("--seed", bench_seed, "Input generation seed");

    // inspect
    auto* inspect = app.add_subcommand("inspect", "Print checkpoint header and parameter table");
    std::string inspect_ckpt;
    inspect->add_option("--checkpoint", inspect_ckpt, "Checkpoint path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*synth) return cmd_synth(synth_out, synth_profile, synth_duration, synth_ov);
        if (*preprocess) return cmd_preprocess(preprocess_config, preprocess_ov);
        if (*train_cmd) return cmd_train(train_config, train_ov);
        if (*fed) return cmd_fedtrain(fed_config, fed_clients, fed_ov);
        if (*eval_cmd)
            return cmd_eval(eval_ckpt, eval_data, eval_space, eval_split, eval_binary, eval_batch,
                            eval_split_cfg, eval_out_dir);
        if (*bench) return cmd_bench(bench_ckpt, bench_warmup, bench_iters, bench_batch, bench_seed);
        if (*inspect) return cmd_inspect(inspect_ckpt);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DivergenceError& e) {
        std::cerr << "numeric divergence: " << e.what() << "\n";
        return 4;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const ShapeError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

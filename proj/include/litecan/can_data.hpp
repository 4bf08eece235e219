#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "litecan/config.hpp"

namespace litecan {

constexpr uint32_t kMaxStandardId = 0x7FF;
constexpr uint16_t kIdOffset = 256;
constexpr uint16_t kPadValue = 2304;
constexpr int kFeaturesPerMessage = 9;

enum class Flag : uint8_t { Normal, Attack };  // R / T in the CSV format

struct CanMessage {
    double timestamp = 0.0;
    uint32_t can_id = 0;
    int dlc = 0;
    std::array<uint8_t, 8> data{};
    Flag flag = Flag::Normal;
    int attack_class = 0;  // label-space index; 0 is always Normal
};

// Ordered class names for a dataset family. Index 0 is always Normal.
struct LabelSpace {
    std::string name;
    std::vector<std::string> classes;

    static LabelSpace car_hacking5();
    static LabelSpace survival4();
    static LabelSpace unified4();
    static LabelSpace by_name(const std::string& name);

    int size() const { return static_cast<int>(classes.size()); }
    int index_of(const std::string& cls) const;  // throws DataError if absent
    const std::string& class_name(int idx) const;
};

// Maps a class index from `from` into Unified4 (DoS becomes Flooding, Gear
// and RPM become Malfunction). Total over all three spaces.
int to_unified4(const LabelSpace& from, int cls);

using EncodedMessage = std::array<uint16_t, kFeaturesPerMessage>;

struct WindowSample {
    std::vector<uint16_t> features;  // W * 9 values in [0, 2304]
    int label = 0;
    int32_t file_id = 0;
    int64_t start_index = 0;
};

// Reads rows of `timestamp,id_hex,dlc,data...,flag`; T rows get
// attack_class_of_file, R rows get Normal. Non-monotonic timestamps are
// reported through `warnings` (when given) rather than failing the parse.
std::vector<CanMessage> parse_can_csv(const std::string& path, const LabelSpace& space,
                                      int attack_class_of_file,
                                      std::vector<std::string>* warnings = nullptr);

void write_can_csv(const std::string& path, const std::vector<CanMessage>& messages);

// 9-vector: id + 256, then payload bytes, then 2304 padding. Standard ids only.
EncodedMessage encode_message(const CanMessage& m);

std::vector<WindowSample> make_windows(const std::vector<CanMessage>& messages, int window,
                                       int stride, int32_t file_id = 0);

// Normal iff every flag is R; otherwise the most frequent attack class among
// flagged messages, ties broken by earliest occurrence in the window.
int label_window(const std::vector<CanMessage>& messages, int64_t start, int window);

struct SplitRatios {
    double train = 0.70;
    double val = 0.15;
    double test = 0.15;
};

struct StreamSplit {
    std::vector<CanMessage> train, val, test;
};

// Cuts the stream into contiguous segments before any windowing, so no
// window can straddle a split boundary.
StreamSplit split_stream(const std::vector<CanMessage>& messages, const SplitRatios& ratios,
                         int window);

struct Capture {
    std::vector<CanMessage> messages;
    int32_t file_id = 0;
};

struct DatasetSplits {
    std::vector<WindowSample> train, val, test;
};

// Splits each capture independently, windows each segment, and pools the
// results. Window origins index into the original per-capture stream.
DatasetSplits build_split_windows(const std::vector<Capture>& captures, const SplitRatios& ratios,
                                  int window, int stride);

enum class AttackKind { None, Flooding, Fuzzy, Malfunction };

AttackKind attack_kind_from_string(const std::string& name);
std::string attack_kind_to_string(AttackKind kind);

struct IdSpec {
    uint32_t id = 0;
    double period_s = 0.01;
};

struct VehicleProfile {
    std::vector<IdSpec> ids;
    uint64_t seed = 1;

    // Two built-in profiles with disjoint id sets, "a" and "b".
    static VehicleProfile builtin(const std::string& variant, uint64_t seed);
};

struct AttackSpec {
    AttackKind kind = AttackKind::None;
    double rate_hz = 0.0;  // 0 selects a per-kind default
    double burst_s = 5.0;
    double interval_s = 20.0;
    int attack_class = -1;  // label index assigned to injected frames; -1 derives from kind
};

// Deterministic synthetic traffic: per-id periodic normal frames merged in
// timestamp order, with attack frames injected in bursts.
std::vector<CanMessage> generate_synthetic(const VehicleProfile& profile, double duration_s,
                                           const AttackSpec& attack);

// Reads profile + attack keys (ids, periods_ms, attack, burst_s, interval_s,
// rate_hz, seed) from a key=value config.
struct SynthSetup {
    VehicleProfile profile;
    AttackSpec attack;
};
SynthSetup synth_setup_from_config(const KvConfig& cfg);

std::vector<int64_t> class_frequencies(const std::vector<WindowSample>& windows, int n_classes);

// Window CSV: one row per sample, `label,file_id,start,f0,...,f{W*9-1}`.
void write_windows_csv(const std::string& path, const std::vector<WindowSample>& windows);
std::vector<WindowSample> read_windows_csv(const std::string& path, int window);

// Parses `path:class` dataset references (class name resolved in `space`;
// plain paths default to Normal).
struct CaptureRef {
    std::string path;
    int attack_class = 0;
};
std::vector<CaptureRef> parse_capture_refs(const std::string& text, const LabelSpace& space);

}  // namespace litecan

#include "litecan/can_data.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "litecan/errors.hpp"
#include "litecan/rng.hpp"

namespace litecan {

LabelSpace LabelSpace::car_hacking5() {
    return {"CarHacking5", {"Normal", "DoS", "Fuzzy", "Gear", "RPM"}};
}

LabelSpace LabelSpace::survival4() {
    return {"Survival4", {"Normal", "Flooding", "Fuzzy", "Malfunction"}};
}

LabelSpace LabelSpace::unified4() {
    return {"Unified4", {"Normal", "Flooding", "Fuzzy", "Malfunction"}};
}

LabelSpace LabelSpace::by_name(const std::string& name) {
    std::string lower;
    for (char c : name) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (lower == "carhacking5") return car_hacking5();
    if (lower == "survival4") return survival4();
    if (lower == "unified4") return unified4();
    throw ConfigError("unknown label space '" + name +
                      "' (expected CarHacking5, Survival4, or Unified4)");
}

int LabelSpace::index_of(const std::string& cls) const {
    for (size_t i = 0; i < classes.size(); ++i)
        if (classes[i] == cls) return static_cast<int>(i);
    throw DataError("class '" + cls + "' not in label space " + name);
}

const std::string& LabelSpace::class_name(int idx) const {
    if (idx < 0 || idx >= size())
        throw DataError("class index " + std::to_string(idx) + " out of range for " + name);
    return classes[static_cast<size_t>(idx)];
}

int to_unified4(const LabelSpace& from, int cls) {
    const std::string& name = from.class_name(cls);
    const LabelSpace uni = LabelSpace::unified4();
    if (name == "DoS") return uni.index_of("Flooding");
    if (name == "Gear" || name == "RPM") return uni.index_of("Malfunction");
    return uni.index_of(name);
}

namespace {

uint32_t parse_hex_field(const std::string& field, const std::string& where, uint32_t max) {
    const std::string t = trim(field);
    if (t.empty()) throw DataError(where + ": empty hex field");
    errno = 0;
    char* end = nullptr;
    const unsigned long v = std::strtoul(t.c_str(), &end, 16);
    if (errno != 0 || end != t.c_str() + t.size())
        throw DataError(where + ": malformed hex '" + t + "'");
    if (v > max) throw DataError(where + ": value 0x" + t + " exceeds maximum");
    return static_cast<uint32_t>(v);
}

}  // namespace

std::vector<CanMessage> parse_can_csv(const std::string& path, const LabelSpace& space,
                                      int attack_class_of_file,
                                      std::vector<std::string>* warnings) {
    if (attack_class_of_file < 0 || attack_class_of_file >= space.size())
        throw DataError("attack class index " + std::to_string(attack_class_of_file) +
                        " out of range for label space " + space.name);
    std::ifstream in(path);
    if (!in) throw DataError("cannot open capture file: " + path);
    std::vector<CanMessage> out;
    std::string line;
    int lineno = 0;
    double prev_ts = -1.0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        const std::vector<std::string> fields = split(line, ',');
        if (fields.size() < 4)
            throw DataError(where + ": expected timestamp,id,dlc,data...,flag");
        CanMessage m;
        errno = 0;
        char* end = nullptr;
        const std::string ts = trim(fields[0]);
        m.timestamp = std::strtod(ts.c_str(), &end);
        if (errno != 0 || end != ts.c_str() + ts.size() || m.timestamp < 0.0)
            throw DataError(where + ": bad timestamp '" + ts + "'");
        m.can_id = parse_hex_field(fields[1], where + " (id)", 0x1FFFFFFF);
        const std::string dlc_s = trim(fields[2]);
        errno = 0;
        const long dlc = std::strtol(dlc_s.c_str(), &end, 10);
        if (errno != 0 || end != dlc_s.c_str() + dlc_s.size())
            throw DataError(where + ": bad dlc '" + dlc_s + "'");
        if (dlc < 0 || dlc > 8) throw DataError(where + ": dlc " + std::to_string(dlc) + " out of [0,8]");
        m.dlc = static_cast<int>(dlc);
        if (static_cast<int>(fields.size()) != 4 + m.dlc)
            throw DataError(where + ": dlc " + std::to_string(m.dlc) + " but " +
                            std::to_string(fields.size() - 4) + " data columns");
        for (int i = 0; i < m.dlc; ++i)
            m.data[static_cast<size_t>(i)] = static_cast<uint8_t>(
                parse_hex_field(fields[static_cast<size_t>(3 + i)], where + " (data)", 0xFF));
        const std::string flag = trim(fields.back());
        if (flag == "R") {
            m.flag = Flag::Normal;
            m.attack_class = 0;
        } else if (flag == "T") {
            m.flag = Flag::Attack;
            m.attack_class = attack_class_of_file;
            if (attack_class_of_file == 0)
                throw DataError(where + ": attack-flagged row in a capture declared Normal");
        } else {
            throw DataError(where + ": flag '" + flag + "' not in {R, T}");
        }
        if (m.timestamp < prev_ts && warnings)
            warnings->push_back(where + ": non-monotonic timestamp " + ts);
        prev_ts = std::max(prev_ts, m.timestamp);
        out.push_back(m);
    }
    return out;
}

void write_can_csv(const std::string& path, const std::vector<CanMessage>& messages) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write capture file: " + path);
    char buf[64];
    for (const CanMessage& m : messages) {
        std::snprintf(buf, sizeof buf, "%.6f", m.timestamp);
        out << buf << ',';
        if (m.can_id <= 0xFFFF)
            std::snprintf(buf, sizeof buf, "%04x", m.can_id);
        else
            std::snprintf(buf, sizeof buf, "%08x", m.can_id);
        out << buf << ',' << m.dlc;
        for (int i = 0; i < m.dlc; ++i) {
            std::snprintf(buf, sizeof buf, "%02x", m.data[static_cast<size_t>(i)]);
            out << ',' << buf;
        }
        out << ',' << (m.flag == Flag::Normal ? 'R' : 'T') << '\n';
    }
    if (!out) throw DataError("write failed: " + path);
}

EncodedMessage encode_message(const CanMessage& m) {
    if (m.can_id > kMaxStandardId)
        throw DataError("cannot encode extended id 0x" + [&] {
            char b[16];
            std::snprintf(b, sizeof b, "%x", m.can_id);
            return std::string(b);
        }() + ": encoding presumes 11-bit identifiers");
    if (m.dlc < 0 || m.dlc > 8) throw DataError("dlc out of range: " + std::to_string(m.dlc));
    EncodedMessage e;
    e[0] = static_cast<uint16_t>(m.can_id + kIdOffset);
    for (int i = 0; i < 8; ++i)
        e[static_cast<size_t>(1 + i)] =
            i < m.dlc ? static_cast<uint16_t>(m.data[static_cast<size_t>(i)]) : kPadValue;
    return e;
}

int label_window(const std::vector<CanMessage>& messages, int64_t start, int window) {
    int counts[64] = {0};
    int first_seen[64];
    std::fill(std::begin(first_seen), std::end(first_seen), -1);
    bool any_attack = false;
    for (int i = 0; i < window; ++i) {
        const CanMessage& m = messages[static_cast<size_t>(start + i)];
        if (m.flag != Flag::Attack) continue;
        any_attack = true;
        const int c = m.attack_class;
        if (c < 0 || c >= 64) throw DataError("attack class out of range: " + std::to_string(c));
        ++counts[c];
        if (first_seen[c] < 0) first_seen[c] = i;
    }
    if (!any_attack) return 0;
    int best = -1;
    for (int c = 1; c < 64; ++c) {
        if (counts[c] == 0) continue;
        if (best < 0 || counts[c] > counts[best] ||
            (counts[c] == counts[best] && first_seen[c] < first_seen[best]))
            best = c;
    }
    return best;
}

std::vector<WindowSample> make_windows(const std::vector<CanMessage>& messages, int window,
                                       int stride, int32_t file_id) {
    if (window < 1) throw ConfigError("window size must be >= 1, got " + std::to_string(window));
    if (stride < 1) throw ConfigError("stride must be >= 1, got " + std::to_string(stride));
    const int64_t n = static_cast<int64_t>(messages.size());
    if (n < window)
        throw DataError("cannot window " + std::to_string(n) + " messages with window " +
                        std::to_string(window));
    std::vector<EncodedMessage> enc(messages.size());
    for (size_t i = 0; i < messages.size(); ++i) enc[i] = encode_message(messages[i]);
    const int64_t count = (n - window) / stride + 1;
    std::vector<WindowSample> out;
    out.reserve(static_cast<size_t>(count));
    for (int64_t w = 0; w < count; ++w) {
        const int64_t start = w * stride;
        WindowSample s;
        s.features.resize(static_cast<size_t>(window) * kFeaturesPerMessage);
        for (int i = 0; i < window; ++i)
            std::copy(enc[static_cast<size_t>(start + i)].begin(),
                      enc[static_cast<size_t>(start + i)].end(),
                      s.features.begin() + static_cast<size_t>(i) * kFeaturesPerMessage);
        s.label = label_window(messages, start, window);
        s.file_id = file_id;
        s.start_index = start;
        out.push_back(std::move(s));
    }
    return out;
}

StreamSplit split_stream(const std::vector<CanMessage>& messages, const SplitRatios& ratios,
                         int window) {
    const double sum = ratios.train + ratios.val + ratios.test;
    if (ratios.train <= 0.0 || ratios.val < 0.0 || ratios.test < 0.0 ||
        std::abs(sum - 1.0) > 1e-9)
        throw ConfigError("split ratios must be non-negative with positive train and sum 1");
    const int64_t n = static_cast<int64_t>(messages.size());
    int64_t n_train = static_cast<int64_t>(n * ratios.train);
    int64_t n_val = static_cast<int64_t>(n * ratios.val);
    int64_t n_test;
    if (ratios.test > 0.0) {
        n_test = n - n_train - n_val;
    } else if (ratios.val > 0.0) {
        n_test = 0;
        n_val = n - n_train;
    } else {
        n_test = 0;
        n_val = 0;
        n_train = n;
    }
    auto check = [&](const char* name, int64_t len, double ratio) {
        if (ratio > 0.0 && len < window)
            throw DataError(std::string(name) + " segment has " + std::to_string(len) +
                            " messages, need at least window size " + std::to_string(window));
    };
    check("train", n_train, ratios.train);
    check("validation", n_val, ratios.val);
    check("test", n_test, ratios.test);
    StreamSplit out;
    out.train.assign(messages.begin(), messages.begin() + n_train);
    out.val.assign(messages.begin() + n_train, messages.begin() + n_train + n_val);
    out.test.assign(messages.begin() + n_train + n_val, messages.end());
    return out;
}

DatasetSplits build_split_windows(const std::vector<Capture>& captures, const SplitRatios& ratios,
                                  int window, int stride) {
    DatasetSplits out;
    for (const Capture& cap : captures) {
        const StreamSplit parts = split_stream(cap.messages, ratios, window);
        const int64_t n_train = static_cast<int64_t>(parts.train.size());
        const int64_t n_val = static_cast<int64_t>(parts.val.size());
        auto append = [&](const std::vector<CanMessage>& seg, int64_t offset,
                          std::vector<WindowSample>& dst) {
            if (static_cast<int64_t>(seg.size()) < window) return;
            std::vector<WindowSample> w = make_windows(seg, window, stride, cap.file_id);
            for (WindowSample& s : w) {
                s.start_index += offset;
                dst.push_back(std::move(s));
            }
        };
        append(parts.train, 0, out.train);
        append(parts.val, n_train, out.val);
        append(parts.test, n_train + n_val, out.test);
    }
    return out;
}

AttackKind attack_kind_from_string(const std::string& name) {
    std::string lower;
    for (char c : name) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (lower == "none") return AttackKind::None;
    if (lower == "flooding") return AttackKind::Flooding;
    if (lower == "fuzzy") return AttackKind::Fuzzy;
    if (lower == "malfunction") return AttackKind::Malfunction;
    throw ConfigError("unknown attack kind '" + name +
                      "' (expected none, flooding, fuzzy, or malfunction)");
}

std::string attack_kind_to_string(AttackKind kind) {
    switch (kind) {
        case AttackKind::None: return "none";
        case AttackKind::Flooding: return "flooding";
        case AttackKind::Fuzzy: return "fuzzy";
        case AttackKind::Malfunction: return "malfunction";
    }
    return "none";
}

VehicleProfile VehicleProfile::builtin(const std::string& variant, uint64_t seed) {
    VehicleProfile p;
    p.seed = seed;
    std::vector<uint32_t> ids;
    if (variant == "a")
        ids = {0x110, 0x18f, 0x220, 0x2c0, 0x316, 0x350, 0x43f, 0x490, 0x545, 0x5a0};
    else if (variant == "b")
        ids = {0x0a1, 0x153, 0x1d4, 0x260, 0x2e8, 0x37a, 0x3fb, 0x47c, 0x521, 0x5ff};
    else
        throw ConfigError("unknown profile variant '" + variant + "' (expected a or b)");
    for (size_t i = 0; i < ids.size(); ++i)
        p.ids.push_back({ids[i], i % 2 == 0 ? 0.010 : 0.020});
    return p;
}

namespace {

double default_rate_hz(AttackKind kind) {
    switch (kind) {
        case AttackKind::Flooding: return 2000.0;
        case AttackKind::Fuzzy: return 500.0;
        case AttackKind::Malfunction: return 200.0;
        case AttackKind::None: return 0.0;
    }
    return 0.0;
}

int default_attack_class(AttackKind kind) {
    switch (kind) {
        case AttackKind::Flooding: return 1;
        case AttackKind::Fuzzy: return 2;
        case AttackKind::Malfunction: return 3;
        case AttackKind::None: return 0;
    }
    return 0;
}

// Per-id payload structure, a pure function of (profile seed, id).
struct PayloadModel {
    int dlc;
    int style[8];   // 0 constant, 1 counter, 2 noise
    int base[8];    // in [0, 199]
    int step[8];    // counter increment
};

PayloadModel payload_model(uint64_t seed, uint32_t id) {
    PayloadModel pm;
    pm.dlc = 2 + static_cast<int>(mix_seed(seed, id, 11) % 7);
    for (int j = 0; j < 8; ++j) {
        pm.style[j] = static_cast<int>(mix_seed(seed, id, 20 + static_cast<uint64_t>(j)) % 3);
        pm.base[j] = static_cast<int>(mix_seed(seed, id, 40 + static_cast<uint64_t>(j)) % 200);
        pm.step[j] = 1 + static_cast<int>(mix_seed(seed, id, 60 + static_cast<uint64_t>(j)) % 7);
    }
    return pm;
}

}  // namespace

std::vector<CanMessage> generate_synthetic(const VehicleProfile& profile, double duration_s,
                                           const AttackSpec& attack) {
    if (profile.ids.empty()) throw ConfigError("vehicle profile has no ids");
    if (duration_s <= 0.0) throw ConfigError("duration must be positive");
    for (const IdSpec& s : profile.ids) {
        if (s.period_s <= 0.0) throw ConfigError("emission period must be positive");
        if (s.id > kMaxStandardId) throw ConfigError("profile id exceeds the standard 11-bit range");
    }
    std::vector<CanMessage> out;

    // Normal traffic: each id emits periodically from a seeded phase offset.
    for (const IdSpec& spec : profile.ids) {
        const PayloadModel pm = payload_model(profile.seed, spec.id);
        SplitMix64 rng(mix_seed(profile.seed, seed_stream::kSynth, spec.id));
        const double phase = spec.period_s * rng.uniform();
        int64_t k = 0;
        for (double t = phase; t < duration_s; t = phase + static_cast<double>(++k) * spec.period_s) {
            CanMessage m;
            m.timestamp = t;
            m.can_id = spec.id;
            m.dlc = pm.dlc;
            for (int j = 0; j < pm.dlc; ++j) {
                int v = pm.base[j];
                if (pm.style[j] == 1) {
                    v = static_cast<int>((pm.base[j] + k * pm.step[j]) % 200);
                } else if (pm.style[j] == 2) {
                    v += static_cast<int>(rng.uniform_int(11)) - 5;
                    v = std::clamp(v, 0, 199);
                }
                m.data[static_cast<size_t>(j)] = static_cast<uint8_t>(v);
            }
            m.flag = Flag::Normal;
            m.attack_class = 0;
            out.push_back(m);
        }
    }

    if (attack.kind != AttackKind::None) {
        const double rate = attack.rate_hz > 0.0 ? attack.rate_hz : default_rate_hz(attack.kind);
        if (rate <= 0.0) throw ConfigError("attack rate must be positive");
        if (attack.burst_s <= 0.0 || attack.interval_s <= 0.0)
            throw ConfigError("attack burst and interval must be positive");
        if (attack.burst_s > attack.interval_s)
            throw ConfigError("attack burst longer than its interval");
        const int cls = attack.attack_class >= 0 ? attack.attack_class
                                                 : default_attack_class(attack.kind);
        SplitMix64 rng(mix_seed(profile.seed, seed_stream::kSynth, 0x5EED,
                                static_cast<uint64_t>(attack.kind)));
        uint32_t target_id = 0;
        PayloadModel target_pm{};
        if (attack.kind == AttackKind::Malfunction) {
            const size_t pick = static_cast<size_t>(rng.uniform_int(profile.ids.size()));
            target_id = profile.ids[pick].id;
            target_pm = payload_model(profile.seed, target_id);
        }
        for (double burst = 0.0; burst < duration_s; burst += attack.interval_s) {
            const double burst_end = std::min(burst + attack.burst_s, duration_s);
            int64_t k = 0;
            for (double t = burst; t < burst_end; t = burst + static_cast<double>(++k) / rate) {
                CanMessage m;
                m.timestamp = t;
                m.flag = Flag::Attack;
                m.attack_class = cls;
                switch (attack.kind) {
                    case AttackKind::Flooding:
                        m.can_id = 0x000;
                        m.dlc = 8;
                        break;
                    case AttackKind::Fuzzy:
                        m.can_id = static_cast<uint32_t>(rng.uniform_int(kMaxStandardId + 1));
                        m.dlc = 8;
                        for (int j = 0; j < 8; ++j)
                            m.data[static_cast<size_t>(j)] =
                                static_cast<uint8_t>(rng.uniform_int(256));
                        break;
                    case AttackKind::Malfunction:
                        m.can_id = target_id;
                        m.dlc = target_pm.dlc;
                        for (int j = 0; j < m.dlc; ++j)
                            m.data[static_cast<size_t>(j)] =
                                static_cast<uint8_t>(200 + rng.uniform_int(56));
                        break;
                    case AttackKind::None:
                        break;
                }
                out.push_back(m);
            }
        }
    }

    std::stable_sort(out.begin(), out.end(),
                     [](const CanMessage& a, const CanMessage& b) { return a.timestamp < b.timestamp; });
    return out;
}

SynthSetup synth_setup_from_config(const KvConfig& cfg) {
    cfg.check_known_keys(
        {"ids", "periods_ms", "attack", "burst_s", "interval_s", "rate_hz", "seed", "variant"});
    SynthSetup setup;
    const uint64_t seed = static_cast<uint64_t>(cfg.get_int("seed", 1));
    if (cfg.has("ids")) {
        setup.profile.seed = seed;
        const std::vector<std::string> id_fields = split(cfg.get_string("ids"), ',');
        std::vector<double> periods;
        if (cfg.has("periods_ms")) {
            for (const std::string& p : split(cfg.get_string("periods_ms"), ','))
                periods.push_back(parse_double(p, "periods_ms") / 1000.0);
            if (periods.size() != 1 && periods.size() != id_fields.size())
                throw ConfigError("periods_ms must have one entry or one per id");
        } else {
            periods.push_back(0.010);
        }
        for (size_t i = 0; i < id_fields.size(); ++i) {
            IdSpec spec;
            spec.id = static_cast<uint32_t>(parse_int(id_fields[i], "ids"));
            spec.period_s = periods.size() == 1 ? periods[0] : periods[i];
            setup.profile.ids.push_back(spec);
        }
    } else {
        setup.profile = VehicleProfile::builtin(cfg.get_string("variant", "a"), seed);
    }
    setup.attack.kind = attack_kind_from_string(cfg.get_string("attack", "none"));
    setup.attack.rate_hz = cfg.get_double("rate_hz", 0.0);
    setup.attack.burst_s = cfg.get_double("burst_s", 5.0);
    setup.attack.interval_s = cfg.get_double("interval_s", 20.0);
    return setup;
}

std::vector<int64_t> class_frequencies(const std::vector<WindowSample>& windows, int n_classes) {
    if (windows.empty()) throw DataError("cannot compute class frequencies of an empty window set");
    std::vector<int64_t> counts(static_cast<size_t>(n_classes), 0);
    for (const WindowSample& w : windows) {
        if (w.label < 0 || w.label >= n_classes)
            throw DataError("window label " + std::to_string(w.label) + " out of range for " +
                            std::to_string(n_classes) + " classes");
        ++counts[static_cast<size_t>(w.label)];
    }
    return counts;
}

void write_windows_csv(const std::string& path, const std::vector<WindowSample>& windows) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write window file: " + path);
    for (const WindowSample& w : windows) {
        out << w.label << ',' << w.file_id << ',' << w.start_index;
        for (uint16_t f : w.features) out << ',' << f;
        out << '\n';
    }
    if (!out) throw DataError("write failed: " + path);
}

std::vector<WindowSample> read_windows_csv(const std::string& path, int window) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open window file: " + path);
    const size_t want = static_cast<size_t>(window) * kFeaturesPerMessage;
    std::vector<WindowSample> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        const std::vector<std::string> fields = split(line, ',');
        if (fields.size() != 3 + want)
            throw DataError(where + ": expected " + std::to_string(3 + want) + " fields, got " +
                            std::to_string(fields.size()));
        WindowSample w;
        w.label = static_cast<int>(parse_int(fields[0], where + " (label)"));
        w.file_id = static_cast<int32_t>(parse_int(fields[1], where + " (file_id)"));
        w.start_index = parse_int(fields[2], where + " (start)");
        w.features.resize(want);
        for (size_t i = 0; i < want; ++i) {
            const int64_t v = parse_int(fields[3 + i], where + " (feature)");
            if (v < 0 || v > kPadValue)
                throw DataError(where + ": feature value " + std::to_string(v) + " out of [0,2304]");
            w.features[i] = static_cast<uint16_t>(v);
        }
        out.push_back(std::move(w));
    }
    return out;
}

std::vector<CaptureRef> parse_capture_refs(const std::string& text, const LabelSpace& space) {
    std::vector<CaptureRef> out;
    for (const std::string& entry : split(text, ',')) {
        const std::string e = trim(entry);
        if (e.empty()) continue;
        CaptureRef ref;
        const size_t colon = e.rfind(':');
        bool classified = false;
        if (colon != std::string::npos && colon + 1 < e.size()) {
            const std::string suffix = e.substr(colon + 1);
            for (const std::string& cls : space.classes) {
                if (suffix == cls) {
                    ref.path = e.substr(0, colon);
                    ref.attack_class = space.index_of(suffix);
                    classified = true;
                    break;
                }
            }
        }
        if (!classified) ref.path = e;
        out.push_back(ref);
    }
    if (out.empty()) throw ConfigError("no capture paths given");
    return out;
}

}  // namespace litecan

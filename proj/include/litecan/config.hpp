#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace litecan {

// Plain-text `key = value` configuration: one pair per line, `#` starts a
// comment, blank lines ignored. Values keep their raw text; typed accessors
// convert on demand and throw ConfigError with the offending key.
class KvConfig {
public:
    KvConfig() = default;

    static KvConfig parse_file(const std::string& path);
    static KvConfig parse_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    const std::string& get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    int64_t get_int(const std::string& key) const;
    int64_t get_int(const std::string& key, int64_t fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key) const;
    bool get_bool(const std::string& key, bool fallback) const;

    std::vector<std::string> keys() const;
    const std::map<std::string, std::string>& entries() const { return values_; }

    // Throws ConfigError naming every key not present in `allowed`.
    void check_known_keys(const std::vector<std::string>& allowed) const;

private:
    std::map<std::string, std::string> values_;
};

std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& s, char sep);

// Integer parser accepting decimal and 0x-prefixed hex; throws ConfigError.
int64_t parse_int(const std::string& text, const std::string& what);
double parse_double(const std::string& text, const std::string& what);

}  // namespace litecan

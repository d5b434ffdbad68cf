#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace regrace {

/// One schema row: key, default value, and the one-line doc printed by
/// `describe()`.
struct ConfigEntry {
    const char* key;
    const char* def;
    const char* doc;
};

/// Flat key=value configuration. Every key has a documented default; setting
/// or reading an unknown key throws std::invalid_argument. Values are kept as
/// strings and parsed on access so a config file round-trips losslessly.
class Config {
public:
    Config();  // all defaults

    /// Parses `key = value` lines ('#' starts a comment, blank lines are
    /// skipped). Later assignments win. Unknown keys throw.
    void load_file(const std::string& path);

    /// Single assignment, e.g. from a --set flag. Unknown keys throw.
    void set(const std::string& key, const std::string& value);

    const std::string& get_str(const std::string& key) const;
    double get_double(const std::string& key) const;
    int get_int(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    bool get_bool(const std::string& key) const;  // true/false/1/0
    std::vector<int> get_int_list(const std::string& key) const;  // comma-separated

    /// Formatted key/default/doc listing for --help-config.
    static std::string describe();

    static const std::vector<ConfigEntry>& schema();

private:
    std::map<std::string, std::string> values_;
};

}  // namespace regrace

#pragma once

#include <map>
#include <string>
#include <vector>

namespace vagcn {

// Command-scoped key-value settings. Keys are declared with defaults; values
// come from an optional config file (`key = value` lines, '#' comments) and
// then command-line overrides. Unknown keys are rejected.
class RunConfig {
public:
    void define(const std::string& key, const std::string& default_value,
                const std::string& help);

    bool has_key(const std::string& key) const;
    void set(const std::string& key, const std::string& value);  // throws on unknown key
    void load_file(const std::string& path);

    const std::string& get(const std::string& key) const;
    long long get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<double> get_double_list(const std::string& key) const;  // comma-separated
    std::vector<std::string> get_string_list(const std::string& key) const;

    /// Fully resolved key -> value map (sorted), for echoing into metrics.
    const std::map<std::string, std::string>& resolved() const { return values_; }
    std::string describe() const;  // "key = value  # help" lines

private:
    std::map<std::string, std::string> values_;
    std::map<std::string, std::string> help_;
};

}  // namespace vagcn

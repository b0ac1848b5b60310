#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace nonlocal::cli {

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

enum ExitCode : int { ok = 0, certificate_failed = 1, config_error = 2, not_converged = 3 };

// Flat `key = value` configuration. Blank lines and `#` comments are ignored. Numbers are stored in
// their 17-digit form, so canonical() reproduces the parsed configuration exactly.
class RunConfig {
public:
    static RunConfig parse(const std::string& text);
    static RunConfig load(const std::string& path);

    // validates the key and normalizes the value; throws ConfigError naming the key
    void set(const std::string& key, const std::string& value);

    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    std::string text(const std::string& key, const std::string& fallback) const;
    double number(const std::string& key, double fallback) const;
    double number(const std::string& key) const;
    int integer(const std::string& key, int fallback) const;
    std::vector<double> numbers(const std::string& key, std::vector<double> fallback) const;
    // profile parameters given as `<prefix>.<name> = value`
    std::map<std::string, double> group(const std::string& prefix) const;

    const std::map<std::string, std::string>& entries() const noexcept { return entries_; }
    std::string canonical() const;
    bool operator==(const RunConfig& o) const { return entries_ == o.entries_; }

private:
    std::map<std::string, std::string> entries_;
};

int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

}  // namespace nonlocal::cli

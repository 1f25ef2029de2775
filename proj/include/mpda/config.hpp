#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mpda {

/// Malformed config text, unknown key or out-of-range value; the message
/// names the file, line and key.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Flat `key = value` text. `#` starts a comment; blank lines are ignored.
class KeyValues {
public:
    struct Entry {
        std::string value;
        int line = 0;
    };

    static KeyValues parse(const std::string& text, const std::string& origin);
    static KeyValues load(const std::string& path);

    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    void set(const std::string& key, std::string value) { entries_[key] = {std::move(value), 0}; }
    void merge(const KeyValues& overrides);

    std::optional<std::string> get(const std::string& key) const;
    std::string str(const std::string& key, const std::string& fallback) const;
    double real(const std::string& key, double fallback) const;
    std::int64_t integer(const std::string& key, std::int64_t fallback) const;
    std::uint64_t u64(const std::string& key, std::uint64_t fallback) const;
    bool boolean(const std::string& key, bool fallback) const;
    /// "lo,hi" or "[lo,hi]"
    std::optional<std::pair<double, double>> range(const std::string& key) const;

    /// Throws ConfigError for any key not in `allowed`.
    void require_known(const std::vector<std::string>& allowed) const;

    /// Sorted `key = value` lines.
    std::string serialize() const;
    const std::map<std::string, Entry>& entries() const { return entries_; }
    const std::string& origin() const { return origin_; }

private:
    [[noreturn]] void fail(const std::string& key, const std::string& message) const;

    std::string origin_;
    std::map<std::string, Entry> entries_;
};

/// Parses "lo,hi" / "[lo,hi]" into a pair, throwing ConfigError on junk.
std::pair<double, double> parse_range(const std::string& text);

/// Shortest decimal form that round-trips a double.
std::string format_real(double v);

}  // namespace mpda

#include "mpda/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <sstream>

#include "mpda/io.hpp"

namespace mpda {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

KeyValues KeyValues::parse(const std::string& text, const std::string& origin)
{
    KeyValues kv;
    kv.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.resize(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        if (kv.entries_.count(key))
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
        kv.entries_[key] = {trim(line.substr(eq + 1)), lineno};
    }
    return kv;
}

KeyValues KeyValues::load(const std::string& path)
{
    std::string text;
    try {
        text = io::read_file(path);
    } catch (const io::IoError&) {
        throw ConfigError(path + ": cannot read config file");
    }
    return parse(text, path);
}

void KeyValues::merge(const KeyValues& overrides)
{
    for (const auto& [k, v] : overrides.entries_)
        entries_[k] = v;
}

void KeyValues::fail(const std::string& key, const std::string& message) const
{
    const auto it = entries_.find(key);
    const std::string where = it != entries_.end() && it->second.line > 0
                                  ? origin_ + ":" + std::to_string(it->second.line)
                                  : (origin_.empty() ? std::string("config") : origin_);
    throw ConfigError(where + ": field '" + key + "': " + message);
}

std::optional<std::string> KeyValues::get(const std::string& key) const
{
    const auto it = entries_.find(key);
    if (it == entries_.end())
        return std::nullopt;
    return it->second.value;
}

std::string KeyValues::str(const std::string& key, const std::string& fallback) const
{
    return get(key).value_or(fallback);
}

double KeyValues::real(const std::string& key, double fallback) const
{
    const auto v = get(key);
    if (!v)
        return fallback;
    try {
        std::size_t used = 0;
        const double d = std::stod(*v, &used);
        if (used == v->size())
            return d;
    } catch (const std::exception&) {
    }
    fail(key, "expected a number, got '" + *v + "'");
}

std::int64_t KeyValues::integer(const std::string& key, std::int64_t fallback) const
{
    const auto v = get(key);
    if (!v)
        return fallback;
    std::int64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || ptr != v->data() + v->size())
        fail(key, "expected an integer, got '" + *v + "'");
    return out;
}

std::uint64_t KeyValues::u64(const std::string& key, std::uint64_t fallback) const
{
    const auto v = get(key);
    if (!v)
        return fallback;
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || ptr != v->data() + v->size())
        fail(key, "expected a non-negative integer, got '" + *v + "'");
    return out;
}

bool KeyValues::boolean(const std::string& key, bool fallback) const
{
    const auto v = get(key);
    if (!v)
        return fallback;
    if (*v == "true" || *v == "1" || *v == "yes" || *v == "on")
        return true;
    if (*v == "false" || *v == "0" || *v == "no" || *v == "off")
        return false;
    fail(key, "expected true/false, got '" + *v + "'");
}

std::optional<std::pair<double, double>> KeyValues::range(const std::string& key) const
{
    const auto v = get(key);
    if (!v || v->empty() || *v == "none")
        return std::nullopt;
    try {
        return parse_range(*v);
    } catch (const ConfigError& e) {
        fail(key, e.what());
    }
}

void KeyValues::require_known(const std::vector<std::string>& allowed) const
{
    for (const auto& [k, v] : entries_)
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
            fail(k, "unknown key");
}

std::string KeyValues::serialize() const
{
    std::string out;
    for (const auto& [k, v] : entries_)
        out += k + " = " + v.value + "\n";
    return out;
}

std::pair<double, double> parse_range(const std::string& text)
{
    std::string t = trim(text);
    if (!t.empty() && t.front() == '[' && t.back() == ']')
        t = t.substr(1, t.size() - 2);
    const auto comma = t.find(',');
    if (comma == std::string::npos)
        throw ConfigError("malformed range '" + text + "' (expected lo,hi)");
    try {
        std::size_t u1 = 0, u2 = 0;
        const std::string a = trim(t.substr(0, comma)), b = trim(t.substr(comma + 1));
        const double lo = std::stod(a, &u1), hi = std::stod(b, &u2);
        if (u1 != a.size() || u2 != b.size())
            throw ConfigError("");
        if (!(lo <= hi))
            throw ConfigError("malformed range '" + text + "' (lo > hi)");
        return {lo, hi};
    } catch (const ConfigError& e) {
        if (std::string(e.what()).empty())
            throw ConfigError("malformed range '" + text + "'");
        throw;
    } catch (const std::exception&) {
        throw ConfigError("malformed range '" + text + "'");
    }
}

std::string format_real(double v)
{
    char buf[64];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::stod(buf) == v)
            return buf;
    }
    return buf;
}

}  // namespace mpda

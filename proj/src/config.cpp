#include "vesselnav/config.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace vn {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

bool valid_key(const std::string& key) {
    if (key.empty()) return false;
    for (char c : key) {
        bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '.' ||
                  c == '_' || c == '-';
        if (!ok) return false;
    }
    return true;
}

} // namespace

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

KeyValueConfig KeyValueConfig::parse_text(const std::string& text) {
    KeyValueConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            fail(ErrorKind::Load, "config line " + std::to_string(lineno) +
                                      " has no '=': " + stripped);
        std::string key = trim(stripped.substr(0, eq));
        std::string value = trim(stripped.substr(eq + 1));
        if (!valid_key(key))
            fail(ErrorKind::Load, "config line " + std::to_string(lineno) +
                                      " has a malformed key: '" + key + "'");
        if (cfg.values_.count(key))
            fail(ErrorKind::Load, "config line " + std::to_string(lineno) +
                                      " repeats key '" + key + "'");
        cfg.values_[key] = value;
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Load, "cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_text(buf.str());
    } catch (const Error& e) {
        fail(ErrorKind::Load, path + ": " + e.what());
    }
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
    if (!valid_key(key))
        fail(ErrorKind::Config, "malformed config key: '" + key + "'");
    values_[key] = trim(value);
}

void KeyValueConfig::apply_overrides(const std::vector<std::string>& overrides) {
    for (const std::string& o : overrides) {
        std::size_t eq = o.find('=');
        if (eq == std::string::npos)
            fail(ErrorKind::Config,
                 "override '" + o + "' is not of the form key=value");
        set(trim(o.substr(0, eq)), o.substr(eq + 1));
    }
}

bool KeyValueConfig::has(const std::string& key) const {
    return values_.count(key) != 0;
}

std::string KeyValueConfig::get_string(const std::string& key,
                                       const std::string& def) const {
    auto it = values_.find(key);
    return it == values_.end() ? def : it->second;
}

long long KeyValueConfig::get_int(const std::string& key, long long def) const {
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    const std::string& v = it->second;
    long long out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        fail(ErrorKind::Config, "key '" + key + "': '" + v +
                                    "' is not an integer");
    return out;
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key,
                                      std::uint64_t def) const {
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    const std::string& v = it->second;
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        fail(ErrorKind::Config, "key '" + key + "': '" + v +
                                    "' is not an unsigned integer");
    return out;
}

double KeyValueConfig::get_double(const std::string& key, double def) const {
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    const std::string& v = it->second;
    errno = 0;
    char* end = nullptr;
    double out = std::strtod(v.c_str(), &end);
    if (errno != 0 || end != v.c_str() + v.size() || v.empty())
        fail(ErrorKind::Config, "key '" + key + "': '" + v +
                                    "' is not a number");
    return out;
}

bool KeyValueConfig::get_bool(const std::string& key, bool def) const {
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    const std::string& v = it->second;
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail(ErrorKind::Config, "key '" + key + "': '" + v +
                                "' is not a boolean (true/false/1/0)");
}

void KeyValueConfig::validate_keys(const std::vector<std::string>& allowed) const {
    std::string unknown;
    for (const auto& [key, value] : values_) {
        (void)value;
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            if (!unknown.empty()) unknown += ", ";
            unknown += key;
        }
    }
    if (!unknown.empty())
        fail(ErrorKind::Config, "unknown config keys: " + unknown);
}

std::string KeyValueConfig::resolved_text() const {
    std::string out;
    for (const auto& [key, value] : values_)
        out += key + " = " + value + "\n";
    return out;
}

std::uint64_t KeyValueConfig::hash() const { return fnv1a64(resolved_text()); }

void KeyValueConfig::save_snapshot(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write config snapshot " + path);
    char fp[32];
    std::snprintf(fp, sizeof fp, "%016llx",
                  static_cast<unsigned long long>(hash()));
    out << "# resolved configuration, fnv1a64 " << fp << "\n";
    out << resolved_text();
    if (!out) fail(ErrorKind::Io, "failed writing config snapshot " + path);
}

} // namespace vn

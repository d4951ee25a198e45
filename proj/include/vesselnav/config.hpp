#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vesselnav/error.hpp"

namespace vn {

// Run settings as a flat key -> value map with dotted key names, read from a
// simple structured text file ("key = value" lines, '#' comments) plus
// command-line overrides.  Commands declare the keys they understand;
// anything else is rejected so typos cannot silently fall back to defaults.
// The canonical, sorted rendering of the map doubles as the resolved-config
// snapshot written next to every run's outputs, and its FNV-1a hash is the
// run manifest's configuration fingerprint.
class KeyValueConfig {
public:
    KeyValueConfig() = default;

    /// Parses config text. Lines are "key = value"; blank lines and lines
    /// starting with '#' are skipped. Repeated keys in one document are
    /// rejected.
    static KeyValueConfig parse_text(const std::string& text);
    static KeyValueConfig load_file(const std::string& path);

    /// Inserts or replaces one entry (command-line override semantics).
    void set(const std::string& key, const std::string& value);
    /// Applies "key=value" strings, e.g. straight from argv.
    void apply_overrides(const std::vector<std::string>& overrides);

    bool has(const std::string& key) const;
    std::size_t size() const { return values_.size(); }

    // Typed getters fall back to the given default when the key is absent
    // and reject malformed values.
    std::string get_string(const std::string& key, const std::string& def) const;
    long long get_int(const std::string& key, long long def) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t def) const;
    double get_double(const std::string& key, double def) const;
    bool get_bool(const std::string& key, bool def) const;

    /// Rejects any key outside the allowed set (use exact dotted names).
    void validate_keys(const std::vector<std::string>& allowed) const;

    /// Canonical snapshot: one "key = value" line per entry, sorted by key.
    std::string resolved_text() const;
    /// FNV-1a over resolved_text().
    std::uint64_t hash() const;
    /// Writes resolved_text() preceded by a fingerprint comment line.
    void save_snapshot(const std::string& path) const;

    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

/// FNV-1a 64-bit over a byte string.
std::uint64_t fnv1a64(const std::string& bytes);

} // namespace vn

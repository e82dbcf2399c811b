#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace frax {

// Flat key=value configuration. Keys are kept sorted so to_text() is a
// canonical form suitable for hashing and fingerprints.
class KvConfig {
public:
    static KvConfig parse(const std::string& text);
    static KvConfig parse_file(const std::filesystem::path& path);

    void set(const std::string& key, const std::string& value);
    void set_u64(const std::string& key, std::uint64_t value);
    void set_i64(const std::string& key, std::int64_t value);
    void set_double(const std::string& key, double value);
    void set_bool(const std::string& key, bool value);

    bool contains(const std::string& key) const { return values_.count(key) != 0; }

    std::string get(const std::string& key) const;
    std::string get(const std::string& key, const std::string& fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    std::int64_t get_i64(const std::string& key, std::int64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    // Sorted "key=value\n" lines.
    std::string to_text() const;
    void write_file(const std::filesystem::path& path) const;

    const std::map<std::string, std::string>& values() const { return values_; }

    // Entries from `other` override entries here.
    void merge(const KvConfig& other);

private:
    std::map<std::string, std::string> values_;
};

// %.17g, enough digits to round-trip any IEEE double exactly.
std::string format_double(double v);
double parse_double(const std::string& s, const std::string& what);
std::uint64_t parse_u64(const std::string& s, const std::string& what);

}  // namespace frax

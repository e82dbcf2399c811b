#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace frax {

using Digest = std::array<std::uint8_t, 32>;

// Incremental SHA-256 over OpenSSL's EVP interface.
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(const void* data, std::size_t n);
    void update(const std::string& s) { update(s.data(), s.size()); }
    void update(const std::vector<std::uint8_t>& v) { update(v.data(), v.size()); }

    // Finalizes; the object must not be updated afterwards.
    Digest finish();

    static Digest hash(const void* data, std::size_t n);
    static Digest hash(const std::string& s) { return hash(s.data(), s.size()); }
    static Digest hash(const std::vector<std::uint8_t>& v) { return hash(v.data(), v.size()); }
    static Digest hash_file(const std::string& path);

    static std::string hex(const Digest& d);

private:
    void* ctx_;
};

}  // namespace frax

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

namespace memlayer {

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// Incremental SHA-256; hex_digest() does not end the stream.
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256& other);
    Sha256& operator=(const Sha256& other);
    Sha256(Sha256&&) noexcept;
    Sha256& operator=(Sha256&&) noexcept;

    void update(std::string_view data);
    std::string hex_digest() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a64(std::string_view data) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace memlayer

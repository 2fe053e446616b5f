#include "memlayer/hash.hpp"

#include <openssl/evp.h>

#include <array>

#include "memlayer/error.hpp"

namespace memlayer {

namespace {

std::string to_hex(const unsigned char* digest, unsigned int len) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0x0f]);
    }
    return out;
}

} // namespace

struct Sha256::Impl {
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();

    Impl() {
        if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
            throw Error(ErrorCode::IoError, "sha256 init failed");
        }
    }
    Impl(const Impl& other) {
        if (ctx == nullptr || EVP_MD_CTX_copy_ex(ctx, other.ctx) != 1) {
            throw Error(ErrorCode::IoError, "sha256 copy failed");
        }
    }
    Impl& operator=(const Impl&) = delete;
    ~Impl() { EVP_MD_CTX_free(ctx); }
};

Sha256::Sha256() : impl_(std::make_unique<Impl>()) {}
Sha256::~Sha256() = default;
Sha256::Sha256(const Sha256& other) : impl_(std::make_unique<Impl>(*other.impl_)) {}
Sha256& Sha256::operator=(const Sha256& other) {
    if (this != &other) impl_ = std::make_unique<Impl>(*other.impl_);
    return *this;
}
Sha256::Sha256(Sha256&&) noexcept = default;
Sha256& Sha256::operator=(Sha256&&) noexcept = default;

void Sha256::update(std::string_view data) {
    if (EVP_DigestUpdate(impl_->ctx, data.data(), data.size()) != 1) {
        throw Error(ErrorCode::IoError, "sha256 update failed");
    }
}

std::string Sha256::hex_digest() const {
    Impl copy(*impl_);
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(copy.ctx, digest.data(), &len) != 1) {
        throw Error(ErrorCode::IoError, "sha256 final failed");
    }
    return to_hex(digest.data(), len);
}

std::string sha256_hex(std::string_view data) {
    Sha256 h;
    h.update(data);
    return h.hex_digest();
}

} // namespace memlayer

#include "cotc/hash.hpp"

#include <openssl/sha.h>

#include <array>

namespace cotc {

namespace {

std::array<unsigned char, SHA256_DIGEST_LENGTH> digest(std::string_view data) {
    std::array<unsigned char, SHA256_DIGEST_LENGTH> out{};
    SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), out.data());
    return out;
}

}  // namespace

std::string sha256_hex(std::string_view data) {
    static constexpr char kHex[] = "0123456789abcdef";
    const auto d = digest(data);
    std::string out;
    out.reserve(d.size() * 2);
    for (unsigned char b : d) {
        out.push_back(kHex[b >> 4]);
        out.push_back(kHex[b & 0x0f]);
    }
    return out;
}

std::uint64_t sha256_u64(std::string_view data) {
    const auto d = digest(data);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | d[i];
    return v;
}

std::uint64_t derive_seed(std::uint64_t base_seed, std::string_view label) {
    std::string buf = std::to_string(base_seed);
    buf.push_back('\x1f');
    buf.append(label);
    return sha256_u64(buf);
}

}  // namespace cotc

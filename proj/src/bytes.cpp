#include "opeq/bytes.hpp"
#include "opeq/errors.hpp"

#include <openssl/evp.h>
#include <openssl/rand.h>

#include <charconv>
#include <cstring>

namespace opeq {

static const char b64_alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string to_base64(std::string_view bytes) {
    std::string out;
    out.reserve(((bytes.size() + 2) / 3) * 4);
    size_t i = 0;
    while (i + 3 <= bytes.size()) {
        uint32_t v = (uint8_t(bytes[i]) << 16) | (uint8_t(bytes[i + 1]) << 8) |
                     uint8_t(bytes[i + 2]);
        out += b64_alphabet[(v >> 18) & 63];
        out += b64_alphabet[(v >> 12) & 63];
        out += b64_alphabet[(v >> 6) & 63];
        out += b64_alphabet[v & 63];
        i += 3;
    }
    size_t rem = bytes.size() - i;
    if (rem == 1) {
        uint32_t v = uint8_t(bytes[i]) << 16;
        out += b64_alphabet[(v >> 18) & 63];
        out += b64_alphabet[(v >> 12) & 63];
        out += "==";
    } else if (rem == 2) {
        uint32_t v = (uint8_t(bytes[i]) << 16) | (uint8_t(bytes[i + 1]) << 8);
        out += b64_alphabet[(v >> 18) & 63];
        out += b64_alphabet[(v >> 12) & 63];
        out += b64_alphabet[(v >> 6) & 63];
        out += '=';
    }
    return out;
}

static int b64_value(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}

std::string from_base64(std::string_view b64) {
    if (b64.size() % 4 != 0)
        throw DataError("base64: length not a multiple of 4");
    std::string out;
    out.reserve(b64.size() / 4 * 3);
    for (size_t i = 0; i < b64.size(); i += 4) {
        int pad = 0;
        int v[4];
        for (int j = 0; j < 4; ++j) {
            char c = b64[i + j];
            if (c == '=') {
                // padding only allowed in the last two positions of the
                // final group
                if (i + 4 != b64.size() || j < 2)
                    throw DataError("base64: misplaced padding");
                v[j] = 0;
                ++pad;
            } else {
                if (pad > 0)
                    throw DataError("base64: data after padding");
                v[j] = b64_value(c);
                if (v[j] < 0)
                    throw DataError("base64: invalid character");
            }
        }
        // bits beyond the encoded bytes must be zero, or the same bytes
        // would have two encodings
        if ((pad == 2 && (v[1] & 0x0f)) || (pad == 1 && (v[2] & 0x03)))
            throw DataError("base64: nonzero trailing bits");
        uint32_t x = (v[0] << 18) | (v[1] << 12) | (v[2] << 6) | v[3];
        out += char((x >> 16) & 0xff);
        if (pad < 2) out += char((x >> 8) & 0xff);
        if (pad < 1) out += char(x & 0xff);
    }
    return out;
}

std::string to_hex(std::string_view bytes) {
    static const char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (unsigned char c : bytes) {
        out += digits[c >> 4];
        out += digits[c & 15];
    }
    return out;
}

std::string random_bytes(size_t n) {
    std::string out(n, '\0');
    if (n > 0 &&
        RAND_bytes(reinterpret_cast<unsigned char *>(out.data()), int(n)) != 1)
        throw CryptoError("RAND_bytes failed");
    return out;
}

std::string order_bytes_from_int64(int64_t v) {
    uint64_t u = static_cast<uint64_t>(v) ^ 0x8000000000000000ull;
    std::string out(8, '\0');
    for (int i = 7; i >= 0; --i) {
        out[i] = char(u & 0xff);
        u >>= 8;
    }
    return out;
}

int64_t int64_from_order_bytes(std::string_view b) {
    if (b.size() != 8)
        throw DataError("order bytes: expected 8 bytes");
    uint64_t u = 0;
    for (char c : b)
        u = (u << 8) | uint8_t(c);
    return static_cast<int64_t>(u ^ 0x8000000000000000ull);
}

std::string u64_to_string(uint64_t v) {
    char buf[24];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, p);
}

uint64_t u64_from_string(std::string_view s) {
    uint64_t v = 0;
    if (s.empty())
        throw DataError("u64: empty string");
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw DataError("u64: bad decimal '" + std::string(s) + "'");
    return v;
}

} // namespace opeq

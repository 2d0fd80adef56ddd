#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace opeq {

// Byte blobs travel as std::string throughout: ciphertexts, tokens,
// serialized payloads. Text/binary distinction is by context.

std::string to_base64(std::string_view bytes);
// Throws DataError on anything that is not canonical base64.
std::string from_base64(std::string_view b64);

std::string to_hex(std::string_view bytes);

// CSPRNG bytes (OpenSSL RAND_bytes).
std::string random_bytes(size_t n);

// Order-preserving byte encoding of a signed 64-bit value:
// big-endian with the sign bit flipped, so memcmp order equals
// numeric order.
std::string order_bytes_from_int64(int64_t v);
int64_t int64_from_order_bytes(std::string_view b);

// Decimal text for unsigned 64-bit order codes.
std::string u64_to_string(uint64_t v);
uint64_t u64_from_string(std::string_view s); // throws DataError

} // namespace opeq

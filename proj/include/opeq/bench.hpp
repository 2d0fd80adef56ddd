#pragma once

#include <cstdint>
#include <vector>

namespace opeq {

struct BenchPoint {
    uint64_t rows = 0;
    double seconds = 0;
    uint64_t plain_bytes = 0;
    uint64_t cipher_bytes = 0;
};

// Times the client-side cost of preparing an order-preserving column:
// sorting the values, assigning order codes and AES-encrypting each
// cell. Each size runs on a fresh dictionary and key, is repeated (at
// least five runs, more for sizes that finish in milliseconds) and
// reports its fastest run, so scheduler noise does not distort the
// scaling numbers.
std::vector<BenchPoint> bench_encrypt(const std::vector<uint64_t> &sizes,
                                      uint64_t seed);

} // namespace opeq

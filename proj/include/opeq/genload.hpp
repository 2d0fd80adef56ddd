/*
 * Deterministic demo data: a card-account table exercising every
 * encryption scheme. The generator is seeded and self-contained so the
 * same seed produces byte-identical load files on any platform.
 */
#pragma once

#include "opeq/schema.hpp"

#include <cstdint>
#include <ostream>
#include <vector>

namespace opeq {

Schema demo_schema();

void write_demo_csv(std::ostream &out, uint64_t rows, uint64_t seed);

// 16-digit account numbers with roughly one in ten repeated, the same
// population write_demo_csv draws from.
std::vector<int64_t> demo_pans(uint64_t rows, uint64_t seed);

} // namespace opeq

/*
 * Query client: parses a conjunctive SQL subset, rewrites it into an
 * encrypted plan the backend can execute blindly, fans the plan out over
 * every chunk, merges the per-chunk results and decrypts what the keyset
 * allows.
 *
 * Operator rules follow the column schemes: '=' needs deterministic or
 * pseudonym, ranges and ORDER BY need the order-preserving column,
 * CONTAINS needs searchwords, SUM needs homomorphic.
 */
#pragma once

#include "opeq/backend.hpp"
#include "opeq/crypto.hpp"
#include "opeq/ope.hpp"
#include "opeq/schema.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace opeq {

struct Predicate {
    std::string column;
    PredOp op = PredOp::eq;
    std::string literal; // canonical plaintext
};

struct QueryPlan {
    std::string table;
    std::vector<std::string> select;
    std::optional<std::string> sum_column;
    std::vector<Predicate> where;
    bool has_order = false;
    std::string order_column;
    bool order_desc = false;
    std::optional<uint64_t> limit;
};

QueryPlan parse_query(std::string_view text, const Schema &schema);

// Turns plaintext literals into ciphertexts, tokens and order codes.
// `state` is required when the plan carries range predicates; a literal
// falling into a closed gap raises CollisionError.
EncryptedPlan rewrite_query(const QueryPlan &plan, const Schema &schema,
                            const Keyset &keys, const OpeState *state,
                            uint64_t epoch);

// Orders the concatenated per-chunk rows the way one global scan would
// have: by order code (ties by chunk then row position), then applies
// the limit. Chunk results must arrive in ascending chunk id order.
std::vector<ResultRow> merge_rows(std::vector<std::vector<ResultRow>> per_chunk,
                                  bool ordered, bool desc,
                                  std::optional<uint64_t> limit);

struct QueryResult {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    std::optional<std::string> sum_value;
    uint64_t matched = 0;
    uint64_t chunks = 0;
    // false when the keyset lacked a column key and ciphertext was
    // returned as-is
    bool fully_decrypted = true;
};

class QueryClient {
public:
    QueryClient(Backend &backend, const Keyset &keys, Schema schema,
                std::string state_dir);

    QueryResult run(std::string_view sql);

private:
    QueryResult execute(const QueryPlan &plan);
    void decrypt_rows(const QueryPlan &plan, std::vector<ResultRow> &merged,
                      QueryResult &result) const;

    Backend &backend_;
    const Keyset &keys_;
    Schema schema_;
    std::string state_dir_;
};

} // namespace opeq

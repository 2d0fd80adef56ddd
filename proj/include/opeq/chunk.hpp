/*
 * Ciphertext chunk layout. A chunk is a CSV payload whose header names
 * the backend-visible columns derived from the schema:
 *
 *   plaintext column  ->  name            (value verbatim)
 *   opaque ciphertext ->  name__enc       (base64)
 *   search tokens     ->  name__enc       (space-joined base64 tokens)
 *   homomorphic       ->  name__enc       (decimal ciphertext)
 *   order-preserving  ->  name__enc       ("base64|code" combined field)
 *                         name__ope       (decimal order code, sortable)
 *
 * The combined field keeps ciphertext and code together for tools that
 * read single cells; the separate __ope column is what the backend sorts
 * and filters on. '|' cannot appear in base64 or decimal text, so the
 * combined field splits unambiguously.
 */
#pragma once

#include "opeq/backend.hpp"
#include "opeq/ope.hpp"
#include "opeq/schema.hpp"

#include <optional>
#include <string>
#include <vector>

namespace opeq {

// What the backend is told about each column: names and cell kinds,
// nothing about plaintext types or key derivation.
std::vector<BackendColumn> backend_columns_for(const Schema &schema);

TableMeta table_meta_for(const Schema &schema, std::string paillier_n);

// One encrypted row: a cell per schema column in schema order. For the
// order-preserving column the cell already holds the combined field and
// `code` carries its order code.
struct CipherRow {
    std::vector<std::string> cells;
    std::optional<OrderCode> code;
};

std::vector<std::string> chunk_headers(const Schema &schema);

std::string serialize_chunk(const Schema &schema,
                            const std::vector<CipherRow> &rows);

// Inverse of serialize_chunk; validates the header and the combined
// field / __ope column agreement.
std::vector<CipherRow> parse_chunk(const Schema &schema, std::string_view csv);

// Splits "base64|code"; throws DataError unless exactly one separator.
std::pair<std::string, OrderCode> split_combined(std::string_view cell);

} // namespace opeq

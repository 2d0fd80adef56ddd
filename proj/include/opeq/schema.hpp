/*
 * Table schema: column names, logical types and the encryption scheme
 * applied to each column. The schema is the contract between the ingest
 * proxy and the query client; the backend only ever sees the derived
 * ciphertext column layout.
 */
#pragma once

#include "opeq/crypto.hpp"
#include "opeq/ope.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace opeq {

enum class DataType { integer, decimal, text };

const char *data_type_name(DataType t);

struct ColumnSpec {
    std::string name;
    DataType type = DataType::text;
    int scale = 0; // fractional digits, decimal columns only
    Scheme scheme = Scheme::none;

    std::string type_name() const;
};

struct Schema {
    std::string table;
    std::vector<ColumnSpec> columns;

    static Schema parse(std::string_view json_text);
    static Schema load_file(const std::string &path);
    std::string to_json() const;

    size_t index_of(std::string_view column) const; // throws SchemeError
    const ColumnSpec &column(std::string_view name) const;
    std::optional<size_t> find(std::string_view column) const;

    // At most one order-preserving column per table; nullopt when none.
    std::optional<size_t> ope_column() const;

    // Checks a plaintext CSV header against the schema, naming the first
    // missing or unexpected column.
    void validate_header(const std::vector<std::string> &header) const;
};

// Canonicalizes one plaintext cell for its column: integers lose leading
// zeros and gain a canonical sign, decimals are rendered with exactly
// `scale` fractional digits, text passes through. Throws DataError with
// the offending value on anything unparseable or out of range.
std::string canonicalize_cell(const ColumnSpec &col, std::string_view raw);

// Byte string whose lexicographic order equals the column's value order.
// Numeric cells map through the order-flipped big-endian transform; text
// compares as raw bytes.
std::string comparison_key(const ColumnSpec &col, std::string_view canonical);

KeyType key_type_for(const ColumnSpec &col);

} // namespace opeq

/*
 * Backend vocabulary: what the untrusted store can see and do.
 *
 * The backend holds gzip'd ciphertext chunks plus just enough column
 * metadata to execute encrypted plans: byte equality on cells, token
 * membership, unsigned comparison on order codes, and multiplication of
 * homomorphic ciphertexts. Nothing in this header or its implementations
 * touches key material or decryption; that separation is the point.
 */
#pragma once

#include "opeq/errors.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace opeq {

// Backend-visible column description. `ordered` columns expose a
// sortable decimal code column next to the ciphertext cell.
struct BackendColumn {
    enum class Kind { plain, opaque, tokens, homomorphic, ordered };
    std::string name;
    Kind kind = Kind::plain;

    bool operator==(const BackendColumn &) const = default;
};

const char *backend_kind_name(BackendColumn::Kind k);
BackendColumn::Kind backend_kind_from_name(std::string_view name);

// Header row of a chunk payload for this column layout.
std::vector<std::string> backend_headers(const std::vector<BackendColumn> &cols);

struct TableMeta {
    std::string name;
    std::vector<BackendColumn> columns;
    std::string paillier_n; // decimal modulus for ciphertext products

    bool operator==(const TableMeta &) const = default;
};

enum class PredOp { eq, lt, le, gt, ge, contains };

const char *pred_op_name(PredOp op);
PredOp pred_op_from_name(std::string_view name);

// One rewritten predicate. Equality and containment carry base64 bytes
// matched against cell text; range operators carry an order code.
struct EncPredicate {
    std::string column;
    PredOp op = PredOp::eq;
    std::string value_b64;
    uint64_t code = 0;
};

struct EncryptedPlan {
    std::string table;
    uint64_t epoch = 0;
    std::vector<std::string> select;
    std::optional<std::string> sum_column;
    std::vector<EncPredicate> where;
    bool has_order = false;
    std::string order_column;
    bool order_desc = false;
    std::optional<uint64_t> limit;

    std::string to_json() const;
    static EncryptedPlan from_json(std::string_view text);
};

struct ResultRow {
    std::vector<std::string> cells;
    uint64_t code = 0;     // order code when the plan sorts
    uint64_t row_index = 0; // position within the chunk, for merge ties
};

struct ChunkQueryResult {
    std::vector<ResultRow> rows;
    std::optional<std::string> sum_ct; // decimal product, identity "1"
    uint64_t matched = 0;
};

struct ChunkInfo {
    uint64_t id = 0;
    uint64_t epoch = 0;
    uint64_t row_count = 0;
    uint64_t bytes = 0;
};

struct TableInfo {
    TableMeta meta;
    std::vector<ChunkInfo> chunks;
};

struct NewChunk {
    uint64_t id = 0;
    uint64_t epoch = 0;
    uint64_t row_count = 0;
    std::string payload_gz;
};

// Backend error with a stable wire code (unknown_table, unknown_chunk,
// duplicate_chunk, table_exists_mismatch, bad_plan, bad_request,
// internal). Epoch disagreements use EpochError instead and travel as
// code "epoch_mismatch".
class BackendFault : public BackendError {
public:
    BackendFault(std::string code, const std::string &msg)
        : BackendError(msg), code_(std::move(code)) {}
    const std::string &code() const { return code_; }

private:
    std::string code_;
};

class Backend {
public:
    virtual ~Backend() = default;

    // Idempotent when the metadata matches what is stored; otherwise
    // throws BackendFault("table_exists_mismatch").
    virtual void create_table(const TableMeta &meta) = 0;

    virtual void insert_chunk(const std::string &table, const NewChunk &chunk) = 0;

    virtual TableInfo list_chunks(const std::string &table) = 0;

    // Atomically removes `remove_ids` and adds `add`; readers never see
    // a half-applied swap.
    virtual void swap_chunks(const std::string &table,
                             const std::vector<uint64_t> &remove_ids,
                             const std::vector<NewChunk> &add) = 0;

    virtual ChunkQueryResult exec_chunk_query(const std::string &table,
                                              uint64_t chunk_id,
                                              const EncryptedPlan &plan) = 0;
};

} // namespace opeq

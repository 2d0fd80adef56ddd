/*
 * Ingest proxy: turns plaintext load files into encrypted chunks.
 *
 * A load reads and canonicalizes every row, sorts by the
 * order-preserving column, assigns order codes for all distinct keys in
 * one balanced pass, then encrypts and uploads fixed-size chunks. The
 * order-preserving dictionary lives in an encrypted state file between
 * loads. Garbage collection consolidates the table's chunks into one,
 * re-sorting rows and refreshing order codes after the code space has
 * been re-encoded.
 */
#pragma once

#include "opeq/backend.hpp"
#include "opeq/chunk.hpp"
#include "opeq/crypto.hpp"
#include "opeq/ope.hpp"
#include "opeq/schema.hpp"

#include <istream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace opeq {

enum class InputFormat { csv, ndjson };
InputFormat input_format_from_name(std::string_view name);

// Streams canonicalized plaintext rows in schema column order.
class InputReader {
public:
    InputReader(std::istream &in, const Schema &schema, InputFormat format);
    bool next(std::vector<std::string> &row);

private:
    std::istream &in_;
    const Schema &schema_;
    InputFormat format_;
    std::vector<size_t> csv_to_schema_; // input field -> schema column
    bool header_done_ = false;
    size_t line_ = 0;
    class CsvState;
    std::shared_ptr<CsvState> csv_;
};

// Where a table's order-preserving dictionary is kept between runs.
std::string ope_state_path(const std::string &state_dir, const Schema &schema);

// Missing file yields a fresh empty state; a collision-pending file is
// loaded as-is (queries still work, loads must re-encode first).
OpeState load_ope_state(const std::string &state_dir, const Schema &schema,
                        const Keyset &keys);
void save_ope_state(const std::string &state_dir, const Schema &schema,
                    const Keyset &keys, const OpeState &state);

// Assigns order codes to every distinct comparison key in `keys_sorted`
// (strictly increasing), inserting medians first so a sorted load costs
// logarithmic gap depth instead of linear.
void assign_order_codes(OpeState &state,
                        const std::vector<std::string> &keys_sorted);

struct PhaseTiming {
    std::string phase;
    double seconds = 0;
};

struct LoadReport {
    uint64_t rows = 0;
    std::vector<uint64_t> chunk_ids;
    uint64_t epoch = 0;
    uint64_t plain_bytes = 0;
    uint64_t compressed_bytes = 0;
    std::vector<PhaseTiming> timings;
    std::string manifest_path;
};

struct GcReport {
    bool acted = false;
    bool reencoded = false;
    uint64_t epoch = 0;
    uint64_t chunks_before = 0;
    uint64_t rows = 0;
    std::optional<uint64_t> new_chunk_id;
};

struct IngestOptions {
    std::string state_dir;
    size_t chunk_size = 100000;
    int gzip_level = 6;
};

class IngestProxy {
public:
    IngestProxy(Backend &backend, const Keyset &keys, Schema schema,
                IngestOptions opts);

    // Encrypts and uploads everything `input` yields. Throws
    // CollisionError after persisting the pending flag when the code
    // space runs out mid-load; run garbage_collect() and retry.
    LoadReport load(std::istream &input, InputFormat format);

    // No-op unless the table has multiple chunks, a pending collision
    // or chunks at stale epochs.
    GcReport garbage_collect();

    const Schema &schema() const { return schema_; }

private:
    struct ColumnCtx {
        std::optional<ColumnKey> key;
    };

    // `codes` is sorted by comparison key; rows[begin, end) must be sorted
    // the same way, so each worker walks the table with a cursor instead of
    // doing a tree lookup per row.
    std::vector<CipherRow> encrypt_rows(
        const std::vector<std::vector<std::string>> &rows, size_t begin,
        size_t end, const std::vector<std::pair<std::string, OrderCode>> &codes,
        uint64_t &plain_bytes) const;
    void ensure_table();
    std::string upload_chunk(uint64_t id, uint64_t epoch,
                             const std::vector<CipherRow> &rows,
                             uint64_t &compressed_bytes);

    Backend &backend_;
    const Keyset &keys_;
    Schema schema_;
    IngestOptions opts_;
    std::vector<ColumnCtx> columns_;
    std::optional<size_t> ope_col_;
};

// Tripwire: refuses to ship a payload that contains key material.
void assert_no_secrets(std::string_view payload, const Keyset &keys,
                       const Schema &schema);

} // namespace opeq

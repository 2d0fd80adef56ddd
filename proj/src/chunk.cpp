#include "opeq/chunk.hpp"
#include "opeq/bytes.hpp"
#include "opeq/csv.hpp"
#include "opeq/errors.hpp"

namespace opeq {

std::vector<BackendColumn> backend_columns_for(const Schema &schema) {
    std::vector<BackendColumn> cols;
    for (const auto &c : schema.columns) {
        BackendColumn m;
        m.name = c.name;
        switch (c.scheme) {
        case Scheme::none: m.kind = BackendColumn::Kind::plain; break;
        case Scheme::deterministic:
        case Scheme::probabilistic:
        case Scheme::pseudonym: m.kind = BackendColumn::Kind::opaque; break;
        case Scheme::searchwords: m.kind = BackendColumn::Kind::tokens; break;
        case Scheme::homomorphic: m.kind = BackendColumn::Kind::homomorphic; break;
        case Scheme::order_preserving: m.kind = BackendColumn::Kind::ordered; break;
        }
        cols.push_back(std::move(m));
    }
    return cols;
}

TableMeta table_meta_for(const Schema &schema, std::string paillier_n) {
    TableMeta meta;
    meta.name = schema.table;
    meta.columns = backend_columns_for(schema);
    meta.paillier_n = std::move(paillier_n);
    return meta;
}

std::vector<std::string> chunk_headers(const Schema &schema) {
    return backend_headers(backend_columns_for(schema));
}

std::string serialize_chunk(const Schema &schema,
                            const std::vector<CipherRow> &rows) {
    std::string out;
    csv_append_row(out, chunk_headers(schema));
    std::vector<std::string> record;
    for (const auto &row : rows) {
        record.clear();
        for (size_t i = 0; i < schema.columns.size(); ++i) {
            record.push_back(row.cells[i]);
            if (schema.columns[i].scheme == Scheme::order_preserving) {
                if (!row.code)
                    throw DataError("row lacks an order code");
                record.push_back(u64_to_string(*row.code));
            }
        }
        csv_append_row(out, record);
    }
    return out;
}

std::pair<std::string, OrderCode> split_combined(std::string_view cell) {
    size_t bar = cell.find('|');
    if (bar == std::string_view::npos ||
        cell.find('|', bar + 1) != std::string_view::npos)
        throw DataError("combined ciphertext cell must hold exactly one '|'");
    if (bar == 0)
        throw DataError("combined ciphertext cell has an empty ciphertext");
    return {std::string(cell.substr(0, bar)),
            u64_from_string(cell.substr(bar + 1))};
}

std::vector<CipherRow> parse_chunk(const Schema &schema, std::string_view csv) {
    auto records = csv_parse(csv);
    if (records.empty())
        throw DataError("chunk payload has no header");
    const auto want = chunk_headers(schema);
    if (records[0] != want)
        throw DataError("chunk header does not match table layout");
    std::vector<CipherRow> rows;
    rows.reserve(records.size() - 1);
    for (size_t r = 1; r < records.size(); ++r) {
        const auto &rec = records[r];
        if (rec.size() != want.size())
            throw DataError("chunk record " + std::to_string(r) +
                            " has wrong field count");
        CipherRow row;
        size_t f = 0;
        for (const auto &c : schema.columns) {
            row.cells.push_back(rec[f++]);
            if (c.scheme == Scheme::order_preserving) {
                auto [ct_b64, code] = split_combined(row.cells.back());
                OrderCode col_code = u64_from_string(rec[f++]);
                if (code != col_code)
                    throw DataError("chunk record " + std::to_string(r) +
                                    ": combined field and order column disagree");
                row.code = code;
                (void)ct_b64;
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace opeq

#include "opeq/backend_store.hpp"
#include "opeq/bytes.hpp"
#include "opeq/csv.hpp"
#include "opeq/gzip.hpp"

#include <nlohmann/json.hpp>

#include <gmpxx.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace opeq {

// Table names become directory names under data_dir, so the store
// enforces a safe charset even though well-behaved clients already do.
static bool safe_identifier(std::string_view s) {
    if (s.empty() || s.size() > 128)
        return false;
    auto head = [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
    };
    if (!head(s[0]))
        return false;
    for (char c : s.substr(1))
        if (!head(c) && !(c >= '0' && c <= '9'))
            return false;
    return true;
}

namespace {

void build_indexes(const TableMeta &meta, std::vector<std::string> &headers,
                   std::map<std::string, size_t> &cell_index,
                   std::map<std::string, size_t> &code_index) {
    headers = backend_headers(meta.columns);
    size_t f = 0;
    for (const auto &c : meta.columns) {
        cell_index[c.name] = f++;
        if (c.kind == BackendColumn::Kind::ordered)
            code_index[c.name] = f++;
    }
}

void validate_meta(const TableMeta &meta) {
    if (!safe_identifier(meta.name))
        throw BackendFault("bad_request", "bad table name");
    if (meta.columns.empty())
        throw BackendFault("bad_request", "table has no columns");
    std::set<std::string> seen;
    for (const auto &c : meta.columns) {
        if (!safe_identifier(c.name))
            throw BackendFault("bad_request", "bad column name '" + c.name + "'");
        if (!seen.insert(c.name).second)
            throw BackendFault("bad_request", "duplicate column '" + c.name + "'");
    }
}

// Uploads may hand us arbitrary bytes; a failed inflate is the
// client's mistake. Stored payloads were validated on the way in, so
// the same failure after that point means the store itself is damaged.
std::string decompress_payload(const std::string &gz, const char *fault_code) {
    try {
        return gzip_decompress(gz);
    } catch (const DataError &e) {
        throw BackendFault(fault_code,
                           std::string("chunk payload is not valid gzip: ") +
                               e.what());
    }
}

// First record of the decompressed payload, without parsing the rest.
std::vector<std::string> payload_header(const std::string &payload) {
    size_t eol = payload.find('\n');
    std::string_view line(payload.data(),
                          eol == std::string::npos ? payload.size() : eol);
    auto rows = csv_parse(line);
    if (rows.empty())
        throw BackendFault("bad_request", "chunk payload is empty");
    return rows[0];
}

} // namespace

StorageBackend::StorageBackend(std::optional<std::string> data_dir)
    : data_dir_(std::move(data_dir)) {
    if (data_dir_) {
        fs::create_directories(*data_dir_);
        load_data_dir();
    }
}

StorageBackend::Table *StorageBackend::find_table(const std::string &name) {
    std::lock_guard lk(tables_mu_);
    auto it = tables_.find(name);
    if (it == tables_.end())
        throw BackendFault("unknown_table", "no such table '" + name + "'");
    return it->second.get();
}

void StorageBackend::create_table(const TableMeta &meta) {
    validate_meta(meta);
    std::lock_guard lk(tables_mu_);
    auto it = tables_.find(meta.name);
    if (it != tables_.end()) {
        if (it->second->meta == meta)
            return; // idempotent re-create
        throw BackendFault("table_exists_mismatch",
                           "table '" + meta.name +
                               "' exists with different metadata");
    }
    auto t = std::make_unique<Table>();
    t->meta = meta;
    build_indexes(meta, t->headers, t->cell_index, t->code_index);
    if (data_dir_) {
        fs::create_directories(fs::path(*data_dir_) / meta.name);
        persist_manifest(*t);
    }
    tables_.emplace(meta.name, std::move(t));
}

void StorageBackend::insert_chunk(const std::string &table,
                                  const NewChunk &chunk) {
    Table *t = find_table(table);
    auto payload = std::make_shared<const std::string>(chunk.payload_gz);
    // layout check up front so a bad upload fails loudly, not at query time
    if (payload_header(decompress_payload(*payload, "bad_request")) != t->headers)
        throw BackendFault("bad_request",
                           "chunk header does not match table layout");
    std::unique_lock lk(t->mu);
    if (t->chunks.count(chunk.id))
        throw BackendFault("duplicate_chunk",
                           "chunk " + std::to_string(chunk.id) +
                               " already exists in '" + table + "'");
    if (data_dir_)
        persist_chunk(table, chunk.id, *payload);
    t->chunks[chunk.id] = {chunk.epoch, chunk.row_count, payload};
    if (data_dir_)
        persist_manifest(*t);
}

TableInfo StorageBackend::list_chunks(const std::string &table) {
    Table *t = find_table(table);
    std::shared_lock lk(t->mu);
    TableInfo info;
    info.meta = t->meta;
    for (const auto &[id, c] : t->chunks)
        info.chunks.push_back(
            {id, c.epoch, c.row_count, uint64_t(c.payload_gz->size())});
    return info;
}

void StorageBackend::swap_chunks(const std::string &table,
                                 const std::vector<uint64_t> &remove_ids,
                                 const std::vector<NewChunk> &add) {
    Table *t = find_table(table);
    std::vector<std::shared_ptr<const std::string>> payloads;
    for (const auto &c : add) {
        auto p = std::make_shared<const std::string>(c.payload_gz);
        if (payload_header(decompress_payload(*p, "bad_request")) != t->headers)
            throw BackendFault("bad_request",
                               "chunk header does not match table layout");
        payloads.push_back(std::move(p));
    }
    std::unique_lock lk(t->mu);
    std::set<uint64_t> removing(remove_ids.begin(), remove_ids.end());
    for (uint64_t id : remove_ids)
        if (!t->chunks.count(id))
            throw BackendFault("unknown_chunk",
                               "chunk " + std::to_string(id) +
                                   " does not exist in '" + table + "'");
    std::set<uint64_t> adding;
    for (const auto &c : add) {
        if (!adding.insert(c.id).second)
            throw BackendFault("duplicate_chunk",
                               "swap adds chunk " + std::to_string(c.id) +
                                   " twice");
        if (t->chunks.count(c.id) && !removing.count(c.id))
            throw BackendFault("duplicate_chunk",
                               "chunk " + std::to_string(c.id) +
                                   " already exists in '" + table + "'");
    }
    if (data_dir_)
        for (size_t i = 0; i < add.size(); ++i)
            persist_chunk(table, add[i].id, *payloads[i]);
    for (uint64_t id : remove_ids)
        t->chunks.erase(id);
    for (size_t i = 0; i < add.size(); ++i)
        t->chunks[add[i].id] = {add[i].epoch, add[i].row_count, payloads[i]};
    if (data_dir_)
        persist_manifest(*t);
    if (data_dir_)
        for (uint64_t id : remove_ids)
            if (!t->chunks.count(id)) {
                std::error_code ec;
                fs::remove(fs::path(*data_dir_) / table /
                               ("chunk_" + std::to_string(id) + ".gz"),
                           ec);
            }
}

ChunkQueryResult StorageBackend::exec_chunk_query(const std::string &table,
                                                  uint64_t chunk_id,
                                                  const EncryptedPlan &plan) {
    Table *t = find_table(table);
    if (plan.table != table)
        throw BackendFault("bad_plan", "plan names a different table");

    std::shared_ptr<const std::string> payload;
    uint64_t chunk_epoch = 0;
    {
        std::shared_lock lk(t->mu);
        auto it = t->chunks.find(chunk_id);
        if (it == t->chunks.end())
            throw BackendFault("unknown_chunk",
                               "chunk " + std::to_string(chunk_id) +
                                   " does not exist in '" + table + "'");
        payload = it->second.payload_gz;
        chunk_epoch = it->second.epoch;
    }
    if (plan.epoch != chunk_epoch)
        throw EpochError("plan epoch " + std::to_string(plan.epoch) +
                         " does not match chunk epoch " +
                         std::to_string(chunk_epoch));

    // validate the plan against the column layout
    auto kind_of = [&](const std::string &name) -> BackendColumn::Kind {
        for (const auto &c : t->meta.columns)
            if (c.name == name)
                return c.kind;
        throw BackendFault("bad_plan", "plan names unknown column '" + name + "'");
    };
    for (const auto &p : plan.where) {
        auto k = kind_of(p.column);
        switch (p.op) {
        case PredOp::eq:
            if (k != BackendColumn::Kind::opaque)
                throw BackendFault("bad_plan", "eq needs an opaque cell, column '" +
                                                   p.column + "' is not");
            break;
        case PredOp::contains:
            if (k != BackendColumn::Kind::tokens)
                throw BackendFault("bad_plan",
                                   "contains needs a token cell, column '" +
                                       p.column + "' is not");
            break;
        default:
            if (k != BackendColumn::Kind::ordered)
                throw BackendFault("bad_plan",
                                   "range operators need an ordered column, '" +
                                       p.column + "' is not");
        }
    }
    if (plan.has_order && kind_of(plan.order_column) != BackendColumn::Kind::ordered)
        throw BackendFault("bad_plan", "order column '" + plan.order_column +
                                           "' is not ordered");
    if (plan.sum_column) {
        if (kind_of(*plan.sum_column) != BackendColumn::Kind::homomorphic)
            throw BackendFault("bad_plan", "sum column '" + *plan.sum_column +
                                               "' is not homomorphic");
        if (!plan.select.empty() || plan.has_order)
            throw BackendFault("bad_plan",
                               "sum plans cannot also select or order rows");
        if (t->meta.paillier_n.empty())
            throw BackendFault("bad_plan", "table has no homomorphic modulus");
    }
    std::vector<size_t> project;
    for (const auto &name : plan.select) {
        kind_of(name); // existence check
        project.push_back(t->cell_index.at(name));
    }

    auto rows = csv_parse(decompress_payload(*payload, "internal"));
    if (rows.empty() || rows[0] != t->headers)
        throw BackendFault("internal", "stored chunk payload is corrupt");

    mpz_class sum_acc = 1, n_squared;
    const bool want_sum = plan.sum_column.has_value();
    size_t sum_field = 0;
    if (want_sum) {
        mpz_class n;
        if (n.set_str(t->meta.paillier_n, 10) != 0)
            throw BackendFault("internal", "table modulus is not a number");
        n_squared = n * n;
        sum_field = t->cell_index.at(*plan.sum_column);
    }
    size_t order_field = plan.has_order ? t->code_index.at(plan.order_column) : 0;

    ChunkQueryResult result;
    mpz_class cipher;
    for (size_t r = 1; r < rows.size(); ++r) {
        const auto &rec = rows[r];
        if (rec.size() != t->headers.size())
            throw BackendFault("internal", "stored chunk payload is corrupt");
        bool ok = true;
        for (const auto &p : plan.where) {
            const std::string &cell =
                rec[p.op == PredOp::eq || p.op == PredOp::contains
                        ? t->cell_index.at(p.column)
                        : t->code_index.at(p.column)];
            switch (p.op) {
            case PredOp::eq:
                ok = cell == p.value_b64;
                break;
            case PredOp::contains: {
                ok = false;
                size_t start = 0;
                while (start <= cell.size()) {
                    size_t sp = cell.find(' ', start);
                    size_t len =
                        (sp == std::string::npos ? cell.size() : sp) - start;
                    if (std::string_view(cell).substr(start, len) == p.value_b64) {
                        ok = true;
                        break;
                    }
                    if (sp == std::string::npos)
                        break;
                    start = sp + 1;
                }
                break;
            }
            case PredOp::lt: ok = u64_from_string(cell) < p.code; break;
            case PredOp::le: ok = u64_from_string(cell) <= p.code; break;
            case PredOp::gt: ok = u64_from_string(cell) > p.code; break;
            case PredOp::ge: ok = u64_from_string(cell) >= p.code; break;
            }
            if (!ok)
                break;
        }
        if (!ok)
            continue;
        ++result.matched;
        if (want_sum) {
            const std::string &cell = rec[sum_field];
            if (cipher.set_str(cell, 10) != 0 || cipher < 0)
                throw BackendFault("internal", "homomorphic cell is not a number");
            sum_acc = sum_acc * cipher % n_squared;
            continue;
        }
        ResultRow out;
        out.row_index = r - 1;
        if (plan.has_order)
            out.code = u64_from_string(rec[order_field]);
        out.cells.reserve(project.size());
        for (size_t f : project)
            out.cells.push_back(rec[f]);
        result.rows.push_back(std::move(out));
    }
    if (want_sum)
        result.sum_ct = sum_acc.get_str();

    if (plan.has_order) {
        if (plan.order_desc)
            std::stable_sort(result.rows.begin(), result.rows.end(),
                             [](const ResultRow &a, const ResultRow &b) {
                                 return a.code > b.code;
                             });
        else
            std::stable_sort(result.rows.begin(), result.rows.end(),
                             [](const ResultRow &a, const ResultRow &b) {
                                 return a.code < b.code;
                             });
    }
    if (plan.limit && result.rows.size() > *plan.limit)
        result.rows.resize(*plan.limit);
    return result;
}

// ---- persistence ----

static void write_file_atomic(const fs::path &path, const std::string &data) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError("cannot write '" + tmp.string() + "'");
        out.write(data.data(), std::streamsize(data.size()));
        out.close();
        if (!out)
            throw IoError("short write to '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
}

void StorageBackend::persist_chunk(const std::string &table, uint64_t id,
                                   const std::string &payload_gz) const {
    write_file_atomic(fs::path(*data_dir_) / table /
                          ("chunk_" + std::to_string(id) + ".gz"),
                      payload_gz);
}

void StorageBackend::persist_manifest(const Table &t) const {
    json j;
    j["version"] = 1;
    json meta;
    meta["name"] = t.meta.name;
    json cols = json::array();
    for (const auto &c : t.meta.columns) {
        json cj;
        cj["name"] = c.name;
        cj["kind"] = backend_kind_name(c.kind);
        cols.push_back(cj);
    }
    meta["columns"] = cols;
    meta["paillier_n"] = t.meta.paillier_n;
    j["meta"] = meta;
    json chunks = json::array();
    for (const auto &[id, c] : t.chunks) {
        json cj;
        cj["id"] = id;
        cj["epoch"] = c.epoch;
        cj["rows"] = c.row_count;
        cj["file"] = "chunk_" + std::to_string(id) + ".gz";
        chunks.push_back(cj);
    }
    j["chunks"] = chunks;
    write_file_atomic(fs::path(*data_dir_) / t.meta.name / "manifest.json",
                      j.dump(2) + "\n");
}

void StorageBackend::load_data_dir() {
    for (const auto &entry : fs::directory_iterator(*data_dir_)) {
        if (!entry.is_directory())
            continue;
        fs::path manifest = entry.path() / "manifest.json";
        if (!fs::exists(manifest))
            continue;
        std::ifstream in(manifest, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        json j;
        try {
            j = json::parse(ss.str());
        } catch (const json::exception &e) {
            throw DataError("manifest '" + manifest.string() +
                            "' is malformed: " + e.what());
        }
        try {
            if (j.at("version").get<int>() != 1)
                throw DataError("manifest '" + manifest.string() +
                                "': unsupported version");
            auto t = std::make_unique<Table>();
            const json &meta = j.at("meta");
            t->meta.name = meta.at("name").get<std::string>();
            for (const auto &cj : meta.at("columns")) {
                BackendColumn c;
                c.name = cj.at("name").get<std::string>();
                c.kind = backend_kind_from_name(cj.at("kind").get<std::string>());
                t->meta.columns.push_back(std::move(c));
            }
            t->meta.paillier_n = meta.at("paillier_n").get<std::string>();
            validate_meta(t->meta);
            build_indexes(t->meta, t->headers, t->cell_index, t->code_index);
            for (const auto &cj : j.at("chunks")) {
                uint64_t id = cj.at("id").get<uint64_t>();
                fs::path file = entry.path() / cj.at("file").get<std::string>();
                std::ifstream cin(file, std::ios::binary);
                if (!cin)
                    throw IoError("cannot open chunk file '" + file.string() +
                                  "'");
                std::ostringstream cs;
                cs << cin.rdbuf();
                t->chunks[id] = {cj.at("epoch").get<uint64_t>(),
                                 cj.at("rows").get<uint64_t>(),
                                 std::make_shared<const std::string>(cs.str())};
            }
            tables_.emplace(t->meta.name, std::move(t));
        } catch (const json::exception &e) {
            throw DataError("manifest '" + manifest.string() +
                            "' is missing fields: " + e.what());
        }
    }
}

} // namespace opeq

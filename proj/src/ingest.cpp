#include "opeq/ingest.hpp"
#include "opeq/bytes.hpp"
#include "opeq/csv.hpp"
#include "opeq/gzip.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace opeq {

InputFormat input_format_from_name(std::string_view name) {
    if (name == "csv")
        return InputFormat::csv;
    if (name == "ndjson")
        return InputFormat::ndjson;
    throw UsageError("unknown input format '" + std::string(name) +
                     "' (expected csv or ndjson)");
}

class InputReader::CsvState {
public:
    explicit CsvState(std::istream &in) : reader(in) {}
    CsvReader reader;
    std::vector<std::string> fields;
};

InputReader::InputReader(std::istream &in, const Schema &schema,
                         InputFormat format)
    : in_(in), schema_(schema), format_(format) {
    if (format_ == InputFormat::csv)
        csv_ = std::make_shared<CsvState>(in);
}

bool InputReader::next(std::vector<std::string> &row) {
    row.assign(schema_.columns.size(), std::string());
    if (format_ == InputFormat::csv) {
        if (!header_done_) {
            if (!csv_->reader.next(csv_->fields))
                throw DataError("input is empty; expected a header row");
            schema_.validate_header(csv_->fields);
            csv_to_schema_.clear();
            for (const auto &name : csv_->fields)
                csv_to_schema_.push_back(schema_.index_of(name));
            header_done_ = true;
        }
        if (!csv_->reader.next(csv_->fields))
            return false;
        if (csv_->fields.size() != csv_to_schema_.size())
            throw DataError("csv record " +
                            std::to_string(csv_->reader.record_number()) +
                            " has " + std::to_string(csv_->fields.size()) +
                            " fields, expected " +
                            std::to_string(csv_to_schema_.size()));
        for (size_t i = 0; i < csv_->fields.size(); ++i) {
            size_t col = csv_to_schema_[i];
            try {
                row[col] =
                    canonicalize_cell(schema_.columns[col], csv_->fields[i]);
            } catch (const DataError &e) {
                throw DataError("record " +
                                std::to_string(csv_->reader.record_number()) +
                                ": " + e.what());
            }
        }
        return true;
    }
    // ndjson: one object per line, keys must match the schema exactly
    std::string line;
    for (;;) {
        if (!std::getline(in_, line))
            return false;
        ++line_;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (!line.empty())
            break;
    }
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception &e) {
        throw DataError("line " + std::to_string(line_) +
                        ": not valid JSON: " + e.what());
    }
    if (!j.is_object())
        throw DataError("line " + std::to_string(line_) + ": not a JSON object");
    for (const auto &[key, value] : j.items()) {
        if (!schema_.find(key))
            throw DataError("line " + std::to_string(line_) +
                            ": unexpected key '" + key + "'");
        (void)value;
    }
    for (size_t col = 0; col < schema_.columns.size(); ++col) {
        const auto &spec = schema_.columns[col];
        if (!j.contains(spec.name))
            throw DataError("line " + std::to_string(line_) + ": missing key '" +
                            spec.name + "'");
        const json &v = j.at(spec.name);
        std::string raw;
        if (v.is_string())
            raw = v.get<std::string>();
        else if (v.is_number_integer())
            raw = std::to_string(v.get<int64_t>());
        else if (v.is_number_unsigned())
            raw = std::to_string(v.get<uint64_t>());
        else
            throw DataError("line " + std::to_string(line_) + ": key '" +
                            spec.name +
                            "' must be a string or integer (write decimals as "
                            "strings)");
        try {
            row[col] = canonicalize_cell(spec, raw);
        } catch (const DataError &e) {
            throw DataError("line " + std::to_string(line_) + ": " + e.what());
        }
    }
    return true;
}

std::string ope_state_path(const std::string &state_dir, const Schema &schema) {
    auto col = schema.ope_column();
    if (!col)
        throw UsageError("table '" + schema.table +
                         "' has no order-preserving column");
    return (fs::path(state_dir) /
            (schema.table + "." + schema.columns[*col].name + ".opestate"))
        .string();
}

OpeState load_ope_state(const std::string &state_dir, const Schema &schema,
                        const Keyset &keys) {
    auto col = schema.ope_column();
    std::string path = ope_state_path(state_dir, schema);
    const ColumnSpec &spec = schema.columns[*col];
    std::ifstream in(path, std::ios::binary);
    if (!in)
        return OpeState::make(key_type_for(spec));
    std::ostringstream ss;
    ss << in.rdbuf();
    ColumnKey key = keys.require_column_key(schema.table, spec.name,
                                            Scheme::order_preserving);
    OpeState st = OpeState::deserialize(ss.str(), key);
    if (st.type() != key_type_for(spec))
        throw DataError("state file '" + path +
                        "' was built for a different column type");
    return st;
}

void save_ope_state(const std::string &state_dir, const Schema &schema,
                    const Keyset &keys, const OpeState &state) {
    auto col = schema.ope_column();
    std::string path = ope_state_path(state_dir, schema);
    const ColumnSpec &spec = schema.columns[*col];
    ColumnKey key = keys.require_column_key(schema.table, spec.name,
                                            Scheme::order_preserving);
    fs::create_directories(fs::path(path).parent_path());
    fs::path tmp = fs::path(path + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError("cannot write state file '" + path + "'");
        out << state.serialize(key);
        out.close();
        if (!out)
            throw IoError("short write to state file '" + path + "'");
    }
    fs::rename(tmp, path);
}

void assign_order_codes(OpeState &state,
                        const std::vector<std::string> &keys_sorted) {
    if (state.size() == 0 && !state.collision_pending()) {
        // first load of a column: same codes, but built in one ordered
        // pass instead of a tree insert per key
        state.bulk_insert_sorted(keys_sorted);
        return;
    }
    // recursion by explicit stack of [lo, hi) ranges, medians first
    std::vector<std::pair<size_t, size_t>> stack;
    if (!keys_sorted.empty())
        stack.emplace_back(0, keys_sorted.size());
    while (!stack.empty()) {
        auto [lo, hi] = stack.back();
        stack.pop_back();
        size_t mid = lo + (hi - lo) / 2;
        state.encode_insert(keys_sorted[mid]);
        if (mid > lo)
            stack.emplace_back(lo, mid);
        if (mid + 1 < hi)
            stack.emplace_back(mid + 1, hi);
    }
}

void assert_no_secrets(std::string_view payload, const Keyset &keys,
                       const Schema &schema) {
    std::vector<std::string> needles;
    auto add = [&](const std::string &raw) {
        if (raw.size() >= 8) {
            needles.push_back(raw);
            needles.push_back(to_base64(raw));
        }
    };
    if (keys.has_master())
        add(keys.master_key());
    for (const auto &col : schema.columns) {
        if (col.scheme == Scheme::none)
            continue;
        if (auto k = keys.column_key(schema.table, col.name, col.scheme))
            add(k->bytes);
    }
    if (keys.has_paillier_private()) {
        needles.push_back(keys.paillier_private().lambda.get_str());
        needles.push_back(keys.paillier_private().mu.get_str());
    }
    for (const auto &needle : needles)
        if (payload.find(needle) != std::string_view::npos)
            throw CryptoError("refusing to upload: payload contains key material");
}

IngestProxy::IngestProxy(Backend &backend, const Keyset &keys, Schema schema,
                         IngestOptions opts)
    : backend_(backend), keys_(keys), schema_(std::move(schema)),
      opts_(std::move(opts)) {
    if (opts_.chunk_size == 0)
        throw UsageError("chunk size must be positive");
    for (const auto &col : schema_.columns) {
        ColumnCtx ctx;
        if (col.scheme != Scheme::none && col.scheme != Scheme::homomorphic)
            ctx.key = keys_.require_column_key(schema_.table, col.name,
                                               col.scheme);
        columns_.push_back(std::move(ctx));
    }
    ope_col_ = schema_.ope_column();
}

void IngestProxy::ensure_table() {
    backend_.create_table(
        table_meta_for(schema_, keys_.paillier_public().n.get_str()));
}

std::vector<CipherRow> IngestProxy::encrypt_rows(
    const std::vector<std::vector<std::string>> &rows, size_t begin, size_t end,
    const std::vector<std::pair<std::string, OrderCode>> &codes,
    uint64_t &plain_bytes) const {
    std::vector<CipherRow> out(end - begin);
    const size_t ncols = schema_.columns.size();
    const PaillierPublic &paillier = keys_.paillier_public();

    uint64_t bytes = 0;
    for (size_t r = begin; r < end; ++r)
        for (const auto &cell : rows[r])
            bytes += cell.size() + 1;
    plain_bytes += bytes;

    auto work = [&](size_t lo, size_t hi) {
        mpz_class m;
        auto cursor = codes.begin();
        bool seeded = false;
        for (size_t r = lo; r < hi; ++r) {
            const auto &row = rows[begin + r];
            CipherRow enc;
            enc.cells.resize(ncols);
            for (size_t c = 0; c < ncols; ++c) {
                const ColumnSpec &spec = schema_.columns[c];
                const std::string &cell = row[c];
                switch (spec.scheme) {
                case Scheme::none:
                    enc.cells[c] = cell;
                    break;
                case Scheme::deterministic:
                    enc.cells[c] = to_base64(det_encrypt(*columns_[c].key, cell));
                    break;
                case Scheme::probabilistic:
                    enc.cells[c] = to_base64(prob_encrypt(*columns_[c].key, cell));
                    break;
                case Scheme::pseudonym:
                    enc.cells[c] = to_base64(pseudonym(*columns_[c].key, cell));
                    break;
                case Scheme::searchwords: {
                    std::string joined;
                    for (const auto &tok : searchwords(*columns_[c].key, cell)) {
                        if (!joined.empty())
                            joined += ' ';
                        joined += to_base64(tok);
                    }
                    enc.cells[c] = joined;
                    break;
                }
                case Scheme::homomorphic:
                    m = mpz_class(cell);
                    enc.cells[c] = paillier.encrypt(m).get_str();
                    break;
                case Scheme::order_preserving: {
                    std::string key = comparison_key(spec, cell);
                    if (!seeded) {
                        cursor = std::lower_bound(
                            codes.begin(), codes.end(), key,
                            [](const auto &e, const std::string &k) {
                                return e.first < k;
                            });
                        seeded = true;
                    }
                    while (cursor != codes.end() && cursor->first < key)
                        ++cursor;
                    if (cursor == codes.end() || cursor->first != key)
                        throw DataError("order code missing for a load row");
                    enc.cells[c] = to_base64(det_encrypt(*columns_[c].key, cell)) +
                                   "|" + u64_to_string(cursor->second);
                    enc.code = cursor->second;
                    break;
                }
                }
            }
            out[r] = std::move(enc);
        }
    };

    const size_t n = end - begin;
    size_t workers = std::min<size_t>(std::thread::hardware_concurrency(), 8);
    if (workers < 2 || n < 2048) {
        work(0, n);
        return out;
    }
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(workers);
    size_t per = (n + workers - 1) / workers;
    for (size_t w = 0; w < workers; ++w) {
        size_t lo = w * per, hi = std::min(n, lo + per);
        if (lo >= hi)
            break;
        threads.emplace_back([&, w, lo, hi] {
            try {
                work(lo, hi);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto &t : threads)
        t.join();
    for (auto &e : errors)
        if (e)
            std::rethrow_exception(e);
    return out;
}

std::string IngestProxy::upload_chunk(uint64_t id, uint64_t epoch,
                                      const std::vector<CipherRow> &rows,
                                      uint64_t &compressed_bytes) {
    std::string csv = serialize_chunk(schema_, rows);
    assert_no_secrets(csv, keys_, schema_);
    std::string gz = gzip_compress(csv, opts_.gzip_level);
    compressed_bytes += gz.size();

    fs::path tmp_dir = fs::path(opts_.state_dir) / "tmp";
    fs::create_directories(tmp_dir);
    fs::path tmp = tmp_dir / (schema_.table + ".chunk_" + std::to_string(id) +
                              ".gz.tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError("cannot write temp chunk '" + tmp.string() + "'");
        out.write(gz.data(), std::streamsize(gz.size()));
        out.close();
        if (!out)
            throw IoError("short write to temp chunk '" + tmp.string() + "'");
    }

    NewChunk chunk;
    chunk.id = id;
    chunk.epoch = epoch;
    chunk.row_count = rows.size();
    chunk.payload_gz = std::move(gz);
    backend_.insert_chunk(schema_.table, chunk);

    // keep the temp file only when the upload failed
    std::error_code ec;
    fs::remove(tmp, ec);
    return tmp.string();
}

namespace {

class Stopwatch {
public:
    void lap(std::vector<PhaseTiming> &into, const std::string &phase) {
        auto now = std::chrono::steady_clock::now();
        into.push_back(
            {phase, std::chrono::duration<double>(now - last_).count()});
        last_ = now;
    }

private:
    std::chrono::steady_clock::time_point last_ =
        std::chrono::steady_clock::now();
};

std::string write_load_manifest(const std::string &state_dir,
                                const std::string &table,
                                const LoadReport &report,
                                const std::string &status,
                                const std::string &error) {
    fs::path dir = fs::path(state_dir) / "loads";
    fs::create_directories(dir);
    auto stamp = std::chrono::duration_cast<std::chrono::milliseconds>(
                     std::chrono::system_clock::now().time_since_epoch())
                     .count();
    fs::path path = dir / (table + "." + std::to_string(stamp) + ".json");
    json j;
    j["table"] = table;
    j["status"] = status;
    if (!error.empty())
        j["error"] = error;
    j["rows"] = report.rows;
    j["chunks"] = report.chunk_ids;
    j["epoch"] = report.epoch;
    j["plain_bytes"] = report.plain_bytes;
    j["compressed_bytes"] = report.compressed_bytes;
    json timings = json::object();
    for (const auto &t : report.timings)
        timings[t.phase] = t.seconds;
    j["timings"] = timings;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << j.dump(2) << "\n";
    return path.string();
}

} // namespace

LoadReport IngestProxy::load(std::istream &input, InputFormat format) {
    LoadReport report;
    Stopwatch watch;

    std::vector<std::vector<std::string>> rows;
    {
        InputReader reader(input, schema_, format);
        std::vector<std::string> row;
        while (reader.next(row))
            rows.push_back(row);
    }
    report.rows = rows.size();
    watch.lap(report.timings, "read");

    ensure_table();
    TableInfo info = backend_.list_chunks(schema_.table);
    uint64_t next_id = 0;
    for (const auto &c : info.chunks)
        next_id = std::max(next_id, c.id + 1);
    watch.lap(report.timings, "prepare");

    std::vector<std::pair<std::string, OrderCode>> codes;
    OpeState state = OpeState::make(KeyType::integer);
    bool have_state = false;
    if (ope_col_) {
        state = load_ope_state(opts_.state_dir, schema_, keys_);
        have_state = true;
        const ColumnSpec &spec = schema_.columns[*ope_col_];
        // sort the whole load before chunking, so chunks hold ordered
        // runs; keys are computed once, not inside the comparator
        std::vector<std::pair<std::string, size_t>> order(rows.size());
        for (size_t i = 0; i < rows.size(); ++i)
            order[i] = {comparison_key(spec, rows[i][*ope_col_]), i};
        std::sort(order.begin(), order.end()); // index tiebreak keeps it stable
        std::vector<std::vector<std::string>> sorted;
        sorted.reserve(rows.size());
        for (auto &[key, i] : order)
            sorted.push_back(std::move(rows[i]));
        rows = std::move(sorted);
        watch.lap(report.timings, "sort");

        std::vector<std::string> distinct;
        for (auto &[key, i] : order)
            if (distinct.empty() || distinct.back() != key)
                distinct.push_back(std::move(key));
        try {
            assign_order_codes(state, distinct);
        } catch (const CollisionError &) {
            // persist the pending flag so every later run knows to re-encode
            save_ope_state(opts_.state_dir, schema_, keys_, state);
            report.epoch = state.epoch();
            report.manifest_path = write_load_manifest(
                opts_.state_dir, schema_.table, report, "aborted",
                "order code space exhausted; garbage collection required");
            throw;
        }
        // one in-order walk over the dictionary collects every code this
        // load needs; both sequences are sorted, so no per-key lookups
        codes.reserve(distinct.size());
        auto want = distinct.begin();
        state.for_each([&](std::string_view key, OrderCode code) {
            if (want != distinct.end() && key == *want) {
                codes.emplace_back(*want, code);
                ++want;
            }
        });
        if (want != distinct.end())
            throw DataError("order code missing for a load row");
        report.epoch = state.epoch();
        watch.lap(report.timings, "encode");
    }

    double encrypt_s = 0, upload_s = 0;
    try {
        for (size_t begin = 0; begin < rows.size(); begin += opts_.chunk_size) {
            size_t end = std::min(rows.size(), begin + opts_.chunk_size);
            auto t0 = std::chrono::steady_clock::now();
            auto enc =
                encrypt_rows(rows, begin, end, codes, report.plain_bytes);
            auto t1 = std::chrono::steady_clock::now();
            upload_chunk(next_id, report.epoch, enc, report.compressed_bytes);
            auto t2 = std::chrono::steady_clock::now();
            encrypt_s += std::chrono::duration<double>(t1 - t0).count();
            upload_s += std::chrono::duration<double>(t2 - t1).count();
            report.chunk_ids.push_back(next_id);
            ++next_id;
        }
    } catch (...) {
        if (have_state)
            save_ope_state(opts_.state_dir, schema_, keys_, state);
        report.timings.push_back({"encrypt", encrypt_s});
        report.timings.push_back({"upload", upload_s});
        report.manifest_path =
            write_load_manifest(opts_.state_dir, schema_.table, report,
                                "aborted", "upload failed part way");
        throw;
    }
    report.timings.push_back({"encrypt", encrypt_s});
    report.timings.push_back({"upload", upload_s});

    if (have_state)
        save_ope_state(opts_.state_dir, schema_, keys_, state);
    report.manifest_path = write_load_manifest(opts_.state_dir, schema_.table,
                                               report, "complete", "");
    return report;
}

GcReport IngestProxy::garbage_collect() {
    GcReport report;
    TableInfo info = backend_.list_chunks(schema_.table);
    report.chunks_before = info.chunks.size();

    OpeState state = OpeState::make(KeyType::integer);
    bool have_state = ope_col_.has_value();
    if (have_state)
        state = load_ope_state(opts_.state_dir, schema_, keys_);

    bool stale = false;
    for (const auto &c : info.chunks)
        if (c.epoch != state.epoch())
            stale = true;
    bool pending = have_state && state.collision_pending();
    if (info.chunks.size() < 2 && !pending && !stale) {
        report.epoch = state.epoch();
        return report; // nothing worth rewriting
    }
    report.acted = true;

    // full scan of every chunk, each at its own recorded epoch
    std::vector<std::string> select;
    for (const auto &c : schema_.columns)
        select.push_back(c.name);
    struct TaggedRow {
        std::string key; // comparison key; empty when no ordered column
        uint64_t chunk_id;
        uint64_t row_index;
        std::vector<std::string> cells;
    };
    std::vector<TaggedRow> all;
    for (const auto &c : info.chunks) {
        EncryptedPlan plan;
        plan.table = schema_.table;
        plan.epoch = c.epoch;
        plan.select = select;
        ChunkQueryResult result =
            backend_.exec_chunk_query(schema_.table, c.id, plan);
        for (auto &r : result.rows) {
            TaggedRow t;
            t.chunk_id = c.id;
            t.row_index = r.row_index;
            t.cells = std::move(r.cells);
            all.push_back(std::move(t));
        }
    }
    report.rows = all.size();

    std::map<std::string, OrderCode, std::less<>> codes;
    if (have_state) {
        const ColumnSpec &spec = schema_.columns[*ope_col_];
        ColumnKey key = *columns_[*ope_col_].key;
        for (auto &t : all) {
            auto [ct_b64, old_code] = split_combined(t.cells[*ope_col_]);
            std::string plain = det_decrypt(key, from_base64(ct_b64));
            t.key = comparison_key(spec, plain);
            (void)old_code;
        }
        if (state.collision_pending()) {
            state.reencode();
            report.reencoded = true;
        }
        // refresh codes straight from the dictionary; rebuild it when the
        // state file went missing
        std::vector<std::string> distinct;
        for (const auto &t : all)
            distinct.push_back(t.key);
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()),
                       distinct.end());
        std::vector<std::string> missing;
        for (const auto &k : distinct)
            if (state.probe(k).kind != ProbeResult::Kind::exact)
                missing.push_back(k);
        if (!missing.empty())
            assign_order_codes(state, missing);
        for (const auto &k : distinct)
            codes.emplace(k, state.probe(k).code);

        std::stable_sort(all.begin(), all.end(),
                         [](const TaggedRow &a, const TaggedRow &b) {
                             if (a.key != b.key)
                                 return a.key < b.key;
                             if (a.chunk_id != b.chunk_id)
                                 return a.chunk_id < b.chunk_id;
                             return a.row_index < b.row_index;
                         });
    }

    std::vector<CipherRow> merged;
    merged.reserve(all.size());
    for (auto &t : all) {
        CipherRow row;
        row.cells = std::move(t.cells);
        if (have_state) {
            auto [ct_b64, old_code] = split_combined(row.cells[*ope_col_]);
            OrderCode fresh = codes.at(t.key);
            row.cells[*ope_col_] = ct_b64 + "|" + u64_to_string(fresh);
            row.code = fresh;
            (void)old_code;
        }
        merged.push_back(std::move(row));
    }

    uint64_t new_id = 0;
    for (const auto &c : info.chunks)
        new_id = std::max(new_id, c.id + 1);

    std::string csv = serialize_chunk(schema_, merged);
    assert_no_secrets(csv, keys_, schema_);
    NewChunk fresh;
    fresh.id = new_id;
    fresh.epoch = state.epoch();
    fresh.row_count = merged.size();
    fresh.payload_gz = gzip_compress(csv, opts_.gzip_level);

    std::vector<uint64_t> remove;
    for (const auto &c : info.chunks)
        remove.push_back(c.id);
    backend_.swap_chunks(schema_.table, remove, {fresh});

    if (have_state)
        save_ope_state(opts_.state_dir, schema_, keys_, state);
    report.epoch = state.epoch();
    report.new_chunk_id = new_id;
    return report;
}

} // namespace opeq

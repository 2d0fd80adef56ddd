/*
 * Acceptance runner: executes the project's acceptance checklist end to
 * end and prints one PASS/FAIL line per criterion, with the measured
 * numbers each criterion is about (ratios, latencies, counts) as
 * indented info lines. Exits nonzero when any criterion fails.
 *
 * Everything here goes through the public interfaces only; expected
 * values come from independent plaintext computation, never from the
 * encrypted pipeline itself.
 */
#include "opeq/backend_client.hpp"
#include "opeq/backend_server.hpp"
#include "opeq/backend_store.hpp"
#include "opeq/bench.hpp"
#include "opeq/bytes.hpp"
#include "opeq/crypto.hpp"
#include "opeq/csv.hpp"
#include "opeq/errors.hpp"
#include "opeq/genload.hpp"
#include "opeq/gzip.hpp"
#include "opeq/ingest.hpp"
#include "opeq/ope.hpp"
#include "opeq/paillier.hpp"
#include "opeq/query.hpp"
#include "opeq/schema.hpp"

#include "support/plain_engine.hpp"
#include "support/tmpdir.hpp"

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace opeq;
namespace fs = std::filesystem;

namespace {

struct Report {
    std::vector<std::string> fails;
    std::vector<std::string> infos;

    void check(bool ok, const std::string &msg) {
        if (!ok)
            fails.push_back(msg);
    }
    void info(const std::string &msg) { infos.push_back(msg); }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
}

std::string fmt(double v, int prec = 2) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
    return buf;
}

int sgn_i64(int64_t a, int64_t b) { return (a > b) - (a < b); }
int sgn_u64(uint64_t a, uint64_t b) { return (a > b) - (a < b); }

// ---- shared fixtures ----

// Parses a plaintext CSV load and returns its rows exactly as the ingest
// proxy uploads them: canonicalized, in schema column order, sorted by
// the ordered column's comparison key (input order on ties).
std::vector<std::vector<std::string>>
plain_rows_in_upload_order(const Schema &schema, const std::string &csv_text) {
    auto records = csv_parse(csv_text);
    if (records.empty())
        throw DataError("load text has no header");
    std::vector<size_t> to_schema;
    for (const auto &name : records[0])
        to_schema.push_back(schema.index_of(name));

    std::vector<std::vector<std::string>> rows;
    rows.reserve(records.size() - 1);
    for (size_t r = 1; r < records.size(); ++r) {
        std::vector<std::string> row(schema.columns.size());
        for (size_t i = 0; i < records[r].size(); ++i) {
            size_t col = to_schema[i];
            row[col] = canonicalize_cell(schema.columns[col], records[r][i]);
        }
        rows.push_back(std::move(row));
    }

    if (auto ope = schema.ope_column()) {
        const ColumnSpec &spec = schema.columns[*ope];
        std::stable_sort(rows.begin(), rows.end(),
                         [&](const auto &a, const auto &b) {
                             return comparison_key(spec, a[*ope]) <
                                    comparison_key(spec, b[*ope]);
                         });
    }
    return rows;
}

// Maps a plaintext cell to what the query client hands back for its
// column: pseudonyms and search words stay tokens, everything else
// decrypts to the plaintext.
std::string expected_cell(const Keyset &keys, const Schema &schema,
                          const ColumnSpec &spec, const std::string &plain) {
    if (spec.scheme == Scheme::pseudonym) {
        ColumnKey k = keys.require_column_key(schema.table, spec.name,
                                              spec.scheme);
        return to_base64(pseudonym(k, plain));
    }
    if (spec.scheme == Scheme::searchwords) {
        ColumnKey k = keys.require_column_key(schema.table, spec.name,
                                              spec.scheme);
        std::string joined;
        for (const auto &tok : searchwords(k, plain)) {
            if (!joined.empty())
                joined += ' ';
            joined += to_base64(tok);
        }
        return joined;
    }
    return plain;
}

// Runs `nplans` randomly generated queries through the encrypted
// pipeline and through the plaintext reference engine, appending any
// result mismatch to the report. The generator draws literals from the
// live table so hits, misses, gap probes and duplicates all occur.
void run_plan_battery(Report &rep, Backend &be, const Keyset &keys,
                      const Schema &schema, const std::string &state_dir,
                      const testsupport::PlainEngine &engine, uint64_t seed,
                      int nplans) {
    std::mt19937_64 rng(seed);
    auto below = [&](uint64_t n) { return n ? rng() % n : 0; };
    const auto &rows = engine.rows();
    const size_t pan_i = schema.index_of("pan");
    const size_t cat_i = schema.index_of("category");
    const size_t hold_i = schema.index_of("holder");
    const size_t memo_i = schema.index_of("memo");

    auto esc = [](const std::string &s) {
        std::string out;
        for (char c : s) {
            out += c;
            if (c == '\'')
                out += '\'';
        }
        return out;
    };

    QueryClient qc(be, keys, schema, state_dir);
    int mismatches = 0;
    auto flag = [&](const std::string &sql, const std::string &why) {
        if (++mismatches <= 3)
            rep.fails.push_back("plan \"" + sql + "\": " + why);
    };

    for (int q = 0; q < nplans; ++q) {
        bool is_sum = below(5) == 0;
        std::vector<std::string> preds;
        int npred = int(below(4));
        for (int p = 0; p < npred; ++p) {
            switch (below(4)) {
            case 0: {
                const char *ops[] = {"<", "<=", ">", ">="};
                std::string lit;
                uint64_t mode = below(8);
                if (mode < 4 && !rows.empty())
                    lit = rows[below(rows.size())][pan_i];
                else if (mode == 4)
                    lit = std::to_string(int64_t(below(1000)));
                else if (mode == 5)
                    lit = std::to_string(
                        int64_t(10000000000000000ull + below(1000)));
                else
                    lit = std::to_string(
                        int64_t(1000000000000000ull + below(9000000000000000ull)));
                preds.push_back("pan " + std::string(ops[below(4)]) + " " + lit);
                break;
            }
            case 1: {
                std::string lit = "nothing";
                if (below(8) != 0 && !rows.empty())
                    lit = rows[below(rows.size())][cat_i];
                preds.push_back("category = '" + esc(lit) + "'");
                break;
            }
            case 2: {
                std::string lit = "user_none";
                if (below(8) != 0 && !rows.empty())
                    lit = rows[below(rows.size())][hold_i];
                preds.push_back("holder = '" + esc(lit) + "'");
                break;
            }
            default: {
                std::string lit = "zzz";
                if (below(8) != 0 && !rows.empty()) {
                    auto words =
                        split_searchwords(rows[below(rows.size())][memo_i]);
                    if (!words.empty())
                        lit = words[below(words.size())];
                }
                preds.push_back("memo contains '" + esc(lit) + "'");
                break;
            }
            }
        }

        std::string sql = "select ";
        std::vector<std::string> sel;
        if (is_sum) {
            sql += "sum(balance)";
        } else {
            std::vector<std::string> names;
            for (const auto &col : schema.columns)
                names.push_back(col.name);
            std::shuffle(names.begin(), names.end(), rng);
            names.resize(1 + below(names.size()));
            sel = names;
            for (size_t i = 0; i < sel.size(); ++i)
                sql += (i ? ", " : "") + sel[i];
        }
        sql += " from " + schema.table;
        for (size_t i = 0; i < preds.size(); ++i)
            sql += (i ? " and " : " where ") + preds[i];
        if (!is_sum && below(2))
            sql += below(2) ? " order by pan desc" : " order by pan asc";
        if (!is_sum && below(2))
            sql += " limit " + std::to_string(below(40));

        QueryPlan plan = parse_query(sql, schema);
        QueryResult got = qc.run(sql);
        testsupport::PlainEngine::Output want = engine.run(plan);

        if (got.matched != want.matched) {
            flag(sql, "matched " + std::to_string(got.matched) + ", expected " +
                          std::to_string(want.matched));
            continue;
        }
        if (is_sum) {
            if (!got.sum_value || !want.sum || *got.sum_value != *want.sum)
                flag(sql, "sum " + (got.sum_value ? *got.sum_value : "?") +
                              ", expected " + (want.sum ? *want.sum : "?"));
            continue;
        }
        if (got.rows.size() != want.rows.size()) {
            flag(sql, std::to_string(got.rows.size()) + " rows, expected " +
                          std::to_string(want.rows.size()));
            continue;
        }
        bool row_bad = false;
        for (size_t r = 0; r < want.rows.size() && !row_bad; ++r) {
            for (size_t c = 0; c < sel.size() && !row_bad; ++c) {
                std::string exp = expected_cell(
                    keys, schema, schema.column(sel[c]), want.rows[r][c]);
                if (got.rows[r][c] != exp) {
                    flag(sql, "row " + std::to_string(r) + " column '" +
                                  sel[c] + "' is '" + got.rows[r][c] +
                                  "', expected '" + exp + "'");
                    row_bad = true;
                }
            }
        }
    }
    if (mismatches > 3)
        rep.fails.push_back(std::to_string(mismatches) + " of " +
                            std::to_string(nplans) + " plans mismatched");
    rep.info(std::to_string(nplans) + " random plans, " +
             std::to_string(mismatches) + " mismatches");
}

// ---- criteria ----

void c1_order_codes(Report &rep) {
    auto t0 = std::chrono::steady_clock::now();

    // ten thousand 16-digit values, roughly one duplicate in ten,
    // inserted in generated (random) order
    std::vector<int64_t> vals = demo_pans(10000, 11);
    OpeState st = OpeState::make(KeyType::integer);
    std::vector<OrderCode> codes(vals.size());
    for (size_t i = 0; i < vals.size(); ++i)
        codes[i] = st.encode_insert(order_bytes_from_int64(vals[i]));

    std::mt19937_64 rng(12);
    size_t bad = 0;
    for (int k = 0; k < 100000; ++k) {
        size_t i = rng() % vals.size(), j = rng() % vals.size();
        if (sgn_i64(vals[i], vals[j]) != sgn_u64(codes[i], codes[j]))
            ++bad;
    }
    rep.check(bad == 0, std::to_string(bad) +
                            " of 100000 random pairs ordered wrong");

    // exhaustive all-pairs on a fresh 500-value dictionary
    std::vector<int64_t> small = demo_pans(500, 13);
    OpeState st2 = OpeState::make(KeyType::integer);
    std::vector<OrderCode> codes2(small.size());
    for (size_t i = 0; i < small.size(); ++i)
        codes2[i] = st2.encode_insert(order_bytes_from_int64(small[i]));
    size_t bad2 = 0;
    for (size_t i = 0; i < small.size(); ++i)
        for (size_t j = i + 1; j < small.size(); ++j)
            if (sgn_i64(small[i], small[j]) != sgn_u64(codes2[i], codes2[j]))
                ++bad2;
    rep.check(bad2 == 0,
              std::to_string(bad2) + " exhaustive pairs ordered wrong");

    double secs = seconds_since(t0);
    rep.check(secs < 10.0, "took " + fmt(secs) + "s, limit is 10s");
    rep.info("10000 inserts + 100000 sampled pairs + 124750 exhaustive pairs "
             "in " +
             fmt(secs) + "s");
}

void c2_query_equivalence(Report &rep) {
    std::ostringstream gen;
    write_demo_csv(gen, 1000, 17);
    std::string text = gen.str();

    opeq::test::TmpDir state("acc_c2");
    StorageBackend be;
    Keyset keys = Keyset::generate(512);
    Schema schema = demo_schema();
    IngestProxy proxy(be, keys, schema, {state.str(), 250, 6});
    std::istringstream in(text);
    LoadReport report = proxy.load(in, InputFormat::csv);
    rep.check(report.chunk_ids.size() == 4,
              "expected 4 chunks, got " +
                  std::to_string(report.chunk_ids.size()));

    testsupport::PlainEngine engine(schema);
    engine.add_rows(plain_rows_in_upload_order(schema, text));

    run_plan_battery(rep, be, keys, schema, state.str(), engine, 19, 200);
}

void c3_homomorphic_sums(Report &rep) {
    auto t0 = std::chrono::steady_clock::now();

    // small-parameter sanity: Enc(2) * Enc(3) decrypts to 5
    PaillierKeypair toy = PaillierKeypair::from_primes(5, 7);
    mpz_class combined = toy.pub.add(toy.pub.encrypt(2), toy.pub.encrypt(3));
    rep.check(toy.decrypt(combined) == 5,
              "toy key: Enc(2)*Enc(3) did not decrypt to 5");

    // a thousand values under a real key, summed per chunk on the
    // "server" side and combined client-side
    PaillierKeypair kp = PaillierKeypair::generate(512);
    std::mt19937_64 rng(21);
    uint64_t plain_sum = 0;
    std::vector<mpz_class> chunk_sums;
    const size_t chunks = 10, per_chunk = 100;
    for (size_t c = 0; c < chunks; ++c) {
        mpz_class acc = 1; // multiplicative identity = encrypted zero
        for (size_t i = 0; i < per_chunk; ++i) {
            uint64_t v = rng() % 1000000;
            plain_sum += v;
            acc = kp.pub.add(acc, kp.pub.encrypt(mpz_class(
                                      static_cast<unsigned long>(v))));
        }
        chunk_sums.push_back(acc);
    }
    mpz_class total_ct = 1;
    for (const auto &c : chunk_sums)
        total_ct = kp.pub.add(total_ct, c);
    mpz_class total = kp.decrypt(total_ct);
    rep.check(total == mpz_class(static_cast<unsigned long>(plain_sum)),
              "combined sum " + total.get_str() + ", expected " +
                  std::to_string(plain_sum));

    double secs = seconds_since(t0);
    rep.check(secs < 10.0, "took " + fmt(secs) + "s, limit is 10s");
    rep.info("1000 encryptions over " + std::to_string(chunks) +
             " chunks in " + fmt(secs) + "s, sum " +
             std::to_string(plain_sum));
}

void c4_encrypt_linearity(Report &rep) {
    std::vector<BenchPoint> pts = bench_encrypt({10000, 100000, 1000000}, 31);
    for (size_t i = 0; i + 1 < pts.size(); ++i) {
        double tr = pts[i + 1].seconds / pts[i].seconds;
        double br = double(pts[i + 1].plain_bytes) / double(pts[i].plain_bytes);
        rep.check(tr >= 7.0 && tr <= 13.0,
                  "time ratio " + fmt(tr) + " between " +
                      std::to_string(pts[i].rows) + " and " +
                      std::to_string(pts[i + 1].rows) +
                      " rows is outside [7, 13]");
        rep.check(br >= 9.5 && br <= 10.5,
                  "size ratio " + fmt(br) + " between " +
                      std::to_string(pts[i].rows) + " and " +
                      std::to_string(pts[i + 1].rows) +
                      " rows is outside [9.5, 10.5]");
        rep.info("rows x10 (" + std::to_string(pts[i].rows) + " -> " +
                 std::to_string(pts[i + 1].rows) + "): time x" + fmt(tr) +
                 " (" + fmt(pts[i].seconds, 3) + "s -> " +
                 fmt(pts[i + 1].seconds, 3) + "s), plaintext x" + fmt(br));
    }
}

void c5_collision_and_reencode(Report &rep) {
    opeq::test::TmpDir state("acc_c5");
    StorageBackend be;
    Keyset keys = Keyset::generate(512);
    Schema schema = demo_schema();
    IngestProxy proxy(be, keys, schema, {state.str(), 50, 6});
    const ColumnSpec &pan_spec = schema.columns[*schema.ope_column()];

    std::ostringstream gen;
    write_demo_csv(gen, 100, 41);
    std::string base_text = gen.str();
    {
        std::istringstream in(base_text);
        proxy.load(in, InputFormat::csv);
    }
    std::vector<std::vector<std::string>> ledger =
        plain_rows_in_upload_order(schema, base_text);

    int64_t base = 0;
    for (const auto &row : ledger) {
        int64_t pan = std::stoll(row[0]);
        if (base == 0 || pan < base)
            base = pan;
    }

    auto one_row_csv = [&](int64_t pan, int k) {
        return "pan,holder,memo,balance,category,note,region\n" +
               std::to_string(pan) + ",user_1,pending review," +
               std::to_string(k) + ",fuel,entry " + std::to_string(k) +
               ",north\n";
    };

    // each load inserts one key below everything so far, halving the
    // bottom gap every time
    int collided_at = 0;
    for (int k = 1; k <= 64 && collided_at == 0; ++k) {
        std::string csv = one_row_csv(base - k, k);
        std::istringstream in(csv);
        try {
            proxy.load(in, InputFormat::csv);
            for (auto &row : plain_rows_in_upload_order(schema, csv))
                ledger.push_back(std::move(row));
        } catch (const CollisionError &) {
            collided_at = k;
        }
    }
    rep.check(collided_at > 0,
              "no CollisionError within 64 strictly descending inserts");
    rep.info("gap exhausted after " + std::to_string(collided_at) +
             " descending inserts");
    if (collided_at == 0)
        return;

    GcReport gc = proxy.garbage_collect();
    rep.check(gc.acted, "garbage collection did not act");
    rep.check(gc.reencoded, "garbage collection did not re-encode");
    rep.check(gc.epoch == 1,
              "epoch is " + std::to_string(gc.epoch) + " after re-encode");

    // consolidation rewrote the table into one globally ordered chunk
    std::stable_sort(ledger.begin(), ledger.end(),
                     [&](const auto &a, const auto &b) {
                         return comparison_key(pan_spec, a[0]) <
                                comparison_key(pan_spec, b[0]);
                     });

    // the insert that collided goes through now
    {
        std::string csv = one_row_csv(base - collided_at, collided_at);
        std::istringstream in(csv);
        proxy.load(in, InputFormat::csv);
        for (auto &row : plain_rows_in_upload_order(schema, csv))
            ledger.push_back(std::move(row));
    }

    // the order oracle holds on the re-encoded dictionary
    OpeState st = load_ope_state(state.str(), schema, keys);
    std::set<int64_t> distinct;
    for (const auto &row : ledger)
        distinct.insert(std::stoll(row[0]));
    std::vector<int64_t> pans(distinct.begin(), distinct.end());
    std::vector<OrderCode> codes;
    size_t not_found = 0;
    for (int64_t p : pans) {
        auto probe = st.probe(comparison_key(pan_spec, std::to_string(p)));
        if (probe.kind != ProbeResult::Kind::exact)
            ++not_found;
        codes.push_back(probe.code);
    }
    rep.check(not_found == 0, std::to_string(not_found) +
                                  " table values missing from the dictionary");
    size_t bad = 0;
    for (size_t i = 0; i < pans.size(); ++i)
        for (size_t j = i + 1; j < pans.size(); ++j)
            if (sgn_i64(pans[i], pans[j]) != sgn_u64(codes[i], codes[j]))
                ++bad;
    rep.check(bad == 0, std::to_string(bad) +
                            " pairs ordered wrong after re-encode");

    // and the same table still answers queries correctly
    testsupport::PlainEngine engine(schema);
    engine.add_rows(ledger);
    run_plan_battery(rep, be, keys, schema, state.str(), engine, 43, 200);
}

void c6_compression(Report &rep) {
    opeq::test::TmpDir data("acc_c6_data"), state("acc_c6_state");
    StorageBackend be(data.str());
    Keyset keys = Keyset::generate(512);
    Schema schema = demo_schema();
    IngestProxy proxy(be, keys, schema, {state.str(), 500, 6});
    std::ostringstream gen;
    write_demo_csv(gen, 2000, 53);
    std::istringstream in(gen.str());
    proxy.load(in, InputFormat::csv);

    uint64_t gz_total = 0, raw_total = 0;
    size_t chunk_files = 0;
    for (const auto &entry : fs::recursive_directory_iterator(data.str())) {
        if (!entry.is_regular_file() ||
            entry.path().extension() != ".gz")
            continue;
        ++chunk_files;
        std::ifstream f(entry.path(), std::ios::binary);
        std::ostringstream ss;
        ss << f.rdbuf();
        std::string gz = ss.str();
        std::string raw = gzip_decompress(gz);
        rep.check(gz.size() < raw.size(),
                  entry.path().filename().string() + " did not shrink (" +
                      std::to_string(gz.size()) + " vs " +
                      std::to_string(raw.size()) + ")");
        gz_total += gz.size();
        raw_total += raw.size();
    }
    rep.check(chunk_files == 4, "expected 4 stored chunk files, found " +
                                    std::to_string(chunk_files));
    if (raw_total > 0)
        rep.info("stored " + std::to_string(gz_total) + " of " +
                 std::to_string(raw_total) + " payload bytes, ratio " +
                 fmt(double(gz_total) / double(raw_total), 3));
}

void c7_million_row_latency(Report &rep) {
    Schema schema = Schema::parse(R"({"table":"big","columns":[
        {"name":"pan","type":"integer","encrypt":"order_preserving"},
        {"name":"region","type":"text"}]})");

    const size_t n = 1000000;
    std::vector<int64_t> pans = demo_pans(n, 61);
    const char *regions[] = {"north", "south", "east", "west"};
    std::string text;
    text.reserve(n * 26 + 16);
    text += "pan,region\n";
    for (size_t i = 0; i < n; ++i) {
        text += std::to_string(pans[i]);
        text += ',';
        text += regions[i % 4];
        text += '\n';
    }

    opeq::test::TmpDir state("acc_c7");
    StorageBackend be;
    Keyset keys = Keyset::generate(512);
    IngestProxy proxy(be, keys, schema, {state.str(), 100000, 6});
    auto load0 = std::chrono::steady_clock::now();
    {
        std::istringstream in(text);
        proxy.load(in, InputFormat::csv);
    }
    double load_secs = seconds_since(load0);

    // range bound at the 90th percentile, expected hits counted in plain
    std::vector<int64_t> sorted = pans;
    std::nth_element(sorted.begin(), sorted.begin() + ptrdiff_t(n * 9 / 10),
                     sorted.end());
    int64_t bound = sorted[n * 9 / 10];
    uint64_t expect_matched = 0;
    for (int64_t p : pans)
        if (p >= bound)
            ++expect_matched;

    QueryClient qc(be, keys, schema, state.str());
    std::string sql = "select pan, region from big where pan >= " +
                      std::to_string(bound) + " order by pan desc limit 100";
    auto t0 = std::chrono::steady_clock::now();
    QueryResult r = qc.run(sql);
    double secs = seconds_since(t0);

    rep.check(r.rows.size() == 100,
              "got " + std::to_string(r.rows.size()) + " rows, expected 100");
    rep.check(r.matched == expect_matched,
              "matched " + std::to_string(r.matched) + ", expected " +
                  std::to_string(expect_matched));
    for (size_t i = 0; i + 1 < r.rows.size(); ++i)
        if (std::stoll(r.rows[i][0]) < std::stoll(r.rows[i + 1][0])) {
            rep.fails.push_back("results are not in descending order at row " +
                                std::to_string(i));
            break;
        }
    rep.check(secs < 10.0,
              "query took " + fmt(secs) + "s, limit is 10s");
    rep.info("1000000 rows in 10 chunks: load " + fmt(load_secs) +
             "s, range+order+limit query " + fmt(secs) + "s, matched " +
             std::to_string(r.matched));
}

void c8_key_blindness(Report &rep) {
    opeq::test::TmpDir data("acc_c8_data"), state("acc_c8_state");
    StorageBackend store(data.str());
    BackendServer server(store, 0);
    server.start();

    Keyset keys = Keyset::generate(512);
    Schema schema = demo_schema();
    auto transcript = std::make_shared<std::vector<std::string>>();
    {
        RemoteBackend remote("127.0.0.1", server.port());
        remote.set_transcript(transcript);

        IngestProxy proxy(remote, keys, schema, {state.str(), 100, 6});
        std::ostringstream gen;
        write_demo_csv(gen, 300, 71);
        std::istringstream in(gen.str());
        proxy.load(in, InputFormat::csv);

        QueryClient qc(remote, keys, schema, state.str());
        qc.run("select pan, region from cc where category = 'fuel'");
        qc.run("select pan from cc where pan >= 5000000000000000 "
               "order by pan desc limit 10");
        qc.run("select note from cc where memo contains 'travel'");
        qc.run("select sum(balance) from cc where holder = 'user_3'");
        proxy.garbage_collect(); // swaps chunks over the wire too
        qc.run("select pan from cc limit 5");
    }
    server.stop();

    // every secret the keyset holds, raw and in the encodings the system
    // writes anywhere (the additive modulus is deliberately public: the
    // backend multiplies ciphertexts with it)
    std::vector<std::pair<std::string, std::string>> secrets;
    secrets.emplace_back("master key", keys.master_key());
    secrets.emplace_back("master key b64", to_base64(keys.master_key()));
    for (const auto &col : schema.columns) {
        if (col.scheme == Scheme::none)
            continue;
        auto k = keys.column_key(schema.table, col.name, col.scheme);
        secrets.emplace_back(col.name + " key", k->bytes);
        secrets.emplace_back(col.name + " key b64", to_base64(k->bytes));
    }
    secrets.emplace_back("paillier lambda",
                         keys.paillier_private().lambda.get_str());
    secrets.emplace_back("paillier mu", keys.paillier_private().mu.get_str());

    size_t matches = 0, blobs = 0;
    auto scan = [&](const std::string &blob, const std::string &where) {
        ++blobs;
        for (const auto &[label, needle] : secrets)
            if (blob.find(needle) != std::string::npos) {
                ++matches;
                rep.fails.push_back(label + " found in " + where);
            }
    };

    size_t files = 0;
    for (const auto &entry : fs::recursive_directory_iterator(data.str())) {
        if (!entry.is_regular_file())
            continue;
        ++files;
        std::ifstream f(entry.path(), std::ios::binary);
        std::ostringstream ss;
        ss << f.rdbuf();
        std::string bytes = ss.str();
        scan(bytes, entry.path().filename().string());
        if (bytes.size() > 2 && uint8_t(bytes[0]) == 0x1f &&
            uint8_t(bytes[1]) == 0x8b)
            scan(gzip_decompress(bytes),
                 entry.path().filename().string() + " (decompressed)");
    }
    for (size_t i = 0; i < transcript->size(); ++i)
        scan((*transcript)[i], "wire frame " + std::to_string(i));

    rep.check(files >= 2, "backend persisted too few files to scan");
    rep.check(transcript->size() >= 10, "wire transcript looks empty");
    rep.info("scanned " + std::to_string(blobs) + " blobs (" +
             std::to_string(files) + " files, " +
             std::to_string(transcript->size()) + " wire frames) against " +
             std::to_string(secrets.size()) + " secrets: " +
             std::to_string(matches) + " matches");
}

void c9_round_trips(Report &rep) {
    Keyset keys = Keyset::generate(512);
    std::mt19937_64 rng(81);
    auto below = [&](uint64_t n) { return n ? rng() % n : 0; };
    auto random_blob = [&](size_t maxlen) {
        std::string s(below(maxlen + 1), '\0');
        for (auto &ch : s)
            ch = char(below(256));
        return s;
    };

    // every scheme's encrypt/decrypt identity over a thousand inputs
    ColumnKey det = keys.require_column_key("rt", "d", Scheme::deterministic);
    ColumnKey prob = keys.require_column_key("rt", "p", Scheme::probabilistic);
    ColumnKey pseu = keys.require_column_key("rt", "n", Scheme::pseudonym);
    ColumnKey sw = keys.require_column_key("rt", "w", Scheme::searchwords);
    ColumnKey opk =
        keys.require_column_key("rt", "o", Scheme::order_preserving);

    size_t det_bad = 0, prob_bad = 0, pseu_bad = 0, sw_bad = 0, ope_bad = 0;
    std::set<std::string> pseu_in, pseu_out;
    for (int i = 0; i < 1000; ++i) {
        std::string s = random_blob(64);
        if (det_decrypt(det, det_encrypt(det, s)) != s)
            ++det_bad;
        if (prob_decrypt(prob, prob_encrypt(prob, s)) != s)
            ++prob_bad;
        if (pseudonym(pseu, s) != pseudonym(pseu, s))
            ++pseu_bad;
        pseu_in.insert(s);
        pseu_out.insert(pseudonym(pseu, s));

        std::string words;
        int nwords = 1 + int(below(5));
        for (int w = 0; w < nwords; ++w) {
            if (w)
                words += (below(2) ? " " : "\t");
            for (int c = 0; c < 1 + int(below(8)); ++c)
                words += char('a' + below(26));
        }
        auto toks = searchwords(sw, words);
        auto split = split_searchwords(words);
        if (toks.size() != split.size())
            ++sw_bad;
        else
            for (size_t w = 0; w < split.size(); ++w)
                if (toks[w] != hmac_sha256(sw.bytes, split[w]))
                    ++sw_bad;

        std::string num = std::to_string(int64_t(rng()));
        if (det_decrypt(opk, det_encrypt(opk, num)) != num)
            ++ope_bad;
    }
    rep.check(det_bad == 0, std::to_string(det_bad) +
                                " deterministic round trips failed");
    rep.check(prob_bad == 0, std::to_string(prob_bad) +
                                 " probabilistic round trips failed");
    rep.check(pseu_bad == 0,
              std::to_string(pseu_bad) + " pseudonym mappings were unstable");
    rep.check(pseu_in.size() == pseu_out.size(),
              "distinct inputs collided to the same pseudonym token");
    rep.check(sw_bad == 0,
              std::to_string(sw_bad) + " search word token sets were wrong");
    rep.check(ope_bad == 0, std::to_string(ope_bad) +
                                " ordered-cell round trips failed");
    rep.check(prob_encrypt(prob, "same input") !=
                  prob_encrypt(prob, "same input"),
              "probabilistic encryption repeated a ciphertext");

    // additive scheme round trip under a real key
    PaillierKeypair kp = PaillierKeypair::generate(512);
    size_t hom_bad = 0;
    for (int i = 0; i < 1000; ++i) {
        mpz_class m(static_cast<unsigned long>(rng()));
        if (kp.decrypt(kp.pub.encrypt(m)) != m)
            ++hom_bad;
    }
    if (kp.decrypt(kp.pub.encrypt(0)) != 0)
        ++hom_bad;
    mpz_class top = kp.pub.n - 1;
    if (kp.decrypt(kp.pub.encrypt(top)) != top)
        ++hom_bad;
    rep.check(hom_bad == 0,
              std::to_string(hom_bad) + " additive round trips failed");

    // schema serialization round trips
    Schema s1 = demo_schema();
    rep.check(Schema::parse(s1.to_json()).to_json() == s1.to_json(),
              "demo schema did not survive serialization");
    Schema s2 = Schema::parse(R"x({"table":"t2","columns":[
        {"name":"a","type":"decimal(4)","encrypt":"order_preserving"},
        {"name":"b","type":"integer","encrypt":"homomorphic"},
        {"name":"c","type":"text","encrypt":"probabilistic"}]})x");
    rep.check(Schema::parse(s2.to_json()).to_json() == s2.to_json(),
              "decimal schema did not survive serialization");

    // dictionary serialization round trip after a re-encode
    OpeState st = OpeState::make(KeyType::integer);
    std::vector<std::string> ks;
    for (int i = 0; i < 1000; ++i)
        ks.push_back(order_bytes_from_int64(int64_t(rng())));
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    assign_order_codes(st, ks);
    st.reencode();
    OpeState back = OpeState::deserialize(st.serialize(opk), opk);
    rep.check(back.epoch() == st.epoch() && back.size() == st.size() &&
                  back.type() == st.type(),
              "dictionary header changed across serialization");
    std::map<std::string, OrderCode> a, b;
    st.for_each([&](std::string_view k, OrderCode c) { a.emplace(k, c); });
    back.for_each([&](std::string_view k, OrderCode c) { b.emplace(k, c); });
    rep.check(a == b, "dictionary entries changed across serialization");

    // merging pre-sorted chunk results equals one global stable sort
    size_t merge_bad = 0;
    for (int trial = 0; trial < 100; ++trial) {
        bool desc = below(2);
        std::optional<uint64_t> limit;
        if (below(2))
            limit = below(30);
        size_t nchunks = 1 + below(6);
        std::vector<std::vector<ResultRow>> chunks(nchunks);
        struct Tagged {
            uint64_t code;
            size_t chunk;
            uint64_t row;
            std::string tag;
        };
        std::vector<Tagged> all;
        for (size_t c = 0; c < nchunks; ++c) {
            size_t rows = below(41);
            for (uint64_t r = 0; r < rows; ++r) {
                ResultRow row;
                row.code = below(50); // heavy ties on purpose
                row.row_index = r;
                row.cells = {std::to_string(c) + ":" + std::to_string(r)};
                chunks[c].push_back(row);
            }
            // the backend hands back each chunk already sorted the way
            // the plan asked
            std::stable_sort(chunks[c].begin(), chunks[c].end(),
                             [&](const ResultRow &x, const ResultRow &y) {
                                 return desc ? x.code > y.code
                                             : x.code < y.code;
                             });
            for (const auto &row : chunks[c])
                all.push_back({row.code, c, row.row_index, row.cells[0]});
        }
        std::stable_sort(all.begin(), all.end(),
                         [&](const Tagged &x, const Tagged &y) {
                             if (x.code != y.code)
                                 return desc ? x.code > y.code
                                             : x.code < y.code;
                             if (x.chunk != y.chunk)
                                 return x.chunk < y.chunk;
                             return x.row < y.row;
                         });
        if (limit && all.size() > *limit)
            all.resize(*limit);
        auto merged = merge_rows(std::move(chunks), true, desc, limit);
        bool ok = merged.size() == all.size();
        for (size_t i = 0; ok && i < all.size(); ++i)
            ok = merged[i].cells[0] == all[i].tag;
        if (!ok)
            ++merge_bad;
    }
    rep.check(merge_bad == 0, std::to_string(merge_bad) +
                                  " of 100 merge trials diverged from a "
                                  "global sort");
    rep.info("per-scheme identities x1000, additive x1002, 100 merge trials");
}

} // namespace

int main() {
    struct Criterion {
        int id;
        const char *name;
        std::function<void(Report &)> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "order codes sort exactly like the plaintext", c1_order_codes},
        {2, "encrypted queries match a plaintext engine", c2_query_equivalence},
        {3, "homomorphic sums are exact", c3_homomorphic_sums},
        {4, "column encryption scales linearly", c4_encrypt_linearity},
        {5, "gap exhaustion recovers through re-encode",
         c5_collision_and_reencode},
        {6, "chunk payloads shrink under gzip", c6_compression},
        {7, "a million-row range query answers fast", c7_million_row_latency},
        {8, "no key material reaches the backend", c8_key_blindness},
        {9, "schemes, dictionaries, schemas and merges round-trip",
         c9_round_trips},
    };

    int failed = 0;
    for (const auto &c : criteria) {
        Report rep;
        auto t0 = std::chrono::steady_clock::now();
        try {
            c.run(rep);
        } catch (const std::exception &e) {
            rep.fails.push_back(std::string("unhandled exception: ") +
                                e.what());
        }
        double secs = seconds_since(t0);
        std::printf("%s  %d  %-52s (%.2fs)\n",
                    rep.fails.empty() ? "PASS" : "FAIL", c.id, c.name, secs);
        for (const auto &line : rep.infos)
            std::printf("        %s\n", line.c_str());
        for (const auto &line : rep.fails)
            std::printf("      ! %s\n", line.c_str());
        std::fflush(stdout);
        if (!rep.fails.empty())
            ++failed;
    }
    if (failed)
        std::fprintf(stderr, "%d criterion(s) failed\n", failed);
    return failed ? 1 : 0;
}

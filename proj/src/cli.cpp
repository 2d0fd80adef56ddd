#include "opeq/cli.hpp"
#include "opeq/backend_client.hpp"
#include "opeq/backend_server.hpp"
#include "opeq/backend_store.hpp"
#include "opeq/bench.hpp"
#include "opeq/bytes.hpp"
#include "opeq/csv.hpp"
#include "opeq/errors.hpp"
#include "opeq/genload.hpp"
#include "opeq/ingest.hpp"
#include "opeq/query.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <csignal>

#include <charconv>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

using json = nlohmann::ordered_json;

namespace opeq {

namespace {

// Options shared by load, query and gc: where the keys, schema and
// backend live.
struct Context {
    std::string keys_path;
    std::string schema_path;
    std::string state_dir;
    std::string backend_addr;
    bool embedded = false;
    std::string data_dir;
    bool json_out = false;

    void add_to(CLI::App *cmd, bool with_state) {
        cmd->add_option("--keys", keys_path, "keyset file")->required();
        cmd->add_option("--schema", schema_path, "table schema file")->required();
        if (with_state)
            cmd->add_option("--state-dir", state_dir,
                            "directory for dictionaries and load manifests")
                ->required();
        cmd->add_option("--backend", backend_addr,
                        "backend server address, host:port");
        cmd->add_flag("--embedded-backend", embedded,
                      "run the backend in-process");
        cmd->add_option("--data-dir", data_dir,
                        "persistence directory for the embedded backend");
        cmd->add_flag("--json", json_out, "machine-readable output");
    }

    std::unique_ptr<Backend> make_backend() const {
        if (!backend_addr.empty() && embedded)
            throw UsageError("--backend and --embedded-backend are exclusive");
        if (!backend_addr.empty()) {
            if (!data_dir.empty())
                throw UsageError("--data-dir only applies to the embedded "
                                 "backend");
            size_t colon = backend_addr.rfind(':');
            if (colon == std::string::npos || colon + 1 >= backend_addr.size())
                throw UsageError("--backend expects host:port");
            std::string host = backend_addr.substr(0, colon);
            std::string_view port_text =
                std::string_view(backend_addr).substr(colon + 1);
            unsigned port = 0;
            auto [p, ec] = std::from_chars(
                port_text.data(), port_text.data() + port_text.size(), port);
            if (ec != std::errc() || p != port_text.data() + port_text.size() ||
                port == 0 || port > 65535)
                throw UsageError("bad backend port '" +
                                 std::string(port_text) + "'");
            return std::make_unique<RemoteBackend>(host, uint16_t(port));
        }
        if (embedded)
            return std::make_unique<StorageBackend>(
                data_dir.empty() ? std::nullopt
                                 : std::optional<std::string>(data_dir));
        throw UsageError("choose --backend host:port or --embedded-backend");
    }

    Keyset load_keys() const { return Keyset::load_file(keys_path); }
    Schema load_schema() const { return Schema::load_file(schema_path); }
};

json timings_json(const std::vector<PhaseTiming> &timings) {
    json j = json::object();
    for (const auto &t : timings)
        j[t.phase] = t.seconds;
    return j;
}

void print_load_report(const LoadReport &r, bool as_json) {
    if (as_json) {
        json j;
        j["rows"] = r.rows;
        j["chunks"] = r.chunk_ids;
        j["epoch"] = r.epoch;
        j["plain_bytes"] = r.plain_bytes;
        j["compressed_bytes"] = r.compressed_bytes;
        j["timings"] = timings_json(r.timings);
        j["manifest"] = r.manifest_path;
        std::cout << j.dump() << "\n";
        return;
    }
    std::cout << "loaded " << r.rows << " rows in " << r.chunk_ids.size()
              << " chunk(s) at epoch " << r.epoch << "\n";
    if (!r.chunk_ids.empty()) {
        std::cout << "  chunk ids:";
        for (uint64_t id : r.chunk_ids)
            std::cout << " " << id;
        std::cout << "\n";
    }
    std::cout << "  plaintext " << r.plain_bytes << " bytes, uploaded "
              << r.compressed_bytes << " bytes\n";
    for (const auto &t : r.timings)
        std::cout << "  " << std::left << std::setw(8) << t.phase
                  << std::fixed << std::setprecision(3) << t.seconds << "s\n";
    std::cout << "  manifest " << r.manifest_path << "\n";
}

void print_query_result(const QueryResult &r, bool as_json) {
    if (as_json) {
        json j;
        j["columns"] = r.columns;
        j["rows"] = r.rows;
        j["sum"] = r.sum_value ? json(*r.sum_value) : json(nullptr);
        j["matched"] = r.matched;
        j["chunks"] = r.chunks;
        j["fully_decrypted"] = r.fully_decrypted;
        std::cout << j.dump() << "\n";
        return;
    }
    if (r.sum_value) {
        std::cout << r.columns[0] << " = " << *r.sum_value << " (over "
                  << r.matched << " rows)\n";
        return;
    }
    std::string out;
    csv_append_row(out, r.columns);
    for (const auto &row : r.rows)
        csv_append_row(out, row);
    std::cout << out;
    std::cerr << r.rows.size() << " row(s) from " << r.chunks << " chunk(s)";
    if (!r.fully_decrypted)
        std::cerr << "; some cells left encrypted (keyset lacks their keys)";
    std::cerr << "\n";
}

void print_gc_report(const GcReport &r, bool as_json) {
    if (as_json) {
        json j;
        j["acted"] = r.acted;
        j["reencoded"] = r.reencoded;
        j["epoch"] = r.epoch;
        j["chunks_before"] = r.chunks_before;
        j["rows"] = r.rows;
        j["new_chunk"] = r.new_chunk_id ? json(*r.new_chunk_id) : json(nullptr);
        std::cout << j.dump() << "\n";
        return;
    }
    if (!r.acted) {
        std::cout << "nothing to collect (single chunk, no pending re-encode)\n";
        return;
    }
    std::cout << "rewrote " << r.rows << " rows from " << r.chunks_before
              << " chunk(s) into chunk " << *r.new_chunk_id << " at epoch "
              << r.epoch;
    if (r.reencoded)
        std::cout << " (order codes re-encoded)";
    std::cout << "\n";
}

void print_bench(const std::vector<BenchPoint> &points, bool as_json) {
    if (as_json) {
        json arr = json::array();
        for (const auto &p : points) {
            json j;
            j["rows"] = p.rows;
            j["seconds"] = p.seconds;
            j["plain_bytes"] = p.plain_bytes;
            j["cipher_bytes"] = p.cipher_bytes;
            arr.push_back(j);
        }
        std::cout << json{{"points", arr}}.dump() << "\n";
        return;
    }
    std::cout << std::left << std::setw(12) << "rows" << std::setw(12)
              << "seconds" << std::setw(16) << "plain bytes" << std::setw(16)
              << "cipher bytes" << "\n";
    const BenchPoint *prev = nullptr;
    for (const auto &p : points) {
        std::cout << std::left << std::setw(12) << p.rows << std::setw(12)
                  << std::fixed << std::setprecision(4) << p.seconds
                  << std::setw(16) << p.plain_bytes << std::setw(16)
                  << p.cipher_bytes << "\n";
        if (prev) {
            std::cout << "  x" << std::setprecision(1)
                      << double(p.rows) / double(prev->rows) << " rows -> x"
                      << p.seconds / prev->seconds << " time, x"
                      << double(p.plain_bytes) / double(prev->plain_bytes)
                      << " bytes\n";
        }
        prev = &p;
    }
}

std::vector<uint64_t> parse_sizes(const std::string &text) {
    std::vector<uint64_t> sizes;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (part.empty())
            continue;
        sizes.push_back(u64_from_string(part));
    }
    if (sizes.empty())
        throw UsageError("--sizes lists comma-separated row counts");
    return sizes;
}

int run_serve(uint16_t port, const std::string &data_dir) {
    // block the shutdown signals before threads spawn so they inherit
    // the mask and sigwait below is the only consumer
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    StorageBackend store(data_dir.empty()
                             ? std::nullopt
                             : std::optional<std::string>(data_dir));
    BackendServer server(store, port);
    server.start();
    std::cout << "listening on 127.0.0.1:" << server.port() << "\n"
              << std::flush;
    int sig = 0;
    sigwait(&set, &sig);
    std::cout << "shutting down\n";
    server.stop();
    return 0;
}

} // namespace

int cli_main(int argc, char **argv) {
    CLI::App app{"order-preserving encrypted tables on an untrusted store"};
    app.require_subcommand(1);

    // keygen
    auto keygen_keys = std::make_shared<std::string>();
    auto keygen_bits = std::make_shared<int>(512);
    auto keygen_force = std::make_shared<bool>(false);
    auto keygen_json = std::make_shared<bool>(false);
    {
        CLI::App *cmd = app.add_subcommand("keygen", "create a keyset file");
        cmd->add_option("--keys", *keygen_keys, "output keyset file")->required();
        cmd->add_option("--paillier-bits", *keygen_bits,
                        "modulus size for the additive scheme");
        cmd->add_flag("--force", *keygen_force, "overwrite an existing file");
        cmd->add_flag("--json", *keygen_json, "machine-readable output");
        cmd->callback([=] {
            Keyset ks = Keyset::generate(*keygen_bits);
            ks.save_file(*keygen_keys, *keygen_force);
            if (*keygen_json)
                std::cout << json{{"keyset", *keygen_keys},
                                  {"paillier_bits", *keygen_bits}}
                                 .dump()
                          << "\n";
            else
                std::cout << "wrote keyset " << *keygen_keys << "\n";
        });
    }

    // genload
    auto gen_rows = std::make_shared<uint64_t>(0);
    auto gen_seed = std::make_shared<uint64_t>(1);
    auto gen_out = std::make_shared<std::string>("-");
    auto gen_schema_out = std::make_shared<std::string>();
    {
        CLI::App *cmd =
            app.add_subcommand("genload", "write a deterministic demo load file");
        cmd->add_option("--rows", *gen_rows, "row count")->required();
        cmd->add_option("--seed", *gen_seed, "generator seed");
        cmd->add_option("--out", *gen_out, "output file, '-' for stdout");
        cmd->add_option("--schema-out", *gen_schema_out,
                        "also write the matching schema here");
        cmd->callback([=] {
            if (!gen_schema_out->empty()) {
                std::ofstream out(*gen_schema_out,
                                  std::ios::binary | std::ios::trunc);
                if (!out)
                    throw IoError("cannot write '" + *gen_schema_out + "'");
                out << demo_schema().to_json() << "\n";
            }
            if (*gen_out == "-") {
                write_demo_csv(std::cout, *gen_rows, *gen_seed);
            } else {
                std::ofstream out(*gen_out, std::ios::binary | std::ios::trunc);
                if (!out)
                    throw IoError("cannot write '" + *gen_out + "'");
                write_demo_csv(out, *gen_rows, *gen_seed);
            }
        });
    }

    // load
    auto load_ctx = std::make_shared<Context>();
    auto load_input = std::make_shared<std::string>();
    auto load_format = std::make_shared<std::string>("csv");
    auto load_chunk = std::make_shared<uint64_t>(100000);
    {
        CLI::App *cmd =
            app.add_subcommand("load", "encrypt and upload a plaintext file");
        load_ctx->add_to(cmd, true);
        cmd->add_option("--format", *load_format, "csv or ndjson");
        cmd->add_option("--chunk-size", *load_chunk, "rows per uploaded chunk");
        cmd->add_option("input", *load_input, "load file, '-' for stdin")
            ->required();
        cmd->callback([=] {
            Keyset keys = load_ctx->load_keys();
            Schema schema = load_ctx->load_schema();
            auto backend = load_ctx->make_backend();
            IngestOptions opts;
            opts.state_dir = load_ctx->state_dir;
            opts.chunk_size = *load_chunk;
            IngestProxy proxy(*backend, keys, schema, opts);
            InputFormat fmt = input_format_from_name(*load_format);
            LoadReport report;
            if (*load_input == "-") {
                report = proxy.load(std::cin, fmt);
            } else {
                std::ifstream in(*load_input, std::ios::binary);
                if (!in)
                    throw IoError("cannot open load file '" + *load_input + "'");
                report = proxy.load(in, fmt);
            }
            print_load_report(report, load_ctx->json_out);
        });
    }

    // query
    auto query_ctx = std::make_shared<Context>();
    auto query_sql = std::make_shared<std::string>();
    {
        CLI::App *cmd =
            app.add_subcommand("query", "run a query against the backend");
        query_ctx->add_to(cmd, true);
        cmd->add_option("sql", *query_sql, "query text")->required();
        cmd->callback([=] {
            Keyset keys = query_ctx->load_keys();
            Schema schema = query_ctx->load_schema();
            auto backend = query_ctx->make_backend();
            QueryClient client(*backend, keys, schema, query_ctx->state_dir);
            print_query_result(client.run(*query_sql), query_ctx->json_out);
        });
    }

    // gc
    auto gc_ctx = std::make_shared<Context>();
    {
        CLI::App *cmd = app.add_subcommand(
            "gc", "consolidate chunks and re-encode order codes");
        gc_ctx->add_to(cmd, true);
        cmd->callback([=] {
            Keyset keys = gc_ctx->load_keys();
            Schema schema = gc_ctx->load_schema();
            auto backend = gc_ctx->make_backend();
            IngestOptions opts;
            opts.state_dir = gc_ctx->state_dir;
            IngestProxy proxy(*backend, keys, schema, opts);
            print_gc_report(proxy.garbage_collect(), gc_ctx->json_out);
        });
    }

    // bench encrypt
    auto bench_sizes = std::make_shared<std::string>("10000,100000,1000000");
    auto bench_seed = std::make_shared<uint64_t>(1);
    auto bench_json = std::make_shared<bool>(false);
    {
        CLI::App *bench = app.add_subcommand("bench", "performance measurements");
        bench->require_subcommand(1);
        CLI::App *cmd = bench->add_subcommand(
            "encrypt", "time order-preserving column preparation");
        cmd->add_option("--sizes", *bench_sizes, "comma-separated row counts");
        cmd->add_option("--seed", *bench_seed, "generator seed");
        cmd->add_flag("--json", *bench_json, "machine-readable output");
        cmd->callback([=] {
            print_bench(bench_encrypt(parse_sizes(*bench_sizes), *bench_seed),
                        *bench_json);
        });
    }

    // serve
    auto serve_port = std::make_shared<uint16_t>(7761);
    auto serve_data = std::make_shared<std::string>();
    {
        CLI::App *cmd =
            app.add_subcommand("serve", "run the backend server in the foreground");
        cmd->add_option("--port", *serve_port, "TCP port, 0 for ephemeral");
        cmd->add_option("--data-dir", *serve_data, "persistence directory");
        cmd->callback([=] { run_serve(*serve_port, *serve_data); });
    }

    try {
        app.parse(argc, argv);
        return 0;
    } catch (const CLI::ParseError &e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : int(ExitCode::usage);
    } catch (const Error &e) {
        std::cerr << "error: " << e.what() << "\n";
        return int(e.exit_code());
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return int(ExitCode::internal);
    }
}

} // namespace opeq

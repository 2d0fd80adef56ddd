#include "opeq/backend_wire.hpp"
#include "opeq/bytes.hpp"

#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

using json = nlohmann::ordered_json;

namespace opeq::wire {

json meta_to_json(const TableMeta &meta) {
    json j;
    j["name"] = meta.name;
    json cols = json::array();
    for (const auto &c : meta.columns) {
        json cj;
        cj["name"] = c.name;
        cj["kind"] = backend_kind_name(c.kind);
        cols.push_back(cj);
    }
    j["columns"] = cols;
    j["paillier_n"] = meta.paillier_n;
    return j;
}

TableMeta meta_from_json(const nlohmann::json &j) {
    TableMeta meta;
    meta.name = j.at("name").get<std::string>();
    for (const auto &cj : j.at("columns")) {
        BackendColumn c;
        c.name = cj.at("name").get<std::string>();
        c.kind = backend_kind_from_name(cj.at("kind").get<std::string>());
        meta.columns.push_back(std::move(c));
    }
    meta.paillier_n = j.at("paillier_n").get<std::string>();
    return meta;
}

json chunk_to_json(const NewChunk &chunk) {
    json j;
    j["id"] = chunk.id;
    j["epoch"] = chunk.epoch;
    j["rows"] = chunk.row_count;
    j["payload"] = to_base64(chunk.payload_gz);
    return j;
}

NewChunk chunk_from_json(const nlohmann::json &j) {
    NewChunk c;
    c.id = j.at("id").get<uint64_t>();
    c.epoch = j.at("epoch").get<uint64_t>();
    c.row_count = j.at("rows").get<uint64_t>();
    c.payload_gz = from_base64(j.at("payload").get<std::string>());
    return c;
}

json info_to_json(const TableInfo &info) {
    json j;
    j["meta"] = meta_to_json(info.meta);
    json chunks = json::array();
    for (const auto &c : info.chunks) {
        json cj;
        cj["id"] = c.id;
        cj["epoch"] = c.epoch;
        cj["rows"] = c.row_count;
        cj["bytes"] = c.bytes;
        chunks.push_back(cj);
    }
    j["chunks"] = chunks;
    return j;
}

TableInfo info_from_json(const nlohmann::json &j) {
    TableInfo info;
    info.meta = meta_from_json(j.at("meta"));
    for (const auto &cj : j.at("chunks")) {
        ChunkInfo c;
        c.id = cj.at("id").get<uint64_t>();
        c.epoch = cj.at("epoch").get<uint64_t>();
        c.row_count = cj.at("rows").get<uint64_t>();
        c.bytes = cj.at("bytes").get<uint64_t>();
        info.chunks.push_back(c);
    }
    return info;
}

json result_to_json(const ChunkQueryResult &result) {
    json j;
    json rows = json::array();
    for (const auto &r : result.rows) {
        json rj;
        rj["cells"] = r.cells;
        rj["code"] = u64_to_string(r.code);
        rj["row"] = r.row_index;
        rows.push_back(rj);
    }
    j["rows"] = rows;
    j["sum"] = result.sum_ct ? json(*result.sum_ct) : json(nullptr);
    j["matched"] = result.matched;
    return j;
}

ChunkQueryResult result_from_json(const nlohmann::json &j) {
    ChunkQueryResult result;
    for (const auto &rj : j.at("rows")) {
        ResultRow r;
        r.cells = rj.at("cells").get<std::vector<std::string>>();
        r.code = u64_from_string(rj.at("code").get<std::string>());
        r.row_index = rj.at("row").get<uint64_t>();
        result.rows.push_back(std::move(r));
    }
    if (!j.at("sum").is_null())
        result.sum_ct = j.at("sum").get<std::string>();
    result.matched = j.at("matched").get<uint64_t>();
    return result;
}

// ---- framing ----

static bool read_exact(int fd, char *buf, size_t len) {
    size_t got = 0;
    while (got < len) {
        ssize_t n = ::recv(fd, buf + got, len - got, 0);
        if (n == 0) {
            if (got == 0)
                return false;
            throw BackendError("connection closed mid-frame");
        }
        if (n < 0) {
            if (errno == EINTR)
                continue;
            throw BackendError(std::string("read failed: ") +
                               std::strerror(errno));
        }
        got += size_t(n);
    }
    return true;
}

std::optional<std::string> read_frame(int fd, size_t max_size) {
    char hdr[4];
    if (!read_exact(fd, hdr, 4))
        return std::nullopt;
    uint32_t len = (uint32_t(uint8_t(hdr[0])) << 24) |
                   (uint32_t(uint8_t(hdr[1])) << 16) |
                   (uint32_t(uint8_t(hdr[2])) << 8) | uint32_t(uint8_t(hdr[3]));
    if (len > max_size)
        throw BackendError("frame of " + std::to_string(len) +
                           " bytes exceeds limit");
    std::string payload(len, '\0');
    if (len > 0 && !read_exact(fd, payload.data(), len))
        throw BackendError("connection closed mid-frame");
    return payload;
}

void write_frame(int fd, std::string_view payload) {
    if (payload.size() > 0xffffffffull)
        throw BackendError("frame too large to send");
    uint32_t len = uint32_t(payload.size());
    char hdr[4] = {char(len >> 24), char(len >> 16), char(len >> 8), char(len)};
    std::string buf;
    buf.reserve(4 + payload.size());
    buf.append(hdr, 4);
    buf.append(payload);
    size_t sent = 0;
    while (sent < buf.size()) {
        ssize_t n = ::send(fd, buf.data() + sent, buf.size() - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            throw BackendError(std::string("write failed: ") +
                               std::strerror(errno));
        }
        sent += size_t(n);
    }
}

} // namespace opeq::wire

#include "opeq/backend_client.hpp"
#include "opeq/backend_wire.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>

using json = nlohmann::ordered_json;

namespace opeq {

RemoteBackend::RemoteBackend(std::string host, uint16_t port)
    : host_(std::move(host)), port_(port) {}

RemoteBackend::~RemoteBackend() {
    if (fd_ >= 0)
        ::close(fd_);
}

void RemoteBackend::set_transcript(
    std::shared_ptr<std::vector<std::string>> sink) {
    std::lock_guard lk(mu_);
    transcript_ = std::move(sink);
}

void RemoteBackend::ensure_connected() {
    if (fd_ >= 0)
        return;
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo *res = nullptr;
    std::string port_str = std::to_string(port_);
    int rc = ::getaddrinfo(host_.c_str(), port_str.c_str(), &hints, &res);
    if (rc != 0)
        throw BackendError("cannot resolve backend host '" + host_ +
                           "': " + gai_strerror(rc));
    int fd = -1;
    for (addrinfo *ai = res; ai; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0)
            continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0)
            break;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0)
        throw BackendError("cannot connect to backend at " + host_ + ":" +
                           port_str);
    fd_ = fd;
}

std::string RemoteBackend::call(const std::string &request) {
    std::lock_guard lk(mu_);
    ensure_connected();
    try {
        wire::write_frame(fd_, request);
        if (transcript_)
            transcript_->push_back(request);
        auto reply = wire::read_frame(fd_);
        if (!reply)
            throw BackendError("backend closed the connection");
        if (transcript_)
            transcript_->push_back(*reply);
        return *reply;
    } catch (const BackendError &) {
        // connection state is unknown after an I/O failure; reconnect next call
        ::close(fd_);
        fd_ = -1;
        throw;
    }
}

// Parses a response frame, turning "err" payloads back into the typed
// exceptions the in-process backend would have thrown.
static json unwrap(const std::string &reply) {
    json j;
    try {
        j = json::parse(reply);
    } catch (const json::exception &e) {
        throw BackendError(std::string("backend sent invalid JSON: ") + e.what());
    }
    if (j.contains("ok"))
        return j["ok"];
    try {
        const json &err = j.at("err");
        std::string code = err.at("code").get<std::string>();
        std::string msg = err.at("msg").get<std::string>();
        if (code == "epoch_mismatch")
            throw EpochError(msg);
        throw BackendFault(code, msg);
    } catch (const json::exception &e) {
        throw BackendError(std::string("backend sent a malformed error: ") +
                           e.what());
    }
}

void RemoteBackend::create_table(const TableMeta &meta) {
    json j;
    j["op"] = "create_table";
    j["meta"] = wire::meta_to_json(meta);
    unwrap(call(j.dump()));
}

void RemoteBackend::insert_chunk(const std::string &table,
                                 const NewChunk &chunk) {
    json j;
    j["op"] = "insert_chunk";
    j["table"] = table;
    j["chunk"] = wire::chunk_to_json(chunk);
    unwrap(call(j.dump()));
}

TableInfo RemoteBackend::list_chunks(const std::string &table) {
    json j;
    j["op"] = "list_chunks";
    j["table"] = table;
    return wire::info_from_json(unwrap(call(j.dump())));
}

void RemoteBackend::swap_chunks(const std::string &table,
                                const std::vector<uint64_t> &remove_ids,
                                const std::vector<NewChunk> &add) {
    json j;
    j["op"] = "swap_chunks";
    j["table"] = table;
    j["remove"] = remove_ids;
    json add_j = json::array();
    for (const auto &c : add)
        add_j.push_back(wire::chunk_to_json(c));
    j["add"] = add_j;
    unwrap(call(j.dump()));
}

ChunkQueryResult RemoteBackend::exec_chunk_query(const std::string &table,
                                                 uint64_t chunk_id,
                                                 const EncryptedPlan &plan) {
    json j;
    j["op"] = "exec_chunk_query";
    j["table"] = table;
    j["chunk_id"] = chunk_id;
    j["plan"] = json::parse(plan.to_json());
    return wire::result_from_json(unwrap(call(j.dump())));
}

} // namespace opeq

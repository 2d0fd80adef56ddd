#include "opeq/backend_server.hpp"
#include "opeq/backend_wire.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>

using json = nlohmann::ordered_json;

namespace opeq {

BackendServer::BackendServer(Backend &backend, uint16_t port)
    : backend_(backend), port_(port) {}

BackendServer::~BackendServer() { stop(); }

void BackendServer::start() {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0)
        throw IoError(std::string("socket failed: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port_);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr *>(&addr), sizeof(addr)) < 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw IoError("cannot bind port " + std::to_string(port_) + ": " +
                      std::strerror(errno));
    }
    if (port_ == 0) {
        socklen_t len = sizeof(addr);
        ::getsockname(listen_fd_, reinterpret_cast<sockaddr *>(&addr), &len);
        port_ = ntohs(addr.sin_port);
    }
    if (::listen(listen_fd_, 64) < 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
        throw IoError(std::string("listen failed: ") + std::strerror(errno));
    }
    stopping_ = false;
    accept_thread_ = std::thread([this] { accept_loop(); });
}

void BackendServer::stop() {
    if (listen_fd_ < 0 && !accept_thread_.joinable())
        return;
    stopping_ = true;
    if (listen_fd_ >= 0) {
        ::shutdown(listen_fd_, SHUT_RDWR);
        ::close(listen_fd_);
        listen_fd_ = -1;
    }
    {
        std::lock_guard lk(conn_mu_);
        for (int fd : conn_fds_)
            ::shutdown(fd, SHUT_RDWR);
    }
    if (accept_thread_.joinable())
        accept_thread_.join();
    std::vector<std::thread> threads;
    {
        std::lock_guard lk(conn_mu_);
        threads.swap(conn_threads_);
    }
    for (auto &t : threads)
        if (t.joinable())
            t.join();
}

void BackendServer::accept_loop() {
    for (;;) {
        int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            if (stopping_)
                return;
            if (errno == EINTR || errno == ECONNABORTED)
                continue;
            return;
        }
        std::lock_guard lk(conn_mu_);
        conn_fds_.insert(fd);
        conn_threads_.emplace_back([this, fd] { serve_connection(fd); });
    }
}

void BackendServer::serve_connection(int fd) {
    try {
        for (;;) {
            auto frame = wire::read_frame(fd);
            if (!frame)
                break;
            wire::write_frame(fd, handle_request(*frame));
        }
    } catch (const std::exception &) {
        // mid-frame disconnects and I/O errors end the connection quietly
    }
    ::close(fd);
    std::lock_guard lk(conn_mu_);
    conn_fds_.erase(fd);
}

static std::string error_response(const std::string &code,
                                  const std::string &msg) {
    json j;
    j["err"] = {{"code", code}, {"msg", msg}};
    return j.dump();
}

static std::string ok_response(json result) {
    json j;
    j["ok"] = std::move(result);
    return j.dump();
}

std::string BackendServer::handle_request(const std::string &request) {
    json j;
    try {
        j = json::parse(request);
    } catch (const json::exception &e) {
        return error_response("bad_request",
                              std::string("request is not valid JSON: ") +
                                  e.what());
    }
    std::string op;
    try {
        op = j.at("op").get<std::string>();
    } catch (const json::exception &) {
        return error_response("bad_request", "request lacks an op field");
    }
    try {
        if (op == "create_table") {
            backend_.create_table(wire::meta_from_json(j.at("meta")));
            return ok_response(nullptr);
        }
        if (op == "insert_chunk") {
            backend_.insert_chunk(j.at("table").get<std::string>(),
                                  wire::chunk_from_json(j.at("chunk")));
            return ok_response(nullptr);
        }
        if (op == "list_chunks") {
            TableInfo info = backend_.list_chunks(j.at("table").get<std::string>());
            return ok_response(wire::info_to_json(info));
        }
        if (op == "swap_chunks") {
            std::vector<NewChunk> add;
            for (const auto &cj : j.at("add"))
                add.push_back(wire::chunk_from_json(cj));
            backend_.swap_chunks(j.at("table").get<std::string>(),
                                 j.at("remove").get<std::vector<uint64_t>>(), add);
            return ok_response(nullptr);
        }
        if (op == "exec_chunk_query") {
            EncryptedPlan plan = EncryptedPlan::from_json(j.at("plan").dump());
            ChunkQueryResult result = backend_.exec_chunk_query(
                j.at("table").get<std::string>(),
                j.at("chunk_id").get<uint64_t>(), plan);
            return ok_response(wire::result_to_json(result));
        }
        return error_response("bad_request", "unknown op '" + op + "'");
    } catch (const json::exception &e) {
        return error_response("bad_request",
                              std::string("request field missing or mistyped: ") +
                                  e.what());
    } catch (const BackendFault &e) {
        return error_response(e.code(), e.what());
    } catch (const EpochError &e) {
        return error_response("epoch_mismatch", e.what());
    } catch (const DataError &e) {
        return error_response("bad_request", e.what());
    } catch (const std::exception &e) {
        return error_response("internal", e.what());
    }
}

} // namespace opeq

#pragma once

#include "opeq/backend.hpp"

#include <atomic>
#include <cstdint>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace opeq {

// TCP front for a Backend: one thread per connection, one frame per
// request. A malformed frame earns an error response, not a dropped
// connection, so clients can keep their socket across mistakes.
class BackendServer {
public:
    // port 0 binds an ephemeral port; port() reports the real one after
    // start().
    BackendServer(Backend &backend, uint16_t port);
    ~BackendServer();

    void start();
    void stop();
    uint16_t port() const { return port_; }

private:
    void accept_loop();
    void serve_connection(int fd);
    std::string handle_request(const std::string &request);

    Backend &backend_;
    uint16_t port_;
    int listen_fd_ = -1;
    std::thread accept_thread_;
    std::mutex conn_mu_;
    std::set<int> conn_fds_;
    std::vector<std::thread> conn_threads_;
    std::atomic<bool> stopping_{false};
};

} // namespace opeq

#pragma once

#include "opeq/backend.hpp"

#include <memory>
#include <mutex>
#include <vector>

namespace opeq {

// Backend proxy speaking the framed-JSON protocol over one TCP
// connection. Calls are serialized on the connection; errors come back
// as the same typed exceptions the in-process store throws.
class RemoteBackend : public Backend {
public:
    RemoteBackend(std::string host, uint16_t port);
    ~RemoteBackend() override;

    RemoteBackend(const RemoteBackend &) = delete;
    RemoteBackend &operator=(const RemoteBackend &) = delete;

    void create_table(const TableMeta &meta) override;
    void insert_chunk(const std::string &table, const NewChunk &chunk) override;
    TableInfo list_chunks(const std::string &table) override;
    void swap_chunks(const std::string &table,
                     const std::vector<uint64_t> &remove_ids,
                     const std::vector<NewChunk> &add) override;
    ChunkQueryResult exec_chunk_query(const std::string &table, uint64_t chunk_id,
                                      const EncryptedPlan &plan) override;

    // When set, every frame sent or received is appended verbatim; used
    // to audit what actually crosses the wire.
    void set_transcript(std::shared_ptr<std::vector<std::string>> sink);

private:
    std::string call(const std::string &request);
    void ensure_connected();

    std::mutex mu_;
    std::string host_;
    uint16_t port_;
    int fd_ = -1;
    std::shared_ptr<std::vector<std::string>> transcript_;
};

} // namespace opeq

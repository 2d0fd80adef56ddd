#pragma once

#include "opeq/backend.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>

namespace opeq {

// In-memory chunk store with optional directory persistence. Queries
// run against an immutable snapshot of the chunk payload, so a
// concurrent swap never tears a read. This is the whole "server": it
// can match bytes, compare order codes and multiply homomorphic
// ciphertexts, and that is all.
class StorageBackend : public Backend {
public:
    explicit StorageBackend(std::optional<std::string> data_dir = std::nullopt);

    void create_table(const TableMeta &meta) override;
    void insert_chunk(const std::string &table, const NewChunk &chunk) override;
    TableInfo list_chunks(const std::string &table) override;
    void swap_chunks(const std::string &table,
                     const std::vector<uint64_t> &remove_ids,
                     const std::vector<NewChunk> &add) override;
    ChunkQueryResult exec_chunk_query(const std::string &table, uint64_t chunk_id,
                                      const EncryptedPlan &plan) override;

private:
    struct StoredChunk {
        uint64_t epoch = 0;
        uint64_t row_count = 0;
        std::shared_ptr<const std::string> payload_gz;
    };

    struct Table {
        TableMeta meta;
        std::vector<std::string> headers;
        std::map<std::string, size_t> cell_index; // logical name -> field
        std::map<std::string, size_t> code_index; // ordered name -> field
        std::map<uint64_t, StoredChunk> chunks;
        mutable std::shared_mutex mu;
    };

    Table *find_table(const std::string &name);
    void persist_chunk(const std::string &table, uint64_t id,
                       const std::string &payload_gz) const;
    void persist_manifest(const Table &t) const;
    void load_data_dir();

    std::mutex tables_mu_;
    std::map<std::string, std::unique_ptr<Table>> tables_;
    std::optional<std::string> data_dir_;
};

} // namespace opeq

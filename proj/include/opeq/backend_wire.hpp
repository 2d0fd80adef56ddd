/*
 * Wire format between query client / ingest proxy and the backend
 * server: length-prefixed JSON frames over TCP. Each frame is a 4-byte
 * big-endian payload length followed by that many bytes of UTF-8 JSON.
 * Requests carry an "op" field; responses carry "ok" with the result or
 * "err" with {code, msg}.
 */
#pragma once

#include "opeq/backend.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>

namespace opeq::wire {

nlohmann::ordered_json meta_to_json(const TableMeta &meta);
TableMeta meta_from_json(const nlohmann::json &j);

nlohmann::ordered_json chunk_to_json(const NewChunk &chunk);
NewChunk chunk_from_json(const nlohmann::json &j);

nlohmann::ordered_json info_to_json(const TableInfo &info);
TableInfo info_from_json(const nlohmann::json &j);

nlohmann::ordered_json result_to_json(const ChunkQueryResult &result);
ChunkQueryResult result_from_json(const nlohmann::json &j);

// Reads one frame; nullopt on orderly close at a frame boundary. Throws
// BackendError on mid-frame EOF, I/O failure or an oversized length.
std::optional<std::string> read_frame(int fd, size_t max_size = 1u << 30);

void write_frame(int fd, std::string_view payload);

} // namespace opeq::wire

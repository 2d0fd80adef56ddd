#pragma once

#include <string>
#include <string_view>

namespace opeq {

// gzip member format (RFC 1952), suitable for chunk payloads that other
// tooling may want to inspect with standard gzip.
std::string gzip_compress(std::string_view data, int level = 6);
std::string gzip_decompress(std::string_view data);

} // namespace opeq

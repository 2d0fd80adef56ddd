#include "opeq/gzip.hpp"
#include "opeq/errors.hpp"

#include <zlib.h>

#include <cstring>

namespace opeq {

// windowBits 15 + 16 selects the gzip wrapper instead of raw zlib.
static constexpr int kGzipWindow = 15 + 16;

std::string gzip_compress(std::string_view data, int level) {
    z_stream zs;
    std::memset(&zs, 0, sizeof(zs));
    if (deflateInit2(&zs, level, Z_DEFLATED, kGzipWindow, 8,
                     Z_DEFAULT_STRATEGY) != Z_OK)
        throw IoError("deflateInit2 failed");
    zs.next_in = reinterpret_cast<Bytef *>(const_cast<char *>(data.data()));
    zs.avail_in = uInt(data.size());
    std::string out;
    out.resize(deflateBound(&zs, uLong(data.size())));
    zs.next_out = reinterpret_cast<Bytef *>(out.data());
    zs.avail_out = uInt(out.size());
    int rc = deflate(&zs, Z_FINISH);
    if (rc != Z_STREAM_END) {
        deflateEnd(&zs);
        throw IoError("deflate failed (" + std::to_string(rc) + ")");
    }
    out.resize(zs.total_out);
    deflateEnd(&zs);
    return out;
}

std::string gzip_decompress(std::string_view data) {
    z_stream zs;
    std::memset(&zs, 0, sizeof(zs));
    if (inflateInit2(&zs, kGzipWindow) != Z_OK)
        throw IoError("inflateInit2 failed");
    zs.next_in = reinterpret_cast<Bytef *>(const_cast<char *>(data.data()));
    zs.avail_in = uInt(data.size());
    std::string out;
    out.resize(data.size() * 4 + 1024);
    size_t written = 0;
    for (;;) {
        zs.next_out = reinterpret_cast<Bytef *>(out.data()) + written;
        zs.avail_out = uInt(out.size() - written);
        int rc = inflate(&zs, Z_NO_FLUSH);
        written = zs.total_out;
        if (rc == Z_STREAM_END)
            break;
        if (rc == Z_OK || rc == Z_BUF_ERROR) {
            if (zs.avail_in == 0 && rc == Z_BUF_ERROR) {
                inflateEnd(&zs);
                throw DataError("gzip payload truncated");
            }
            out.resize(out.size() * 2);
            continue;
        }
        inflateEnd(&zs);
        throw DataError("gzip payload corrupt (" + std::to_string(rc) + ")");
    }
    if (zs.avail_in != 0) {
        inflateEnd(&zs);
        throw DataError("gzip payload has trailing garbage");
    }
    out.resize(written);
    inflateEnd(&zs);
    return out;
}

} // namespace opeq

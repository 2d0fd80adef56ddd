#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace opeq {

// Streaming CSV reader: quoted fields, "" escapes, LF or CRLF records,
// multi-line quoted fields. Throws DataError naming the record number on
// malformed input.
class CsvReader {
public:
    explicit CsvReader(std::istream &in) : in_(in) {}

    // Reads one record into `fields`; false at end of input.
    bool next(std::vector<std::string> &fields);

    size_t record_number() const { return record_; }

private:
    std::istream &in_;
    size_t record_ = 0;
};

void csv_append_row(std::string &out, const std::vector<std::string> &fields);

// Parses a whole CSV buffer (used by the backend on decompressed chunks).
std::vector<std::vector<std::string>> csv_parse(std::string_view data);

} // namespace opeq

#include "opeq/csv.hpp"
#include "opeq/errors.hpp"

namespace opeq {

bool CsvReader::next(std::vector<std::string> &fields) {
    fields.clear();
    int c = in_.get();
    if (c == std::istream::traits_type::eof())
        return false;
    ++record_;
    std::string cur;
    bool quoted = false;
    bool closed = false; // a quoted field ended; only a delimiter may follow
    for (;; c = in_.get()) {
        if (quoted) {
            if (c == std::istream::traits_type::eof())
                throw DataError("csv record " + std::to_string(record_) +
                                ": unterminated quoted field");
            if (c == '"') {
                int peek = in_.peek();
                if (peek == '"') {
                    in_.get();
                    cur += '"';
                } else {
                    quoted = false;
                    closed = true;
                }
            } else {
                cur += char(c);
            }
            continue;
        }
        if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
            closed = false;
            continue;
        }
        if (c == '\r') {
            if (in_.peek() == '\n')
                in_.get();
            break;
        }
        if (c == '\n' || c == std::istream::traits_type::eof())
            break;
        if (closed)
            throw DataError("csv record " + std::to_string(record_) +
                            ": text after a closing quote");
        if (c == '"') {
            if (!cur.empty())
                throw DataError("csv record " + std::to_string(record_) +
                                ": quote inside unquoted field");
            quoted = true;
            continue;
        }
        cur += char(c);
    }
    fields.push_back(std::move(cur));
    return true;
}

static bool needs_quoting(std::string_view field) {
    for (char c : field)
        if (c == ',' || c == '"' || c == '\n' || c == '\r')
            return true;
    return false;
}

void csv_append_row(std::string &out, const std::vector<std::string> &fields) {
    for (size_t i = 0; i < fields.size(); ++i) {
        if (i)
            out += ',';
        const std::string &f = fields[i];
        if (needs_quoting(f)) {
            out += '"';
            for (char c : f) {
                if (c == '"')
                    out += '"';
                out += c;
            }
            out += '"';
        } else {
            out += f;
        }
    }
    out += '\n';
}

std::vector<std::vector<std::string>> csv_parse(std::string_view data) {
    std::vector<std::vector<std::string>> rows;
    size_t i = 0, n = data.size(), record = 0;
    while (i < n) {
        ++record;
        std::vector<std::string> fields;
        std::string cur;
        bool quoted = false;
        bool closed = false;
        bool done = false;
        while (!done) {
            if (quoted) {
                if (i >= n)
                    throw DataError("csv record " + std::to_string(record) +
                                    ": unterminated quoted field");
                char c = data[i++];
                if (c == '"') {
                    if (i < n && data[i] == '"') {
                        cur += '"';
                        ++i;
                    } else {
                        quoted = false;
                        closed = true;
                    }
                } else {
                    cur += c;
                }
                continue;
            }
            if (i >= n) {
                done = true;
                break;
            }
            char c = data[i++];
            switch (c) {
            case ',':
                fields.push_back(std::move(cur));
                cur.clear();
                closed = false;
                break;
            case '\r':
                if (i < n && data[i] == '\n')
                    ++i;
                done = true;
                break;
            case '\n':
                done = true;
                break;
            default:
                if (closed)
                    throw DataError("csv record " + std::to_string(record) +
                                    ": text after a closing quote");
                if (c == '"') {
                    if (!cur.empty())
                        throw DataError("csv record " + std::to_string(record) +
                                        ": quote inside unquoted field");
                    quoted = true;
                    break;
                }
                cur += c;
            }
        }
        fields.push_back(std::move(cur));
        rows.push_back(std::move(fields));
    }
    return rows;
}

} // namespace opeq

#include "opeq/schema.hpp"
#include "opeq/bytes.hpp"
#include "opeq/errors.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

using json = nlohmann::ordered_json;

namespace opeq {

const char *data_type_name(DataType t) {
    switch (t) {
    case DataType::integer: return "integer";
    case DataType::decimal: return "decimal";
    case DataType::text: return "text";
    }
    return "?";
}

std::string ColumnSpec::type_name() const {
    if (type == DataType::decimal)
        return std::string("decimal(") + std::to_string(scale) + ")";
    return data_type_name(type);
}

static bool valid_identifier(std::string_view s) {
    if (s.empty())
        return false;
    auto head = [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
    };
    auto tail = [&](char c) { return head(c) || (c >= '0' && c <= '9'); };
    if (!head(s[0]))
        return false;
    for (char c : s.substr(1))
        if (!tail(c))
            return false;
    return true;
}

// "decimal(2)" -> {decimal, 2}; "integer"/"text" pass through
static void parse_type(std::string_view text, ColumnSpec &col) {
    if (text == "integer") {
        col.type = DataType::integer;
        return;
    }
    if (text == "text") {
        col.type = DataType::text;
        return;
    }
    if (text.rfind("decimal(", 0) == 0 && text.back() == ')') {
        std::string_view digits = text.substr(8, text.size() - 9);
        int scale = 0;
        auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), scale);
        if (ec == std::errc() && p == digits.data() + digits.size() && scale >= 1 &&
            scale <= 12) {
            col.type = DataType::decimal;
            col.scale = scale;
            return;
        }
    }
    throw SchemeError("bad column type '" + std::string(text) +
                      "' (expected integer, decimal(1..12) or text)");
}

Schema Schema::parse(std::string_view json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception &e) {
        throw DataError(std::string("schema: malformed JSON: ") + e.what());
    }
    Schema s;
    try {
        s.table = j.at("table").get<std::string>();
        if (!valid_identifier(s.table))
            throw SchemeError("bad table name '" + s.table + "'");
        std::set<std::string> seen;
        int ope_count = 0;
        for (const auto &cj : j.at("columns")) {
            ColumnSpec col;
            col.name = cj.at("name").get<std::string>();
            if (!valid_identifier(col.name))
                throw SchemeError("bad column name '" + col.name + "'");
            if (!seen.insert(col.name).second)
                throw SchemeError("duplicate column '" + col.name + "'");
            parse_type(cj.at("type").get<std::string>(), col);
            col.scheme = scheme_from_name(cj.value("encrypt", "none"));
            if (col.scheme == Scheme::homomorphic && col.type != DataType::integer)
                throw SchemeError("column '" + col.name +
                                  "': homomorphic requires integer type");
            if (col.scheme == Scheme::searchwords && col.type != DataType::text)
                throw SchemeError("column '" + col.name +
                                  "': searchwords requires text type");
            if (col.scheme == Scheme::order_preserving && ++ope_count > 1)
                throw SchemeError("at most one order_preserving column per table");
            s.columns.push_back(std::move(col));
        }
        if (s.columns.empty())
            throw SchemeError("schema has no columns");
    } catch (const json::exception &e) {
        throw DataError(std::string("schema: missing or mistyped field: ") +
                        e.what());
    }
    return s;
}

Schema Schema::load_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open schema file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::string Schema::to_json() const {
    json j;
    j["table"] = table;
    json cols = json::array();
    for (const auto &c : columns) {
        json cj;
        cj["name"] = c.name;
        cj["type"] = c.type_name();
        cj["encrypt"] = scheme_name(c.scheme);
        cols.push_back(cj);
    }
    j["columns"] = cols;
    return j.dump();
}

std::optional<size_t> Schema::find(std::string_view column) const {
    for (size_t i = 0; i < columns.size(); ++i)
        if (columns[i].name == column)
            return i;
    return std::nullopt;
}

size_t Schema::index_of(std::string_view column) const {
    auto i = find(column);
    if (!i)
        throw SchemeError("table '" + table + "' has no column '" +
                          std::string(column) + "'");
    return *i;
}

const ColumnSpec &Schema::column(std::string_view name) const {
    return columns[index_of(name)];
}

std::optional<size_t> Schema::ope_column() const {
    for (size_t i = 0; i < columns.size(); ++i)
        if (columns[i].scheme == Scheme::order_preserving)
            return i;
    return std::nullopt;
}

void Schema::validate_header(const std::vector<std::string> &header) const {
    std::set<std::string_view> have(header.begin(), header.end());
    for (const auto &c : columns)
        if (!have.count(c.name))
            throw SchemeError("input is missing column '" + c.name + "'");
    std::set<std::string_view> want;
    for (const auto &c : columns)
        want.insert(c.name);
    for (const auto &h : header)
        if (!want.count(h))
            throw SchemeError("input has unexpected column '" + h + "'");
    if (header.size() != columns.size())
        throw SchemeError("input header repeats a column");
}

// ---- cell canonicalization ----

static int64_t parse_int64(std::string_view s, const ColumnSpec &col) {
    if (s.empty())
        throw DataError("column '" + col.name + "': empty integer");
    int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw DataError("column '" + col.name + "': bad integer '" +
                        std::string(s) + "'");
    return v;
}

// Parses a decimal literal into an int64 scaled by 10^scale, rejecting
// excess fractional digits rather than rounding.
static int64_t parse_scaled(std::string_view s, const ColumnSpec &col) {
    std::string_view orig = s;
    auto fail = [&]() -> int64_t {
        throw DataError("column '" + col.name + "': bad decimal '" +
                        std::string(orig) + "'");
    };
    bool neg = false;
    if (!s.empty() && (s[0] == '+' || s[0] == '-')) {
        neg = s[0] == '-';
        s.remove_prefix(1);
    }
    if (s.empty())
        return fail();
    std::string_view int_part = s, frac_part;
    if (auto dot = s.find('.'); dot != std::string_view::npos) {
        int_part = s.substr(0, dot);
        frac_part = s.substr(dot + 1);
        if (frac_part.empty())
            return fail();
    }
    if (int_part.empty())
        return fail();
    if (int(frac_part.size()) > col.scale)
        throw DataError("column '" + col.name + "': '" + std::string(orig) +
                        "' has more than " + std::to_string(col.scale) +
                        " fractional digits");
    unsigned __int128 acc = 0;
    const unsigned __int128 limit =
        static_cast<unsigned __int128>(std::numeric_limits<int64_t>::max()) + 1;
    auto digits = [&](std::string_view part) {
        for (char c : part) {
            if (c < '0' || c > '9')
                fail();
            acc = acc * 10 + unsigned(c - '0');
            if (acc > limit)
                throw DataError("column '" + col.name + "': '" +
                                std::string(orig) + "' out of range");
        }
    };
    digits(int_part);
    digits(frac_part);
    // short fractions scale up: "1.5" at scale 2 is 150, not 15
    for (int i = int(frac_part.size()); i < col.scale; ++i) {
        acc *= 10;
        if (acc > limit)
            throw DataError("column '" + col.name + "': '" + std::string(orig) +
                            "' out of range");
    }
    if (acc == limit && !neg)
        throw DataError("column '" + col.name + "': '" + std::string(orig) +
                        "' out of range");
    int64_t v = neg ? int64_t(-static_cast<int64_t>(acc - 1) - 1)
                    : int64_t(acc);
    return v;
}

static std::string render_scaled(int64_t scaled, int scale) {
    bool neg = scaled < 0;
    uint64_t mag = neg ? (~static_cast<uint64_t>(scaled) + 1)
                       : static_cast<uint64_t>(scaled);
    uint64_t pow = 1;
    for (int i = 0; i < scale; ++i)
        pow *= 10;
    std::string out;
    if (neg)
        out += '-';
    out += std::to_string(mag / pow);
    out += '.';
    std::string frac = std::to_string(mag % pow);
    out.append(size_t(scale) - frac.size(), '0');
    out += frac;
    return out;
}

std::string canonicalize_cell(const ColumnSpec &col, std::string_view raw) {
    switch (col.type) {
    case DataType::integer: {
        int64_t v = parse_int64(raw, col);
        if (col.scheme == Scheme::homomorphic && v < 0)
            throw DataError("column '" + col.name +
                            "': homomorphic values must be non-negative, got '" +
                            std::string(raw) + "'");
        return std::to_string(v);
    }
    case DataType::decimal:
        return render_scaled(parse_scaled(raw, col), col.scale);
    case DataType::text:
        return std::string(raw);
    }
    throw DataError("unreachable");
}

std::string comparison_key(const ColumnSpec &col, std::string_view canonical) {
    switch (col.type) {
    case DataType::integer:
        return order_bytes_from_int64(parse_int64(canonical, col));
    case DataType::decimal:
        return order_bytes_from_int64(parse_scaled(canonical, col));
    case DataType::text:
        return std::string(canonical);
    }
    throw DataError("unreachable");
}

KeyType key_type_for(const ColumnSpec &col) {
    switch (col.type) {
    case DataType::integer: return KeyType::integer;
    case DataType::decimal: return KeyType::decimal;
    case DataType::text: return KeyType::text;
    }
    return KeyType::text;
}

} // namespace opeq

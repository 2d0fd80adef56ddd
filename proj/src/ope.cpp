#include "opeq/ope.hpp"
#include "opeq/bytes.hpp"
#include "opeq/errors.hpp"

#include <nlohmann/json.hpp>

#include <cstring>
#include <limits>

using json = nlohmann::ordered_json;

namespace opeq {

// Virtual sentinel codes bracketing the whole space. They are never
// assigned to a key; the first real insert lands on their midpoint.
static constexpr OrderCode kLo = 0;
static constexpr OrderCode kHi = std::numeric_limits<OrderCode>::max();

static OrderCode midpoint(OrderCode lo, OrderCode hi) {
    return OrderCode((static_cast<unsigned __int128>(lo) + hi) >> 1);
}

const char *key_type_name(KeyType t) {
    switch (t) {
    case KeyType::integer: return "integer";
    case KeyType::decimal: return "decimal";
    case KeyType::text: return "text";
    }
    return "?";
}

KeyType key_type_from_name(std::string_view name) {
    for (KeyType t : {KeyType::integer, KeyType::decimal, KeyType::text})
        if (name == key_type_name(t))
            return t;
    throw DataError("unknown key type '" + std::string(name) + "'");
}

OrderCode ReencodeMap::map_code(OrderCode old_code) const {
    // pairs are sorted by old code; binary search
    size_t lo = 0, hi = pairs.size();
    while (lo < hi) {
        size_t mid = (lo + hi) / 2;
        if (pairs[mid].first < old_code)
            lo = mid + 1;
        else
            hi = mid;
    }
    if (lo == pairs.size() || pairs[lo].first != old_code)
        throw DataError("re-encode map has no entry for code " +
                        u64_to_string(old_code));
    return pairs[lo].second;
}

OpeState OpeState::make(KeyType type) {
    OpeState st;
    st.type_ = type;
    return st;
}

OrderCode OpeState::encode_insert(std::string_view key) {
    if (pending_)
        throw CollisionError("order-preserving state needs re-encoding before "
                             "further inserts");
    auto it = entries_.lower_bound(key);
    if (it != entries_.end() && it->first == key)
        return it->second;
    OrderCode below = (it == entries_.begin()) ? kLo : std::prev(it)->second;
    OrderCode above = (it == entries_.end()) ? kHi : it->second;
    if (above - below <= 1) {
        pending_ = true;
        throw CollisionError("order code gap exhausted; re-encode required");
    }
    OrderCode code = midpoint(below, above);
    entries_.emplace_hint(it, std::string(key), code);
    return code;
}

void OpeState::bulk_insert_sorted(const std::vector<std::string> &keys_sorted) {
    if (!entries_.empty() || pending_)
        throw UsageError("bulk insert needs a fresh order-preserving state");
    if (keys_sorted.empty())
        return;
    for (size_t i = 1; i < keys_sorted.size(); ++i)
        if (!(keys_sorted[i - 1] < keys_sorted[i]))
            throw UsageError("bulk insert needs strictly increasing keys");

    // median-first midpoint recursion, computed positionally first so
    // the map can then be filled in key order
    std::vector<OrderCode> codes(keys_sorted.size());
    struct Range {
        size_t lo, hi;
        OrderCode below, above;
    };
    std::vector<Range> stack{{0, keys_sorted.size(), kLo, kHi}};
    while (!stack.empty()) {
        auto [lo, hi, below, above] = stack.back();
        stack.pop_back();
        if (above - below <= 1) {
            pending_ = true;
            throw CollisionError(
                "order code gap exhausted; re-encode required");
        }
        size_t mid = lo + (hi - lo) / 2;
        OrderCode code = midpoint(below, above);
        codes[mid] = code;
        if (mid > lo)
            stack.push_back({lo, mid, below, code});
        if (mid + 1 < hi)
            stack.push_back({mid + 1, hi, code, above});
    }
    for (size_t i = 0; i < keys_sorted.size(); ++i)
        entries_.emplace_hint(entries_.end(), keys_sorted[i], codes[i]);
}

ProbeResult OpeState::probe(std::string_view key) const {
    auto it = entries_.lower_bound(key);
    if (it != entries_.end() && it->first == key)
        return {ProbeResult::Kind::exact, it->second};
    OrderCode below = (it == entries_.begin()) ? kLo : std::prev(it)->second;
    OrderCode above = (it == entries_.end()) ? kHi : it->second;
    if (above - below <= 1)
        return {ProbeResult::Kind::exhausted, below};
    return {ProbeResult::Kind::gap, midpoint(below, above)};
}

ReencodeMap OpeState::reencode() {
    if (entries_.empty())
        throw UsageError("cannot re-encode an empty order-preserving state");
    ReencodeMap m;
    m.epoch_from = epoch_;
    m.epoch_to = epoch_ + 1;
    const unsigned __int128 span = kHi; // 2^64 - 1
    const uint64_t n = entries_.size();
    uint64_t i = 0;
    // iterating in key order visits old codes in increasing order too,
    // so the pairs come out ready for binary search
    for (auto &[key, code] : entries_) {
        OrderCode fresh = OrderCode(span * (i + 1) / (n + 1));
        m.pairs.emplace_back(code, fresh);
        code = fresh;
        ++i;
    }
    epoch_ = m.epoch_to;
    pending_ = false;
    return m;
}

// Serialized form: a small JSON envelope around one CBC-encrypted binary
// body. Keys and codes stay confidential at rest; the envelope leaks only
// the key type, epoch and entry count range via ciphertext length.
//
// body := u64 count, then per entry: u32 key_len, key bytes, u64 code
// (all little-endian)

static void put_u32(std::string &out, uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    out.append(b, 4);
}

static void put_u64(std::string &out, uint64_t v) {
    char b[8];
    std::memcpy(b, &v, 8);
    out.append(b, 8);
}

namespace {
struct BodyReader {
    const char *p, *end;
    explicit BodyReader(std::string_view s) : p(s.data()), end(s.data() + s.size()) {}
    void need(size_t n) const {
        if (size_t(end - p) < n)
            throw DataError("order-preserving state body truncated");
    }
    uint32_t u32() {
        need(4);
        uint32_t v;
        std::memcpy(&v, p, 4);
        p += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v;
        std::memcpy(&v, p, 8);
        p += 8;
        return v;
    }
    std::string bytes(size_t n) {
        need(n);
        std::string s(p, n);
        p += n;
        return s;
    }
};
} // namespace

std::string OpeState::serialize(const ColumnKey &key) const {
    std::string body;
    body.reserve(entries_.size() * 24 + 8);
    put_u64(body, entries_.size());
    for (const auto &[k, code] : entries_) {
        put_u32(body, uint32_t(k.size()));
        body += k;
        put_u64(body, code);
    }
    std::string iv = random_bytes(16);
    std::string ct = cbc_encrypt_raw(key.bytes, iv, body);
    json j;
    j["version"] = 1;
    j["type"] = key_type_name(type_);
    j["epoch"] = u64_to_string(epoch_);
    j["pending"] = pending_;
    j["iv"] = to_base64(iv);
    j["entries"] = to_base64(ct);
    return j.dump() + "\n";
}

OpeState OpeState::deserialize(std::string_view blob, const ColumnKey &key) {
    json j;
    try {
        j = json::parse(blob);
    } catch (const json::exception &e) {
        throw DataError(std::string("order-preserving state: malformed JSON: ") +
                        e.what());
    }
    try {
        if (j.at("version").get<int>() != 1)
            throw DataError("order-preserving state: unsupported version");
        OpeState st;
        st.type_ = key_type_from_name(j.at("type").get<std::string>());
        st.epoch_ = u64_from_string(j.at("epoch").get<std::string>());
        st.pending_ = j.at("pending").get<bool>();
        std::string iv = from_base64(j.at("iv").get<std::string>());
        std::string ct = from_base64(j.at("entries").get<std::string>());
        std::string body = cbc_decrypt_raw(key.bytes, iv, ct);
        BodyReader r(body);
        uint64_t count = r.u64();
        std::string prev_key;
        OrderCode prev_code = 0;
        for (uint64_t i = 0; i < count; ++i) {
            uint32_t klen = r.u32();
            std::string k = r.bytes(klen);
            OrderCode code = r.u64();
            // entries were written in key order with strictly increasing
            // codes; anything else means corruption
            if (i > 0 && (k <= prev_key || code <= prev_code))
                throw DataError("order-preserving state: entries out of order");
            st.entries_.emplace_hint(st.entries_.end(), k, code);
            prev_key = std::move(k);
            prev_code = code;
        }
        if (r.p != r.end)
            throw DataError("order-preserving state: trailing bytes");
        return st;
    } catch (const json::exception &e) {
        throw DataError(
            std::string("order-preserving state: missing or mistyped field: ") +
            e.what());
    }
}

void OpeState::for_each(
    const std::function<void(std::string_view, OrderCode)> &fn) const {
    for (const auto &[k, code] : entries_)
        fn(k, code);
}

} // namespace opeq

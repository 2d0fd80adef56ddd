/*
 * Mutable order-preserving encoding.
 *
 * The proxy keeps a sorted map from plaintext comparison keys to 64-bit
 * order codes. New keys get the midpoint of the gap between their
 * neighbours' codes; when a gap closes (adjacent codes differ by at most
 * one) the column must be re-encoded with evenly spaced codes and the
 * epoch advances. Codes leak nothing but order: they are assigned from
 * insertion structure, never from the plaintext values themselves.
 */
#pragma once

#include "opeq/crypto.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace opeq {

using OrderCode = uint64_t;

enum class KeyType { integer, decimal, text };

const char *key_type_name(KeyType t);
KeyType key_type_from_name(std::string_view name);

// Result of probing a query literal against the tree. An exact hit
// returns the key's own code; a miss returns a code strictly inside the
// surrounding gap, which the rewriter pairs with strict comparisons.
// `exhausted` means the literal falls in a closed gap and the plan
// cannot be expressed until the column is re-encoded.
struct ProbeResult {
    enum class Kind { exact, gap, exhausted };
    Kind kind;
    OrderCode code;
};

// Old-code -> new-code pairs produced by a re-encode, used to rewrite
// chunks uploaded under the previous epoch.
struct ReencodeMap {
    uint64_t epoch_from = 0;
    uint64_t epoch_to = 0;
    std::vector<std::pair<OrderCode, OrderCode>> pairs;

    OrderCode map_code(OrderCode old_code) const;
};

class OpeState {
public:
    static OpeState make(KeyType type);

    // Returns the code for `key`, inserting it if new. Throws
    // CollisionError when the enclosing gap has closed; the state is
    // then marked collision-pending and must be re-encoded before any
    // further inserts.
    OrderCode encode_insert(std::string_view key);

    // Fills an empty state from a strictly increasing key list. Codes
    // come out identical to median-first encode_insert calls, but the
    // map is built in key order, one cheap hinted insert per key.
    // Throws UsageError if the state is non-empty or the list unsorted.
    void bulk_insert_sorted(const std::vector<std::string> &keys_sorted);

    ProbeResult probe(std::string_view key) const;

    // Reassigns evenly spaced codes to all keys, advances the epoch and
    // clears the pending flag. Throws UsageError on an empty state.
    ReencodeMap reencode();

    std::string serialize(const ColumnKey &key) const;
    static OpeState deserialize(std::string_view blob, const ColumnKey &key);

    KeyType type() const { return type_; }
    uint64_t epoch() const { return epoch_; }
    bool collision_pending() const { return pending_; }
    size_t size() const { return entries_.size(); }

    void for_each(const std::function<void(std::string_view, OrderCode)> &fn) const;

private:
    KeyType type_ = KeyType::integer;
    uint64_t epoch_ = 0;
    bool pending_ = false;
    std::map<std::string, OrderCode, std::less<>> entries_;
};

} // namespace opeq

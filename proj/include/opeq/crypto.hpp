#pragma once

#include "opeq/paillier.hpp"

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace opeq {

enum class Scheme {
    none,
    deterministic,
    probabilistic,
    pseudonym,
    searchwords,
    homomorphic,
    order_preserving,
};

const char *scheme_name(Scheme s);
// Throws SchemeError on unknown names; aliases are rejected.
Scheme scheme_from_name(std::string_view name);

// 32 bytes derived from (master key, table, column, scheme). Distinct
// inputs give distinct keys.
struct ColumnKey {
    std::string bytes; // 32 bytes
    Scheme scheme = Scheme::none;
};

std::string hmac_sha256(std::string_view key, std::string_view data);

// KDF construction "hmac-sha256/v1": HMAC-SHA256(master, table/column/scheme).
ColumnKey derive_column_key(std::string_view master_key, std::string_view table,
                            std::string_view column, Scheme scheme);

/*
 * All key material a client holds. The canonical form carries the
 * 32-byte master key plus the Paillier keypair; restricted keysets
 * carry explicit per-column keys instead of the master and may omit
 * the Paillier private half. The private half never leaves this
 * structure toward a backend.
 */
class Keyset {
  public:
    static Keyset generate(int paillier_bits = 512);
    static Keyset parse(std::string_view json_text);
    std::string to_json() const;

    static Keyset load_file(const std::string &path);
    // Refuses to overwrite unless force; file mode 0600 where supported.
    void save_file(const std::string &path, bool force = false) const;

    bool has_master() const { return master_.has_value(); }
    const std::string &master_key() const;

    // Derives from the master when present, otherwise consults the
    // explicit per-column keys. nullopt when this keyset cannot
    // produce the key.
    std::optional<ColumnKey> column_key(std::string_view table,
                                        std::string_view column,
                                        Scheme scheme) const;
    ColumnKey require_column_key(std::string_view table,
                                 std::string_view column, Scheme scheme) const;

    const PaillierPublic &paillier_public() const { return paillier_pub_; }
    bool has_paillier_private() const { return paillier_priv_.has_value(); }
    const PaillierPrivate &paillier_private() const;

    const std::string &kdf_id() const { return kdf_; }
    const std::string &created_at() const { return created_at_; }

    // A keyset for a less-privileged client: explicit keys for the named
    // (table, column, scheme) triples, no master key. Paillier private
    // half copied only when requested.
    Keyset restricted(
        const std::vector<std::tuple<std::string, std::string, Scheme>> &grants,
        bool include_paillier_private = false) const;

  private:
    Keyset() = default;

    std::optional<std::string> master_;
    // "table/column/scheme" -> 32-byte key
    std::map<std::string, std::string> column_keys_;
    PaillierPublic paillier_pub_;
    std::optional<PaillierPrivate> paillier_priv_;
    std::string kdf_;
    std::string created_at_;
};

// Raw AES-256-CBC with PKCS#7 padding. Building blocks for the schemes
// and for at-rest state encryption; iv is 16 bytes.
std::string cbc_encrypt_raw(std::string_view key32, std::string_view iv16,
                            std::string_view plaintext);
std::string cbc_decrypt_raw(std::string_view key32, std::string_view iv16,
                            std::string_view ciphertext);

// Deterministic scheme: fixed all-zero IV, so equal plaintexts under the
// same key are byte-identical. Also used for the value half of
// order_preserving columns.
std::string det_encrypt(const ColumnKey &key, std::string_view plaintext);
std::string det_decrypt(const ColumnKey &key, std::string_view ciphertext);

// Probabilistic scheme: fresh random IV prepended to the ciphertext.
std::string prob_encrypt(const ColumnKey &key, std::string_view plaintext);
std::string prob_decrypt(const ColumnKey &key, std::string_view ciphertext);

// Keyed one-way token (HMAC-SHA256); equality/grouping only, not
// invertible by anyone.
std::string pseudonym(const ColumnKey &key, std::string_view plaintext);

// Lowercase, split on whitespace, one token per word, order preserved.
std::vector<std::string> searchwords(const ColumnKey &key,
                                     std::string_view text);

// The searchword normalization, shared with query rewriting.
std::vector<std::string> split_searchwords(std::string_view text);

} // namespace opeq

#include "opeq/crypto.hpp"
#include "opeq/bytes.hpp"
#include "opeq/errors.hpp"

#include <nlohmann/json.hpp>

#include <openssl/evp.h>

#include <sys/stat.h>

#include <cctype>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <memory>
#include <sstream>

using json = nlohmann::ordered_json;

namespace opeq {

static constexpr size_t kKeyLen = 32;
static constexpr size_t kBlock = 16;
static const char *kKdfId = "hmac-sha256/v1";

const char *scheme_name(Scheme s) {
    switch (s) {
    case Scheme::none: return "none";
    case Scheme::deterministic: return "deterministic";
    case Scheme::probabilistic: return "probabilistic";
    case Scheme::pseudonym: return "pseudonym";
    case Scheme::searchwords: return "searchwords";
    case Scheme::homomorphic: return "homomorphic";
    case Scheme::order_preserving: return "order_preserving";
    }
    return "?";
}

Scheme scheme_from_name(std::string_view name) {
    for (Scheme s : {Scheme::none, Scheme::deterministic, Scheme::probabilistic,
                     Scheme::pseudonym, Scheme::searchwords, Scheme::homomorphic,
                     Scheme::order_preserving})
        if (name == scheme_name(s))
            return s;
    throw SchemeError("unknown encryption scheme '" + std::string(name) + "'");
}

std::string hmac_sha256(std::string_view key, std::string_view data) {
    std::string out(EVP_MAX_MD_SIZE, '\0');
    size_t outlen = 0;
    if (EVP_Q_mac(nullptr, "HMAC", nullptr, "SHA256", nullptr, key.data(),
                  key.size(), reinterpret_cast<const unsigned char *>(data.data()),
                  data.size(), reinterpret_cast<unsigned char *>(out.data()),
                  out.size(), &outlen) == nullptr)
        throw CryptoError("HMAC-SHA256 failed");
    out.resize(outlen);
    return out;
}

ColumnKey derive_column_key(std::string_view master_key, std::string_view table,
                            std::string_view column, Scheme scheme) {
    if (master_key.size() != kKeyLen)
        throw CryptoError("master key must be 32 bytes");
    std::string info;
    info.reserve(table.size() + column.size() + 24);
    info.append(table).append("/").append(column).append("/").append(
        scheme_name(scheme));
    return ColumnKey{hmac_sha256(master_key, info), scheme};
}

// ---- AES-256-CBC/PKCS#7 ----

namespace {
struct CipherCtx {
    EVP_CIPHER_CTX *ctx;
    CipherCtx() : ctx(EVP_CIPHER_CTX_new()) {
        if (!ctx)
            throw CryptoError("EVP_CIPHER_CTX_new failed");
    }
    ~CipherCtx() { EVP_CIPHER_CTX_free(ctx); }
    CipherCtx(const CipherCtx &) = delete;
    CipherCtx &operator=(const CipherCtx &) = delete;
};
} // namespace

std::string cbc_encrypt_raw(std::string_view key32, std::string_view iv16,
                            std::string_view plaintext) {
    if (key32.size() != kKeyLen || iv16.size() != kBlock)
        throw CryptoError("cbc_encrypt: bad key or iv length");
    CipherCtx c;
    if (EVP_EncryptInit_ex(c.ctx, EVP_aes_256_cbc(), nullptr,
                           reinterpret_cast<const unsigned char *>(key32.data()),
                           reinterpret_cast<const unsigned char *>(iv16.data())) != 1)
        throw CryptoError("EVP_EncryptInit failed");
    std::string out(plaintext.size() + kBlock, '\0');
    int len1 = 0, len2 = 0;
    if (EVP_EncryptUpdate(c.ctx, reinterpret_cast<unsigned char *>(out.data()),
                          &len1,
                          reinterpret_cast<const unsigned char *>(plaintext.data()),
                          int(plaintext.size())) != 1)
        throw CryptoError("EVP_EncryptUpdate failed");
    if (EVP_EncryptFinal_ex(c.ctx,
                            reinterpret_cast<unsigned char *>(out.data()) + len1,
                            &len2) != 1)
        throw CryptoError("EVP_EncryptFinal failed");
    out.resize(size_t(len1) + size_t(len2));
    return out;
}

std::string cbc_decrypt_raw(std::string_view key32, std::string_view iv16,
                            std::string_view ciphertext) {
    if (key32.size() != kKeyLen || iv16.size() != kBlock)
        throw CryptoError("cbc_decrypt: bad key or iv length");
    if (ciphertext.empty() || ciphertext.size() % kBlock != 0)
        throw CryptoError("cbc_decrypt: truncated ciphertext");
    CipherCtx c;
    if (EVP_DecryptInit_ex(c.ctx, EVP_aes_256_cbc(), nullptr,
                           reinterpret_cast<const unsigned char *>(key32.data()),
                           reinterpret_cast<const unsigned char *>(iv16.data())) != 1)
        throw CryptoError("EVP_DecryptInit failed");
    std::string out(ciphertext.size() + kBlock, '\0');
    int len1 = 0, len2 = 0;
    if (EVP_DecryptUpdate(c.ctx, reinterpret_cast<unsigned char *>(out.data()),
                          &len1,
                          reinterpret_cast<const unsigned char *>(ciphertext.data()),
                          int(ciphertext.size())) != 1)
        throw CryptoError("EVP_DecryptUpdate failed");
    if (EVP_DecryptFinal_ex(c.ctx,
                            reinterpret_cast<unsigned char *>(out.data()) + len1,
                            &len2) != 1)
        // bad padding: corrupted or foreign ciphertext
        throw CryptoError("cbc_decrypt: invalid padding");
    out.resize(size_t(len1) + size_t(len2));
    return out;
}

// The deterministic scheme deliberately fixes an all-zero IV: equal
// plaintexts must produce equal ciphertexts so the backend can match
// them byte for byte.
static const std::string kZeroIv(kBlock, '\0');

std::string det_encrypt(const ColumnKey &key, std::string_view plaintext) {
    if (key.scheme != Scheme::deterministic &&
        key.scheme != Scheme::order_preserving)
        throw SchemeError("det_encrypt: key scheme must be deterministic or "
                          "order_preserving");
    return cbc_encrypt_raw(key.bytes, kZeroIv, plaintext);
}

std::string det_decrypt(const ColumnKey &key, std::string_view ciphertext) {
    if (key.scheme != Scheme::deterministic &&
        key.scheme != Scheme::order_preserving)
        throw SchemeError("det_decrypt: key scheme must be deterministic or "
                          "order_preserving");
    return cbc_decrypt_raw(key.bytes, kZeroIv, ciphertext);
}

std::string prob_encrypt(const ColumnKey &key, std::string_view plaintext) {
    if (key.scheme != Scheme::probabilistic)
        throw SchemeError("prob_encrypt: key scheme must be probabilistic");
    std::string iv = random_bytes(kBlock);
    return iv + cbc_encrypt_raw(key.bytes, iv, plaintext);
}

std::string prob_decrypt(const ColumnKey &key, std::string_view ciphertext) {
    if (key.scheme != Scheme::probabilistic)
        throw SchemeError("prob_decrypt: key scheme must be probabilistic");
    if (ciphertext.size() < 2 * kBlock)
        throw CryptoError("prob_decrypt: truncated ciphertext");
    return cbc_decrypt_raw(key.bytes, ciphertext.substr(0, kBlock),
                           ciphertext.substr(kBlock));
}

std::string pseudonym(const ColumnKey &key, std::string_view plaintext) {
    if (key.scheme != Scheme::pseudonym)
        throw SchemeError("pseudonym: key scheme must be pseudonym");
    return hmac_sha256(key.bytes, plaintext);
}

std::vector<std::string> split_searchwords(std::string_view text) {
    std::vector<std::string> words;
    std::string cur;
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!cur.empty()) {
                words.push_back(std::move(cur));
                cur.clear();
            }
        } else {
            cur += char(std::tolower(static_cast<unsigned char>(ch)));
        }
    }
    if (!cur.empty())
        words.push_back(std::move(cur));
    return words;
}

std::vector<std::string> searchwords(const ColumnKey &key,
                                     std::string_view text) {
    if (key.scheme != Scheme::searchwords)
        throw SchemeError("searchwords: key scheme must be searchwords");
    std::vector<std::string> tokens;
    for (const auto &w : split_searchwords(text))
        tokens.push_back(hmac_sha256(key.bytes, w));
    return tokens;
}

// ---- Keyset ----

static std::string now_iso8601() {
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

Keyset Keyset::generate(int paillier_bits) {
    Keyset ks;
    ks.master_ = random_bytes(kKeyLen);
    auto kp = PaillierKeypair::generate(paillier_bits);
    ks.paillier_pub_ = kp.pub;
    ks.paillier_priv_ = kp.priv;
    ks.kdf_ = kKdfId;
    ks.created_at_ = now_iso8601();
    return ks;
}

const std::string &Keyset::master_key() const {
    if (!master_)
        throw CryptoError("keyset has no master key");
    return *master_;
}

std::optional<ColumnKey> Keyset::column_key(std::string_view table,
                                            std::string_view column,
                                            Scheme scheme) const {
    if (master_)
        return derive_column_key(*master_, table, column, scheme);
    std::string id;
    id.append(table).append("/").append(column).append("/").append(
        scheme_name(scheme));
    auto it = column_keys_.find(id);
    if (it == column_keys_.end())
        return std::nullopt;
    return ColumnKey{it->second, scheme};
}

ColumnKey Keyset::require_column_key(std::string_view table,
                                     std::string_view column,
                                     Scheme scheme) const {
    auto k = column_key(table, column, scheme);
    if (!k)
        throw CryptoError("keyset holds no key for " + std::string(table) + "." +
                          std::string(column));
    return *k;
}

const PaillierPrivate &Keyset::paillier_private() const {
    if (!paillier_priv_)
        throw CryptoError("keyset has no Paillier private key");
    return *paillier_priv_;
}

Keyset Keyset::restricted(
    const std::vector<std::tuple<std::string, std::string, Scheme>> &grants,
    bool include_paillier_private) const {
    Keyset ks;
    for (const auto &[table, column, scheme] : grants) {
        ColumnKey k = require_column_key(table, column, scheme);
        ks.column_keys_[table + "/" + column + "/" + scheme_name(scheme)] =
            k.bytes;
    }
    ks.paillier_pub_ = paillier_pub_;
    if (include_paillier_private)
        ks.paillier_priv_ = paillier_priv_;
    ks.kdf_ = kdf_;
    ks.created_at_ = created_at_;
    return ks;
}

std::string Keyset::to_json() const {
    json j;
    j["version"] = 1;
    j["kdf"] = kdf_;
    j["created_at"] = created_at_;
    j["master_key"] = master_ ? json(to_base64(*master_)) : json(nullptr);
    json cols = json::object();
    for (const auto &[id, key] : column_keys_)
        cols[id] = to_base64(key);
    j["column_keys"] = cols;
    json p;
    p["bits"] = paillier_pub_.bits;
    p["n"] = mpz_to_dec(paillier_pub_.n);
    p["g"] = mpz_to_dec(paillier_pub_.g);
    p["lambda"] =
        paillier_priv_ ? json(mpz_to_dec(paillier_priv_->lambda)) : json(nullptr);
    p["mu"] = paillier_priv_ ? json(mpz_to_dec(paillier_priv_->mu)) : json(nullptr);
    j["paillier"] = p;
    return j.dump(2) + "\n";
}

Keyset Keyset::parse(std::string_view json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception &e) {
        throw DataError(std::string("keyset: malformed JSON: ") + e.what());
    }
    try {
        if (j.at("version").get<int>() != 1)
            throw DataError("keyset: unsupported version");
        Keyset ks;
        ks.kdf_ = j.at("kdf").get<std::string>();
        if (ks.kdf_ != kKdfId)
            throw DataError("keyset: unknown KDF '" + ks.kdf_ + "'");
        ks.created_at_ = j.value("created_at", "");
        if (!j.at("master_key").is_null()) {
            ks.master_ = from_base64(j.at("master_key").get<std::string>());
            if (ks.master_->size() != kKeyLen)
                throw DataError("keyset: master key must be 32 bytes");
        }
        if (j.contains("column_keys"))
            for (auto &[id, v] : j.at("column_keys").items()) {
                std::string key = from_base64(v.get<std::string>());
                if (key.size() != kKeyLen)
                    throw DataError("keyset: column key must be 32 bytes");
                ks.column_keys_[id] = key;
            }
        const json &p = j.at("paillier");
        ks.paillier_pub_.bits = p.at("bits").get<int>();
        ks.paillier_pub_.n = mpz_from_dec(p.at("n").get<std::string>());
        ks.paillier_pub_.g = mpz_from_dec(p.at("g").get<std::string>());
        ks.paillier_pub_.n_squared = ks.paillier_pub_.n * ks.paillier_pub_.n;
        if (!p.at("lambda").is_null()) {
            PaillierPrivate priv;
            priv.lambda = mpz_from_dec(p.at("lambda").get<std::string>());
            priv.mu = mpz_from_dec(p.at("mu").get<std::string>());
            ks.paillier_priv_ = priv;
        }
        return ks;
    } catch (const json::exception &e) {
        throw DataError(std::string("keyset: missing or mistyped field: ") +
                        e.what());
    }
}

Keyset Keyset::load_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open keyset file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

void Keyset::save_file(const std::string &path, bool force) const {
    if (!force) {
        std::ifstream probe(path);
        if (probe.good())
            throw UsageError("keyset file '" + path +
                             "' already exists (use --force to overwrite)");
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write keyset file '" + path + "'");
    out << to_json();
    out.close();
    if (!out)
        throw IoError("short write to keyset file '" + path + "'");
    ::chmod(path.c_str(), 0600);
}

} // namespace opeq

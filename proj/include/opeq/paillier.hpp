#pragma once

#include <gmpxx.h>

#include <optional>
#include <string>

namespace opeq {

/*
 * Textbook Paillier with g = n + 1. Ciphertexts live in Z*_{n^2} and
 * multiply to add plaintexts, which is what lets the backend compute
 * SUM without ever holding a key that decrypts.
 */
struct PaillierPublic {
    mpz_class n;
    mpz_class g;
    mpz_class n_squared;
    int bits = 0;

    bool valid() const { return n > 0; }

    // c = g^m * r^n mod n^2 with fresh random r coprime to n.
    // Throws DataError unless 0 <= m < n.
    mpz_class encrypt(const mpz_class &m) const;
    // Test hook: explicit nonce.
    mpz_class encrypt_with_nonce(const mpz_class &m, const mpz_class &r) const;

    // Additive homomorphism: decrypts to (m1 + m2) mod n.
    mpz_class add(const mpz_class &c1, const mpz_class &c2) const;
};

struct PaillierPrivate {
    mpz_class lambda; // lcm(p-1, q-1)
    mpz_class mu;     // (L(g^lambda mod n^2))^-1 mod n
};

struct PaillierKeypair {
    PaillierPublic pub;
    PaillierPrivate priv;

    // Random primes of bits/2 each; bits >= 64.
    static PaillierKeypair generate(int bits);
    // Fixed primes, for small-parameter checks (p=5, q=7 and friends).
    static PaillierKeypair from_primes(const mpz_class &p, const mpz_class &q);

    mpz_class decrypt(const mpz_class &c) const;
};

mpz_class paillier_decrypt(const PaillierPublic &pub, const PaillierPrivate &priv,
                           const mpz_class &c);

// Decimal-string codec used everywhere ciphertexts hit rows or wire.
std::string mpz_to_dec(const mpz_class &v);
mpz_class mpz_from_dec(std::string_view s); // throws DataError

} // namespace opeq

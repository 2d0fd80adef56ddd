#include "opeq/paillier.hpp"
#include "opeq/bytes.hpp"
#include "opeq/errors.hpp"

namespace opeq {

// Uniform mpz in [0, bound) driven by the process CSPRNG.
static mpz_class random_below(const mpz_class &bound) {
    size_t bits = mpz_sizeinbase(bound.get_mpz_t(), 2);
    size_t nbytes = (bits + 7) / 8 + 8;
    mpz_class v;
    do {
        std::string raw = random_bytes(nbytes);
        mpz_import(v.get_mpz_t(), raw.size(), 1, 1, 0, 0, raw.data());
        v %= bound;
    } while (v < 0);
    return v;
}

static mpz_class random_prime(int bits) {
    mpz_class top = mpz_class(1) << (bits - 1);
    for (;;) {
        mpz_class cand = random_below(top) + top; // exactly `bits` bits
        // force the top two bits so p*q keeps the full modulus width
        mpz_setbit(cand.get_mpz_t(), bits - 2);
        mpz_class p;
        mpz_nextprime(p.get_mpz_t(), cand.get_mpz_t());
        if (mpz_sizeinbase(p.get_mpz_t(), 2) == size_t(bits))
            return p;
    }
}

static mpz_class L(const mpz_class &x, const mpz_class &n) {
    return (x - 1) / n;
}

mpz_class PaillierPublic::encrypt(const mpz_class &m) const {
    mpz_class r;
    do {
        r = random_below(n);
    } while (r == 0 || gcd(r, n) != 1);
    return encrypt_with_nonce(m, r);
}

mpz_class PaillierPublic::encrypt_with_nonce(const mpz_class &m,
                                             const mpz_class &r) const {
    if (m < 0 || m >= n)
        throw DataError("paillier: plaintext out of range [0, n)");
    mpz_class gm, rn;
    mpz_powm(gm.get_mpz_t(), g.get_mpz_t(), m.get_mpz_t(),
             n_squared.get_mpz_t());
    mpz_powm(rn.get_mpz_t(), r.get_mpz_t(), n.get_mpz_t(),
             n_squared.get_mpz_t());
    return mpz_class(gm * rn % n_squared);
}

mpz_class PaillierPublic::add(const mpz_class &c1, const mpz_class &c2) const {
    return mpz_class(c1 * c2 % n_squared);
}

PaillierKeypair PaillierKeypair::generate(int bits) {
    if (bits < 64)
        throw UsageError("paillier: modulus must be at least 64 bits");
    for (;;) {
        mpz_class p = random_prime(bits / 2);
        mpz_class q = random_prime(bits - bits / 2);
        if (p == q)
            continue;
        try {
            return from_primes(p, q);
        } catch (const CryptoError &) {
            // gcd(n, phi(n)) != 1 is possible for pathological prime
            // pairs; draw again
        }
    }
}

PaillierKeypair PaillierKeypair::from_primes(const mpz_class &p,
                                             const mpz_class &q) {
    if (p == q || p < 2 || q < 2)
        throw UsageError("paillier: need two distinct primes");
    PaillierKeypair kp;
    kp.pub.n = p * q;
    kp.pub.g = kp.pub.n + 1;
    kp.pub.n_squared = kp.pub.n * kp.pub.n;
    kp.pub.bits = int(mpz_sizeinbase(kp.pub.n.get_mpz_t(), 2));
    kp.priv.lambda = lcm(mpz_class(p - 1), mpz_class(q - 1));

    mpz_class gl;
    mpz_powm(gl.get_mpz_t(), kp.pub.g.get_mpz_t(), kp.priv.lambda.get_mpz_t(),
             kp.pub.n_squared.get_mpz_t());
    mpz_class l = L(gl, kp.pub.n);
    if (mpz_invert(kp.priv.mu.get_mpz_t(), l.get_mpz_t(),
                   kp.pub.n.get_mpz_t()) == 0)
        throw CryptoError("paillier: L(g^lambda) not invertible mod n");
    return kp;
}

mpz_class paillier_decrypt(const PaillierPublic &pub,
                           const PaillierPrivate &priv, const mpz_class &c) {
    if (c <= 0 || c >= pub.n_squared)
        throw DataError("paillier: ciphertext out of range");
    mpz_class cl;
    mpz_powm(cl.get_mpz_t(), c.get_mpz_t(), priv.lambda.get_mpz_t(),
             pub.n_squared.get_mpz_t());
    return mpz_class(L(cl, pub.n) * priv.mu % pub.n);
}

mpz_class PaillierKeypair::decrypt(const mpz_class &c) const {
    return paillier_decrypt(pub, priv, c);
}

std::string mpz_to_dec(const mpz_class &v) {
    return v.get_str(10);
}

mpz_class mpz_from_dec(std::string_view s) {
    if (s.empty())
        throw DataError("mpz: empty decimal string");
    for (size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (!(c >= '0' && c <= '9') && !(i == 0 && c == '-'))
            throw DataError("mpz: bad decimal string");
    }
    return mpz_class(std::string(s), 10);
}

} // namespace opeq

#pragma once

#include <stdexcept>
#include <string>

namespace opeq {

/*
 * Error classes map 1:1 onto CLI exit codes so callers can tell a
 * query syntax error from a scheme violation, a stale epoch, or a
 * backend failure without parsing messages.
 */
enum class ExitCode : int {
    ok = 0,
    internal = 1,
    usage = 2,
    query_syntax = 3,
    scheme = 4,
    epoch = 5,
    backend = 6,
    collision = 7,
    crypto = 8,
    data = 9,
    io = 10,
};

class Error : public std::runtime_error {
  public:
    explicit Error(const std::string &msg) : std::runtime_error(msg) {}
    virtual ExitCode exit_code() const { return ExitCode::internal; }
};

#define OPEQ_DEFINE_ERROR(Name, code)                                        \
    class Name : public Error {                                              \
      public:                                                                \
        explicit Name(const std::string &msg) : Error(msg) {}                \
        ExitCode exit_code() const override { return ExitCode::code; }       \
    }

OPEQ_DEFINE_ERROR(UsageError, usage);
// Query text failed to parse (syntax, not semantics).
OPEQ_DEFINE_ERROR(QuerySyntaxError, query_syntax);
// Schema violations and illegal op-for-scheme combinations.
OPEQ_DEFINE_ERROR(SchemeError, scheme);
// Plan/chunk epoch disagreement: garbage collection required first.
OPEQ_DEFINE_ERROR(EpochError, epoch);
OPEQ_DEFINE_ERROR(BackendError, backend);
// Code gap exhausted between two neighbors: re-encode required.
OPEQ_DEFINE_ERROR(CollisionError, collision);
// Decrypt/padding failures: corrupted or foreign ciphertext.
OPEQ_DEFINE_ERROR(CryptoError, crypto);
// Malformed input data (CSV/NDJSON cells, serialized state).
OPEQ_DEFINE_ERROR(DataError, data);
OPEQ_DEFINE_ERROR(IoError, io);

#undef OPEQ_DEFINE_ERROR

} // namespace opeq

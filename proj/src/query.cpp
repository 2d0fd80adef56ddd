#include "opeq/query.hpp"
#include "opeq/bytes.hpp"
#include "opeq/ingest.hpp"
#include "opeq/paillier.hpp"

#include <algorithm>
#include <cctype>
#include <thread>

namespace opeq {

// ---- tokenizer ----

namespace {

enum class Tok { ident, number, string, symbol, end };

struct Token {
    Tok kind = Tok::end;
    std::string text;  // identifiers uppercased separately when matched
    std::string upper; // keyword comparison form
    size_t pos = 0;
};

class Lexer {
public:
    explicit Lexer(std::string_view text) : text_(text) { advance(); }

    const Token &peek() const { return tok_; }

    Token take() {
        Token t = tok_;
        advance();
        return t;
    }

    [[noreturn]] void fail(const std::string &msg, size_t pos) const {
        throw QuerySyntaxError(msg + " at position " + std::to_string(pos + 1));
    }

private:
    void advance() {
        while (i_ < text_.size() &&
               std::isspace(static_cast<unsigned char>(text_[i_])))
            ++i_;
        tok_ = Token{};
        tok_.pos = i_;
        if (i_ >= text_.size()) {
            tok_.kind = Tok::end;
            return;
        }
        char c = text_[i_];
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t start = i_;
            while (i_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[i_])) ||
                    text_[i_] == '_'))
                ++i_;
            tok_.kind = Tok::ident;
            tok_.text = std::string(text_.substr(start, i_ - start));
            tok_.upper = tok_.text;
            for (char &u : tok_.upper)
                u = char(std::toupper(static_cast<unsigned char>(u)));
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            ((c == '-' || c == '+') && i_ + 1 < text_.size() &&
             std::isdigit(static_cast<unsigned char>(text_[i_ + 1])))) {
            size_t start = i_;
            ++i_;
            while (i_ < text_.size() &&
                   (std::isdigit(static_cast<unsigned char>(text_[i_])) ||
                    text_[i_] == '.'))
                ++i_;
            tok_.kind = Tok::number;
            tok_.text = std::string(text_.substr(start, i_ - start));
            return;
        }
        if (c == '\'') {
            ++i_;
            std::string value;
            for (;;) {
                if (i_ >= text_.size())
                    fail("unterminated string literal", tok_.pos);
                char s = text_[i_++];
                if (s == '\'') {
                    if (i_ < text_.size() && text_[i_] == '\'') {
                        value += '\'';
                        ++i_;
                        continue;
                    }
                    break;
                }
                value += s;
            }
            tok_.kind = Tok::string;
            tok_.text = std::move(value);
            return;
        }
        if (c == '<' || c == '>') {
            tok_.kind = Tok::symbol;
            tok_.text = c;
            ++i_;
            if (i_ < text_.size() && text_[i_] == '=') {
                tok_.text += '=';
                ++i_;
            }
            return;
        }
        if (c == '=' || c == ',' || c == '(' || c == ')' || c == '*') {
            tok_.kind = Tok::symbol;
            tok_.text = c;
            ++i_;
            return;
        }
        fail(std::string("unexpected character '") + c + "'", i_);
    }

    std::string_view text_;
    size_t i_ = 0;
    Token tok_;
};

bool is_keyword(const Token &t, std::string_view kw) {
    return t.kind == Tok::ident && t.upper == kw;
}

std::string expect_ident(Lexer &lex, const char *what) {
    Token t = lex.take();
    if (t.kind != Tok::ident)
        lex.fail(std::string("expected ") + what, t.pos);
    static const char *keywords[] = {"SELECT", "FROM",  "WHERE", "AND",
                                     "ORDER",  "BY",    "ASC",   "DESC",
                                     "LIMIT",  "SUM",   "CONTAINS"};
    for (const char *kw : keywords)
        if (t.upper == kw)
            lex.fail("'" + t.text + "' cannot be used as a name here", t.pos);
    return t.text;
}

void expect_symbol(Lexer &lex, const char *sym) {
    Token t = lex.take();
    if (t.kind != Tok::symbol || t.text != sym)
        lex.fail(std::string("expected '") + sym + "'", t.pos);
}

} // namespace

// ---- parser ----

QueryPlan parse_query(std::string_view text, const Schema &schema) {
    Lexer lex(text);
    QueryPlan plan;

    Token kw = lex.take();
    if (!is_keyword(kw, "SELECT"))
        lex.fail("query must start with SELECT", kw.pos);

    if (is_keyword(lex.peek(), "SUM")) {
        lex.take();
        expect_symbol(lex, "(");
        Token col = lex.take();
        if (col.kind != Tok::ident)
            lex.fail("expected a column name inside SUM()", col.pos);
        expect_symbol(lex, ")");
        plan.sum_column = col.text;
        const ColumnSpec &spec = schema.column(col.text);
        if (spec.scheme != Scheme::homomorphic)
            throw SchemeError("SUM needs a homomorphic column; '" + col.text +
                              "' is " + scheme_name(spec.scheme));
    } else {
        if (lex.peek().kind == Tok::symbol && lex.peek().text == "*")
            lex.fail("SELECT * is not supported; name the columns",
                     lex.peek().pos);
        for (;;) {
            std::string name = expect_ident(lex, "a column name");
            schema.index_of(name); // throws SchemeError on unknown columns
            plan.select.push_back(name);
            if (lex.peek().kind == Tok::symbol && lex.peek().text == ",") {
                lex.take();
                continue;
            }
            break;
        }
    }

    Token from = lex.take();
    if (!is_keyword(from, "FROM"))
        lex.fail("expected FROM", from.pos);
    std::string table = expect_ident(lex, "a table name");
    if (table != schema.table)
        throw SchemeError("query names table '" + table +
                          "' but the schema defines '" + schema.table + "'");
    plan.table = table;

    if (is_keyword(lex.peek(), "WHERE")) {
        lex.take();
        for (;;) {
            std::string column = expect_ident(lex, "a column name");
            const ColumnSpec &spec = schema.column(column);
            Predicate p;
            p.column = column;
            Token op = lex.take();
            if (op.kind == Tok::symbol) {
                if (op.text == "=")
                    p.op = PredOp::eq;
                else if (op.text == "<")
                    p.op = PredOp::lt;
                else if (op.text == "<=")
                    p.op = PredOp::le;
                else if (op.text == ">")
                    p.op = PredOp::gt;
                else if (op.text == ">=")
                    p.op = PredOp::ge;
                else
                    lex.fail("expected a comparison operator", op.pos);
            } else if (is_keyword(op, "CONTAINS")) {
                p.op = PredOp::contains;
            } else {
                lex.fail("expected a comparison operator", op.pos);
            }

            Token lit = lex.take();
            std::string raw;
            if (lit.kind == Tok::string) {
                raw = lit.text;
            } else if (lit.kind == Tok::number) {
                raw = lit.text;
            } else {
                lex.fail("expected a literal value", lit.pos);
            }

            switch (p.op) {
            case PredOp::eq:
                if (spec.scheme != Scheme::deterministic &&
                    spec.scheme != Scheme::pseudonym)
                    throw SchemeError(
                        "'=' needs a deterministic or pseudonym column; '" +
                        column + "' is " + scheme_name(spec.scheme));
                break;
            case PredOp::contains:
                if (spec.scheme != Scheme::searchwords)
                    throw SchemeError("CONTAINS needs a searchwords column; '" +
                                      column + "' is " +
                                      scheme_name(spec.scheme));
                break;
            default:
                if (spec.scheme != Scheme::order_preserving)
                    throw SchemeError(
                        "range comparisons need the order-preserving column; '" +
                        column + "' is " + scheme_name(spec.scheme));
            }

            if (p.op == PredOp::contains) {
                auto words = split_searchwords(raw);
                if (words.size() != 1)
                    lex.fail("CONTAINS takes exactly one search word", lit.pos);
                p.literal = words[0];
            } else {
                try {
                    p.literal = canonicalize_cell(spec, raw);
                } catch (const DataError &e) {
                    throw QuerySyntaxError(e.what());
                }
            }
            plan.where.push_back(std::move(p));

            if (is_keyword(lex.peek(), "AND")) {
                lex.take();
                continue;
            }
            break;
        }
    }

    if (is_keyword(lex.peek(), "ORDER")) {
        Token t = lex.take();
        if (!is_keyword(lex.peek(), "BY"))
            lex.fail("expected BY after ORDER", lex.peek().pos);
        lex.take();
        std::string column = expect_ident(lex, "a column name");
        const ColumnSpec &spec = schema.column(column);
        if (spec.scheme != Scheme::order_preserving)
            throw SchemeError("ORDER BY needs the order-preserving column; '" +
                              column + "' is " + scheme_name(spec.scheme));
        plan.has_order = true;
        plan.order_column = column;
        if (is_keyword(lex.peek(), "ASC")) {
            lex.take();
        } else if (is_keyword(lex.peek(), "DESC")) {
            lex.take();
            plan.order_desc = true;
        }
        if (plan.sum_column)
            lex.fail("SUM queries cannot use ORDER BY", t.pos);
    }

    if (is_keyword(lex.peek(), "LIMIT")) {
        Token t = lex.take();
        Token n = lex.take();
        if (n.kind != Tok::number)
            lex.fail("expected a row count after LIMIT", n.pos);
        try {
            plan.limit = u64_from_string(n.text);
        } catch (const DataError &) {
            lex.fail("LIMIT must be a non-negative integer", n.pos);
        }
        if (plan.sum_column)
            lex.fail("SUM queries cannot use LIMIT", t.pos);
    }

    Token end = lex.take();
    if (end.kind != Tok::end)
        lex.fail("unexpected trailing input", end.pos);
    return plan;
}

// ---- rewrite ----

EncryptedPlan rewrite_query(const QueryPlan &plan, const Schema &schema,
                            const Keyset &keys, const OpeState *state,
                            uint64_t epoch) {
    EncryptedPlan enc;
    enc.table = plan.table;
    enc.epoch = epoch;
    enc.select = plan.select;
    enc.sum_column = plan.sum_column;
    enc.has_order = plan.has_order;
    enc.order_column = plan.order_column;
    enc.order_desc = plan.order_desc;
    enc.limit = plan.limit;

    for (const auto &p : plan.where) {
        const ColumnSpec &spec = schema.column(p.column);
        EncPredicate ep;
        ep.column = p.column;
        switch (p.op) {
        case PredOp::eq: {
            ColumnKey key =
                keys.require_column_key(schema.table, p.column, spec.scheme);
            std::string ct = spec.scheme == Scheme::pseudonym
                                 ? pseudonym(key, p.literal)
                                 : det_encrypt(key, p.literal);
            ep.op = PredOp::eq;
            ep.value_b64 = to_base64(ct);
            break;
        }
        case PredOp::contains: {
            ColumnKey key = keys.require_column_key(schema.table, p.column,
                                                    Scheme::searchwords);
            ep.op = PredOp::contains;
            ep.value_b64 = to_base64(hmac_sha256(key.bytes, p.literal));
            break;
        }
        default: {
            if (!state)
                throw UsageError("range predicates need the order-preserving "
                                 "dictionary");
            ProbeResult probe = state->probe(comparison_key(spec, p.literal));
            switch (probe.kind) {
            case ProbeResult::Kind::exact:
                ep.op = p.op;
                ep.code = probe.code;
                break;
            case ProbeResult::Kind::gap:
                // the literal is absent: any code inside its gap separates
                // the table into the same two halves, with strict bounds
                ep.op = (p.op == PredOp::lt || p.op == PredOp::le) ? PredOp::lt
                                                                   : PredOp::gt;
                ep.code = probe.code;
                break;
            case ProbeResult::Kind::exhausted:
                throw CollisionError(
                    "query literal falls in an exhausted code gap; garbage "
                    "collection must re-encode the column first");
            }
            break;
        }
        }
        enc.where.push_back(std::move(ep));
    }
    return enc;
}

// ---- merge ----

std::vector<ResultRow> merge_rows(std::vector<std::vector<ResultRow>> per_chunk,
                                  bool ordered, bool desc,
                                  std::optional<uint64_t> limit) {
    std::vector<ResultRow> all;
    size_t total = 0;
    for (const auto &part : per_chunk)
        total += part.size();
    all.reserve(total);
    for (auto &part : per_chunk)
        for (auto &row : part)
            all.push_back(std::move(row));
    if (ordered) {
        // each part arrives sorted with ties in row order; a stable sort
        // of the concatenation equals the k-way merge by
        // (code, chunk, row)
        if (desc)
            std::stable_sort(all.begin(), all.end(),
                             [](const ResultRow &a, const ResultRow &b) {
                                 return a.code > b.code;
                             });
        else
            std::stable_sort(all.begin(), all.end(),
                             [](const ResultRow &a, const ResultRow &b) {
                                 return a.code < b.code;
                             });
    }
    if (limit && all.size() > *limit)
        all.resize(*limit);
    return all;
}

// ---- client ----

QueryClient::QueryClient(Backend &backend, const Keyset &keys, Schema schema,
                         std::string state_dir)
    : backend_(backend), keys_(keys), schema_(std::move(schema)),
      state_dir_(std::move(state_dir)) {}

QueryResult QueryClient::run(std::string_view sql) {
    return execute(parse_query(sql, schema_));
}

QueryResult QueryClient::execute(const QueryPlan &plan) {
    std::optional<OpeState> state;
    uint64_t epoch = 0;
    if (schema_.ope_column()) {
        state = load_ope_state(state_dir_, schema_, keys_);
        epoch = state->epoch();
    }

    TableInfo info = backend_.list_chunks(schema_.table);
    for (const auto &c : info.chunks)
        if (c.epoch != epoch)
            throw EpochError(
                "chunk " + std::to_string(c.id) + " is at epoch " +
                std::to_string(c.epoch) + " but the dictionary is at " +
                std::to_string(epoch) + "; garbage collection required");

    EncryptedPlan enc = rewrite_query(plan, schema_, keys_,
                                      state ? &*state : nullptr, epoch);

    // fan out over chunks; each worker queries a disjoint slice
    std::vector<std::vector<ResultRow>> per_chunk(info.chunks.size());
    std::vector<std::optional<std::string>> sums(info.chunks.size());
    std::vector<uint64_t> matched(info.chunks.size(), 0);
    size_t workers = std::min<size_t>(
        {info.chunks.size(), std::thread::hardware_concurrency(), 8});
    std::vector<std::exception_ptr> errors(std::max<size_t>(workers, 1));
    auto run_slice = [&](size_t w, size_t stride) {
        for (size_t i = w; i < info.chunks.size(); i += stride) {
            ChunkQueryResult r = backend_.exec_chunk_query(
                schema_.table, info.chunks[i].id, enc);
            per_chunk[i] = std::move(r.rows);
            sums[i] = std::move(r.sum_ct);
            matched[i] = r.matched;
        }
    };
    if (workers <= 1) {
        run_slice(0, 1);
    } else {
        std::vector<std::thread> threads;
        for (size_t w = 0; w < workers; ++w)
            threads.emplace_back([&, w] {
                try {
                    run_slice(w, workers);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        for (auto &t : threads)
            t.join();
        for (auto &e : errors)
            if (e)
                std::rethrow_exception(e);
    }

    QueryResult result;
    result.chunks = info.chunks.size();
    for (uint64_t m : matched)
        result.matched += m;

    if (plan.sum_column) {
        const PaillierPublic &pub = keys_.paillier_public();
        mpz_class acc = 1;
        for (const auto &s : sums)
            if (s)
                acc = pub.add(acc, mpz_from_dec(*s));
        if (!keys_.has_paillier_private())
            throw CryptoError("summing needs the private key; this keyset "
                              "only carries the public half");
        mpz_class total = paillier_decrypt(pub, keys_.paillier_private(), acc);
        result.sum_value = total.get_str();
        result.columns.push_back("sum(" + *plan.sum_column + ")");
        return result;
    }

    std::vector<ResultRow> merged = merge_rows(
        std::move(per_chunk), plan.has_order, plan.order_desc, plan.limit);
    decrypt_rows(plan, merged, result);
    return result;
}

void QueryClient::decrypt_rows(const QueryPlan &plan,
                               std::vector<ResultRow> &merged,
                               QueryResult &result) const {
    result.columns = plan.select;
    struct ColPlan {
        const ColumnSpec *spec;
        std::optional<ColumnKey> key;
    };
    std::vector<ColPlan> cols;
    for (const auto &name : plan.select) {
        ColPlan cp;
        cp.spec = &schema_.column(name);
        switch (cp.spec->scheme) {
        case Scheme::deterministic:
        case Scheme::probabilistic:
        case Scheme::order_preserving:
            cp.key = keys_.column_key(schema_.table, name, cp.spec->scheme);
            if (!cp.key)
                result.fully_decrypted = false;
            break;
        default:
            break; // plaintext, tokens and pseudonyms pass through
        }
        cols.push_back(std::move(cp));
    }
    bool need_private = false;
    for (const auto &cp : cols)
        if (cp.spec->scheme == Scheme::homomorphic)
            need_private = true;
    const PaillierPublic &pub = keys_.paillier_public();
    const PaillierPrivate *priv = nullptr;
    if (need_private) {
        if (keys_.has_paillier_private())
            priv = &keys_.paillier_private();
        else
            result.fully_decrypted = false;
    }

    result.rows.reserve(merged.size());
    for (const auto &row : merged) {
        std::vector<std::string> out;
        out.reserve(cols.size());
        for (size_t c = 0; c < cols.size(); ++c) {
            const ColPlan &cp = cols[c];
            const std::string &cell = row.cells[c];
            switch (cp.spec->scheme) {
            case Scheme::none:
            case Scheme::pseudonym:
            case Scheme::searchwords:
                out.push_back(cell);
                break;
            case Scheme::deterministic:
                out.push_back(cp.key ? det_decrypt(*cp.key, from_base64(cell))
                                     : cell);
                break;
            case Scheme::probabilistic:
                out.push_back(cp.key ? prob_decrypt(*cp.key, from_base64(cell))
                                     : cell);
                break;
            case Scheme::homomorphic:
                if (priv)
                    out.push_back(
                        paillier_decrypt(pub, *priv, mpz_from_dec(cell))
                            .get_str());
                else
                    out.push_back(cell);
                break;
            case Scheme::order_preserving: {
                auto [ct_b64, code] = split_combined(cell);
                (void)code;
                out.push_back(cp.key ? det_decrypt(*cp.key, from_base64(ct_b64))
                                     : cell);
                break;
            }
            }
        }
        result.rows.push_back(std::move(out));
    }
}

} // namespace opeq

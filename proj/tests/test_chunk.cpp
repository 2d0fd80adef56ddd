#include <doctest.h>

#include "opeq/bytes.hpp"
#include "opeq/chunk.hpp"
#include "opeq/errors.hpp"

using namespace opeq;

static const char *kDemoSchema = R"({
  "table": "cc",
  "columns": [
    {"name": "pan",      "type": "integer", "encrypt": "order_preserving"},
    {"name": "holder",   "type": "text",    "encrypt": "pseudonym"},
    {"name": "memo",     "type": "text",    "encrypt": "searchwords"},
    {"name": "balance",  "type": "integer", "encrypt": "homomorphic"},
    {"name": "category", "type": "text",    "encrypt": "deterministic"},
    {"name": "note",     "type": "text",    "encrypt": "probabilistic"},
    {"name": "region",   "type": "text"}
  ]
})";

TEST_CASE("backend column layout derives from schemes only") {
    Schema s = Schema::parse(kDemoSchema);
    auto cols = backend_columns_for(s);
    REQUIRE(cols.size() == 7);
    CHECK(cols[0].kind == BackendColumn::Kind::ordered);
    CHECK(cols[1].kind == BackendColumn::Kind::opaque);   // pseudonym
    CHECK(cols[2].kind == BackendColumn::Kind::tokens);   // searchwords
    CHECK(cols[3].kind == BackendColumn::Kind::homomorphic);
    CHECK(cols[4].kind == BackendColumn::Kind::opaque);   // deterministic
    CHECK(cols[5].kind == BackendColumn::Kind::opaque);   // probabilistic
    CHECK(cols[6].kind == BackendColumn::Kind::plain);

    CHECK(chunk_headers(s) ==
          std::vector<std::string>{"pan__enc", "pan__ope", "holder__enc",
                                   "memo__enc", "balance__enc", "category__enc",
                                   "note__enc", "region"});

    TableMeta meta = table_meta_for(s, "35");
    CHECK(meta.name == "cc");
    CHECK(meta.paillier_n == "35");
    CHECK(meta.columns == cols);
}

TEST_CASE("chunk serialization round-trips") {
    Schema s = Schema::parse(kDemoSchema);
    std::vector<CipherRow> rows;
    for (int i = 0; i < 3; ++i) {
        CipherRow r;
        std::string ct = to_base64("cipher" + std::to_string(i));
        r.code = OrderCode(100 + i);
        r.cells = {ct + "|" + u64_to_string(*r.code),
                   to_base64("holder-token"),
                   to_base64("tok1") + " " + to_base64("tok2"),
                   "123456789",
                   to_base64("det-ct"),
                   to_base64("prob-ct"),
                   "west"};
        rows.push_back(std::move(r));
    }

    std::string csv = serialize_chunk(s, rows);
    auto back = parse_chunk(s, csv);
    REQUIRE(back.size() == rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].cells == rows[i].cells);
        CHECK(back[i].code == rows[i].code);
    }
    // the payload header is the backend column layout
    CHECK(csv.substr(0, csv.find('\n')) ==
          "pan__enc,pan__ope,holder__enc,memo__enc,balance__enc,category__enc,"
          "note__enc,region");
}

TEST_CASE("parse rejects header or code-column disagreement") {
    Schema s = Schema::parse(kDemoSchema);
    CipherRow r;
    r.code = 7;
    r.cells = {to_base64("x") + "|7", to_base64("h"), to_base64("m"), "1",
               to_base64("c"), to_base64("n"), "east"};
    std::string csv = serialize_chunk(s, {r});

    // tamper: make the __ope column disagree with the combined field
    size_t pos = csv.find("|7");
    REQUIRE(pos != std::string::npos);
    std::string bad = csv;
    bad.replace(pos, 2, "|8");
    CHECK_THROWS_AS(parse_chunk(s, bad), DataError);

    std::string badheader = "x" + csv;
    CHECK_THROWS_AS(parse_chunk(s, badheader), DataError);

    // short row
    std::string shortrow = csv.substr(0, csv.find('\n') + 1) + "a,b\n";
    CHECK_THROWS_AS(parse_chunk(s, shortrow), DataError);
}

TEST_CASE("combined field splits on exactly one separator") {
    auto [ct, code] = split_combined("YWJj|42");
    CHECK(ct == "YWJj");
    CHECK(code == 42);
    CHECK_THROWS_AS(split_combined("YWJj42"), DataError);
    CHECK_THROWS_AS(split_combined("a|b|3"), DataError);
    CHECK_THROWS_AS(split_combined("YWJj|"), DataError);
    CHECK_THROWS_AS(split_combined("|42"), DataError);
}

TEST_CASE("chunk without an order-preserving column has no code fields") {
    Schema s = Schema::parse(R"({"table":"t","columns":[
        {"name":"a","type":"text","encrypt":"deterministic"},
        {"name":"b","type":"text"}]})");
    CHECK(chunk_headers(s) == std::vector<std::string>{"a__enc", "b"});
    CipherRow r;
    r.cells = {to_base64("ct"), "plain"};
    auto back = parse_chunk(s, serialize_chunk(s, {r}));
    REQUIRE(back.size() == 1);
    CHECK_FALSE(back[0].code.has_value());
    CHECK(back[0].cells == r.cells);
}

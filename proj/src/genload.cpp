#include "opeq/genload.hpp"

namespace opeq {

namespace {

// splitmix64: tiny, seedable and identical everywhere, which keeps
// generated load files reproducible across platforms and library
// versions (std::mt19937 would do, but its distributions are not
// portable).
struct Rng {
    uint64_t state;
    explicit Rng(uint64_t seed) : state(seed) {}
    uint64_t next() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    uint64_t below(uint64_t bound) { return next() % bound; }
};

const char *kMemoWords[] = {
    "grocery", "fuel",    "travel",  "refund",   "monthly", "annual",
    "online",  "retail",  "pending", "cleared",  "foreign", "domestic",
    "card",    "present", "manual",  "review",   "gift",    "bonus",
    "standing", "order",  "utility", "insurance", "medical", "transfer"};

const char *kCategories[] = {"retail", "fuel",   "travel", "grocery",
                             "dining", "online", "cash",   "other"};

const char *kRegions[] = {"north", "south", "east", "west", "central", "coast"};

} // namespace

Schema demo_schema() {
    return Schema::parse(R"({
        "table": "cc",
        "columns": [
            {"name": "pan",      "type": "integer", "encrypt": "order_preserving"},
            {"name": "holder",   "type": "text",    "encrypt": "pseudonym"},
            {"name": "memo",     "type": "text",    "encrypt": "searchwords"},
            {"name": "balance",  "type": "integer", "encrypt": "homomorphic"},
            {"name": "category", "type": "text",    "encrypt": "deterministic"},
            {"name": "note",     "type": "text",    "encrypt": "probabilistic"},
            {"name": "region",   "type": "text",    "encrypt": "none"}
        ]
    })");
}

std::vector<int64_t> demo_pans(uint64_t rows, uint64_t seed) {
    Rng rng(seed);
    std::vector<int64_t> pans;
    pans.reserve(rows);
    for (uint64_t i = 0; i < rows; ++i) {
        // one row in ten reuses an account already seen
        if (!pans.empty() && rng.below(10) == 0) {
            pans.push_back(pans[rng.below(pans.size())]);
        } else {
            pans.push_back(
                int64_t(1000000000000000ull + rng.below(9000000000000000ull)));
        }
    }
    return pans;
}

void write_demo_csv(std::ostream &out, uint64_t rows, uint64_t seed) {
    std::vector<int64_t> pans = demo_pans(rows, seed);
    Rng rng(seed ^ 0xa5a5a5a5a5a5a5a5ull);
    uint64_t holders = rows / 4 + 1;
    out << "pan,holder,memo,balance,category,note,region\n";
    std::string line;
    for (uint64_t i = 0; i < rows; ++i) {
        line.clear();
        line += std::to_string(pans[i]);
        line += ",user_";
        line += std::to_string(rng.below(holders));
        line += ',';
        uint64_t words = 2 + rng.below(3);
        for (uint64_t w = 0; w < words; ++w) {
            if (w)
                line += ' ';
            line += kMemoWords[rng.below(std::size(kMemoWords))];
        }
        line += ',';
        line += std::to_string(rng.below(1000000));
        line += ',';
        line += kCategories[rng.below(std::size(kCategories))];
        line += ",entry ";
        line += std::to_string(rng.below(100000));
        line += ',';
        line += kRegions[rng.below(std::size(kRegions))];
        line += '\n';
        out << line;
    }
}

} // namespace opeq

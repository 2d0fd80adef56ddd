/*
 * Plaintext reference engine for tests. Executes the same query plans
 * directly over plaintext rows, written independently of the encrypted
 * pipeline: plain string/number comparisons, std::stable_sort, nothing
 * shared with the rewriter or backend beyond the plan structs.
 *
 * Row order mirrors the loaded table: rows appear in the order the
 * ingest proxy uploaded them (sorted within each load, loads
 * concatenated), so ordered queries must agree with the encrypted path
 * even on ties.
 */
#pragma once

#include "opeq/query.hpp"
#include "opeq/schema.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace opeq::testsupport {

class PlainEngine {
public:
    explicit PlainEngine(Schema schema) : schema_(std::move(schema)) {}

    // Rows must arrive canonicalized and in upload order.
    void add_rows(const std::vector<std::vector<std::string>> &rows) {
        for (const auto &r : rows)
            rows_.push_back(r);
    }

    struct Output {
        std::vector<std::vector<std::string>> rows;
        std::optional<std::string> sum;
        uint64_t matched = 0;
    };

    Output run(const QueryPlan &plan) const {
        Output out;
        std::vector<size_t> hits;
        for (size_t i = 0; i < rows_.size(); ++i)
            if (matches(rows_[i], plan.where))
                hits.push_back(i);
        out.matched = hits.size();

        if (plan.sum_column) {
            size_t col = schema_.index_of(*plan.sum_column);
            unsigned long long total = 0;
            for (size_t i : hits)
                total += std::stoull(rows_[i][col]);
            out.sum = std::to_string(total);
            return out;
        }

        if (plan.has_order) {
            size_t col = schema_.index_of(plan.order_column);
            const ColumnSpec &spec = schema_.columns[col];
            bool desc = plan.order_desc;
            std::stable_sort(hits.begin(), hits.end(),
                             [&](size_t a, size_t b) {
                                 const std::string &va = rows_[a][col];
                                 const std::string &vb = rows_[b][col];
                                 int c = compare(spec, va, vb);
                                 return desc ? c > 0 : c < 0;
                             });
        }
        if (plan.limit && hits.size() > *plan.limit)
            hits.resize(*plan.limit);

        std::vector<size_t> proj;
        for (const auto &name : plan.select)
            proj.push_back(schema_.index_of(name));
        for (size_t i : hits) {
            std::vector<std::string> row;
            for (size_t c : proj) {
                const ColumnSpec &spec = schema_.columns[c];
                // pseudonym and searchword cells never decrypt; tests
                // compare those through the token mapping instead
                row.push_back(rows_[i][c]);
                (void)spec;
            }
            out.rows.push_back(std::move(row));
        }
        return out;
    }

    const std::vector<std::vector<std::string>> &rows() const { return rows_; }

private:
    // three-way value comparison honoring the column type
    static int compare(const ColumnSpec &spec, const std::string &a,
                       const std::string &b) {
        if (spec.type == DataType::text)
            return a.compare(b);
        long double na = std::stold(a), nb = std::stold(b);
        if (na < nb)
            return -1;
        if (na > nb)
            return 1;
        return 0;
    }

    bool matches(const std::vector<std::string> &row,
                 const std::vector<Predicate> &where) const {
        for (const auto &p : where) {
            size_t col = schema_.index_of(p.column);
            const ColumnSpec &spec = schema_.columns[col];
            const std::string &cell = row[col];
            bool ok = true;
            switch (p.op) {
            case PredOp::eq:
                ok = cell == p.literal;
                break;
            case PredOp::contains: {
                ok = false;
                for (const auto &w : split_searchwords(cell))
                    if (w == p.literal) {
                        ok = true;
                        break;
                    }
                break;
            }
            case PredOp::lt:
                ok = compare(spec, cell, p.literal) < 0;
                break;
            case PredOp::le:
                ok = compare(spec, cell, p.literal) <= 0;
                break;
            case PredOp::gt:
                ok = compare(spec, cell, p.literal) > 0;
                break;
            case PredOp::ge:
                ok = compare(spec, cell, p.literal) >= 0;
                break;
            }
            if (!ok)
                return false;
        }
        return true;
    }

    Schema schema_;
    std::vector<std::vector<std::string>> rows_;
};

} // namespace opeq::testsupport

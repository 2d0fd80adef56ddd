#include "opeq/backend.hpp"
#include "opeq/bytes.hpp"

#include <nlohmann/json.hpp>

using json = nlohmann::ordered_json;

namespace opeq {

const char *backend_kind_name(BackendColumn::Kind k) {
    switch (k) {
    case BackendColumn::Kind::plain: return "plain";
    case BackendColumn::Kind::opaque: return "opaque";
    case BackendColumn::Kind::tokens: return "tokens";
    case BackendColumn::Kind::homomorphic: return "homomorphic";
    case BackendColumn::Kind::ordered: return "ordered";
    }
    return "?";
}

BackendColumn::Kind backend_kind_from_name(std::string_view name) {
    for (auto k : {BackendColumn::Kind::plain, BackendColumn::Kind::opaque,
                   BackendColumn::Kind::tokens, BackendColumn::Kind::homomorphic,
                   BackendColumn::Kind::ordered})
        if (name == backend_kind_name(k))
            return k;
    throw DataError("unknown backend column kind '" + std::string(name) + "'");
}

std::vector<std::string> backend_headers(const std::vector<BackendColumn> &cols) {
    std::vector<std::string> headers;
    for (const auto &c : cols) {
        if (c.kind == BackendColumn::Kind::plain) {
            headers.push_back(c.name);
        } else {
            headers.push_back(c.name + "__enc");
            if (c.kind == BackendColumn::Kind::ordered)
                headers.push_back(c.name + "__ope");
        }
    }
    return headers;
}

const char *pred_op_name(PredOp op) {
    switch (op) {
    case PredOp::eq: return "eq";
    case PredOp::lt: return "lt";
    case PredOp::le: return "le";
    case PredOp::gt: return "gt";
    case PredOp::ge: return "ge";
    case PredOp::contains: return "contains";
    }
    return "?";
}

PredOp pred_op_from_name(std::string_view name) {
    for (auto op : {PredOp::eq, PredOp::lt, PredOp::le, PredOp::gt, PredOp::ge,
                    PredOp::contains})
        if (name == pred_op_name(op))
            return op;
    throw DataError("unknown predicate op '" + std::string(name) + "'");
}

std::string EncryptedPlan::to_json() const {
    json j;
    j["table"] = table;
    j["epoch"] = epoch;
    j["select"] = select;
    j["sum"] = sum_column ? json(*sum_column) : json(nullptr);
    json preds = json::array();
    for (const auto &p : where) {
        json pj;
        pj["column"] = p.column;
        pj["op"] = pred_op_name(p.op);
        if (p.op == PredOp::eq || p.op == PredOp::contains)
            pj["value"] = p.value_b64;
        else
            pj["code"] = u64_to_string(p.code);
        preds.push_back(pj);
    }
    j["where"] = preds;
    if (has_order) {
        json oj;
        oj["column"] = order_column;
        oj["desc"] = order_desc;
        j["order"] = oj;
    } else {
        j["order"] = nullptr;
    }
    j["limit"] = limit ? json(*limit) : json(nullptr);
    return j.dump();
}

EncryptedPlan EncryptedPlan::from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception &e) {
        throw BackendFault("bad_plan",
                           std::string("plan is not valid JSON: ") + e.what());
    }
    try {
        EncryptedPlan plan;
        plan.table = j.at("table").get<std::string>();
        plan.epoch = j.at("epoch").get<uint64_t>();
        plan.select = j.at("select").get<std::vector<std::string>>();
        if (!j.at("sum").is_null())
            plan.sum_column = j.at("sum").get<std::string>();
        for (const auto &pj : j.at("where")) {
            EncPredicate p;
            p.column = pj.at("column").get<std::string>();
            p.op = pred_op_from_name(pj.at("op").get<std::string>());
            if (p.op == PredOp::eq || p.op == PredOp::contains)
                p.value_b64 = pj.at("value").get<std::string>();
            else
                p.code = u64_from_string(pj.at("code").get<std::string>());
            plan.where.push_back(std::move(p));
        }
        if (!j.at("order").is_null()) {
            plan.has_order = true;
            plan.order_column = j.at("order").at("column").get<std::string>();
            plan.order_desc = j.at("order").at("desc").get<bool>();
        }
        if (!j.at("limit").is_null())
            plan.limit = j.at("limit").get<uint64_t>();
        return plan;
    } catch (const json::exception &e) {
        throw BackendFault("bad_plan",
                           std::string("plan field missing or mistyped: ") +
                               e.what());
    } catch (const DataError &e) {
        throw BackendFault("bad_plan", e.what());
    }
}

} // namespace opeq

#include "stq/result.hpp"

#include <cmath>

#include <json.hpp>

#include "stq/error.hpp"
#include "stq/ingest.hpp"
#include "stq/text.hpp"

namespace stq {

using nlohmann::json;

namespace {

json nullable(const Nullable& v) { return v ? json(*v) : json(nullptr); }

Nullable read_nullable(const json& j) {
    if (j.is_null()) {
        return std::nullopt;
    }
    return j.get<double>();
}

std::string show(const std::optional<Nullable>& v) {
    if (!v) {
        return "<not selected>";
    }
    return *v ? format_double(**v) : "null";
}

bool close(double a, double b, double rel_tol) {
    if (a == b) {
        return true;
    }
    return std::abs(a - b) <= rel_tol * std::max(std::abs(a), std::abs(b));
}

} // namespace

std::string to_json(const QueryResult& result) {
    json j = {{"kind", result.kind == ResultKind::Rows ? "ROWS" : "AGGREGATE"},
              {"ordered", result.ordered}};
    if (result.kind == ResultKind::Rows) {
        json rows = json::array();
        for (const auto& p : result.rows) {
            json r = {{"entity_id", p.entity_id}, {"ts", p.ts}, {"lat", p.lat}, {"lon", p.lon}};
            if (p.alt) {
                r["alt"] = *p.alt;
            }
            if (p.value) {
                r["value"] = *p.value;
            }
            rows.push_back(std::move(r));
        }
        j["rows"] = std::move(rows);
    } else {
        json groups = json::array();
        for (const auto& g : result.groups) {
            json o = {{"key", g.key}};
            if (g.count) {
                o["count"] = *g.count;
            }
            if (g.sum) {
                o["sum"] = *g.sum;
            }
            if (g.avg) {
                o["avg"] = nullable(*g.avg);
            }
            if (g.min) {
                o["min"] = nullable(*g.min);
            }
            if (g.max) {
                o["max"] = nullable(*g.max);
            }
            groups.push_back(std::move(o));
        }
        j["groups"] = std::move(groups);
    }
    return j.dump();
}

QueryResult result_from_json(std::string_view text) {
    try {
        auto j = json::parse(text);
        QueryResult out;
        auto kind = j.at("kind").get<std::string>();
        if (kind != "ROWS" && kind != "AGGREGATE") {
            throw IntegrityError("unknown result kind " + kind);
        }
        out.kind = kind == "ROWS" ? ResultKind::Rows : ResultKind::Aggregate;
        out.ordered = j.at("ordered").get<bool>();
        if (j.contains("rows")) {
            for (const auto& r : j.at("rows")) {
                TrajectoryPoint p;
                p.entity_id = r.at("entity_id").get<std::string>();
                p.ts = r.at("ts").get<std::int64_t>();
                p.lat = r.at("lat").get<double>();
                p.lon = r.at("lon").get<double>();
                if (r.contains("alt")) {
                    p.alt = r.at("alt").get<double>();
                }
                if (r.contains("value")) {
                    p.value = r.at("value").get<double>();
                }
                out.rows.push_back(std::move(p));
            }
        }
        if (j.contains("groups")) {
            for (const auto& o : j.at("groups")) {
                GroupResult g;
                g.key = o.at("key").get<std::string>();
                if (o.contains("count")) {
                    g.count = o.at("count").get<std::int64_t>();
                }
                if (o.contains("sum")) {
                    g.sum = o.at("sum").get<double>();
                }
                if (o.contains("avg")) {
                    g.avg = read_nullable(o.at("avg"));
                }
                if (o.contains("min")) {
                    g.min = read_nullable(o.at("min"));
                }
                if (o.contains("max")) {
                    g.max = read_nullable(o.at("max"));
                }
                out.groups.push_back(std::move(g));
            }
        }
        return out;
    } catch (const json::exception& e) {
        throw IntegrityError(std::string("malformed result: ") + e.what());
    }
}

bool results_equivalent(const QueryResult& a, const QueryResult& b, double rel_tol,
                        std::string* diff) {
    auto fail = [&](std::string msg) {
        if (diff) {
            *diff = std::move(msg);
        }
        return false;
    };
    if (a.kind != b.kind) {
        return fail("result kinds differ");
    }
    if (a.ordered != b.ordered) {
        return fail("ordered flags differ");
    }
    if (a.rows.size() != b.rows.size()) {
        return fail("row counts differ: " + std::to_string(a.rows.size()) + " vs " +
                    std::to_string(b.rows.size()));
    }
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        if (a.rows[i] != b.rows[i]) {
            return fail("row " + std::to_string(i) + " differs: " + format_record(a.rows[i]) +
                        " vs " + format_record(b.rows[i]));
        }
    }
    if (a.groups.size() != b.groups.size()) {
        return fail("group counts differ: " + std::to_string(a.groups.size()) + " vs " +
                    std::to_string(b.groups.size()));
    }
    for (std::size_t i = 0; i < a.groups.size(); ++i) {
        const auto& x = a.groups[i];
        const auto& y = b.groups[i];
        auto where = "group " + std::to_string(i) + " (key \"" + x.key + "\")";
        if (x.key != y.key) {
            return fail(where + ": key differs from \"" + y.key + "\"");
        }
        if (x.count != y.count) {
            return fail(where + ": count differs");
        }
        if (x.sum.has_value() != y.sum.has_value() ||
            (x.sum && !close(*x.sum, *y.sum, rel_tol))) {
            return fail(where + ": sum differs");
        }
        bool avg_ok = x.avg.has_value() == y.avg.has_value() &&
                      (!x.avg || (x.avg->has_value() == y.avg->has_value() &&
                                  (!x.avg->has_value() || close(**x.avg, **y.avg, rel_tol))));
        if (!avg_ok) {
            return fail(where + ": avg differs (" + show(x.avg) + " vs " + show(y.avg) + ")");
        }
        if (x.min != y.min) {
            return fail(where + ": min differs (" + show(x.min) + " vs " + show(y.min) + ")");
        }
        if (x.max != y.max) {
            return fail(where + ": max differs (" + show(x.max) + " vs " + show(y.max) + ")");
        }
    }
    return true;
}

} // namespace stq

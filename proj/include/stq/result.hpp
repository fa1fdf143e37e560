#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stq/model.hpp"

namespace stq {

enum class ResultKind { Rows, Aggregate };

/// A selected aggregate that may be NULL (AVG/MIN/MAX over no values).
using Nullable = std::optional<double>;

/// One output group. Outer optionals are engaged exactly for the selected
/// aggregate slots.
struct GroupResult {
    std::string key; ///< "" for an ungrouped query
    std::optional<std::int64_t> count;
    std::optional<double> sum;
    std::optional<Nullable> avg;
    std::optional<Nullable> min;
    std::optional<Nullable> max;

    friend bool operator==(const GroupResult&, const GroupResult&) = default;
};

/// Final answer of a query. When `ordered` is false, rows follow the
/// canonical (entity_id, ts, lat, lon, alt, value) order and groups follow
/// ascending key.
struct QueryResult {
    ResultKind kind = ResultKind::Rows;
    bool ordered = false;
    std::vector<TrajectoryPoint> rows;
    std::vector<GroupResult> groups;

    friend bool operator==(const QueryResult&, const QueryResult&) = default;
};

/// `{"kind": "ROWS"|"AGGREGATE", "ordered": bool, "rows": [...], "groups": [...]}`
/// with the member that does not apply to the kind omitted.
std::string to_json(const QueryResult& result);

/// Throws IntegrityError on malformed input.
QueryResult result_from_json(std::string_view text);

/// Exact comparison except SUM and AVG, which may differ by `rel_tol`
/// relative error. On mismatch returns false and, if `diff` is given,
/// describes the first difference.
bool results_equivalent(const QueryResult& a, const QueryResult& b, double rel_tol,
                        std::string* diff = nullptr);

} // namespace stq

#pragma once

#include <span>

#include "stq/model.hpp"
#include "stq/query.hpp"
#include "stq/result.hpp"

namespace stq {

/// Single-node brute-force evaluation of `ast` over every record: one
/// filtering pass, grouping, aggregation, then a sort. Shares no evaluation
/// code with the workers so agreement between the two is meaningful; it also
/// serves as the single-node latency baseline. `grid` defines CELL and
/// TIMEBUCKET group keys.
QueryResult oracle_execute(const QueryAst& ast, std::span<const TrajectoryPoint> records,
                           const GridConfig& grid);

} // namespace stq

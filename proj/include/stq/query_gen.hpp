#pragma once

#include <random>
#include <string>
#include <vector>

#include "stq/model.hpp"
#include "stq/planner.hpp"
#include "stq/query.hpp"

namespace stq {

struct QueryGenOptions {
    /// Literals are drawn around this region and interval so that filters
    /// select a meaningful share of the data.
    BoundingBox region = BoundingBox::make(35.0, -10.0, 65.0, 30.0);
    TimeInterval interval = TimeInterval::make(1'700'000'000, 1'700'604'800);
    /// Candidate ids for `entity_id = '...'` terms.
    std::vector<std::string> entity_ids = {"e000", "e001", "e042", "e199"};
    /// GROUP BY CELL / TIMEBUCKET produce grid-dependent keys; disable them
    /// when comparing runs across different grids.
    bool allow_grid_groups = true;
};

/// Random valid AST whose overall classification is exactly `tag`.
QueryAst random_query(std::mt19937_64& rng, Tag tag, const QueryGenOptions& options);

/// Random conjunction of at most one REGION and one TIME term (at least one
/// of them), for pruning checks.
std::vector<PredicateTerm> random_space_time(std::mt19937_64& rng, const QueryGenOptions& options);

} // namespace stq

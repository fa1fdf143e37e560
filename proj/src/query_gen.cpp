#include "stq/query_gen.hpp"

#include <algorithm>
#include <cmath>

namespace stq {

namespace {

std::int64_t pick(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

bool coin(std::mt19937_64& rng, double p = 0.5) {
    return std::bernoulli_distribution(p)(rng);
}

// Half-degree steps so box edges regularly land on cell boundaries.
double half_step(std::mt19937_64& rng, double lo, double hi) {
    auto a = static_cast<std::int64_t>(std::ceil(lo * 2.0));
    auto b = static_cast<std::int64_t>(std::floor(hi * 2.0));
    return static_cast<double>(pick(rng, a, std::max(a, b))) / 2.0;
}

RegionTerm random_region(std::mt19937_64& rng, const QueryGenOptions& o) {
    // Extend the data region a little so some boxes reach past the data.
    double lat_lo = std::max(kMinLat, o.region.min_lat - 5.0);
    double lat_hi = std::min(kMaxLat, o.region.max_lat + 5.0);
    double lon_lo = std::max(kMinLon, o.region.min_lon - 5.0);
    double lon_hi = std::min(kMaxLon, o.region.max_lon + 5.0);
    for (;;) {
        double a = half_step(rng, lat_lo, lat_hi);
        double b = half_step(rng, lat_lo, lat_hi);
        double c = half_step(rng, lon_lo, lon_hi);
        double d = half_step(rng, lon_lo, lon_hi);
        if (a != b && c != d) {
            return RegionTerm{BoundingBox::make(std::min(a, b), std::min(c, d), std::max(a, b),
                                                std::max(c, d))};
        }
    }
}

TimeTerm random_time(std::mt19937_64& rng, const QueryGenOptions& o) {
    auto span = o.interval.end_ts - o.interval.start_ts;
    auto lo = o.interval.start_ts - span / 10;
    auto hi = o.interval.end_ts + span / 10;
    for (;;) {
        // Hour granularity half of the time, so edges hit bucket boundaries.
        auto a = pick(rng, lo, hi);
        auto b = pick(rng, lo, hi);
        if (coin(rng)) {
            a -= a % 3600;
            b -= b % 3600;
        }
        a = std::max<std::int64_t>(a, 0);
        b = std::max<std::int64_t>(b, 0);
        if (a != b) {
            return TimeTerm{TimeInterval::make(std::min(a, b), std::max(a, b))};
        }
    }
}

Comparator random_cmp(std::mt19937_64& rng) {
    static constexpr Comparator all[] = {Comparator::Eq, Comparator::Ne, Comparator::Lt,
                                         Comparator::Le, Comparator::Gt, Comparator::Ge};
    return all[pick(rng, 0, 5)];
}

FieldTerm random_field_term(std::mt19937_64& rng, const QueryGenOptions& o) {
    switch (pick(rng, 0, 5)) {
    case 0:
        return FieldTerm{Field::EntityId, Comparator::Eq,
                         o.entity_ids[static_cast<std::size_t>(
                             pick(rng, 0, static_cast<std::int64_t>(o.entity_ids.size()) - 1))]};
    case 1:
        return FieldTerm{Field::Value, random_cmp(rng), static_cast<double>(pick(rng, 0, 1600)) / 16.0};
    case 2:
        return FieldTerm{Field::Alt, random_cmp(rng), static_cast<double>(pick(rng, 0, 24000)) / 2.0};
    case 3:
        return FieldTerm{Field::Lat, random_cmp(rng), half_step(rng, o.region.min_lat, o.region.max_lat)};
    case 4:
        return FieldTerm{Field::Lon, random_cmp(rng), half_step(rng, o.region.min_lon, o.region.max_lon)};
    default:
        return FieldTerm{Field::Ts, random_cmp(rng),
                         static_cast<double>(pick(rng, o.interval.start_ts, o.interval.end_ts))};
    }
}

std::vector<PredicateTerm> random_where(std::mt19937_64& rng, const QueryGenOptions& o) {
    std::vector<PredicateTerm> where;
    if (coin(rng, 0.6)) {
        where.emplace_back(random_region(rng, o));
    }
    if (coin(rng, 0.6)) {
        where.emplace_back(random_time(rng, o));
    }
    auto fields = pick(rng, 0, 2);
    for (std::int64_t i = 0; i < fields; ++i) {
        where.emplace_back(random_field_term(rng, o));
    }
    std::shuffle(where.begin(), where.end(), rng);
    return where;
}

Field random_numeric_field(std::mt19937_64& rng) {
    static constexpr Field numeric[] = {Field::Value, Field::Value, Field::Alt,
                                        Field::Lat,   Field::Lon,   Field::Ts};
    return numeric[pick(rng, 0, 5)];
}

Field random_any_field(std::mt19937_64& rng) {
    return coin(rng, 0.2) ? Field::EntityId : random_numeric_field(rng);
}

std::optional<GroupKey> random_group(std::mt19937_64& rng, const QueryGenOptions& o) {
    if (coin(rng, 0.35)) {
        return std::nullopt;
    }
    if (!o.allow_grid_groups) {
        return GroupKey::Entity;
    }
    static constexpr GroupKey keys[] = {GroupKey::Cell, GroupKey::TimeBucket, GroupKey::Entity};
    return keys[pick(rng, 0, 2)];
}

// One aggregate per result slot; `with_avg` forces AVG in or out.
std::vector<Aggregate> random_aggregates(std::mt19937_64& rng, bool with_avg) {
    std::vector<Aggregate> aggs;
    if (coin(rng, 0.7)) {
        aggs.push_back(coin(rng) ? Aggregate{AggKind::CountAll, std::nullopt}
                                 : Aggregate{AggKind::Count, random_any_field(rng)});
    }
    for (AggKind kind : {AggKind::Sum, AggKind::Min, AggKind::Max}) {
        if (coin(rng, 0.4)) {
            aggs.push_back(Aggregate{kind, random_numeric_field(rng)});
        }
    }
    if (with_avg) {
        aggs.push_back(Aggregate{AggKind::Avg, random_numeric_field(rng)});
    }
    if (aggs.empty()) {
        aggs.push_back(Aggregate{AggKind::CountAll, std::nullopt});
    }
    std::shuffle(aggs.begin(), aggs.end(), rng);
    return aggs;
}

Direction random_direction(std::mt19937_64& rng) {
    return coin(rng) ? Direction::Asc : Direction::Desc;
}

QueryAst context_dependent(std::mt19937_64& rng, const QueryGenOptions& o) {
    QueryAst ast;
    ast.where = random_where(rng, o);
    if (coin(rng, 0.35)) {
        // Rows: ORDER BY a field and/or LIMIT.
        bool order = coin(rng, 0.75);
        if (order) {
            ast.order_by = OrderBy{random_any_field(rng), random_direction(rng)};
        }
        if (!order || coin(rng)) {
            ast.limit = pick(rng, 1, 50);
        }
        return ast;
    }
    int shape = static_cast<int>(pick(rng, 0, 2)); // 0: AVG, 1: ORDER BY, 2: LIMIT
    ast.aggregates = random_aggregates(rng, shape == 0 || coin(rng, 0.3));
    ast.group_by = random_group(rng, o);
    if (shape == 1 || coin(rng, 0.3)) {
        if (ast.group_by && coin(rng, 0.3)) {
            ast.order_by = OrderBy{*ast.group_by, random_direction(rng)};
        } else {
            const auto& agg = ast.aggregates[static_cast<std::size_t>(
                pick(rng, 0, static_cast<std::int64_t>(ast.aggregates.size()) - 1))];
            ast.order_by = OrderBy{agg, random_direction(rng)};
        }
    }
    if (shape == 2 || coin(rng, 0.3)) {
        ast.limit = pick(rng, 1, 20);
    }
    return ast;
}

} // namespace

QueryAst random_query(std::mt19937_64& rng, Tag tag, const QueryGenOptions& options) {
    QueryAst ast;
    switch (tag) {
    case Tag::Parallelizable:
        ast.where = random_where(rng, options);
        break;
    case Tag::PartialAggregable:
        ast.where = random_where(rng, options);
        ast.aggregates = random_aggregates(rng, false);
        ast.group_by = random_group(rng, options);
        break;
    case Tag::ContextDependent:
        ast = context_dependent(rng, options);
        break;
    }
    validate(ast);
    return ast;
}

std::vector<PredicateTerm> random_space_time(std::mt19937_64& rng, const QueryGenOptions& options) {
    std::vector<PredicateTerm> where;
    int shape = static_cast<int>(pick(rng, 0, 2));
    if (shape != 1) {
        where.emplace_back(random_region(rng, options));
    }
    if (shape != 0) {
        where.emplace_back(random_time(rng, options));
    }
    return where;
}

} // namespace stq

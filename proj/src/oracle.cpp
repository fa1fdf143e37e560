#include "stq/oracle.hpp"

#include <algorithm>
#include <map>
#include <tuple>

namespace stq {

namespace {

// Absent values are represented by nullopt, matching SQL NULL.
std::optional<double> field_of(const TrajectoryPoint& r, Field f) {
    if (f == Field::Ts) return static_cast<double>(r.ts);
    if (f == Field::Lat) return r.lat;
    if (f == Field::Lon) return r.lon;
    if (f == Field::Alt) return r.alt;
    if (f == Field::Value) return r.value;
    return std::nullopt;
}

bool keep(const QueryAst& ast, const TrajectoryPoint& r) {
    for (const auto& term : ast.where) {
        if (std::holds_alternative<RegionTerm>(term)) {
            const auto& b = std::get<RegionTerm>(term).bbox;
            bool lat_ok = r.lat >= b.min_lat &&
                          (r.lat < b.max_lat || (b.max_lat == 90.0 && r.lat == 90.0));
            if (!lat_ok || r.lon < b.min_lon || r.lon >= b.max_lon) {
                return false;
            }
        } else if (std::holds_alternative<TimeTerm>(term)) {
            const auto& iv = std::get<TimeTerm>(term).interval;
            if (r.ts < iv.start_ts || r.ts >= iv.end_ts) {
                return false;
            }
        } else {
            const auto& ft = std::get<FieldTerm>(term);
            if (ft.field == Field::EntityId) {
                if (!(r.entity_id == std::get<std::string>(ft.literal))) {
                    return false;
                }
                continue;
            }
            auto v = field_of(r, ft.field);
            if (!v) {
                return false;
            }
            double x = *v;
            double lit = std::get<double>(ft.literal);
            bool ok = (ft.cmp == Comparator::Eq && x == lit) || (ft.cmp == Comparator::Ne && x != lit) ||
                      (ft.cmp == Comparator::Lt && x < lit) || (ft.cmp == Comparator::Le && x <= lit) ||
                      (ft.cmp == Comparator::Gt && x > lit) || (ft.cmp == Comparator::Ge && x >= lit);
            if (!ok) {
                return false;
            }
        }
    }
    return true;
}

std::string key_of(const QueryAst& ast, const TrajectoryPoint& r, const GridConfig& grid) {
    if (!ast.group_by) {
        return "";
    }
    if (*ast.group_by == GroupKey::Entity) {
        return r.entity_id;
    }
    if (*ast.group_by == GroupKey::TimeBucket) {
        return std::to_string(r.ts / grid.bucket_seconds);
    }
    auto cell = cell_of(r.lat, r.lon, grid);
    return std::to_string(cell.ix) + "_" + std::to_string(cell.iy);
}

GroupResult evaluate_group(const QueryAst& ast, const std::string& key,
                           const std::vector<const TrajectoryPoint*>& members) {
    GroupResult g;
    g.key = key;
    for (const auto& agg : ast.aggregates) {
        if (agg.kind == AggKind::CountAll) {
            g.count = static_cast<std::int64_t>(members.size());
            continue;
        }
        std::vector<double> values;
        std::int64_t present = 0;
        for (const auto* r : members) {
            if (*agg.field == Field::EntityId) {
                ++present;
            } else if (auto v = field_of(*r, *agg.field)) {
                values.push_back(*v);
                ++present;
            }
        }
        double total = 0.0;
        for (double v : values) {
            total += v;
        }
        if (agg.kind == AggKind::Count) {
            g.count = present;
        } else if (agg.kind == AggKind::Sum) {
            g.sum = total;
        } else if (agg.kind == AggKind::Avg) {
            g.avg = values.empty() ? Nullable() : Nullable(total / static_cast<double>(values.size()));
        } else if (agg.kind == AggKind::Min) {
            g.min = values.empty() ? Nullable() : Nullable(*std::min_element(values.begin(), values.end()));
        } else if (agg.kind == AggKind::Max) {
            g.max = values.empty() ? Nullable() : Nullable(*std::max_element(values.begin(), values.end()));
        }
    }
    return g;
}

// Sort key for ORDER BY <aggregate>; the bool is false for NULL.
std::pair<bool, double> order_value(const GroupResult& g, AggKind kind) {
    const std::optional<Nullable>* slot = nullptr;
    if (kind == AggKind::CountAll || kind == AggKind::Count) {
        return {true, static_cast<double>(g.count.value_or(0))};
    }
    if (kind == AggKind::Sum) {
        return {true, g.sum.value_or(0.0)};
    }
    slot = kind == AggKind::Avg ? &g.avg : (kind == AggKind::Min ? &g.min : &g.max);
    Nullable v = slot->value_or(Nullable());
    return {v.has_value(), v.value_or(0.0)};
}

std::tuple<const std::string&, std::int64_t, double, double, bool, double, bool, double>
canonical(const TrajectoryPoint& r) {
    return {r.entity_id, r.ts,         r.lat, r.lon, r.alt.has_value(), r.alt.value_or(0.0),
            r.value.has_value(), r.value.value_or(0.0)};
}

} // namespace

QueryResult oracle_execute(const QueryAst& ast, std::span<const TrajectoryPoint> records,
                           const GridConfig& grid) {
    QueryResult result;
    result.ordered = ast.order_by.has_value();
    bool desc = ast.order_by && ast.order_by->direction == Direction::Desc;

    if (ast.aggregates.empty()) {
        result.kind = ResultKind::Rows;
        for (const auto& r : records) {
            if (keep(ast, r)) {
                result.rows.push_back(r);
            }
        }
        auto by_canonical = [](const TrajectoryPoint& a, const TrajectoryPoint& b) {
            return canonical(a) < canonical(b);
        };
        if (ast.order_by) {
            Field f = std::get<Field>(ast.order_by->target);
            std::sort(result.rows.begin(), result.rows.end(),
                      [&](const TrajectoryPoint& a, const TrajectoryPoint& b) {
                          if (f == Field::EntityId) {
                              if (a.entity_id != b.entity_id) {
                                  return desc ? a.entity_id > b.entity_id : a.entity_id < b.entity_id;
                              }
                          } else {
                              auto va = field_of(a, f);
                              auto vb = field_of(b, f);
                              std::pair<bool, double> ka{va.has_value(), va.value_or(0.0)};
                              std::pair<bool, double> kb{vb.has_value(), vb.value_or(0.0)};
                              if (ka != kb) {
                                  return desc ? kb < ka : ka < kb;
                              }
                          }
                          return by_canonical(a, b);
                      });
        } else {
            std::sort(result.rows.begin(), result.rows.end(), by_canonical);
        }
        if (ast.limit && result.rows.size() > static_cast<std::size_t>(*ast.limit)) {
            result.rows.erase(result.rows.begin() + *ast.limit, result.rows.end());
        }
        return result;
    }

    result.kind = ResultKind::Aggregate;
    std::map<std::string, std::vector<const TrajectoryPoint*>> groups;
    if (!ast.group_by) {
        groups[""];
    }
    for (const auto& r : records) {
        if (keep(ast, r)) {
            groups[key_of(ast, r, grid)].push_back(&r);
        }
    }
    for (const auto& [key, members] : groups) {
        result.groups.push_back(evaluate_group(ast, key, members));
    }
    if (ast.order_by) {
        const auto& target = ast.order_by->target;
        std::stable_sort(result.groups.begin(), result.groups.end(),
                         [&](const GroupResult& a, const GroupResult& b) {
                             if (const auto* agg = std::get_if<Aggregate>(&target)) {
                                 auto ka = order_value(a, agg->kind);
                                 auto kb = order_value(b, agg->kind);
                                 if (ka != kb) {
                                     return desc ? kb < ka : ka < kb;
                                 }
                                 return a.key < b.key;
                             }
                             return desc ? b.key < a.key : a.key < b.key;
                         });
    }
    if (ast.limit && result.groups.size() > static_cast<std::size_t>(*ast.limit)) {
        result.groups.erase(result.groups.begin() + *ast.limit, result.groups.end());
    }
    return result;
}

} // namespace stq

#include "stq/planner.hpp"

#include <algorithm>

#include <json.hpp>

#include "stq/error.hpp"

namespace stq {

using nlohmann::json;

const char* to_string(Tag tag) {
    switch (tag) {
    case Tag::Parallelizable:
        return "PARALLELIZABLE";
    case Tag::PartialAggregable:
        return "PARTIAL_AGGREGABLE";
    case Tag::ContextDependent:
        return "CONTEXT_DEPENDENT";
    }
    return "?";
}

const char* to_string(Stage stage) { return stage == Stage::Map ? "MAP" : "REDUCE"; }

Parallelizability classify(const QueryAst& ast) {
    Parallelizability out;
    auto add = [&](std::string op, Tag tag) {
        out.operators.push_back({std::move(op), tag});
        out.overall = std::max(out.overall, tag);
    };
    if (ast.all_rows()) {
        add("SELECT *", Tag::Parallelizable);
    }
    if (!ast.where.empty()) {
        add("WHERE", Tag::Parallelizable);
    }
    for (const auto& agg : ast.aggregates) {
        add(to_string(agg),
            agg.kind == AggKind::Avg ? Tag::ContextDependent : Tag::PartialAggregable);
    }
    if (ast.group_by) {
        add(std::string("GROUP BY ") + to_string(*ast.group_by), Tag::PartialAggregable);
    }
    if (ast.order_by) {
        add("ORDER BY", Tag::ContextDependent);
    }
    if (ast.limit) {
        add("LIMIT", Tag::ContextDependent);
    }
    return out;
}

MapEmission map_output_contract(const QueryAst& ast) {
    static const std::vector<Field> kAll = {Field::EntityId, Field::Ts,  Field::Lat,
                                            Field::Lon,      Field::Alt, Field::Value};
    switch (classify(ast).overall) {
    case Tag::Parallelizable:
        return {EmissionKind::Rows, kAll};
    case Tag::PartialAggregable:
        return {EmissionKind::PartialAggregates, {}};
    case Tag::ContextDependent:
        break;
    }
    if (ast.all_rows()) {
        return {EmissionKind::ProjectedRows, kAll};
    }
    std::vector<Field> fields;
    if (ast.group_by == GroupKey::Cell) {
        fields.insert(fields.end(), {Field::Lat, Field::Lon});
    } else if (ast.group_by == GroupKey::TimeBucket) {
        fields.push_back(Field::Ts);
    } else if (ast.group_by == GroupKey::Entity) {
        fields.push_back(Field::EntityId);
    }
    for (const auto& agg : ast.aggregates) {
        if (agg.field) {
            fields.push_back(*agg.field);
        }
    }
    std::sort(fields.begin(), fields.end());
    fields.erase(std::unique(fields.begin(), fields.end()), fields.end());
    return {EmissionKind::ProjectedRows, std::move(fields)};
}

void validate_query_id(std::string_view query_id) {
    if (query_id.find('/') != std::string_view::npos || !BlobKey::is_valid(query_id)) {
        throw KeyError("invalid query id: \"" + std::string(query_id) + "\"");
    }
}

BlobKey map_output_key(std::string_view query_id, const ShardKey& shard) {
    return BlobKey("results/" + std::string(query_id) + "/map/c" + std::to_string(shard.cell_ix) +
                   "_" + std::to_string(shard.cell_iy) + "_t" + std::to_string(shard.bucket) +
                   ".json");
}

BlobKey reduce_output_key(std::string_view query_id) {
    return BlobKey("results/" + std::string(query_id) + "/reduce.json");
}

BlobKey final_result_key(std::string_view query_id) {
    return BlobKey("results/" + std::string(query_id) + "/final.json");
}

std::vector<ShardDescriptor> prune_shards(const ShardManifest& manifest,
                                          const std::vector<PredicateTerm>& where) {
    const BoundingBox* region = nullptr;
    const TimeInterval* interval = nullptr;
    for (const auto& term : where) {
        if (const auto* r = std::get_if<RegionTerm>(&term)) {
            region = &r->bbox;
        } else if (const auto* t = std::get_if<TimeTerm>(&term)) {
            interval = &t->interval;
        }
    }
    std::vector<ShardDescriptor> out;
    for (const auto& shard : manifest.shards) {
        if (region && !bbox_intersects(shard.bbox, *region)) {
            continue;
        }
        if (interval && !interval_intersects(shard.interval, *interval)) {
            continue;
        }
        out.push_back(shard);
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
    return out;
}

WavePlan plan(const QueryAst& ast, const ShardManifest& manifest, std::string_view query_id) {
    validate_query_id(query_id);
    WavePlan out;
    out.query_id = std::string(query_id);
    out.ast = ast;
    out.grid = manifest.grid;
    out.tag = classify(ast).overall;
    out.merge_kind = out.tag == Tag::Parallelizable ? MergeKind::Concat : MergeKind::ReduceFinal;

    auto shards = prune_shards(manifest, ast.where);
    if (shards.empty()) {
        return out;
    }
    Wave map{Stage::Map, {}};
    for (const auto& shard : shards) {
        map.subqueries.push_back(Subquery{out.query_id, Stage::Map, shard.key, ast, manifest.grid,
                                          {}, map_output_key(query_id, shard.key)});
    }
    if (out.merge_kind == MergeKind::ReduceFinal) {
        Subquery reduce{out.query_id, Stage::Reduce, std::nullopt, ast, manifest.grid, {},
                        reduce_output_key(query_id)};
        for (const auto& sq : map.subqueries) {
            reduce.input_keys.push_back(sq.output_key);
        }
        out.waves.push_back(std::move(map));
        out.waves.push_back(Wave{Stage::Reduce, {std::move(reduce)}});
    } else {
        out.waves.push_back(std::move(map));
    }
    return out;
}

std::string serialize(const Subquery& sq) {
    json j = {{"query_id", sq.query_id},
              {"stage", to_string(sq.stage)},
              {"query", pretty(sq.ast)},
              {"grid", {{"cell_deg", sq.grid.cell_deg}, {"bucket_seconds", sq.grid.bucket_seconds}}},
              {"output_key", sq.output_key.str()}};
    if (sq.shard) {
        j["shard"] = {{"cell_ix", sq.shard->cell_ix},
                      {"cell_iy", sq.shard->cell_iy},
                      {"bucket", sq.shard->bucket}};
    }
    if (!sq.input_keys.empty()) {
        json keys = json::array();
        for (const auto& k : sq.input_keys) {
            keys.push_back(k.str());
        }
        j["input_keys"] = std::move(keys);
    }
    return j.dump();
}

Subquery deserialize_subquery(std::string_view payload) {
    try {
        auto j = json::parse(payload);
        Subquery sq;
        sq.query_id = j.at("query_id").get<std::string>();
        auto stage = j.at("stage").get<std::string>();
        if (stage != "MAP" && stage != "REDUCE") {
            throw IntegrityError("unknown subquery stage " + stage);
        }
        sq.stage = stage == "MAP" ? Stage::Map : Stage::Reduce;
        sq.ast = parse(j.at("query").get<std::string>());
        sq.grid = GridConfig::make(j.at("grid").at("cell_deg").get<double>(),
                                   j.at("grid").at("bucket_seconds").get<std::int64_t>());
        sq.output_key = BlobKey(j.at("output_key").get<std::string>());
        if (j.contains("shard")) {
            const auto& s = j.at("shard");
            sq.shard = ShardKey{s.at("cell_ix").get<std::int64_t>(),
                                s.at("cell_iy").get<std::int64_t>(),
                                s.at("bucket").get<std::int64_t>()};
        }
        if (j.contains("input_keys")) {
            for (const auto& k : j.at("input_keys")) {
                sq.input_keys.emplace_back(k.get<std::string>());
            }
        }
        if ((sq.stage == Stage::Map) != sq.shard.has_value() ||
            (sq.stage == Stage::Map && !sq.input_keys.empty())) {
            throw IntegrityError("subquery stage does not match its shard/input fields");
        }
        return sq;
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(std::string("malformed subquery payload: ") + e.what());
    }
}

} // namespace stq

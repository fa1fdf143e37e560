#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stq/blob_store.hpp"
#include "stq/ingest.hpp"
#include "stq/query.hpp"

namespace stq {

/// Ordered by severity; a plan's shape follows the most severe tag present.
enum class Tag { Parallelizable = 0, PartialAggregable = 1, ContextDependent = 2 };

const char* to_string(Tag tag);

struct OperatorTag {
    std::string op; ///< e.g. "SELECT *", "WHERE", "AVG(value)", "ORDER BY"
    Tag tag;
};

struct Parallelizability {
    std::vector<OperatorTag> operators;
    Tag overall = Tag::Parallelizable;
};

/// Row selection and filters are parallelizable; COUNT/SUM/MIN/MAX and
/// grouping combine from per-shard partials; AVG, ORDER BY and LIMIT need
/// the complete intermediate result on one node.
Parallelizability classify(const QueryAst& ast);

enum class Stage { Map, Reduce };

const char* to_string(Stage stage);

/// One self-contained unit of worker input. MAP subqueries name a shard,
/// REDUCE subqueries name the MAP outputs they consume.
struct Subquery {
    std::string query_id;
    Stage stage = Stage::Map;
    std::optional<ShardKey> shard;
    QueryAst ast;
    GridConfig grid;
    std::vector<BlobKey> input_keys;
    BlobKey output_key{"results/unset"};

    friend bool operator==(const Subquery&, const Subquery&) = default;
};

/// JSON payload carried by a worker invocation; the AST travels as its
/// canonical query text.
std::string serialize(const Subquery& sq);
Subquery deserialize_subquery(std::string_view payload);

struct Wave {
    Stage stage = Stage::Map;
    std::vector<Subquery> subqueries;
};

enum class MergeKind { Concat, ReduceFinal };

struct WavePlan {
    std::string query_id;
    QueryAst ast;
    GridConfig grid;
    Tag tag = Tag::Parallelizable;
    std::vector<Wave> waves; ///< empty when pruning leaves no shard
    MergeKind merge_kind = MergeKind::Concat;
};

/// What MAP workers write for a query.
enum class EmissionKind {
    Rows,              ///< full matched rows in the ingest CSV syntax
    PartialAggregates, ///< `group_key,count,sum,min,max` lines
    ProjectedRows,     ///< matched rows with unneeded columns left empty
};

struct MapEmission {
    EmissionKind kind = EmissionKind::Rows;
    std::vector<Field> fields; ///< columns carried by Rows/ProjectedRows
};

MapEmission map_output_contract(const QueryAst& ast);

/// Throws KeyError unless `query_id` is a single valid key segment.
void validate_query_id(std::string_view query_id);

BlobKey map_output_key(std::string_view query_id, const ShardKey& shard);
BlobKey reduce_output_key(std::string_view query_id);
BlobKey final_result_key(std::string_view query_id);

/// Shards whose cell box meets the REGION term and whose bucket meets the
/// TIME term; field terms never prune. Sorted by shard key.
std::vector<ShardDescriptor> prune_shards(const ShardManifest& manifest,
                                          const std::vector<PredicateTerm>& where);

WavePlan plan(const QueryAst& ast, const ShardManifest& manifest, std::string_view query_id);

} // namespace stq

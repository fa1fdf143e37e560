#pragma once

#include <atomic>
#include <condition_variable>
#include <chrono>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stq/blob_store.hpp"
#include "stq/ingest.hpp"
#include "stq/planner.hpp"
#include "stq/result.hpp"
#include "stq/runtime.hpp"

namespace stq {

inline constexpr const char* kWorkerFunction = "worker";
inline constexpr const char* kMergerFunction = "merger";

/// Executes a MAP subquery on its shard: re-applies every predicate term,
/// emits per map_output_contract() and writes the output blob (an empty blob
/// when nothing matches). Re-running it rewrites identical bytes.
BlobKey worker_map(const Subquery& sq, BlobStore& store);

/// Combines all MAP outputs, applies ORDER BY (ties by ascending group key,
/// or canonical row order) and LIMIT, and writes the final-form result JSON.
BlobKey worker_reduce(const Subquery& sq, BlobStore& store);

/// Builds the unified answer from the plan's outputs and persists it at
/// `results/{query_id}/final.json`. Throws IntegrityError if an expected
/// partial is missing.
QueryResult merge_results(const WavePlan& plan, BlobStore& store);

std::string serialize(const WavePlan& plan);
WavePlan deserialize_plan(std::string_view payload);

/// Registers the "worker" (dispatching on stage) and "merger" handlers.
void register_functions(Runtime& runtime);

enum class QueryState { Pending = 0, Running = 1, Done = 2, Failed = 3 };

const char* to_string(QueryState state);

struct WaveProgress {
    Stage stage = Stage::Map;
    int completed = 0;
    int total = 0;

    friend bool operator==(const WaveProgress&, const WaveProgress&) = default;
};

struct QueryStatus {
    std::string query_id;
    QueryState state = QueryState::Pending;
    std::optional<BlobKey> result_key;
    std::optional<std::string> error;
    std::vector<WaveProgress> wave_progress;
    std::optional<QueryResult> result;

    bool terminal() const { return state == QueryState::Done || state == QueryState::Failed; }
};

/// `{"query_id", "state", "wave_progress", "result" (DONE), "error" (FAILED)}`
std::string status_to_json(const QueryStatus& status);

/// Thread-safe registry of query states. Updates that would move a query
/// backwards (or out of a terminal state) are ignored.
class StatusBoard {
public:
    void publish(const QueryStatus& status);
    std::optional<QueryStatus> get(const std::string& query_id) const;

    /// Blocks until the query is terminal or the timeout elapses.
    std::optional<QueryStatus> wait_terminal(const std::string& query_id,
                                             std::chrono::milliseconds timeout) const;

private:
    mutable std::mutex mu_;
    mutable std::condition_variable cv_;
    std::map<std::string, QueryStatus> statuses_;
};

struct CoordinatorOptions {
    /// Extra rounds in which the coordinator re-invokes only the failed
    /// subqueries of a wave before declaring the query FAILED.
    int wave_redrive_limit = 2;
};

/// Plans the query, runs its waves in order with a barrier between them,
/// then invokes the merger. Errors end in a FAILED status rather than an
/// exception. Every state change is published to `board` when given.
QueryStatus coordinator_run(const std::string& query_id, const QueryAst& ast,
                            const ShardManifest& manifest, Runtime& runtime,
                            const CoordinatorOptions& options = {}, StatusBoard* board = nullptr);

/// In-process engine: one runtime with the worker and merger registered,
/// a status board, and fresh query ids.
class QueryEngine {
public:
    QueryEngine(BlobStore& store, RuntimeConfig config, CoordinatorOptions options = {});

    /// `q{epoch_ms}-{counter}`
    std::string next_query_id();

    /// Synchronous execution over the store's current manifest. Parse errors
    /// propagate as ParseError; everything later becomes a FAILED status.
    QueryStatus run(std::string_view query_text);
    QueryStatus run(const QueryAst& ast, const std::string& query_id);

    BlobStore& store() { return store_; }
    Runtime& runtime() { return runtime_; }
    StatusBoard& board() { return board_; }
    const CoordinatorOptions& options() const { return options_; }

private:
    BlobStore& store_;
    Runtime runtime_;
    CoordinatorOptions options_;
    StatusBoard board_;
    std::atomic<std::uint64_t> counter_{0};
};

} // namespace stq

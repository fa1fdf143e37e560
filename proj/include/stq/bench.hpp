#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "stq/model.hpp"

namespace stq {

/// One benchmark run: a generated dataset, a grid, a query and a runtime
/// shape. Region and interval default to the generator's standard dataset.
struct BenchScenario {
    std::string scenario;
    std::uint64_t seed = 1;
    std::int64_t entities = 100;
    std::int64_t points = 100;
    double cell_deg = 10.0;
    std::int64_t bucket_seconds = 86400;
    std::string query = "SELECT COUNT(*)";
    int max_concurrency = 4;
    std::int64_t warm_delay_ms = 0;
    std::int64_t cold_start_delay_ms = 0;
    BoundingBox region = BoundingBox::make(35.0, -10.0, 65.0, 30.0);
    std::int64_t start_ts = 1'700'006'400;
    std::int64_t end_ts = 1'700'006'400 + 7 * 86400;
};

/// Parses blocks of `key = value` lines separated by blank lines. `#` starts
/// a comment. Besides the fields named in BenchScenario, `region` takes
/// `min_lat,min_lon,max_lat,max_lon`. Throws DomainError naming the line.
std::vector<BenchScenario> parse_bench_config(std::istream& in);

struct BenchRow {
    std::string scenario;
    std::int64_t records = 0;
    std::int64_t shards = 0; ///< shards in the manifest
    int concurrency = 0;
    double engine_ms = 0.0;
    double oracle_ms = 0.0;
    int waves = 0;
    std::vector<int> wave_widths; ///< invocations per wave, MAP first
    double speedup() const { return engine_ms > 0.0 ? oracle_ms / engine_ms : 0.0; }
};

struct BenchReport {
    std::vector<BenchRow> rows;

    /// Aligned human-readable table.
    std::string table() const;
    /// `scenario,shards,concurrency,engine_ms,oracle_ms,speedup` with a header.
    std::string csv() const;
    const BenchRow* find(const std::string& scenario) const;
};

struct BenchOptions {
    /// Ignore the scenarios' simulated delays and time real computation only.
    bool real_timing = false;
};

/// Runs every scenario in order, one at a time: generate, ingest into a
/// scratch store, execute through the engine and through the oracle.
/// Throws CorrectnessError with a diff if the two disagree, and
/// InvocationError if the engine run fails.
BenchReport run_benchmark(const std::vector<BenchScenario>& scenarios, BenchOptions options = {});

} // namespace stq

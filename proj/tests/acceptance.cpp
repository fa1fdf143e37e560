// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "stq/bench.hpp"
#include "stq/error.hpp"
#include "stq/functions.hpp"
#include "stq/oracle.hpp"
#include "stq/query_gen.hpp"
#include "stq/temp_dir.hpp"
#include "stq/text.hpp"

using namespace stq;

namespace {

constexpr std::uint64_t kDataSeed = 20240701;
constexpr std::uint64_t kQuerySeed = 4242;
constexpr int kSuiteSize = 200;

const BoundingBox kRegion = BoundingBox::make(35.0, -10.0, 65.0, 30.0);
const TimeInterval kInterval = TimeInterval::make(1'700'006'400, 1'700'006'400 + 7 * 86400);
const GridConfig kGrid = GridConfig::make(10.0, 86400);

struct Verdict {
    bool pass = true;
    std::string detail;
};

void fail(Verdict& v, const std::string& why) {
    if (v.pass) {
        v.detail = why;
    }
    v.pass = false;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string shorten(std::string s, std::size_t n = 240) {
    return s.size() > n ? s.substr(0, n) + "..." : s;
}

// Shared state: the dataset, one ingested store, the query suite and the
// failure-free results.
struct Suite {
    TempDir dir{"stq-accept"};
    FsBlobStore store{dir.path() / "g10"};
    std::vector<TrajectoryPoint> data;
    IngestReport ingest_report;
    ShardManifest manifest;
    std::vector<QueryAst> queries;
    std::vector<QueryResult> clean_results;
    std::vector<std::vector<InvocationRecord>> clean_logs;
    bool clean_ok = false;
};

QueryGenOptions generator_options(bool grid_groups) {
    QueryGenOptions o;
    o.region = kRegion;
    o.interval = kInterval;
    o.entity_ids = {"e000", "e001", "e042", "e137", "e199", "e200"};
    o.allow_grid_groups = grid_groups;
    return o;
}

void prepare(Suite& s) {
    s.data = gen_trajectories(kDataSeed, 200, 100, kRegion, kInterval);
    std::stringstream csv;
    write_csv(csv, s.data);
    s.ingest_report = ingest(csv, kGrid, s.store);
    s.manifest = load_manifest(s.store);

    std::mt19937_64 rng(kQuerySeed);
    auto opts = generator_options(true);
    for (int i = 0; i < kSuiteSize; ++i) {
        s.queries.push_back(random_query(rng, static_cast<Tag>(i % 3), opts));
    }
}

RuntimeConfig base_runtime() {
    RuntimeConfig rc;
    rc.max_concurrency = 16;
    rc.retry_limit = 3;
    rc.rng_seed = 7;
    return rc;
}

Verdict criterion_oracle(Suite& s) {
    Verdict v;
    int per_class[3] = {0, 0, 0};
    QueryEngine engine(s.store, base_runtime());
    int checked = 0;
    for (std::size_t i = 0; i < s.queries.size(); ++i) {
        const auto& ast = s.queries[i];
        ++per_class[static_cast<int>(classify(ast).overall)];
        auto before = engine.runtime().log_size();
        auto status = engine.run(ast, "c1-" + std::to_string(i));
        auto log = engine.runtime().log();
        s.clean_logs.emplace_back(log.begin() + static_cast<std::ptrdiff_t>(before), log.end());
        if (status.state != QueryState::Done || !status.result) {
            fail(v, "query " + std::to_string(i) + " failed: " + status.error.value_or("?"));
            s.clean_results.emplace_back();
            continue;
        }
        s.clean_results.push_back(*status.result);
        std::string diff;
        if (!results_equivalent(*status.result, oracle_execute(ast, s.data, kGrid), 1e-9, &diff)) {
            fail(v, "query " + std::to_string(i) + " [" + pretty(ast) + "]: " + diff);
        }
        ++checked;
    }
    for (int c = 0; c < 3; ++c) {
        if (per_class[c] < 30) {
            fail(v, std::string("only ") + std::to_string(per_class[c]) + " " +
                        to_string(static_cast<Tag>(c)) + " queries");
        }
    }
    s.clean_ok = v.pass;
    if (v.pass) {
        v.detail = std::to_string(checked) + " queries over " + std::to_string(s.data.size()) +
                   " points, " + std::to_string(s.manifest.shards.size()) + " shards (" +
                   std::to_string(per_class[0]) + " PARALLELIZABLE, " + std::to_string(per_class[1]) +
                   " PARTIAL_AGGREGABLE, " + std::to_string(per_class[2]) + " CONTEXT_DEPENDENT)";
    }
    return v;
}

Verdict criterion_partition(Suite& s) {
    Verdict v;
    std::vector<TrajectoryPoint> stored;
    std::int64_t listed = 0;
    for (const auto& shard : s.manifest.shards) {
        auto rows = read_shard(s.store, shard);
        if (static_cast<std::int64_t>(rows.size()) != shard.record_count) {
            fail(v, "shard " + shard.blob_key.str() + " count mismatch");
        }
        for (const auto& r : rows) {
            if (shard_key_of(r, s.manifest.grid) != shard.key) {
                fail(v, "record of " + r.entity_id + " stored in foreign shard " + shard.blob_key.str());
            }
        }
        listed += shard.record_count;
        stored.insert(stored.end(), rows.begin(), rows.end());
    }
    auto expected = s.data;
    std::sort(expected.begin(), expected.end());
    std::sort(stored.begin(), stored.end());
    if (stored != expected) {
        fail(v, "union of shard blobs differs from the accepted records (" + std::to_string(stored.size()) +
                    " vs " + std::to_string(expected.size()) + ")");
    }
    if (s.manifest.total_records != static_cast<std::int64_t>(s.data.size()) ||
        listed != s.manifest.total_records ||
        s.ingest_report.records_read - s.ingest_report.records_rejected != s.manifest.total_records ||
        s.ingest_report.shards_written != static_cast<std::int64_t>(s.manifest.shards.size())) {
        fail(v, "manifest totals disagree with the ingest report");
    }
    if (s.store.list_prefix("shards/").size() != s.manifest.shards.size()) {
        fail(v, "shard blobs not listed in the manifest");
    }
    try {
        verify_manifest(s.store, s.manifest);
    } catch (const std::exception& e) {
        fail(v, e.what());
    }
    if (v.pass) {
        v.detail = std::to_string(stored.size()) + " records in " + std::to_string(s.manifest.shards.size()) +
                   " shards, multiset equal, totals match";
    }
    return v;
}

Verdict criterion_pruning(Suite& s) {
    Verdict v;
    std::mt19937_64 rng(kQuerySeed + 3);
    auto opts = generator_options(true);
    std::size_t scanned_shards = 0;
    std::size_t scanned_records = 0;
    for (int i = 0; i < 50; ++i) {
        QueryAst probe;
        probe.where = random_space_time(rng, opts);
        auto kept = prune_shards(s.manifest, probe.where);
        for (const auto& shard : s.manifest.shards) {
            bool is_kept = std::any_of(kept.begin(), kept.end(),
                                       [&](const ShardDescriptor& k) { return k.key == shard.key; });
            if (is_kept) {
                continue;
            }
            auto rows = read_shard(s.store, shard);
            ++scanned_shards;
            scanned_records += rows.size();
            auto hits = oracle_execute(probe, rows, s.manifest.grid);
            if (!hits.rows.empty()) {
                fail(v, "predicate " + pretty(probe) + " matches " + std::to_string(hits.rows.size()) +
                            " records in pruned shard " + shard.blob_key.str());
            }
        }
    }
    if (v.pass) {
        v.detail = "50 predicates, " + std::to_string(scanned_shards) + " pruned shards (" +
                   std::to_string(scanned_records) + " records) scanned, 0 matches";
    }
    return v;
}

Verdict criterion_waves(Suite& s) {
    Verdict v;
    if (s.clean_logs.size() != s.queries.size()) {
        fail(v, "criterion 1 did not produce a log for every query");
        return v;
    }
    int vacuous = 0;
    for (std::size_t i = 0; i < s.queries.size(); ++i) {
        const auto& ast = s.queries[i];
        auto tag = classify(ast).overall;
        auto pruned = prune_shards(s.manifest, ast.where).size();
        std::size_t map_width = 0, reduce_width = 0, merges = 0;
        int merge_wave = -1;
        for (const auto& r : s.clean_logs[i]) {
            if (r.function_id == kMergerFunction) {
                ++merges;
                merge_wave = r.wave_index;
            } else if (r.wave_index == 0) {
                ++map_width;
            } else if (r.wave_index == 1) {
                ++reduce_width;
            }
        }
        std::size_t want_reduce = tag == Tag::Parallelizable || pruned == 0 ? 0 : 1;
        int want_merge_wave = pruned == 0 ? 0 : (want_reduce ? 2 : 1);
        vacuous += pruned == 0 ? 1 : 0;
        if (map_width != pruned || reduce_width != want_reduce || merges != 1 || merge_wave != want_merge_wave) {
            fail(v, "query " + std::to_string(i) + " [" + pretty(ast) + "]: MAP " + std::to_string(map_width) +
                        " (want " + std::to_string(pruned) + "), REDUCE " + std::to_string(reduce_width) +
                        " (want " + std::to_string(want_reduce) + ")");
        }
    }
    if (v.pass) {
        v.detail = std::to_string(s.queries.size()) + " invocation logs: MAP width = pruned shards, REDUCE width 1/0 by class";
        if (vacuous > 0) {
            v.detail += " (" + std::to_string(vacuous) + " queries pruned to 0 shards ran no waves)";
        }
    }
    return v;
}

Verdict criterion_faults(Suite& s) {
    Verdict v;
    if (!s.clean_ok) {
        fail(v, "needs the failure-free results of criterion 1");
        return v;
    }
    auto rc = base_runtime();
    rc.failure_injection_rate = 0.2;
    rc.retry_limit = 3;
    QueryEngine engine(s.store, rc);
    std::size_t reexecuted = 0;
    for (std::size_t i = 0; i < s.queries.size(); ++i) {
        const auto& ast = s.queries[i];
        auto qid = "c5-" + std::to_string(i);
        auto status = engine.run(ast, qid);
        if (status.state != QueryState::Done || !status.result) {
            fail(v, "query " + std::to_string(i) + " failed under injection: " + status.error.value_or("?"));
            continue;
        }
        if (!(*status.result == s.clean_results[i])) {
            std::string diff;
            results_equivalent(*status.result, s.clean_results[i], 0.0, &diff);
            fail(v, "query " + std::to_string(i) + " differs from the failure-free run: " + diff);
        }
        // Every worker subquery of the plan, re-executed on its own.
        auto p = plan(ast, s.manifest, qid);
        for (const auto& wave : p.waves) {
            for (const auto& sq : wave.subqueries) {
                auto before = s.store.get(sq.output_key);
                if (sq.stage == Stage::Map) {
                    worker_map(sq, s.store);
                } else {
                    worker_reduce(sq, s.store);
                }
                ++reexecuted;
                if (s.store.get(sq.output_key) != before) {
                    fail(v, "re-executing " + sq.output_key.str() + " changed its bytes");
                }
            }
        }
    }
    std::size_t retried = 0, failed_attempts = 0;
    for (const auto& r : engine.runtime().log()) {
        retried += r.attempts > 1 ? 1 : 0;
        failed_attempts += static_cast<std::size_t>(r.attempts - (r.outcome == Outcome::Success ? 1 : 0));
    }
    if (v.pass) {
        v.detail = "rate 0.2, retry_limit 3: " + std::to_string(engine.runtime().log_size()) + " invocations, " +
                   std::to_string(failed_attempts) + " failed attempts, " + std::to_string(retried) +
                   " retried; results identical; " + std::to_string(reexecuted) +
                   " subqueries re-executed byte-identically";
    }
    return v;
}

Verdict criterion_grid(Suite& s) {
    Verdict v;
    auto fine_grid = GridConfig::make(5.0, 43200);
    FsBlobStore fine(s.dir.path() / "g5");
    std::stringstream csv;
    write_csv(csv, s.data);
    ingest(csv, fine_grid, fine);

    std::mt19937_64 rng(kQuerySeed + 6);
    auto opts = generator_options(false);
    QueryEngine coarse_engine(s.store, base_runtime());
    QueryEngine fine_engine(fine, base_runtime());
    for (int i = 0; i < 30; ++i) {
        auto ast = random_query(rng, static_cast<Tag>(i % 3), opts);
        auto a = coarse_engine.run(ast, "c6a-" + std::to_string(i));
        auto b = fine_engine.run(ast, "c6b-" + std::to_string(i));
        if (a.state != QueryState::Done || b.state != QueryState::Done) {
            fail(v, "query " + std::to_string(i) + " failed");
            continue;
        }
        if (!(*a.result == *b.result)) {
            std::string diff;
            results_equivalent(*a.result, *b.result, 0.0, &diff);
            fail(v, "query " + std::to_string(i) + " [" + pretty(ast) + "]: " + diff);
        }
    }
    if (v.pass) {
        v.detail = "30 queries identical under (10 deg, 86400 s) and (5 deg, 43200 s) over " +
                   std::to_string(load_manifest(s.store).shards.size()) + " vs " +
                   std::to_string(load_manifest(fine).shards.size()) + " shards";
    }
    return v;
}

BenchScenario scaling_scenario(const std::string& name, int days, int concurrency) {
    BenchScenario b;
    b.scenario = name;
    b.seed = 11;
    b.entities = 40;
    b.points = 25 * ((days + 15) / 16);
    b.cell_deg = 10.0;
    b.bucket_seconds = 86400;
    b.query = "SELECT COUNT(*)";
    b.max_concurrency = concurrency;
    b.warm_delay_ms = 50;
    b.cold_start_delay_ms = 50;
    // One grid cell, one shard per day.
    b.region = BoundingBox::make(40.5, 0.5, 49.5, 9.5);
    b.start_ts = 1'700'006'400;
    b.end_ts = b.start_ts + static_cast<std::int64_t>(days) * 86400;
    return b;
}

Verdict criterion_scaling(std::string& report_text) {
    Verdict v;
    constexpr int kRepeats = 3;
    std::vector<BenchScenario> scenarios;
    for (int r = 0; r < kRepeats; ++r) {
        auto suffix = "#" + std::to_string(r + 1);
        scenarios.push_back(scaling_scenario("s16_c16" + suffix, 16, 16));
        scenarios.push_back(scaling_scenario("s64_c64" + suffix, 64, 64));
        scenarios.push_back(scaling_scenario("s32_c1" + suffix, 32, 1));
        scenarios.push_back(scaling_scenario("s32_c8" + suffix, 32, 8));
    }
    BenchReport report;
    try {
        report = run_benchmark(scenarios);
    } catch (const std::exception& e) {
        fail(v, e.what());
        return v;
    }
    report_text = report.table() + report.csv();
    auto median = [&](const std::string& name, std::int64_t want_shards) {
        std::vector<double> ms;
        for (int r = 0; r < kRepeats; ++r) {
            const auto* row = report.find(name + "#" + std::to_string(r + 1));
            if (!row || row->shards != want_shards) {
                fail(v, name + " did not produce " + std::to_string(want_shards) + " shards");
                return 0.0;
            }
            ms.push_back(row->engine_ms);
        }
        std::sort(ms.begin(), ms.end());
        return ms[kRepeats / 2];
    };
    double s16 = median("s16_c16", 16);
    double s64 = median("s64_c64", 64);
    double c1 = median("s32_c1", 32);
    double c8 = median("s32_c8", 32);
    if (!v.pass) {
        return v;
    }
    double ratio = std::max(s16, s64) / std::min(s16, s64);
    double speedup = c1 / c8;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "median engine ms: 16/16 %.1f, 64/64 %.1f (ratio %.2f, limit 2); 32 shards c1 %.1f vs c8 %.1f "
                  "(speedup %.2f, need 2)",
                  s16, s64, ratio, c1, c8, speedup);
    v.detail = buf;
    if (ratio > 2.0 || speedup < 2.0) {
        v.pass = false;
    }
    return v;
}

const char* kRoundTripCorpus[] = {
    "SELECT *",
    "select * where region(35, -10, 65, 30)",
    "SELECT * WHERE TIME(2024-07-01T00:00:00Z, 2025-01-01T00:00:00Z)",
    "SELECT * WHERE TIME(2024-07-01T02:00:00+02:00, 2024-07-02T00:00:00-05:30)",
    "SELECT * WHERE value = 7.5",
    "SELECT * WHERE value != 7.5",
    "SELECT * WHERE alt < 1000",
    "SELECT * WHERE alt <= 1000.25",
    "SELECT * WHERE lat > -12.125",
    "SELECT * WHERE lon >= -180",
    "SELECT * WHERE ts >= 1700000000",
    "SELECT * WHERE ts < 2023-11-15T00:00:00Z",
    "SELECT * WHERE entity_id = 'e042'",
    "SELECT * WHERE REGION(0,0,10,10) AND TIME(2024-01-01T00:00:00Z, 2024-02-01T00:00:00Z) AND value > 3 AND entity_id = 'x'",
    "SELECT * ORDER BY ts",
    "SELECT * ORDER BY entity_id DESC LIMIT 5",
    "SELECT * ORDER BY value ASC",
    "SELECT * LIMIT 1",
    "SELECT COUNT(*)",
    "SELECT COUNT(entity_id), SUM(value), AVG(alt), MIN(lat), MAX(lon)",
    "SELECT COUNT(alt) WHERE value > 1",
    "SELECT SUM(ts) GROUP BY TIMEBUCKET",
    "SELECT MIN(value), MAX(value) GROUP BY ENTITY",
    "SELECT AVG(value) GROUP BY CELL",
    "SELECT COUNT(*) GROUP BY CELL ORDER BY COUNT(*) DESC",
    "SELECT COUNT(*) WHERE TIME(2024-07-01T00:00:00Z, 2025-01-01T00:00:00Z) GROUP BY CELL ORDER BY COUNT(*) DESC LIMIT 10",
    "SELECT SUM(alt) GROUP BY ENTITY ORDER BY ENTITY ASC",
    "SELECT MAX(alt) GROUP BY TIMEBUCKET ORDER BY TIMEBUCKET DESC LIMIT 3",
    "SELECT AVG(value), COUNT(*) GROUP BY ENTITY ORDER BY AVG(value)",
    "sElEcT mIn(ts) wHeRe ReGiOn(-90, -180, 90, 179.5) order by min(ts) desc limit 2",
};

Verdict criterion_round_trip() {
    Verdict v;
    int n = 0;
    for (const char* q : kRoundTripCorpus) {
        try {
            auto a = parse(q);
            auto b = parse(pretty(a));
            if (!(a == b)) {
                fail(v, std::string("round trip changed: ") + q + " -> " + pretty(a));
            }
            ++n;
        } catch (const std::exception& e) {
            fail(v, std::string(q) + ": " + e.what());
        }
    }
    if (v.pass) {
        v.detail = std::to_string(n) + " queries: parse(pretty(parse(q))) == parse(q)";
    }
    return v;
}

} // namespace

int main() {
    struct Line {
        int id;
        std::string name;
        Verdict verdict;
        double seconds;
    };
    std::vector<Line> lines;
    Suite suite;
    auto timed = [&](int id, const std::string& name, const std::function<Verdict()>& fn) {
        auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = fn();
        } catch (const std::exception& e) {
            fail(v, std::string("exception: ") + e.what());
        }
        lines.push_back({id, name, v, seconds_since(t0)});
        std::printf("%s [%d] %s (%.1f s): %s\n", v.pass ? "PASS" : "FAIL", id, name.c_str(), lines.back().seconds,
                    shorten(v.detail).c_str());
        std::fflush(stdout);
    };

    auto t0 = std::chrono::steady_clock::now();
    try {
        prepare(suite);
    } catch (const std::exception& e) {
        std::printf("FAIL setup: %s\n", e.what());
        return 1;
    }
    std::printf("setup: %zu points, %zu shards, %zu queries (%.1f s)\n", suite.data.size(),
                suite.manifest.shards.size(), suite.queries.size(), seconds_since(t0));

    std::string bench_text;
    timed(1, "Oracle equivalence", [&] { return criterion_oracle(suite); });
    timed(2, "Partition completeness & disjointness", [&] { return criterion_partition(suite); });
    timed(3, "Pruning soundness", [&] { return criterion_pruning(suite); });
    timed(4, "Wave sizing", [&] { return criterion_waves(suite); });
    timed(5, "Fault tolerance & idempotence", [&] { return criterion_faults(suite); });
    timed(6, "Grid invariance", [&] { return criterion_grid(suite); });
    timed(7, "Scaling hypothesis", [&] { return criterion_scaling(bench_text); });
    timed(8, "Parser round-trip", [] { return criterion_round_trip(); });

    if (!bench_text.empty()) {
        std::printf("\nscaling benchmark:\n%s", bench_text.c_str());
    }
    int failed = static_cast<int>(std::count_if(lines.begin(), lines.end(), [](const Line& l) { return !l.verdict.pass; }));
    std::printf("\n%d/%zu criteria passed\n", static_cast<int>(lines.size()) - failed, lines.size());
    return failed == 0 ? 0 : 1;
}

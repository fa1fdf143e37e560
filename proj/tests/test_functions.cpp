#include <thread>

#include "doctest.h"
#include "fixtures.hpp"
#include "stq/error.hpp"
#include "stq/functions.hpp"
#include "stq/oracle.hpp"
#include "stq/text.hpp"

using namespace stq;

namespace {

const GridConfig g10 = GridConfig::make(10.0, 86400);

const Subquery& only_map(const WavePlan& p) {
    REQUIRE(p.waves.size() >= 1);
    REQUIRE(p.waves[0].subqueries.size() == 1);
    return p.waves[0].subqueries[0];
}

// A plan over `n` fake shards of cell (9,18) whose MAP outputs are then
// overwritten by the test.
WavePlan fake_plan(const std::string& query, int n, const std::string& qid) {
    ShardManifest m;
    m.grid = g10;
    for (int b = 0; b < n; ++b) {
        ShardKey k{9, 18, b};
        m.shards.push_back({k, cell_bbox(k, g10), bucket_interval(b, g10), 1, shard_blob_key(k)});
    }
    return plan(parse(query), m, qid);
}

QueryResult reduce_with(BlobStore& store, const WavePlan& p, const std::vector<std::string>& partials) {
    REQUIRE(p.waves.size() == 2);
    for (std::size_t i = 0; i < partials.size(); ++i) {
        store.put(p.waves[0].subqueries[i].output_key, partials[i]);
    }
    auto key = worker_reduce(p.waves[1].subqueries[0], store);
    return result_from_json(store.get(key));
}

} // namespace

TEST_CASE("worker_map re-filters rows inside the shard") {
    test::ScratchStore s;
    s.ingest_csv("entity_id,ts,lat,lon,alt,value\n"
                 "a,100,1,1,,\n"
                 "b,200,5,5,,\n"
                 "c,300,9,9,,\n",
                 g10);
    auto p = plan(parse("SELECT * WHERE REGION(0,0,6,6)"), load_manifest(s.store), "q1");
    auto key = worker_map(only_map(p), s.store);
    auto blob = s.store.get(key);
    auto lines = split_lines(blob);
    REQUIRE(lines.size() == 2);
    CHECK(parse_record(lines[0]).entity_id == "a");
    CHECK(parse_record(lines[1]).entity_id == "b");

    // Re-execution writes identical bytes.
    auto before = s.store.get(key);
    worker_map(only_map(p), s.store);
    CHECK(s.store.get(key) == before);
}

TEST_CASE("worker_map emits partial aggregates") {
    test::ScratchStore s;
    s.ingest_csv("entity_id,ts,lat,lon,alt,value\n"
                 "a,100,1,1,,\n"
                 "a,101,2,2,,\n"
                 "b,102,3,3,,\n"
                 "c,103,4,4,,\n",
                 g10);
    auto p = plan(parse("SELECT COUNT(*) GROUP BY CELL"), load_manifest(s.store), "q1");
    auto key = worker_map(only_map(p), s.store);
    CHECK(s.store.get(key) == "9_18,4,,,\n");

    auto none = plan(parse("SELECT COUNT(*) WHERE value > 1 GROUP BY CELL"), load_manifest(s.store), "q2");
    auto empty_key = worker_map(only_map(none), s.store);
    CHECK(s.store.exists(empty_key));
    CHECK(s.store.get(empty_key).empty());
}

TEST_CASE("worker_map fails on a missing shard") {
    test::ScratchStore s;
    s.ingest_csv(test::kFixtureCsv, g10);
    auto p = plan(parse("SELECT *"), load_manifest(s.store), "q1");
    s.store.remove(BlobKey("shards/c9_18/t19907.csv"));
    CHECK_THROWS_AS(worker_map(p.waves[0].subqueries[0], s.store), NotFoundError);
}

TEST_CASE("worker_reduce combines partials") {
    test::ScratchStore s;
    auto counts = reduce_with(s.store, fake_plan("SELECT COUNT(*) GROUP BY CELL", 3, "q1"),
                              {"9_18,3,,,\n", "9_18,5,,,\n", "9_18,0,,,\n"});
    REQUIRE(counts.groups.size() == 1);
    CHECK(counts.groups[0].key == "9_18");
    CHECK(counts.groups[0].count == 8);

    auto mixed = reduce_with(s.store, fake_plan("SELECT SUM(value), MIN(alt), MAX(alt)", 3, "q2"),
                             {",,1.5,10,20\n", ",,2.5,,\n", ",,0,5,7\n"});
    REQUIRE(mixed.groups.size() == 1);
    CHECK(mixed.groups[0].sum == 4.0);
    CHECK(mixed.groups[0].min == Nullable(5.0));
    CHECK(mixed.groups[0].max == Nullable(20.0));

    auto avg = reduce_with(s.store, fake_plan("SELECT AVG(value)", 2, "q3"),
                           {",,,,,1\n,,,,,2\n", ",,,,,3\n,,,,,4\n,,,,,\n"});
    REQUIRE(avg.groups.size() == 1);
    CHECK(avg.groups[0].avg == Nullable(2.5));

    auto ties = reduce_with(s.store, fake_plan("SELECT COUNT(*) GROUP BY ENTITY ORDER BY COUNT(*) DESC", 2, "q4"),
                            {"C,,,,,\nB,,,,,\nB,,,,,\nC,,,,,\nB,,,,,\nB,,,,,\n",
                             "A,,,,,\nA,,,,,\nA,,,,,\nA,,,,,\n"});
    REQUIRE(ties.groups.size() == 3);
    CHECK(ties.groups[0].key == "A");
    CHECK(ties.groups[1].key == "B");
    CHECK(ties.groups[2].key == "C");
    CHECK(ties.ordered);

    auto limited = reduce_with(s.store, fake_plan("SELECT * ORDER BY value DESC LIMIT 2", 2, "q5"),
                               {"a,1,0,0,,1\nb,1,0,0,,3\n", "c,1,0,0,,\nd,1,0,0,,3\n"});
    REQUIRE(limited.rows.size() == 2);
    CHECK(limited.rows[0].entity_id == "b"); // tie on 3 broken by entity_id
    CHECK(limited.rows[1].entity_id == "d");
}

TEST_CASE("merge_results") {
    test::ScratchStore s;
    auto p = fake_plan("SELECT *", 3, "q1");
    s.store.put(p.waves[0].subqueries[0].output_key, "z,5,1,1,,\nb,1,1,1,,\n");
    s.store.put(p.waves[0].subqueries[1].output_key, "");
    s.store.put(p.waves[0].subqueries[2].output_key, "a,9,1,1,2,\nb,0,1,1,,\na,1,1,1,,\n");
    auto r = merge_results(p, s.store);
    CHECK(r.kind == ResultKind::Rows);
    REQUIRE(r.rows.size() == 5);
    CHECK(std::is_sorted(r.rows.begin(), r.rows.end()));
    CHECK(result_from_json(s.store.get(final_result_key("q1"))) == r);

    s.store.remove(p.waves[0].subqueries[1].output_key);
    CHECK_THROWS_AS(merge_results(p, s.store), IntegrityError);

    auto none = fake_plan("SELECT COUNT(*), AVG(value) WHERE REGION(50,50,60,60)", 3, "q2");
    CHECK(none.waves.empty());
    auto empty = merge_results(none, s.store);
    CHECK(empty.kind == ResultKind::Aggregate);
    REQUIRE(empty.groups.size() == 1);
    CHECK(empty.groups[0].count == 0);
    CHECK(empty.groups[0].avg == std::optional<Nullable>(Nullable()));

    auto no_rows = merge_results(fake_plan("SELECT * WHERE REGION(50,50,60,60)", 1, "q3"), s.store);
    CHECK(no_rows.kind == ResultKind::Rows);
    CHECK(no_rows.rows.empty());

    auto grouped = merge_results(fake_plan("SELECT COUNT(*) WHERE REGION(50,50,60,60) GROUP BY CELL", 1, "q4"),
                                 s.store);
    CHECK(grouped.groups.empty());
}

TEST_CASE("plan serialization round trip") {
    auto p = fake_plan(test::kFlightHeaviest, 4, "q7");
    auto back = deserialize_plan(serialize(p));
    CHECK(back.query_id == p.query_id);
    CHECK(back.ast == p.ast);
    CHECK(back.grid == p.grid);
    CHECK(back.tag == p.tag);
    CHECK(back.merge_kind == p.merge_kind);
    REQUIRE(back.waves.size() == p.waves.size());
    for (std::size_t i = 0; i < p.waves.size(); ++i) {
        CHECK(back.waves[i].subqueries == p.waves[i].subqueries);
    }
}

TEST_CASE("pipeline on the fixture matches the oracle") {
    test::ScratchStore s;
    s.ingest_csv(test::kFixtureCsv, g10);
    QueryEngine engine(s.store, RuntimeConfig{});
    auto status = engine.run(test::kFlightHeaviest);
    REQUIRE(status.state == QueryState::Done);
    REQUIRE(status.result);
    CHECK(status.result_key == final_result_key(status.query_id));
    const auto& groups = status.result->groups;
    REQUIRE(groups.size() == 2);
    CHECK(groups[0].key == "14_19");
    CHECK(groups[0].count == 4);
    CHECK(groups[1].key == "9_18");
    CHECK(groups[1].count == 2);
    auto expected = oracle_execute(parse(test::kFlightHeaviest), test::parse_csv(test::kFixtureCsv), g10);
    CHECK(*status.result == expected);

    REQUIRE(status.wave_progress.size() == 2);
    CHECK(status.wave_progress[0] == WaveProgress{Stage::Map, 2, 2});
    CHECK(status.wave_progress[1] == WaveProgress{Stage::Reduce, 1, 1});

    auto json = status_to_json(status);
    CHECK(json.find("\"state\":\"DONE\"") != std::string::npos);
    CHECK(json.find("\"result\"") != std::string::npos);
}

TEST_CASE("coordinator wave shapes in the invocation log") {
    test::ScratchStore s;
    auto data = gen_trajectories(3, 30, 40, BoundingBox::make(35, -10, 65, 30),
                                 TimeInterval::make(1'700'006'400, 1'700'006'400 + 86400));
    s.ingest_csv(test::to_csv(data), g10);
    auto manifest = load_manifest(s.store);
    QueryEngine engine(s.store, RuntimeConfig{});

    auto rows = engine.run("SELECT * WHERE REGION(40,0,60,20)");
    REQUIRE(rows.state == QueryState::Done);
    auto pruned = prune_shards(manifest, parse("SELECT * WHERE REGION(40,0,60,20)").where).size();
    REQUIRE(pruned > 1);
    auto log = engine.runtime().log();
    REQUIRE(log.size() == pruned + 1);
    for (std::size_t i = 0; i < pruned; ++i) {
        CHECK(log[i].function_id == kWorkerFunction);
        CHECK(log[i].wave_index == 0);
    }
    CHECK(log.back().function_id == kMergerFunction);
    CHECK(log.back().wave_index == 1);

    auto before = engine.runtime().log_size();
    auto avg = engine.run("SELECT AVG(value)");
    REQUIRE(avg.state == QueryState::Done);
    log = engine.runtime().log();
    std::size_t reduce = 0;
    for (std::size_t i = before; i < log.size(); ++i) {
        reduce += log[i].wave_index == 1 ? 1 : 0;
    }
    CHECK(reduce == 1);
    CHECK(*avg.result == oracle_execute(parse("SELECT AVG(value)"), data, g10));
}

TEST_CASE("injected failures do not change results") {
    test::ScratchStore s;
    auto data = gen_trajectories(4, 30, 40, BoundingBox::make(35, -10, 65, 30),
                                 TimeInterval::make(1'700'006'400, 1'700'006'400 + 2 * 86400));
    s.ingest_csv(test::to_csv(data), g10);
    RuntimeConfig flaky;
    flaky.failure_injection_rate = 0.3;
    flaky.retry_limit = 1;
    flaky.rng_seed = 9;
    QueryEngine clean(s.store, RuntimeConfig{});
    QueryEngine faulty(s.store, flaky);
    for (const char* q : {"SELECT COUNT(*), MAX(alt) GROUP BY ENTITY", "SELECT * ORDER BY value DESC LIMIT 7",
                          test::kFlightHeaviest}) {
        INFO(std::string(q));
        auto a = clean.run(q);
        auto b = faulty.run(q);
        REQUIRE(a.state == QueryState::Done);
        REQUIRE(b.state == QueryState::Done);
        CHECK(*a.result == *b.result);
    }
    bool retried = false;
    for (const auto& r : faulty.runtime().log()) {
        retried = retried || r.attempts > 1 || r.outcome == Outcome::Failed;
    }
    CHECK(retried);
}

TEST_CASE("unrecoverable failures end in FAILED") {
    test::ScratchStore s;
    s.ingest_csv(test::kFixtureCsv, g10);
    RuntimeConfig doomed;
    doomed.failure_injection_rate = 1.0;
    doomed.retry_limit = 0;
    QueryEngine engine(s.store, doomed, CoordinatorOptions{0});
    auto status = engine.run("SELECT *");
    CHECK(status.state == QueryState::Failed);
    REQUIRE(status.error);
    CHECK(status.error->find("injected") != std::string::npos);
    CHECK(status_to_json(status).find("\"error\"") != std::string::npos);
    CHECK(engine.board().get(status.query_id)->state == QueryState::Failed);

    test::ScratchStore empty;
    QueryEngine lost(empty.store, RuntimeConfig{});
    CHECK(lost.run("SELECT *").state == QueryState::Failed);
    CHECK_THROWS_AS(lost.run("SELECT"), ParseError);
}

TEST_CASE("status board is monotonic") {
    StatusBoard board;
    board.publish({"q", QueryState::Running, {}, {}, {}, {}});
    board.publish({"q", QueryState::Pending, {}, {}, {}, {}});
    CHECK(board.get("q")->state == QueryState::Running);
    board.publish({"q", QueryState::Done, BlobKey("results/q/final.json"), {}, {}, QueryResult{}});
    board.publish({"q", QueryState::Failed, {}, "late", {}, {}});
    CHECK(board.get("q")->state == QueryState::Done);
    CHECK_FALSE(board.get("other"));

    board.publish({"slow", QueryState::Running, {}, {}, {}, {}});
    CHECK_FALSE(board.wait_terminal("slow", std::chrono::milliseconds(20))->terminal());
    std::thread finisher([&] {
        std::this_thread::sleep_for(std::chrono::milliseconds(30));
        board.publish({"slow", QueryState::Failed, {}, "boom", {}, {}});
    });
    CHECK(board.wait_terminal("slow", std::chrono::seconds(5))->state == QueryState::Failed);
    finisher.join();
}

#include <sstream>

#include "doctest.h"
#include "stq/bench.hpp"
#include "stq/error.hpp"

using namespace stq;

TEST_CASE("bench config parsing") {
    std::istringstream in(R"(# two scenarios
scenario = small
seed = 3
entities = 10
points = 20
cell_deg = 5
bucket_seconds = 43200
query = SELECT COUNT(*) GROUP BY ENTITY
max_concurrency = 2
warm_delay_ms = 1
cold_start_delay_ms = 2

scenario = boxed
region = 40.5, 0.5, 49.5, 9.5
start_ts = 1700006400
end_ts = 1700092800
)");
    auto s = parse_bench_config(in);
    REQUIRE(s.size() == 2);
    CHECK(s[0].scenario == "small");
    CHECK(s[0].seed == 3);
    CHECK(s[0].cell_deg == 5.0);
    CHECK(s[0].bucket_seconds == 43200);
    CHECK(s[0].query == "SELECT COUNT(*) GROUP BY ENTITY");
    CHECK(s[0].max_concurrency == 2);
    CHECK(s[0].warm_delay_ms == 1);
    CHECK(s[0].cold_start_delay_ms == 2);
    CHECK(s[1].region == BoundingBox::make(40.5, 0.5, 49.5, 9.5));
    CHECK(s[1].end_ts == 1700092800);

    std::istringstream bad("scenario = x\ncolour = red\n");
    CHECK_THROWS_AS(parse_bench_config(bad), DomainError);
    std::istringstream nokv("scenario x\n");
    CHECK_THROWS_AS(parse_bench_config(nokv), DomainError);
    std::istringstream badnum("seed = many\n");
    CHECK_THROWS_AS(parse_bench_config(badnum), DomainError);
}

TEST_CASE("run_benchmark reports matched runs") {
    BenchScenario a;
    a.scenario = "rows";
    a.entities = 10;
    a.points = 20;
    a.query = "SELECT * WHERE value > 50 ORDER BY ts DESC LIMIT 5";
    BenchScenario b = a;
    b.scenario = "grouped";
    b.query = "SELECT COUNT(*), AVG(alt) GROUP BY CELL";
    b.max_concurrency = 8;
    auto report = run_benchmark({a, b});
    REQUIRE(report.rows.size() == 2);
    const auto* rows = report.find("rows");
    REQUIRE(rows);
    CHECK(rows->records == 200);
    CHECK(rows->shards > 0);
    CHECK(rows->engine_ms > 0.0);
    CHECK(rows->oracle_ms > 0.0);
    CHECK(rows->waves == 2);
    REQUIRE(rows->wave_widths.size() == 2);
    CHECK(rows->wave_widths[1] == 1);
    CHECK(report.find("missing") == nullptr);

    auto csv = report.csv();
    CHECK(csv.starts_with("scenario,shards,concurrency,engine_ms,oracle_ms,speedup\n"));
    CHECK(csv.find("\ngrouped,") != std::string::npos);
    CHECK(report.table().find("grouped") != std::string::npos);
}

TEST_CASE("run_benchmark rejects failing engine runs") {
    BenchScenario s;
    s.scenario = "bad";
    s.entities = 2;
    s.points = 5;
    s.query = "SELECT * WHERE REGION(";
    CHECK_THROWS_AS(run_benchmark({s}), ParseError);
}

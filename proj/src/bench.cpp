#include "stq/bench.hpp"

#include <chrono>
#include <iomanip>
#include <istream>
#include <sstream>

#include "stq/blob_store.hpp"
#include "stq/error.hpp"
#include "stq/functions.hpp"
#include "stq/ingest.hpp"
#include "stq/oracle.hpp"
#include "stq/temp_dir.hpp"
#include "stq/text.hpp"

namespace stq {

namespace {

std::int64_t int_value(std::string_view v, std::size_t line) {
    auto n = parse_int64(v);
    if (!n) {
        throw DomainError("bench config line " + std::to_string(line) + ": expected integer, got '" +
                          std::string(v) + "'");
    }
    return *n;
}

double double_value(std::string_view v, std::size_t line) {
    auto d = parse_double(v);
    if (!d) {
        throw DomainError("bench config line " + std::to_string(line) + ": expected number, got '" +
                          std::string(v) + "'");
    }
    return *d;
}

void set_field(BenchScenario& s, const std::string& key, const std::string& value, std::size_t line) {
    if (key == "scenario") {
        s.scenario = value;
    } else if (key == "seed") {
        s.seed = static_cast<std::uint64_t>(int_value(value, line));
    } else if (key == "entities") {
        s.entities = int_value(value, line);
    } else if (key == "points") {
        s.points = int_value(value, line);
    } else if (key == "cell_deg") {
        s.cell_deg = double_value(value, line);
    } else if (key == "bucket_seconds") {
        s.bucket_seconds = int_value(value, line);
    } else if (key == "query") {
        s.query = value;
    } else if (key == "max_concurrency") {
        s.max_concurrency = static_cast<int>(int_value(value, line));
    } else if (key == "warm_delay_ms") {
        s.warm_delay_ms = int_value(value, line);
    } else if (key == "cold_start_delay_ms") {
        s.cold_start_delay_ms = int_value(value, line);
    } else if (key == "start_ts") {
        s.start_ts = int_value(value, line);
    } else if (key == "end_ts") {
        s.end_ts = int_value(value, line);
    } else if (key == "region") {
        auto parts = split(value, ',');
        if (parts.size() != 4) {
            throw DomainError("bench config line " + std::to_string(line) +
                              ": region needs min_lat,min_lon,max_lat,max_lon");
        }
        s.region = BoundingBox::make(double_value(trim(parts[0]), line), double_value(trim(parts[1]), line),
                                     double_value(trim(parts[2]), line), double_value(trim(parts[3]), line));
    } else {
        throw DomainError("bench config line " + std::to_string(line) + ": unknown field '" + key + "'");
    }
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

BenchRow run_one(const BenchScenario& s, const BenchOptions& options) {
    auto grid = GridConfig::make(s.cell_deg, s.bucket_seconds);
    auto records = gen_trajectories(s.seed, s.entities, s.points, s.region,
                                    TimeInterval::make(s.start_ts, s.end_ts));
    TempDir dir("stq-bench");
    FsBlobStore store(dir.path());
    std::stringstream csv;
    write_csv(csv, records);
    ingest(csv, grid, store);
    auto manifest = load_manifest(store);

    RuntimeConfig config;
    config.max_concurrency = s.max_concurrency;
    if (!options.real_timing) {
        config.warm_delay_ms = s.warm_delay_ms;
        config.cold_start_delay_ms = s.cold_start_delay_ms;
    }
    QueryEngine engine(store, config);
    auto ast = parse(s.query);

    auto t0 = std::chrono::steady_clock::now();
    auto status = engine.run(ast, engine.next_query_id());
    double engine_ms = elapsed_ms(t0);
    if (status.state != QueryState::Done || !status.result) {
        throw InvocationError("scenario " + s.scenario + ": engine run failed: " +
                              status.error.value_or("no result"));
    }

    t0 = std::chrono::steady_clock::now();
    auto expected = oracle_execute(ast, records, grid);
    double oracle_ms = elapsed_ms(t0);

    std::string diff;
    if (!results_equivalent(*status.result, expected, 1e-9, &diff)) {
        throw CorrectnessError("scenario " + s.scenario + ": engine result differs from oracle: " + diff);
    }

    BenchRow row;
    row.scenario = s.scenario;
    row.records = static_cast<std::int64_t>(records.size());
    row.shards = static_cast<std::int64_t>(manifest.shards.size());
    row.concurrency = s.max_concurrency;
    row.engine_ms = engine_ms;
    row.oracle_ms = oracle_ms;
    row.waves = static_cast<int>(status.wave_progress.size());
    for (const auto& w : status.wave_progress) {
        row.wave_widths.push_back(w.total);
    }
    return row;
}

} // namespace

std::vector<BenchScenario> parse_bench_config(std::istream& in) {
    std::vector<BenchScenario> out;
    std::optional<BenchScenario> current;
    std::string raw;
    std::size_t line_no = 0;
    auto flush = [&] {
        if (current) {
            if (current->scenario.empty()) {
                current->scenario = "scenario" + std::to_string(out.size() + 1);
            }
            out.push_back(*current);
            current.reset();
        }
    };
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line(trim(raw));
        if (line.starts_with("#")) {
            continue;
        }
        if (line.empty()) {
            flush();
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw DomainError("bench config line " + std::to_string(line_no) + ": expected key = value");
        }
        if (!current) {
            current.emplace();
        }
        std::string_view view(line);
        set_field(*current, std::string(trim(view.substr(0, eq))),
                  std::string(trim(view.substr(eq + 1))), line_no);
    }
    flush();
    return out;
}

std::string BenchReport::table() const {
    std::ostringstream out;
    out << std::left << std::setw(24) << "scenario" << std::right << std::setw(9) << "records"
        << std::setw(8) << "shards" << std::setw(7) << "conc" << std::setw(8) << "waves"
        << std::setw(12) << "engine_ms" << std::setw(12) << "oracle_ms" << std::setw(10) << "speedup"
        << "\n";
    out << std::fixed;
    for (const auto& r : rows) {
        std::string widths;
        for (int w : r.wave_widths) {
            widths += (widths.empty() ? "" : "+") + std::to_string(w);
        }
        out << std::left << std::setw(24) << r.scenario << std::right << std::setw(9) << r.records
            << std::setw(8) << r.shards << std::setw(7) << r.concurrency << std::setw(8)
            << (widths.empty() ? "-" : widths) << std::setprecision(1) << std::setw(12) << r.engine_ms
            << std::setw(12) << r.oracle_ms << std::setprecision(3) << std::setw(10) << r.speedup()
            << "\n";
    }
    return out.str();
}

std::string BenchReport::csv() const {
    std::ostringstream out;
    out << "scenario,shards,concurrency,engine_ms,oracle_ms,speedup\n";
    out << std::fixed;
    for (const auto& r : rows) {
        out << r.scenario << ',' << r.shards << ',' << r.concurrency << ',' << std::setprecision(3)
            << r.engine_ms << ',' << r.oracle_ms << ',' << std::setprecision(4) << r.speedup() << "\n";
    }
    return out.str();
}

const BenchRow* BenchReport::find(const std::string& scenario) const {
    for (const auto& r : rows) {
        if (r.scenario == scenario) {
            return &r;
        }
    }
    return nullptr;
}

BenchReport run_benchmark(const std::vector<BenchScenario>& scenarios, BenchOptions options) {
    BenchReport report;
    for (const auto& s : scenarios) {
        report.rows.push_back(run_one(s, options));
    }
    return report;
}

} // namespace stq

// Command-line front end: ingest, gen, query, serve, bench.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <pthread.h>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "stq/bench.hpp"
#include "stq/error.hpp"
#include "stq/functions.hpp"
#include "stq/ingest.hpp"
#include "stq/starter.hpp"
#include "stq/text.hpp"

namespace {

constexpr int kUserError = 1;
constexpr int kInternalError = 2;

// Failures caused by the invocation itself (bad input, bad flags, missing
// files) rather than by the engine.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

stq::BoundingBox parse_region(const std::string& text) {
    auto parts = stq::split(text, ',');
    if (parts.size() != 4) {
        throw UsageError("--region expects min_lat,min_lon,max_lat,max_lon");
    }
    double v[4];
    for (int i = 0; i < 4; ++i) {
        auto d = stq::parse_double(stq::trim(parts[static_cast<std::size_t>(i)]));
        if (!d) {
            throw UsageError("--region: not a number: " + std::string(parts[static_cast<std::size_t>(i)]));
        }
        v[i] = *d;
    }
    return stq::BoundingBox::make(v[0], v[1], v[2], v[3]);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Serverless-style spatiotemporal query engine"};
    app.require_subcommand(1);

    std::string input, store_dir, out_path, config_path, query_text, region_text;
    std::string host = "127.0.0.1";
    double cell_deg = 10.0;
    std::int64_t bucket_seconds = 86400;
    bool strict = false;
    std::uint64_t seed = 1;
    std::int64_t entities = 100, points = 100;
    std::int64_t start_ts = 1'700'006'400;
    std::int64_t end_ts = start_ts + 7 * 86400;
    int port = 8080;
    bool real_timing = false;
    stq::RuntimeConfig runtime;

    auto* ingest_cmd = app.add_subcommand("ingest", "Shard a CSV file into a blob store");
    ingest_cmd->add_option("--input", input, "CSV file with header entity_id,ts,lat,lon,alt,value")->required();
    ingest_cmd->add_option("--store", store_dir, "Blob store directory")->required();
    ingest_cmd->add_option("--cell-deg", cell_deg, "Grid cell size in degrees (divides 180)");
    ingest_cmd->add_option("--bucket-seconds", bucket_seconds, "Time bucket width in seconds");
    ingest_cmd->add_flag("--strict", strict, "Fail on the first malformed record");

    auto* gen_cmd = app.add_subcommand("gen", "Write a seeded synthetic trajectory CSV");
    gen_cmd->add_option("--seed", seed);
    gen_cmd->add_option("--entities", entities);
    gen_cmd->add_option("--points", points, "Points per entity");
    gen_cmd->add_option("--out", out_path)->required();
    gen_cmd->add_option("--region", region_text, "min_lat,min_lon,max_lat,max_lon");
    gen_cmd->add_option("--start-ts", start_ts);
    gen_cmd->add_option("--end-ts", end_ts);

    auto add_runtime_flags = [&](CLI::App* cmd) {
        cmd->add_option("--concurrency", runtime.max_concurrency, "Worker slots");
        cmd->add_option("--retry-limit", runtime.retry_limit);
        cmd->add_option("--failure-rate", runtime.failure_injection_rate);
        cmd->add_option("--warm-delay-ms", runtime.warm_delay_ms);
        cmd->add_option("--cold-start-delay-ms", runtime.cold_start_delay_ms);
    };

    auto* query_cmd = app.add_subcommand("query", "Run one query through the pipeline and print the result");
    query_cmd->add_option("--store", store_dir)->required();
    query_cmd->add_option("text", query_text, "Query text")->required();
    add_runtime_flags(query_cmd);

    auto* serve_cmd = app.add_subcommand("serve", "Serve POST /query and GET /query/{id}");
    serve_cmd->add_option("--store", store_dir)->required();
    serve_cmd->add_option("--port", port);
    serve_cmd->add_option("--host", host);
    add_runtime_flags(serve_cmd);

    auto* bench_cmd = app.add_subcommand("bench", "Run benchmark scenarios against the oracle");
    bench_cmd->add_option("--config", config_path)->required();
    bench_cmd->add_flag("--real-timing", real_timing, "Disable simulated start delays");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return kUserError;
    }

    try {
        if (*ingest_cmd) {
            std::ifstream in(input);
            if (!in) {
                throw UsageError("cannot open " + input);
            }
            stq::FsBlobStore store(store_dir);
            auto report = stq::ingest(in, stq::GridConfig::make(cell_deg, bucket_seconds), store,
                                      stq::IngestOptions{strict});
            std::cout << nlohmann::json{{"records_read", report.records_read},
                                        {"records_rejected", report.records_rejected},
                                        {"shards_written", report.shards_written},
                                        {"manifest_key", report.manifest_key.str()}}
                             .dump()
                      << "\n";
        } else if (*gen_cmd) {
            auto region = region_text.empty() ? stq::BoundingBox::make(35.0, -10.0, 65.0, 30.0)
                                              : parse_region(region_text);
            auto records = stq::gen_trajectories(seed, entities, points, region,
                                                 stq::TimeInterval::make(start_ts, end_ts));
            std::ofstream out(out_path);
            if (!out) {
                throw UsageError("cannot write " + out_path);
            }
            stq::write_csv(out, records);
            std::cerr << "wrote " << records.size() << " records to " << out_path << "\n";
        } else if (*query_cmd) {
            runtime.validate();
            auto ast = stq::parse(query_text);
            if (!std::filesystem::is_directory(store_dir)) {
                throw UsageError("no such store: " + store_dir);
            }
            stq::FsBlobStore store(store_dir);
            stq::load_manifest(store);
            stq::QueryEngine engine(store, runtime);
            auto status = engine.run(ast, engine.next_query_id());
            if (status.state != stq::QueryState::Done || !status.result) {
                std::cerr << "query failed: " << status.error.value_or("unknown error") << "\n";
                return kInternalError;
            }
            std::cout << stq::to_json(*status.result) << "\n";
        } else if (*serve_cmd) {
            runtime.validate();
            if (!std::filesystem::is_directory(store_dir)) {
                throw UsageError("no such store: " + store_dir);
            }
            stq::FsBlobStore store(store_dir);
            stq::load_manifest(store);
            stq::QueryEngine engine(store, runtime);
            // SIGINT/SIGTERM are taken by a sigwait thread, which stops the
            // server outside of signal context. SIGUSR1 releases it on a
            // normal exit.
            sigset_t signals;
            sigemptyset(&signals);
            sigaddset(&signals, SIGINT);
            sigaddset(&signals, SIGTERM);
            sigaddset(&signals, SIGUSR1);
            pthread_sigmask(SIG_BLOCK, &signals, nullptr);
            stq::Starter starter(engine);
            std::thread waiter([&] {
                int sig = 0;
                sigwait(&signals, &sig);
                starter.stop();
            });
            std::cerr << "listening on " << host << ":" << port << "\n";
            try {
                starter.listen(host, port);
            } catch (const stq::IoError& e) {
                pthread_kill(waiter.native_handle(), SIGUSR1);
                waiter.join();
                throw UsageError(e.what());
            }
            pthread_kill(waiter.native_handle(), SIGUSR1);
            waiter.join();
        } else if (*bench_cmd) {
            std::ifstream in(config_path);
            if (!in) {
                throw UsageError("cannot open " + config_path);
            }
            auto report = stq::run_benchmark(stq::parse_bench_config(in), stq::BenchOptions{real_timing});
            std::cout << report.table() << "\n" << report.csv();
        }
    } catch (const stq::ParseError& e) {
        std::cerr << e.what() << "\n";
        if (!query_text.empty()) {
            std::cerr << "  " << query_text << "\n  " << std::string(e.offset(), ' ') << "^\n";
        }
        return kUserError;
    } catch (const UsageError& e) {
        std::cerr << e.what() << "\n";
        return kUserError;
    } catch (const stq::DomainError& e) {
        std::cerr << e.what() << "\n";
        return kUserError;
    } catch (const stq::RecordError& e) {
        std::cerr << e.what() << "\n";
        return kUserError;
    } catch (const stq::NotFoundError& e) {
        std::cerr << e.what() << "\n";
        return kUserError;
    } catch (const stq::KeyError& e) {
        std::cerr << e.what() << "\n";
        return kUserError;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kInternalError;
    }
    return 0;
}

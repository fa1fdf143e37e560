#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "stq/blob_store.hpp"

namespace stq {

struct RuntimeConfig {
    int max_concurrency = 4;
    int retry_limit = 2;
    double failure_injection_rate = 0.0;
    std::int64_t cold_start_delay_ms = 0;
    std::int64_t warm_delay_ms = 0;
    std::uint64_t rng_seed = 0;

    /// Throws DomainError on out-of-range settings.
    void validate() const;
};

/// A function body. It receives its payload and the shared store and must
/// not keep state between calls: every invocation runs on a fresh copy of
/// the registered callable.
using Handler = std::function<std::string(std::string_view payload, BlobStore& store)>;

enum class Outcome { Success, Failed };

const char* to_string(Outcome outcome);

struct InvocationResult {
    Outcome outcome = Outcome::Failed;
    std::string output; ///< handler return value on success
    std::string error;  ///< last error on failure
    int attempts = 0;
};

struct InvocationRecord {
    std::string function_id;
    int wave_index = -1;
    double start_ms = 0.0; ///< relative to runtime construction
    double end_ms = 0.0;
    int attempts = 0;
    Outcome outcome = Outcome::Failed;
};

/// Local stand-in for a managed FaaS platform: named stateless functions,
/// a global pool of `max_concurrency` execution slots, per-attempt seeded
/// fault injection with retries, and simulated cold/warm start latency.
///
/// Each slot pays `cold_start_delay_ms` on its first attempt and
/// `warm_delay_ms` on every later one. Injected failures hit after the
/// handler has run, so the retry re-executes it in full.
class Runtime {
public:
    Runtime(RuntimeConfig config, BlobStore& store);

    Runtime(const Runtime&) = delete;
    Runtime& operator=(const Runtime&) = delete;

    /// Throws InvocationError if the id is taken.
    void register_function(const std::string& function_id, Handler handler);
    bool is_registered(const std::string& function_id) const;

    /// Runs one logical invocation with retries. `first_attempt` offsets the
    /// attempt numbers fed to fault injection, so a re-driven invocation
    /// draws fresh decisions. Throws InvocationError for unknown ids.
    InvocationResult invoke(const std::string& function_id, std::string_view payload,
                            int wave_index = -1, int first_attempt = 1);

    /// Runs every payload with at most max_concurrency in flight and returns
    /// once all have reached a terminal outcome. Results follow payload order.
    std::vector<InvocationResult> invoke_wave(const std::string& function_id,
                                              const std::vector<std::string>& payloads,
                                              int wave_index, int first_attempt = 1);

    std::vector<InvocationRecord> log() const;
    std::size_t log_size() const;

    /// `function_id,wave_index,start_ms,end_ms,attempts,outcome` lines.
    std::string export_log() const;

    /// Highest number of handler executions observed in flight at once.
    int peak_concurrency() const;
    void reset_peak_concurrency();

    const RuntimeConfig& config() const { return config_; }
    BlobStore& store() { return store_; }

private:
    int acquire_slot();
    void release_slot(int slot);
    bool inject_failure(std::uint64_t payload_hash, int attempt) const;
    double now_ms() const;

    RuntimeConfig config_;
    BlobStore& store_;
    std::chrono::steady_clock::time_point epoch_;

    mutable std::mutex functions_mu_;
    std::map<std::string, Handler> functions_;

    std::mutex slots_mu_;
    std::condition_variable slots_cv_;
    std::set<int> free_slots_;
    std::vector<bool> warm_;

    mutable std::mutex log_mu_;
    std::vector<InvocationRecord> log_;
    int in_flight_ = 0;
    int peak_ = 0;
};

} // namespace stq

#include "stq/runtime.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <thread>

#include "stq/error.hpp"

namespace stq {

namespace {

std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 1469598103934665603ULL) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

void RuntimeConfig::validate() const {
    if (max_concurrency < 1) {
        throw DomainError("max_concurrency must be >= 1");
    }
    if (retry_limit < 0) {
        throw DomainError("retry_limit must be >= 0");
    }
    if (!(failure_injection_rate >= 0.0 && failure_injection_rate <= 1.0)) {
        throw DomainError("failure_injection_rate must be in [0, 1]");
    }
    if (cold_start_delay_ms < 0 || warm_delay_ms < 0) {
        throw DomainError("simulated delays must be >= 0");
    }
}

const char* to_string(Outcome outcome) {
    return outcome == Outcome::Success ? "SUCCESS" : "FAILED";
}

Runtime::Runtime(RuntimeConfig config, BlobStore& store)
    : config_(config), store_(store), epoch_(std::chrono::steady_clock::now()) {
    config_.validate();
    for (int i = 0; i < config_.max_concurrency; ++i) {
        free_slots_.insert(i);
    }
    warm_.assign(static_cast<std::size_t>(config_.max_concurrency), false);
}

void Runtime::register_function(const std::string& function_id, Handler handler) {
    std::lock_guard lock(functions_mu_);
    if (!functions_.emplace(function_id, std::move(handler)).second) {
        throw InvocationError("function already registered: " + function_id);
    }
}

bool Runtime::is_registered(const std::string& function_id) const {
    std::lock_guard lock(functions_mu_);
    return functions_.contains(function_id);
}

int Runtime::acquire_slot() {
    std::unique_lock lock(slots_mu_);
    slots_cv_.wait(lock, [&] { return !free_slots_.empty(); });
    int slot = *free_slots_.begin();
    free_slots_.erase(free_slots_.begin());
    return slot;
}

void Runtime::release_slot(int slot) {
    {
        std::lock_guard lock(slots_mu_);
        free_slots_.insert(slot);
    }
    slots_cv_.notify_one();
}

bool Runtime::inject_failure(std::uint64_t payload_hash, int attempt) const {
    if (config_.failure_injection_rate <= 0.0) {
        return false;
    }
    auto h = splitmix64(payload_hash ^ splitmix64(config_.rng_seed) ^
                        splitmix64(static_cast<std::uint64_t>(attempt) + 0x51ed27f1ULL));
    double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    return u < config_.failure_injection_rate;
}

double Runtime::now_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - epoch_)
        .count();
}

InvocationResult Runtime::invoke(const std::string& function_id, std::string_view payload,
                                 int wave_index, int first_attempt) {
    Handler prototype;
    {
        std::lock_guard lock(functions_mu_);
        auto it = functions_.find(function_id);
        if (it == functions_.end()) {
            throw InvocationError("function not registered: " + function_id);
        }
        prototype = it->second;
    }
    auto payload_hash = fnv1a(payload, fnv1a(function_id + '\0'));

    InvocationRecord record{function_id, wave_index, now_ms(), 0.0, 0, Outcome::Failed};
    InvocationResult result;
    int slot = acquire_slot();
    for (int attempt = 0; attempt <= config_.retry_limit; ++attempt) {
        ++result.attempts;
        bool cold = false;
        {
            std::lock_guard lock(slots_mu_);
            cold = !warm_[static_cast<std::size_t>(slot)];
            warm_[static_cast<std::size_t>(slot)] = true;
        }
        auto delay = cold ? config_.cold_start_delay_ms : config_.warm_delay_ms;
        if (delay > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        }
        {
            std::lock_guard lock(log_mu_);
            peak_ = std::max(peak_, ++in_flight_);
        }
        bool ok = false;
        try {
            Handler fresh = prototype;
            result.output = fresh(payload, store_);
            ok = true;
        } catch (const std::exception& e) {
            result.error = e.what();
        }
        {
            std::lock_guard lock(log_mu_);
            --in_flight_;
        }
        if (ok && inject_failure(payload_hash, first_attempt + attempt)) {
            ok = false;
            result.output.clear();
            result.error = "injected failure (attempt " + std::to_string(first_attempt + attempt) +
                           ")";
        }
        if (ok) {
            result.outcome = Outcome::Success;
            result.error.clear();
            break;
        }
    }
    release_slot(slot);

    record.end_ms = now_ms();
    record.attempts = result.attempts;
    record.outcome = result.outcome;
    {
        std::lock_guard lock(log_mu_);
        log_.push_back(std::move(record));
    }
    return result;
}

std::vector<InvocationResult> Runtime::invoke_wave(const std::string& function_id,
                                                   const std::vector<std::string>& payloads,
                                                   int wave_index, int first_attempt) {
    std::vector<InvocationResult> results(payloads.size());
    if (payloads.empty()) {
        return results;
    }
    if (!is_registered(function_id)) {
        throw InvocationError("function not registered: " + function_id);
    }
    std::atomic<std::size_t> next{0};
    auto drain = [&] {
        for (auto i = next++; i < payloads.size(); i = next++) {
            results[i] = invoke(function_id, payloads[i], wave_index, first_attempt);
        }
    };
    auto width = std::min<std::size_t>(payloads.size(),
                                       static_cast<std::size_t>(config_.max_concurrency));
    {
        std::vector<std::jthread> threads;
        threads.reserve(width - 1);
        for (std::size_t t = 1; t < width; ++t) {
            threads.emplace_back(drain);
        }
        drain();
    }
    return results;
}

std::vector<InvocationRecord> Runtime::log() const {
    std::lock_guard lock(log_mu_);
    return log_;
}

std::size_t Runtime::log_size() const {
    std::lock_guard lock(log_mu_);
    return log_.size();
}

std::string Runtime::export_log() const {
    std::string out;
    char buf[64];
    for (const auto& r : log()) {
        std::snprintf(buf, sizeof buf, ",%d,%.3f,%.3f,%d,", r.wave_index, r.start_ms, r.end_ms,
                      r.attempts);
        out += r.function_id + buf + to_string(r.outcome) + "\n";
    }
    return out;
}

int Runtime::peak_concurrency() const {
    std::lock_guard lock(log_mu_);
    return peak_;
}

void Runtime::reset_peak_concurrency() {
    std::lock_guard lock(log_mu_);
    peak_ = in_flight_;
}

} // namespace stq

#include "stq/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "stq/error.hpp"
#include "stq/text.hpp"

namespace stq {

using nlohmann::json;

const BlobKey& manifest_key() {
    static const BlobKey key{"manifest.json"};
    return key;
}

BlobKey shard_blob_key(const ShardKey& key) {
    return BlobKey("shards/c" + std::to_string(key.cell_ix) + "_" + std::to_string(key.cell_iy) +
                   "/t" + std::to_string(key.bucket) + ".csv");
}

TrajectoryPoint parse_record(std::string_view line, std::size_t line_no) {
    auto fields = split(line, ',');
    if (fields.size() != 6) {
        throw RecordError(line_no,
                          "expected 6 fields, found " + std::to_string(fields.size()));
    }
    auto number = [&](std::string_view text, const char* name) {
        auto v = parse_double(trim(text));
        if (!v) {
            throw RecordError(line_no, std::string("non-numeric ") + name + ": \"" +
                                           std::string(text) + "\"");
        }
        return *v;
    };
    auto optional_number = [&](std::string_view text, const char* name) -> std::optional<double> {
        if (trim(text).empty()) {
            return std::nullopt;
        }
        return number(text, name);
    };

    TrajectoryPoint p;
    p.entity_id = std::string(trim(fields[0]));
    auto ts = parse_int64(trim(fields[1]));
    if (!ts) {
        throw RecordError(line_no, "ts is not an integer: \"" + std::string(fields[1]) + "\"");
    }
    p.ts = *ts;
    p.lat = number(fields[2], "lat");
    p.lon = number(fields[3], "lon");
    p.alt = optional_number(fields[4], "alt");
    p.value = optional_number(fields[5], "value");
    try {
        validate_point(p);
    } catch (const DomainError& e) {
        throw RecordError(line_no, e.what());
    }
    return p;
}

std::string format_record(const TrajectoryPoint& p) {
    std::string out = p.entity_id;
    out += ',';
    out += std::to_string(p.ts);
    out += ',';
    out += format_double(p.lat);
    out += ',';
    out += format_double(p.lon);
    out += ',';
    if (p.alt) {
        out += format_double(*p.alt);
    }
    out += ',';
    if (p.value) {
        out += format_double(*p.value);
    }
    return out;
}

void write_csv(std::ostream& out, std::span<const TrajectoryPoint> points) {
    out << kCsvHeader << '\n';
    for (const auto& p : points) {
        out << format_record(p) << '\n';
    }
}

namespace {

json manifest_to_json(const ShardManifest& m) {
    json shards = json::array();
    for (const auto& s : m.shards) {
        shards.push_back({{"cell_ix", s.key.cell_ix},
                          {"cell_iy", s.key.cell_iy},
                          {"bucket", s.key.bucket},
                          {"record_count", s.record_count},
                          {"blob_key", s.blob_key.str()}});
    }
    return {{"cell_deg", m.grid.cell_deg},
            {"bucket_seconds", m.grid.bucket_seconds},
            {"shards", std::move(shards)},
            {"total_records", m.total_records}};
}

ShardDescriptor describe(const ShardKey& key, const GridConfig& grid, std::int64_t count) {
    return ShardDescriptor{key, cell_bbox(key, grid), bucket_interval(key.bucket, grid), count,
                           shard_blob_key(key)};
}

} // namespace

IngestReport ingest(std::istream& input, const GridConfig& grid, BlobStore& store,
                    IngestOptions options) {
    IngestReport report;
    std::map<ShardKey, std::vector<TrajectoryPoint>> shards;

    std::string line;
    std::size_t line_no = 0;
    bool saw_header = false;
    while (std::getline(input, line)) {
        ++line_no;
        auto text = trim(line);
        if (text.empty()) {
            continue;
        }
        if (!saw_header) {
            if (text != kCsvHeader) {
                throw RecordError(line_no, "missing CSV header \"" + std::string(kCsvHeader) + "\"");
            }
            saw_header = true;
            continue;
        }
        ++report.records_read;
        try {
            auto p = parse_record(text, line_no);
            auto key = shard_key_of(p, grid);
            shards[key].push_back(std::move(p));
        } catch (const RecordError&) {
            if (options.strict) {
                throw;
            }
            ++report.records_rejected;
        }
    }
    if (input.bad()) {
        throw IoError("failed reading ingest input");
    }

    // Drop the old catalog before touching shards so no reader trusts a
    // manifest whose blobs are being replaced.
    store.remove(manifest_key());
    for (const auto& old : store.list_prefix("shards/")) {
        store.remove(old);
    }

    ShardManifest manifest{grid, {}, 0};
    for (auto& [key, points] : shards) {
        std::stable_sort(points.begin(), points.end(), [](const auto& a, const auto& b) {
            return std::tie(a.ts, a.entity_id) < std::tie(b.ts, b.entity_id);
        });
        std::string blob;
        for (const auto& p : points) {
            blob += format_record(p);
            blob += '\n';
        }
        auto desc = describe(key, grid, static_cast<std::int64_t>(points.size()));
        store.put(desc.blob_key, blob);
        manifest.total_records += desc.record_count;
        manifest.shards.push_back(std::move(desc));
    }
    store.put(manifest_key(), manifest_to_json(manifest).dump(2) + "\n");

    report.shards_written = static_cast<std::int64_t>(manifest.shards.size());
    report.manifest_key = manifest_key();
    return report;
}

ShardManifest load_manifest(const BlobStore& store) {
    auto text = store.get(manifest_key());
    ShardManifest m;
    try {
        auto j = json::parse(text);
        m.grid = GridConfig::make(j.at("cell_deg").get<double>(),
                                  j.at("bucket_seconds").get<std::int64_t>());
        std::int64_t sum = 0;
        std::set<ShardKey> seen;
        for (const auto& s : j.at("shards")) {
            ShardKey key{s.at("cell_ix").get<std::int64_t>(), s.at("cell_iy").get<std::int64_t>(),
                         s.at("bucket").get<std::int64_t>()};
            if (key.cell_ix < 0 || key.cell_ix >= m.grid.rows() || key.cell_iy < 0 ||
                key.cell_iy >= m.grid.cols() || key.bucket < 0) {
                throw IntegrityError("manifest shard key out of range: " + to_string(key));
            }
            if (!seen.insert(key).second) {
                throw IntegrityError("manifest lists shard " + to_string(key) + " twice");
            }
            auto count = s.at("record_count").get<std::int64_t>();
            if (count < 0) {
                throw IntegrityError("negative record_count for shard " + to_string(key));
            }
            auto desc = describe(key, m.grid, count);
            if (s.at("blob_key").get<std::string>() != desc.blob_key.str()) {
                throw IntegrityError("unexpected blob_key for shard " + to_string(key));
            }
            sum += count;
            m.shards.push_back(std::move(desc));
        }
        m.total_records = j.at("total_records").get<std::int64_t>();
        if (m.total_records != sum) {
            throw IntegrityError("manifest total_records " + std::to_string(m.total_records) +
                                 " != sum of shard counts " + std::to_string(sum));
        }
    } catch (const json::exception& e) {
        throw IntegrityError(std::string("malformed manifest: ") + e.what());
    } catch (const DomainError& e) {
        throw IntegrityError(std::string("malformed manifest: ") + e.what());
    }
    std::sort(m.shards.begin(), m.shards.end(),
              [](const auto& a, const auto& b) { return a.key < b.key; });
    return m;
}

std::vector<TrajectoryPoint> read_shard(const BlobStore& store, const ShardDescriptor& shard) {
    auto blob = store.get(shard.blob_key);
    std::vector<TrajectoryPoint> out;
    std::size_t line_no = 0;
    for (auto line : split_lines(blob)) {
        ++line_no;
        out.push_back(parse_record(line, line_no));
    }
    return out;
}

void verify_manifest(const BlobStore& store, const ShardManifest& manifest) {
    std::set<std::string> listed;
    for (const auto& shard : manifest.shards) {
        listed.insert(shard.blob_key.str());
        std::vector<TrajectoryPoint> points;
        try {
            points = read_shard(store, shard);
        } catch (const NotFoundError&) {
            throw IntegrityError("shard blob missing: " + shard.blob_key.str());
        } catch (const RecordError& e) {
            throw IntegrityError("corrupt shard " + shard.blob_key.str() + ": " + e.what());
        }
        if (static_cast<std::int64_t>(points.size()) != shard.record_count) {
            throw IntegrityError("shard " + shard.blob_key.str() + " holds " +
                                 std::to_string(points.size()) + " records, manifest says " +
                                 std::to_string(shard.record_count));
        }
        for (const auto& p : points) {
            if (shard_key_of(p, manifest.grid) != shard.key) {
                throw IntegrityError("record of entity " + p.entity_id + " at ts " +
                                     std::to_string(p.ts) + " misplaced in shard " +
                                     shard.blob_key.str());
            }
        }
    }
    for (const auto& key : store.list_prefix("shards/")) {
        if (!listed.contains(key.str())) {
            throw IntegrityError("shard blob not in manifest: " + key.str());
        }
    }
}

namespace {

constexpr double kCoordStep = 1.0 / 4096.0;
constexpr double kMaxWalkStep = 0.5;

class WalkRng {
public:
    explicit WalkRng(std::uint64_t seed) : engine_(seed) {}

    double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    std::int64_t below(std::int64_t n) {
        return static_cast<std::int64_t>(engine_() % static_cast<std::uint64_t>(n));
    }

private:
    std::mt19937_64 engine_;
};

// Snaps to the coordinate lattice inside [lo, hi). Falls back to the raw
// value when the range holds no lattice point.
struct CoordRange {
    double lo;
    double hi;
    double q_lo;
    double q_hi;

    CoordRange(double lo_, double hi_) : lo(lo_), hi(hi_) {
        q_lo = std::ceil(lo / kCoordStep) * kCoordStep;
        q_hi = (std::ceil(hi / kCoordStep) - 1.0) * kCoordStep;
    }

    double snap(double x) const {
        if (q_lo > q_hi) {
            return lo;
        }
        return std::clamp(std::floor(x / kCoordStep) * kCoordStep, q_lo, q_hi);
    }
};

} // namespace

std::vector<TrajectoryPoint> gen_trajectories(std::uint64_t seed, std::int64_t n_entities,
                                              std::int64_t points_per_entity,
                                              const BoundingBox& region,
                                              const TimeInterval& interval) {
    std::vector<TrajectoryPoint> out;
    if (n_entities <= 0 || points_per_entity <= 0) {
        return out;
    }
    auto span = interval.end_ts - interval.start_ts;
    if (span < points_per_entity) {
        throw DomainError("interval too short for " + std::to_string(points_per_entity) +
                          " strictly increasing timestamps");
    }
    if (interval.start_ts < 0) {
        throw DomainError("generated timestamps must be >= 0");
    }
    CoordRange lat_range(region.min_lat, region.max_lat);
    CoordRange lon_range(region.min_lon, std::min(region.max_lon, kMaxLon));

    WalkRng rng(seed);
    out.reserve(static_cast<std::size_t>(n_entities * points_per_entity));
    auto width = std::to_string(std::max<std::int64_t>(n_entities - 1, 0)).size();
    for (std::int64_t e = 0; e < n_entities; ++e) {
        auto id = std::to_string(e);
        id = "e" + std::string(width - std::min(width, id.size()), '0') + id;

        double lat = lat_range.snap(region.min_lat + rng.unit() * (region.max_lat - region.min_lat));
        double lon = lon_range.snap(region.min_lon + rng.unit() * (region.max_lon - region.min_lon));
        std::int64_t ts = interval.start_ts + rng.below(span - points_per_entity + 1);
        for (std::int64_t k = 0; k < points_per_entity; ++k) {
            if (k > 0) {
                // Leaves at least one second per remaining step before end_ts.
                auto remaining = points_per_entity - k;
                auto max_dt = (interval.end_ts - 1 - ts) / remaining;
                ts += 1 + rng.below(max_dt);
                lat = lat_range.snap(lat + (rng.unit() * 2.0 - 1.0) * kMaxWalkStep);
                lon = lon_range.snap(lon + (rng.unit() * 2.0 - 1.0) * kMaxWalkStep);
            }
            TrajectoryPoint p{id, ts, lat, lon, std::nullopt, std::nullopt};
            if (rng.unit() >= 0.10) {
                p.alt = std::floor(rng.unit() * 24000.0) / 2.0;
            }
            if (rng.unit() >= 0.05) {
                p.value = std::floor(rng.unit() * 1600.0) / 16.0;
            }
            out.push_back(std::move(p));
        }
    }
    return out;
}

} // namespace stq

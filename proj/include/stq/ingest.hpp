#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stq/blob_store.hpp"
#include "stq/model.hpp"

namespace stq {

inline constexpr std::string_view kCsvHeader = "entity_id,ts,lat,lon,alt,value";

/// Catalog entry for one shard blob.
struct ShardDescriptor {
    ShardKey key;
    BoundingBox bbox;
    TimeInterval interval;
    std::int64_t record_count = 0;
    BlobKey blob_key{"shards/unset"};

    friend bool operator==(const ShardDescriptor&, const ShardDescriptor&) = default;
};

struct ShardManifest {
    GridConfig grid;
    std::vector<ShardDescriptor> shards; ///< sorted by key
    std::int64_t total_records = 0;

    friend bool operator==(const ShardManifest&, const ShardManifest&) = default;
};

struct IngestReport {
    std::int64_t records_read = 0;
    std::int64_t records_rejected = 0;
    std::int64_t shards_written = 0;
    BlobKey manifest_key{"manifest.json"};
};

struct IngestOptions {
    /// Turn the first malformed record into a fatal RecordError instead of
    /// counting and skipping it.
    bool strict = false;
};

const BlobKey& manifest_key();

/// `shards/c{ix}_{iy}/t{bucket}.csv`
BlobKey shard_blob_key(const ShardKey& key);

/// Parses one `entity_id,ts,lat,lon,alt,value` record. Empty alt/value
/// fields become absent. Throws RecordError tagged with `line_no`.
TrajectoryPoint parse_record(std::string_view line, std::size_t line_no = 0);

/// Inverse of parse_record; doubles use their shortest round-trip form.
std::string format_record(const TrajectoryPoint& p);

/// Writes the header line followed by one record per line.
void write_csv(std::ostream& out, std::span<const TrajectoryPoint> points);

/// Partitions the CSV stream into one blob per shard key, then writes the
/// manifest. Any previous manifest and shard blobs are removed first, and the
/// manifest is written last, so a manifest that exists always refers to
/// complete shards.
IngestReport ingest(std::istream& input, const GridConfig& grid, BlobStore& store,
                    IngestOptions options = {});

/// Throws NotFoundError when no manifest exists and IntegrityError when it is
/// malformed or violates the catalog invariants.
ShardManifest load_manifest(const BlobStore& store);

/// Reads every shard blob and checks counts, shard membership and that no
/// unlisted shard blobs exist. Throws IntegrityError on the first mismatch.
void verify_manifest(const BlobStore& store, const ShardManifest& manifest);

std::vector<TrajectoryPoint> read_shard(const BlobStore& store, const ShardDescriptor& shard);

/// Seeded pseudo-random walks: per entity a start point uniform in
/// region x interval, then bounded steps clamped to the region with strictly
/// increasing timestamps. Coordinates are quantized to 1/4096 degree, value
/// to 1/16 and alt to 1/2, so sums over generated data are exact in double
/// precision. About 10% of points have no alt and 5% no value.
///
/// Throws DomainError if the interval is shorter than points_per_entity
/// seconds.
std::vector<TrajectoryPoint> gen_trajectories(std::uint64_t seed, std::int64_t n_entities,
                                              std::int64_t points_per_entity,
                                              const BoundingBox& region,
                                              const TimeInterval& interval);

} // namespace stq

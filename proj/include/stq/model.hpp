#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>

namespace stq {

inline constexpr double kMinLat = -90.0;
inline constexpr double kMaxLat = 90.0;
inline constexpr double kMinLon = -180.0;
inline constexpr double kMaxLon = 180.0;

/// One timestamped, geolocated record of a moving entity.
///
/// Member order is the canonical row order: (entity_id, ts, lat, lon, alt,
/// value), with absent optionals sorting first.
struct TrajectoryPoint {
    std::string entity_id;
    std::int64_t ts = 0;
    double lat = 0.0;
    double lon = 0.0;
    std::optional<double> alt;
    std::optional<double> value;

    friend bool operator==(const TrajectoryPoint&, const TrajectoryPoint&) = default;
    friend auto operator<=>(const TrajectoryPoint&, const TrajectoryPoint&) = default;
};

/// Throws DomainError unless lat is in [-90, 90], lon in [-180, 180), ts >= 0
/// and the entity id is non-empty.
void validate_point(const TrajectoryPoint& p);

/// Latitude/longitude rectangle, half-open on the max edges. The one closed
/// edge is max_lat == 90, so the north pole belongs to boxes touching it.
struct BoundingBox {
    double min_lat = 0.0;
    double min_lon = 0.0;
    double max_lat = 0.0;
    double max_lon = 0.0;

    /// Validated construction. Boxes with min_lon > max_lon would cross the
    /// antimeridian and are rejected.
    static BoundingBox make(double min_lat, double min_lon, double max_lat, double max_lon);

    bool contains(double lat, double lon) const;

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Half-open [start_ts, end_ts) in epoch seconds.
struct TimeInterval {
    std::int64_t start_ts = 0;
    std::int64_t end_ts = 0;

    static TimeInterval make(std::int64_t start_ts, std::int64_t end_ts);

    bool contains(std::int64_t ts) const { return ts >= start_ts && ts < end_ts; }

    friend bool operator==(const TimeInterval&, const TimeInterval&) = default;
};

/// Uniform lat/lon grid with fixed-width time buckets.
struct GridConfig {
    double cell_deg = 10.0;
    std::int64_t bucket_seconds = 86400;

    /// cell_deg must be positive and divide 180 evenly; bucket_seconds >= 1.
    static GridConfig make(double cell_deg, std::int64_t bucket_seconds);

    std::int64_t rows() const;
    std::int64_t cols() const;

    friend bool operator==(const GridConfig&, const GridConfig&) = default;
};

/// Bucket width matching a 90-day quarter.
inline constexpr std::int64_t kQuarterSeconds = 7'776'000;

struct CellIndex {
    std::int64_t ix = 0;
    std::int64_t iy = 0;

    friend bool operator==(const CellIndex&, const CellIndex&) = default;
    friend auto operator<=>(const CellIndex&, const CellIndex&) = default;
};

/// Joint spatial + temporal shard identity. Ordered by (ix, iy, bucket).
struct ShardKey {
    std::int64_t cell_ix = 0;
    std::int64_t cell_iy = 0;
    std::int64_t bucket = 0;

    friend bool operator==(const ShardKey&, const ShardKey&) = default;
    friend auto operator<=>(const ShardKey&, const ShardKey&) = default;
};

std::string to_string(const ShardKey& key);

CellIndex cell_of(double lat, double lon, const GridConfig& grid);
std::int64_t bucket_of(std::int64_t ts, const GridConfig& grid);
ShardKey shard_key_of(const TrajectoryPoint& point, const GridConfig& grid);

BoundingBox cell_bbox(CellIndex cell, const GridConfig& grid);
inline BoundingBox cell_bbox(const ShardKey& key, const GridConfig& grid) {
    return cell_bbox(CellIndex{key.cell_ix, key.cell_iy}, grid);
}
TimeInterval bucket_interval(std::int64_t bucket, const GridConfig& grid);

bool bbox_intersects(const BoundingBox& a, const BoundingBox& b);
bool interval_intersects(const TimeInterval& a, const TimeInterval& b);

} // namespace stq

#include "stq/model.hpp"

#include <algorithm>
#include <cmath>

#include "stq/error.hpp"
#include "stq/text.hpp"

namespace stq {

namespace {

bool valid_lat(double lat) { return std::isfinite(lat) && lat >= kMinLat && lat <= kMaxLat; }
bool valid_lon(double lon) { return std::isfinite(lon) && lon >= kMinLon && lon < kMaxLon; }

// Lower edge of row/column `i`; the edge past the last index snaps to the
// exact global maximum so floating rounding cannot open a gap at the pole or
// the antimeridian.
double lat_edge(std::int64_t i, const GridConfig& grid) {
    return i >= grid.rows() ? kMaxLat : static_cast<double>(i) * grid.cell_deg + kMinLat;
}

double lon_edge(std::int64_t i, const GridConfig& grid) {
    return i >= grid.cols() ? kMaxLon : static_cast<double>(i) * grid.cell_deg + kMinLon;
}

template <class EdgeFn>
std::int64_t locate(double coord, double origin, std::int64_t count, const GridConfig& grid,
                    EdgeFn edge) {
    auto i = static_cast<std::int64_t>(std::floor((coord - origin) / grid.cell_deg));
    i = std::clamp<std::int64_t>(i, 0, count - 1);
    while (i > 0 && coord < edge(i, grid)) {
        --i;
    }
    while (i < count - 1 && coord >= edge(i + 1, grid)) {
        ++i;
    }
    return i;
}

} // namespace

void validate_point(const TrajectoryPoint& p) {
    if (p.entity_id.empty()) {
        throw DomainError("entity_id must be non-empty");
    }
    if (p.ts < 0) {
        throw DomainError("timestamp must be >= 0, got " + std::to_string(p.ts));
    }
    if (!valid_lat(p.lat)) {
        throw DomainError("latitude out of range [-90, 90]: " + format_double(p.lat));
    }
    if (!valid_lon(p.lon)) {
        throw DomainError("longitude out of range [-180, 180): " + format_double(p.lon));
    }
    if ((p.alt && !std::isfinite(*p.alt)) || (p.value && !std::isfinite(*p.value))) {
        throw DomainError("alt and value must be finite");
    }
}

BoundingBox BoundingBox::make(double min_lat, double min_lon, double max_lat, double max_lon) {
    for (double lat : {min_lat, max_lat}) {
        if (!valid_lat(lat)) {
            throw DomainError("box latitude out of range [-90, 90]: " + format_double(lat));
        }
    }
    for (double lon : {min_lon, max_lon}) {
        if (!std::isfinite(lon) || lon < kMinLon || lon > kMaxLon) {
            throw DomainError("box longitude out of range [-180, 180]: " + format_double(lon));
        }
    }
    if (min_lat > max_lat) {
        throw DomainError("box min_lat exceeds max_lat");
    }
    if (min_lon > max_lon) {
        throw DomainError("box crosses the antimeridian (min_lon > max_lon); split it into two "
                          "boxes");
    }
    return BoundingBox{min_lat, min_lon, max_lat, max_lon};
}

bool BoundingBox::contains(double lat, double lon) const {
    bool lat_in = lat >= min_lat && (lat < max_lat || (lat == kMaxLat && max_lat == kMaxLat));
    return lat_in && lon >= min_lon && lon < max_lon;
}

TimeInterval TimeInterval::make(std::int64_t start_ts, std::int64_t end_ts) {
    if (start_ts >= end_ts) {
        throw DomainError("time interval must satisfy start < end, got [" +
                          std::to_string(start_ts) + ", " + std::to_string(end_ts) + ")");
    }
    return TimeInterval{start_ts, end_ts};
}

GridConfig GridConfig::make(double cell_deg, std::int64_t bucket_seconds) {
    if (!std::isfinite(cell_deg) || cell_deg <= 0.0) {
        throw DomainError("cell_deg must be positive");
    }
    double n = std::round(180.0 / cell_deg);
    if (n < 1.0 || std::abs(n * cell_deg - 180.0) > 1e-9) {
        throw DomainError("cell_deg must divide 180 evenly, got " + format_double(cell_deg));
    }
    if (bucket_seconds < 1) {
        throw DomainError("bucket_seconds must be >= 1");
    }
    return GridConfig{cell_deg, bucket_seconds};
}

std::int64_t GridConfig::rows() const { return std::llround(180.0 / cell_deg); }
std::int64_t GridConfig::cols() const { return 2 * rows(); }

std::string to_string(const ShardKey& key) {
    return "(" + std::to_string(key.cell_ix) + ", " + std::to_string(key.cell_iy) + ", " +
           std::to_string(key.bucket) + ")";
}

CellIndex cell_of(double lat, double lon, const GridConfig& grid) {
    if (!valid_lat(lat) || !valid_lon(lon)) {
        throw DomainError("coordinates out of range: (" + format_double(lat) + ", " +
                          format_double(lon) + ")");
    }
    return CellIndex{locate(lat, kMinLat, grid.rows(), grid, lat_edge),
                     locate(lon, kMinLon, grid.cols(), grid, lon_edge)};
}

std::int64_t bucket_of(std::int64_t ts, const GridConfig& grid) {
    if (ts < 0) {
        throw DomainError("timestamp must be >= 0, got " + std::to_string(ts));
    }
    return ts / grid.bucket_seconds;
}

ShardKey shard_key_of(const TrajectoryPoint& point, const GridConfig& grid) {
    auto cell = cell_of(point.lat, point.lon, grid);
    return ShardKey{cell.ix, cell.iy, bucket_of(point.ts, grid)};
}

BoundingBox cell_bbox(CellIndex cell, const GridConfig& grid) {
    return BoundingBox{lat_edge(cell.ix, grid), lon_edge(cell.iy, grid), lat_edge(cell.ix + 1, grid),
                       lon_edge(cell.iy + 1, grid)};
}

TimeInterval bucket_interval(std::int64_t bucket, const GridConfig& grid) {
    return TimeInterval{bucket * grid.bucket_seconds, (bucket + 1) * grid.bucket_seconds};
}

bool bbox_intersects(const BoundingBox& a, const BoundingBox& b) {
    double lat_lo = std::max(a.min_lat, b.min_lat);
    double lat_hi = std::min(a.max_lat, b.max_lat);
    bool lat_overlap = lat_lo < lat_hi || (lat_lo == kMaxLat && lat_hi == kMaxLat);
    return lat_overlap && std::max(a.min_lon, b.min_lon) < std::min(a.max_lon, b.max_lon);
}

bool interval_intersects(const TimeInterval& a, const TimeInterval& b) {
    return std::max(a.start_ts, b.start_ts) < std::min(a.end_ts, b.end_ts);
}

} // namespace stq

#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "stq/blob_store.hpp"
#include "stq/ingest.hpp"
#include "stq/temp_dir.hpp"

namespace stq::test {

// Six flights on 2024-07-03/04 (bucket 19907 at one day): four in cell
// (14,19) around Berlin and two in cell (9,18) near the origin.
inline const char* kFixtureCsv =
    "entity_id,ts,lat,lon,alt,value\n"
    "e1,1719970000,52.52,13.40,10000,7.5\n"
    "e1,1719973600,52.60,13.50,10500,8\n"
    "e2,1719980000,51,10,,3\n"
    "e2,1719990000,50.25,19.75,11000,\n"
    "e3,1720000000,0.5,0.5,9000,2.5\n"
    "e4,1720040000,5,9.75,,\n";

inline const char* kFlightHeaviest =
    "SELECT COUNT(*) WHERE TIME(2024-07-01T00:00:00Z, 2025-01-01T00:00:00Z) "
    "GROUP BY CELL ORDER BY COUNT(*) DESC LIMIT 10";

inline std::vector<TrajectoryPoint> parse_csv(const std::string& csv) {
    std::vector<TrajectoryPoint> out;
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    std::size_t n = 1;
    while (std::getline(in, line)) {
        out.push_back(parse_record(line, ++n));
    }
    return out;
}

inline std::string to_csv(const std::vector<TrajectoryPoint>& points) {
    std::ostringstream out;
    write_csv(out, points);
    return out.str();
}

/// Scratch directory plus a store rooted in it.
struct ScratchStore {
    TempDir dir{"stq-test"};
    FsBlobStore store{dir.path() / "store"};

    IngestReport ingest_csv(const std::string& csv, const GridConfig& grid) {
        std::istringstream in(csv);
        return ingest(in, grid, store);
    }
};

} // namespace stq::test

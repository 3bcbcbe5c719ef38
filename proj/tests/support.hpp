#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "asat/graph.hpp"
#include "asat/ingest.hpp"

namespace asat::testing {

namespace fs = std::filesystem;

fs::path fixture_dir();
std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const noexcept { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

/// Nation, `states` states, `counties` counties per state and `cities`
/// cities per county, with random coordinates and attributes.
std::vector<ingest::DemographicRecord> synthetic_gazetteer(std::size_t states, std::size_t counties,
                                                           std::size_t cities, std::uint64_t seed);

/// Unordered geo_id pairs of the k-nearest-neighbor relation, computed by
/// sorting every peer list.
std::set<std::pair<std::string, std::string>> brute_force_knn(const std::vector<graph::KnnPoint>& points,
                                                             std::size_t k, DistanceMetric metric);

/// Every unordered near pair of `ahin` as geo_ids.
std::set<std::pair<std::string, std::string>> near_pairs(const graph::Ahin& ahin, Level level);

/// One state with three counties of thirty cities each. Each county's
/// cities sit on a line and carry radial-basis features of their position
/// in three dimensions owned by that county, so near cities look alike.
graph::Ahin planted_clusters(std::uint64_t seed);

inline const Date kPlantedDate = Date::from_ymd(2020, 3, 1);

}  // namespace asat::testing

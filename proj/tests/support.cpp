#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#ifndef ASAT_FIXTURE_DIR
#error "ASAT_FIXTURE_DIR must point at tests/fixtures"
#endif

namespace asat::testing {

fs::path fixture_dir() {
    return fs::path(ASAT_FIXTURE_DIR);
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream(path, std::ios::binary) << text;
}

TempDir::TempDir() {
    static std::uint64_t counter = 0;
    Rng rng(static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count()) ^
            ++counter);
    path_ = fs::temp_directory_path() / ("asat-test-" + hex64(rng.next_u64()));
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

std::vector<ingest::DemographicRecord> synthetic_gazetteer(std::size_t states, std::size_t counties,
                                                           std::size_t cities, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<ingest::DemographicRecord> out;
    auto make = [&](std::string id, Level level, std::string parent, double lat, double lon) {
        ingest::DemographicRecord r;
        r.geo_id = std::move(id);
        r.level = level;
        r.name = "Area " + r.geo_id;
        r.parent_geo_id = std::move(parent);
        r.population = 1000 + static_cast<std::int64_t>(rng.below(100000));
        r.pop_density = 1.0 + 5000.0 * rng.uniform();
        r.pct_over_65 = 0.1 + 0.1 * rng.uniform();
        r.pct_female = 0.48 + 0.05 * rng.uniform();
        r.lat = lat;
        r.lon = lon;
        out.push_back(r);
    };
    make("N", Level::Nation, "", 40.0, -100.0);
    for (std::size_t s = 0; s < states; ++s) {
        const std::string sid = "S" + std::to_string(s);
        const double slat = 30.0 + 15.0 * rng.uniform();
        const double slon = -120.0 + 40.0 * rng.uniform();
        make(sid, Level::State, "N", slat, slon);
        for (std::size_t c = 0; c < counties; ++c) {
            const std::string cid = sid + "C" + std::to_string(c);
            const double clat = slat + 4.0 * (rng.uniform() - 0.5);
            const double clon = slon + 4.0 * (rng.uniform() - 0.5);
            make(cid, Level::County, sid, clat, clon);
            for (std::size_t k = 0; k < cities; ++k) {
                make(cid + "K" + std::to_string(k), Level::City, cid, clat + rng.uniform() - 0.5,
                     clon + rng.uniform() - 0.5);
            }
        }
    }
    return out;
}

std::set<std::pair<std::string, std::string>> brute_force_knn(const std::vector<graph::KnnPoint>& points,
                                                             std::size_t k, DistanceMetric metric) {
    std::set<std::pair<std::string, std::string>> edges;
    for (std::size_t i = 0; i < points.size(); ++i) {
        std::vector<std::pair<double, std::string>> peers;
        for (std::size_t j = 0; j < points.size(); ++j) {
            if (j != i) {
                peers.emplace_back(distance(metric, points[i].gps, points[j].gps), points[j].geo_id);
            }
        }
        std::sort(peers.begin(), peers.end());
        for (std::size_t n = 0; n < std::min(k, peers.size()); ++n) {
            const auto& a = points[i].geo_id;
            const auto& b = peers[n].second;
            edges.emplace(std::min(a, b), std::max(a, b));
        }
    }
    return edges;
}

std::set<std::pair<std::string, std::string>> near_pairs(const graph::Ahin& ahin, Level level) {
    std::set<std::pair<std::string, std::string>> out;
    for (const auto& e : ahin.edges()) {
        if (e.relation != graph::Relation::Near || ahin.node(e.source).level != level) {
            continue;
        }
        const auto& a = ahin.node(e.source).geo_id;
        const auto& b = ahin.node(e.target).geo_id;
        out.emplace(std::min(a, b), std::max(a, b));
    }
    return out;
}

graph::Ahin planted_clusters(std::uint64_t seed) {
    constexpr std::size_t kClusters = 3;
    constexpr std::size_t kCities = 30;
    Rng rng(seed);
    std::vector<ingest::DemographicRecord> demo;
    std::vector<ingest::DiseaseRecord> disease;
    std::vector<ingest::MobilityRecord> mobility;
    graph::PerceptionTable perceptions;

    auto record = [](std::string id, Level level, std::string parent, double lat, double lon) {
        ingest::DemographicRecord r;
        r.geo_id = std::move(id);
        r.level = level;
        r.name = r.geo_id;
        r.parent_geo_id = std::move(parent);
        r.population = 1000;
        r.lat = lat;
        r.lon = lon;
        return r;
    };
    demo.push_back(record("N", Level::Nation, "", 40.0, -90.0));
    demo.push_back(record("S", Level::State, "N", 40.0, -90.0));
    for (std::size_t c = 0; c < kClusters; ++c) {
        const std::string county = "C" + std::to_string(c);
        const double base_lon = -100.0 + 10.0 * static_cast<double>(c);
        demo.push_back(record(county, Level::County, "S", 40.0, base_lon + 1.5));
        for (std::size_t i = 0; i < kCities; ++i) {
            const double t = static_cast<double>(i) / (kCities - 1);
            auto r = record(county + "-" + std::to_string(i), Level::City, county,
                            40.0 + 0.05 * (rng.uniform() - 0.5), base_lon + 3.0 * t);
            // Three bumps along the line; each county owns three dimensions.
            std::array<double, 3> f{};
            for (std::size_t j = 0; j < 3; ++j) {
                const double centre = 0.5 * static_cast<double>(j);
                f[j] = std::exp(-std::pow((t - centre) / 0.3, 2.0));
            }
            ingest::DiseaseRecord d;
            d.date = kPlantedDate;
            d.geo_id = r.geo_id;
            ingest::MobilityRecord m{r.geo_id, kPlantedDate, 1};
            double awareness = 0.0;
            switch (c) {
                case 0:
                    d.confirmed = std::llround(1e6 * f[0]);
                    d.deaths = std::llround(static_cast<double>(d.confirmed) * f[1]);
                    d.fatality_rate = d.confirmed > 0 ? static_cast<double>(d.deaths) / d.confirmed : 0.0;
                    d.new_cases = std::llround(1e6 * f[2]);
                    break;
                case 1:
                    r.population = 1000 + std::llround(1e6 * f[0]);
                    r.pop_density = 1e4 * f[1];
                    r.pct_over_65 = 0.5 * f[2];
                    break;
                default:
                    r.pct_female = f[0];
                    awareness = f[1];
                    m.level = 1 + static_cast<int>(std::lround(4.0 * f[2]));
                    break;
            }
            disease.push_back(d);
            mobility.push_back(m);
            perceptions[{r.geo_id, kPlantedDate}] = awareness;
            demo.push_back(r);
        }
    }
    return graph::build_ahin(demo, disease, mobility, perceptions, {});
}

}  // namespace asat::testing

#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asat/gae.hpp"
#include "asat/graph.hpp"
#include "asat/ingest.hpp"
#include "asat/perception.hpp"

namespace asat::risk {

using nn::Vector;

/// Expert weights gamma over the representation dimensions.
struct RiskProfile {
    Features gamma{};
    /// Risk uses 1 - a4, so higher awareness lowers the index.
    bool invert_awareness = true;

    /// gamma_i = 1 / d_a.
    static RiskProfile uniform();
    /// CSV "dimension,weight"; unlisted dimensions weigh 0. An
    /// "invert_awareness" row with true/false toggles the inversion.
    static RiskProfile parse(std::string_view csv_text);
    static RiskProfile load(const std::filesystem::path& path);
    /// Throws InvalidArgument on a negative or non-finite weight.
    void validate() const;
};

/// Representation in risk orientation: awareness replaced by 1 - a4 when
/// the profile inverts it.
Vector orient(const Vector& encoded, const RiskProfile& profile);

/// sum_i gamma_i a(i). Throws InvalidArgument on a size mismatch or a
/// negative weight.
double risk_index(std::span<const double> oriented, std::span<const double> gamma);
double risk_index(const Vector& oriented, const RiskProfile& profile);

struct Poi {
    std::string name;
    std::string tag;
    LatLon gps;
    int mobility = 1;

    friend bool operator==(const Poi&, const Poi&) = default;
};

inline constexpr std::string_view kPoiHeader = "name,tag,lat,lon,mobility";

ingest::ParseResult<Poi> parse_pois(std::string_view csv_text);
std::string write_pois(const std::vector<Poi>& pois);

/// One level of an assessment.
struct AreaRisk {
    std::string geo_id;
    std::string name;
    std::string level;  // nation/state/county/city/location
    double index = 0.0;
    double perception = 0.0;
    std::string perception_source;  // real/synthetic/padded, empty if unknown
    double density = 0.0;
    double mobility = 0.0;  // 1..5, 0 when unreported
    Features raw{};
    Features encoded{};
    Features contributions{};  // gamma_i times the oriented value
};

struct Assessment {
    Date date;
    bool stale = false;  // date outside the ingested range
    std::vector<AreaRisk> chain;  // coarse to fine
    std::optional<AreaRisk> location;
    std::optional<LatLon> query;
    std::optional<std::string> nearest_poi;
};

struct DatedIndex {
    Date date;
    double index = 0.0;
    bool stale = false;
};

struct ScoredPoi {
    Poi poi;
    double distance_km = 0.0;
    std::string city;
    double index = 0.0;
};

struct CoverageOptions {
    double margin_deg = 0.5;      // bounding-box margin around the cities
    double max_city_km = 50.0;    // farthest allowed nearest city
    double poi_snap_km = 1.0;     // POI close enough to stand for the location
};

/// Read-only scoring over one snapshot and trained relation matrices.
/// Encodings for every ingested date are computed up front.
class Assessor {
public:
    Assessor(graph::Ahin ahin, gae::RelationMatrices relations, RiskProfile profile,
             std::vector<Poi> pois = {}, perception::PerceptionEstimates estimates = {},
             CoverageOptions coverage = {});

    const graph::Ahin& ahin() const noexcept { return ahin_; }
    const RiskProfile& profile() const noexcept { return profile_; }
    const std::vector<Poi>& pois() const noexcept { return pois_; }
    const perception::PerceptionEstimates& estimates() const noexcept { return estimates_; }
    Date latest_date() const;

    /// Throws InvalidArgument for coordinates outside [-90,90]x[-180,180],
    /// OutOfCoverage away from every city.
    Assessment assess(LatLon location, std::optional<Date> date = std::nullopt) const;
    /// Throws NotFound for an unknown geo_id.
    Assessment assess(std::string_view geo_id, std::optional<Date> date = std::nullopt) const;

    /// Throws InvalidArgument for an empty date list.
    std::vector<DatedIndex> compare_dates(std::string_view geo_id, const std::vector<Date>& dates) const;

    /// POIs with a matching tag (case-insensitive) strictly closer than
    /// `radius_km`, nearest first.
    std::vector<ScoredPoi> nearby_pois(LatLon location, std::string_view tag, double radius_km,
                                       std::optional<Date> date = std::nullopt) const;

    /// Nearest city, or OutOfCoverage.
    graph::NodeId locate(LatLon location) const;

    /// Encoded representation of one node on one date.
    Vector encoded(graph::NodeId id, Date date) const;

private:
    struct DateCache {
        gae::EncoderState state;
        double city_mobility_min = 0.0;
        double city_mobility_max = 0.0;
    };
    DateCache compute(Date date) const;
    const DateCache& cache_for(Date date, std::optional<DateCache>& scratch) const;
    AreaRisk area_risk(graph::NodeId id, Date date, const DateCache& cache) const;
    AreaRisk location_risk(graph::NodeId city, const Poi* poi, Date date, const DateCache& cache) const;
    AreaRisk score(AreaRisk out, const Vector& encoded) const;
    Date resolve(std::optional<Date> date) const;

    graph::Ahin ahin_;
    gae::RelationMatrices relations_;
    RiskProfile profile_;
    std::vector<Poi> pois_;
    perception::PerceptionEstimates estimates_;
    CoverageOptions coverage_;
    gae::EncoderInput structure_;  // neighborhoods; features filled per date
    std::map<Date, DateCache> by_date_;
    std::vector<std::pair<double, graph::NodeId>> cities_by_lat_;
    double min_lat_ = 0.0, max_lat_ = 0.0, min_lon_ = 0.0, max_lon_ = 0.0;
};

}  // namespace asat::risk

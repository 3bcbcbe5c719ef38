#include "asat/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "asat/csv.hpp"

namespace asat::risk {

namespace {

bool parse_bool(std::string_view text, bool& out) {
    const std::string t = to_lower(trim(text));
    if (t == "true" || t == "1" || t == "yes") {
        out = true;
        return true;
    }
    if (t == "false" || t == "0" || t == "no") {
        out = false;
        return true;
    }
    return false;
}

bool parse_number(const std::string& text, double& out) {
    try {
        std::size_t used = 0;
        out = std::stod(text, &used);
        return used == text.size() && std::isfinite(out);
    } catch (const std::exception&) {
        return false;
    }
}

void check_coordinates(LatLon p) {
    if (!(p.lat >= -90.0 && p.lat <= 90.0) || !(p.lon >= -180.0 && p.lon <= 180.0)) {
        throw InvalidArgument("coordinates (" + format_double(p.lat) + ", " + format_double(p.lon) +
                              ") are outside [-90,90] x [-180,180]");
    }
}

Features to_features(const Vector& v) {
    Features out{};
    for (std::size_t i = 0; i < kFeatureDim; ++i) {
        out[i] = v(static_cast<Eigen::Index>(i));
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------- profiles

RiskProfile RiskProfile::uniform() {
    RiskProfile p;
    p.gamma.fill(1.0 / static_cast<double>(kFeatureDim));
    return p;
}

RiskProfile RiskProfile::parse(std::string_view csv_text) {
    const auto rows = csv::parse(csv_text);
    if (rows.empty() || rows[0].fields != std::vector<std::string>{"dimension", "weight"}) {
        throw ParseError("risk profile: header must be 'dimension,weight'");
    }
    RiskProfile p;
    std::array<bool, kFeatureDim> seen{};
    bool seen_invert = false;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& f = rows[r].fields;
        const std::string where = "risk profile line " + std::to_string(rows[r].line);
        if (f.size() != 2) {
            throw ParseError(where + ": expected 2 fields");
        }
        const std::string name = trim(f[0]);
        if (name == "invert_awareness") {
            if (seen_invert || !parse_bool(f[1], p.invert_awareness)) {
                throw ParseError(where + ": bad or repeated invert_awareness");
            }
            seen_invert = true;
            continue;
        }
        const auto idx = feature_index(name);
        if (!idx) {
            throw ParseError(where + ": unknown dimension '" + name + "'");
        }
        if (seen[*idx]) {
            throw ParseError(where + ": dimension '" + name + "' repeated");
        }
        seen[*idx] = true;
        double w = 0.0;
        if (!parse_number(trim(f[1]), w)) {
            throw ParseError(where + ": weight is not a number");
        }
        p.gamma[*idx] = w;
    }
    p.validate();
    return p;
}

RiskProfile RiskProfile::load(const std::filesystem::path& path) {
    return parse(csv::read_file(path));
}

void RiskProfile::validate() const {
    for (std::size_t i = 0; i < kFeatureDim; ++i) {
        if (!std::isfinite(gamma[i]) || gamma[i] < 0.0) {
            throw InvalidArgument("risk weight for '" + std::string(feature_names()[i]) +
                                  "' must be a nonnegative number");
        }
    }
}

Vector orient(const Vector& encoded, const RiskProfile& profile) {
    Vector out = encoded;
    if (profile.invert_awareness && out.size() > static_cast<Eigen::Index>(dim::kPerception)) {
        out(dim::kPerception) = 1.0 - out(dim::kPerception);
    }
    return out;
}

double risk_index(std::span<const double> oriented, std::span<const double> gamma) {
    if (oriented.size() != gamma.size()) {
        throw InvalidArgument("risk index: " + std::to_string(oriented.size()) + " values but " +
                              std::to_string(gamma.size()) + " weights");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < gamma.size(); ++i) {
        if (!(gamma[i] >= 0.0)) {
            throw InvalidArgument("risk weights must be nonnegative");
        }
        sum += gamma[i] * oriented[i];
    }
    return sum;
}

double risk_index(const Vector& oriented, const RiskProfile& profile) {
    return risk_index(std::span<const double>(oriented.data(), static_cast<std::size_t>(oriented.size())),
                      profile.gamma);
}

// --------------------------------------------------------------------- POIs

ingest::ParseResult<Poi> parse_pois(std::string_view csv_text) {
    ingest::ParseResult<Poi> out;
    const auto rows = csv::parse(csv_text);
    if (rows.empty()) {
        return out;
    }
    if (csv::join(rows[0].fields) != kPoiHeader) {
        throw ParseError("POI file: header must be '" + std::string(kPoiHeader) + "'");
    }
    for (std::size_t r = 1; r < rows.size(); ++r) {
        ++out.rows;
        const auto& f = rows[r].fields;
        auto reject = [&](std::string reason) { out.rejections.push_back({rows[r].line, std::move(reason)}); };
        if (f.size() != 5) {
            reject("expected 5 fields, got " + std::to_string(f.size()));
            continue;
        }
        Poi p;
        p.name = trim(f[0]);
        p.tag = trim(f[1]);
        double mobility = 0.0;
        if (p.name.empty() || p.tag.empty()) {
            reject("empty name or tag");
            continue;
        }
        if (!parse_number(trim(f[2]), p.gps.lat) || !parse_number(trim(f[3]), p.gps.lon) ||
            std::abs(p.gps.lat) > 90.0 || std::abs(p.gps.lon) > 180.0) {
            reject("bad coordinates");
            continue;
        }
        if (!parse_number(trim(f[4]), mobility) || mobility != std::floor(mobility) || mobility < 1.0 ||
            mobility > 5.0) {
            reject("mobility must be an integer in [1,5]");
            continue;
        }
        p.mobility = static_cast<int>(mobility);
        out.records.push_back(std::move(p));
    }
    return out;
}

std::string write_pois(const std::vector<Poi>& pois) {
    std::string out = std::string(kPoiHeader) + "\n";
    for (const auto& p : pois) {
        out += csv::join({p.name, p.tag, format_double(p.gps.lat), format_double(p.gps.lon),
                          std::to_string(p.mobility)});
        out.push_back('\n');
    }
    return out;
}

// ----------------------------------------------------------------- assessor

Assessor::Assessor(graph::Ahin ahin, gae::RelationMatrices relations, RiskProfile profile,
                   std::vector<Poi> pois, perception::PerceptionEstimates estimates,
                   CoverageOptions coverage)
    : ahin_(std::move(ahin)),
      relations_(std::move(relations)),
      profile_(profile),
      pois_(std::move(pois)),
      estimates_(std::move(estimates)),
      coverage_(coverage) {
    profile_.validate();
    if (relations_.dim() != kFeatureDim) {
        throw InvalidArgument("relation matrices are " + std::to_string(relations_.dim()) +
                              "-dimensional, representations are " + std::to_string(kFeatureDim));
    }
    structure_.neighbors.resize(ahin_.node_count());
    for (graph::NodeId id = 0; id < ahin_.node_count(); ++id) {
        structure_.neighbors[id] = ahin_.guided_neighbors(id).nodes;
    }
    min_lat_ = min_lon_ = std::numeric_limits<double>::infinity();
    max_lat_ = max_lon_ = -std::numeric_limits<double>::infinity();
    for (graph::NodeId id : ahin_.nodes_at(Level::City)) {
        const LatLon p = ahin_.node(id).gps;
        min_lat_ = std::min(min_lat_, p.lat);
        max_lat_ = std::max(max_lat_, p.lat);
        min_lon_ = std::min(min_lon_, p.lon);
        max_lon_ = std::max(max_lon_, p.lon);
        cities_by_lat_.emplace_back(p.lat, id);
    }
    std::sort(cities_by_lat_.begin(), cities_by_lat_.end());
    for (Date d : ahin_.dates()) {
        by_date_.emplace(d, compute(d));
    }
}

Date Assessor::latest_date() const {
    return ahin_.latest_date().value_or(Date{});
}

Date Assessor::resolve(std::optional<Date> date) const {
    return date ? *date : latest_date();
}

Assessor::DateCache Assessor::compute(Date date) const {
    gae::EncoderInput input;
    input.relation = structure_.relation;
    input.neighbors = structure_.neighbors;
    input.features = nn::Matrix(static_cast<Eigen::Index>(kFeatureDim),
                                static_cast<Eigen::Index>(ahin_.node_count()));
    for (graph::NodeId id = 0; id < ahin_.node_count(); ++id) {
        const auto fv = ahin_.feature_vector(id, date);
        for (std::size_t d = 0; d < kFeatureDim; ++d) {
            input.features(static_cast<Eigen::Index>(d), id) = fv.normalized[d];
        }
    }
    DateCache cache;
    cache.state = gae::encode(input, relations_);
    bool first = true;
    for (graph::NodeId id : ahin_.nodes_at(Level::City)) {
        const double m = ahin_.feature_vector(id, date).raw[dim::kMobility];
        cache.city_mobility_min = first ? m : std::min(cache.city_mobility_min, m);
        cache.city_mobility_max = first ? m : std::max(cache.city_mobility_max, m);
        first = false;
    }
    return cache;
}

const Assessor::DateCache& Assessor::cache_for(Date date, std::optional<DateCache>& scratch) const {
    if (auto it = by_date_.find(date); it != by_date_.end()) {
        return it->second;
    }
    scratch = compute(date);
    return *scratch;
}

Vector Assessor::encoded(graph::NodeId id, Date date) const {
    std::optional<DateCache> scratch;
    return cache_for(date, scratch).state.output.col(static_cast<Eigen::Index>(id));
}

AreaRisk Assessor::score(AreaRisk out, const Vector& encoded) const {
    const Vector oriented = orient(encoded, profile_);
    out.encoded = to_features(encoded);
    for (std::size_t i = 0; i < kFeatureDim; ++i) {
        out.contributions[i] = profile_.gamma[i] * oriented(static_cast<Eigen::Index>(i));
    }
    out.index = risk_index(oriented, profile_);
    return out;
}

AreaRisk Assessor::area_risk(graph::NodeId id, Date date, const DateCache& cache) const {
    const auto& node = ahin_.node(id);
    const auto fv = ahin_.feature_vector(id, date);
    AreaRisk out;
    out.geo_id = node.geo_id;
    out.name = node.name;
    out.level = std::string(to_string(node.level));
    out.raw = fv.raw;
    out.perception = fv.a4();
    out.mobility = fv.a3();
    out.density = node.pop_density;
    if (node.level == Level::City && node.parent) {
        out.density = ahin_.node(*node.parent).pop_density;
    }
    if (auto it = estimates_.areas.find({node.geo_id, date}); it != estimates_.areas.end()) {
        out.perception_source = std::string(perception::to_string(it->second.source));
    }
    return score(std::move(out), cache.state.output.col(static_cast<Eigen::Index>(id)));
}

AreaRisk Assessor::location_risk(graph::NodeId city, const Poi* poi, Date date,
                                 const DateCache& cache) const {
    AreaRisk out = area_risk(city, date, cache);
    out.level = "location";
    if (!poi) {
        return out;
    }
    out.name = poi->name;
    out.mobility = poi->mobility;
    out.raw[dim::kMobility] = poi->mobility;
    const double m = poi->mobility;
    const double lo = cache.city_mobility_min;
    const double hi = cache.city_mobility_max;
    const double norm = hi > lo ? std::clamp((m - lo) / (hi - lo), 0.0, 1.0) : (m - 1.0) / 4.0;
    const auto col = static_cast<Eigen::Index>(city);
    Vector e = cache.state.output.col(col);
    const bool has_neighbors = !structure_.neighbors[city].empty();
    // The POI's mobility stands in for the city's own before averaging with the neighbors.
    e(dim::kMobility) = has_neighbors
                            ? (norm + cache.state.aggregate(static_cast<Eigen::Index>(dim::kMobility), col)) / 2.0
                            : norm;
    return score(std::move(out), e);
}

graph::NodeId Assessor::locate(LatLon location) const {
    check_coordinates(location);
    const auto cities = ahin_.nodes_at(Level::City);
    const double m = coverage_.margin_deg;
    if (cities.empty() || location.lat < min_lat_ - m || location.lat > max_lat_ + m ||
        location.lon < min_lon_ - m || location.lon > max_lon_ + m) {
        throw OutOfCoverage("(" + format_double(location.lat) + ", " + format_double(location.lon) +
                            ") is outside the covered region");
    }
    // Walk outwards in latitude from the query. The latitude arc alone is a
    // lower bound on the great-circle distance, so a side is done once that
    // bound exceeds the best distance found.
    constexpr double kKmPerDegree = 6371.0088 * std::numbers::pi / 180.0;
    graph::NodeId best = cities.front();
    double best_km = std::numeric_limits<double>::infinity();
    auto consider = [&](const std::pair<double, graph::NodeId>& entry) {
        if ((std::abs(entry.first - location.lat) * kKmPerDegree) - 1e-9 > best_km) {
            return false;
        }
        const double km = haversine_km(location, ahin_.node(entry.second).gps);
        if (km < best_km || (km == best_km && entry.second < best)) {
            best_km = km;
            best = entry.second;
        }
        return true;
    };
    const auto split = std::lower_bound(cities_by_lat_.begin(), cities_by_lat_.end(),
                                        std::make_pair(location.lat, graph::NodeId{0}));
    for (auto it = split; it != cities_by_lat_.end() && consider(*it); ++it) {
    }
    for (auto it = split; it != cities_by_lat_.begin() && consider(*std::prev(it)); --it) {
    }
    if (best_km > coverage_.max_city_km) {
        throw OutOfCoverage("no covered city within " + format_double(coverage_.max_city_km) +
                            " km of (" + format_double(location.lat) + ", " +
                            format_double(location.lon) + ")");
    }
    return best;
}

Assessment Assessor::assess(LatLon location, std::optional<Date> date) const {
    const graph::NodeId city = locate(location);
    Assessment out = assess(ahin_.node(city).geo_id, date);
    out.query = location;
    const Poi* nearest = nullptr;
    double nearest_km = coverage_.poi_snap_km;
    for (const auto& p : pois_) {
        const double km = haversine_km(location, p.gps);
        if (km <= nearest_km && (!nearest || km < nearest_km || p.name < nearest->name)) {
            nearest = &p;
            nearest_km = km;
        }
    }
    std::optional<DateCache> scratch;
    out.location = location_risk(city, nearest, out.date, cache_for(out.date, scratch));
    if (nearest) {
        out.nearest_poi = nearest->name;
    }
    return out;
}

Assessment Assessor::assess(std::string_view geo_id, std::optional<Date> date) const {
    const graph::NodeId id = ahin_.require(geo_id);
    Assessment out;
    out.date = resolve(date);
    out.stale = !ahin_.has_date(out.date);
    std::optional<DateCache> scratch;
    const auto& cache = cache_for(out.date, scratch);
    std::vector<graph::NodeId> lineage{id};
    while (auto parent = ahin_.node(lineage.back()).parent) {
        if (*parent == ahin_.nation()) {
            break;
        }
        lineage.push_back(*parent);
    }
    for (auto it = lineage.rbegin(); it != lineage.rend(); ++it) {
        out.chain.push_back(area_risk(*it, out.date, cache));
    }
    return out;
}

std::vector<DatedIndex> Assessor::compare_dates(std::string_view geo_id,
                                                const std::vector<Date>& dates) const {
    if (dates.empty()) {
        throw InvalidArgument("compare_dates needs at least one date");
    }
    const graph::NodeId id = ahin_.require(geo_id);
    std::vector<DatedIndex> out;
    for (Date d : dates) {
        std::optional<DateCache> scratch;
        const auto& cache = cache_for(d, scratch);
        out.push_back({d, area_risk(id, d, cache).index, !ahin_.has_date(d)});
    }
    return out;
}

std::vector<ScoredPoi> Assessor::nearby_pois(LatLon location, std::string_view tag, double radius_km,
                                             std::optional<Date> date) const {
    check_coordinates(location);
    std::vector<ScoredPoi> out;
    if (!(radius_km > 0.0)) {
        return out;
    }
    const std::string wanted = to_lower(trim(tag));
    const Date d = resolve(date);
    std::optional<DateCache> scratch;
    const DateCache* cache = nullptr;
    for (const auto& p : pois_) {
        if (to_lower(p.tag) != wanted) {
            continue;
        }
        const double km = haversine_km(location, p.gps);
        if (!(km < radius_km)) {
            continue;
        }
        graph::NodeId city = 0;
        try {
            city = locate(p.gps);
        } catch (const OutOfCoverage&) {
            continue;
        }
        if (!cache) {
            cache = &cache_for(d, scratch);
        }
        out.push_back({p, km, ahin_.node(city).geo_id, location_risk(city, &p, d, *cache).index});
    }
    std::sort(out.begin(), out.end(), [](const ScoredPoi& a, const ScoredPoi& b) {
        return std::tie(a.distance_km, a.poi.name) < std::tie(b.distance_km, b.poi.name);
    });
    return out;
}

}  // namespace asat::risk

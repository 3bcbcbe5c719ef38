#include "asat/engine.hpp"

#include <algorithm>

#include "asat/csv.hpp"
#include "asat/pipeline.hpp"

namespace asat {

namespace {

constexpr std::size_t kSnippetChars = 200;
constexpr int kMaxSeriesDays = 3660;

// Cuts at a UTF-8 boundary.
std::string snippet(const std::string& text) {
    if (text.size() <= kSnippetChars) {
        return text;
    }
    std::size_t cut = kSnippetChars;
    while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) {
        --cut;
    }
    return text.substr(0, cut) + "...";
}

}  // namespace

std::shared_ptr<const Engine> Engine::open(const EnginePaths& paths) {
    namespace pl = pipeline;
    const auto snapshot = pl::load_snapshot(paths.snapshot);
    const auto graph_dir = paths.graph ? *paths.graph : paths.snapshot / "graph";
    const auto estimates =
        perception::read_estimates(csv::read_file(paths.models / pl::kPerceptionsFile));
    auto ahin = pl::load_ahin(snapshot, graph_dir, estimates.table());
    auto relations = gae::load_relations(paths.models);
    const auto profile = paths.gamma ? risk::RiskProfile::load(*paths.gamma) : risk::RiskProfile::uniform();
    risk::Assessor assessor(std::move(ahin), std::move(relations), profile, snapshot.pois, estimates);
    auto posts = perception::index_posts(snapshot.posts, snapshot.locations);
    return std::make_shared<const Engine>(std::move(assessor), std::move(posts), paths);
}

Engine::Engine(risk::Assessor assessor, perception::PostIndex posts, EnginePaths paths)
    : assessor_(std::move(assessor)), posts_(std::move(posts)), paths_(std::move(paths)) {}

AreaPosts Engine::area_posts(std::string_view geo_id, std::optional<Date> date) const {
    const auto id = assessor_.ahin().require(geo_id);
    AreaPosts out;
    out.geo_id = assessor_.ahin().node(id).geo_id;
    out.date = date ? *date : assessor_.latest_date();
    for (std::size_t i : posts_.posts_for(out.geo_id, out.date, kPostWindowDays)) {
        const auto& p = posts_.posts[i];
        out.posts.push_back({p.post_id, p.subreddit, p.date(), snippet(p.text()), posts_.scores[i]});
    }
    const auto& est = assessor_.estimates().areas;
    if (auto it = est.find({out.geo_id, out.date}); it != est.end()) {
        out.perception_source = std::string(perception::to_string(it->second.source));
        out.synthetic = it->second.source == perception::PerceptionSource::Synthetic;
    }
    return out;
}

std::vector<Date> series_dates(const graph::Ahin& ahin, std::optional<Date> from, std::optional<Date> to) {
    if (ahin.dates().empty() && (!from || !to)) {
        throw InvalidArgument("no dates ingested; pass both ends of the range");
    }
    const Date first = from ? *from : ahin.dates().front();
    const Date last = to ? *to : ahin.dates().back();
    if (first > last) {
        throw InvalidArgument("range start " + first.str() + " is after its end " + last.str());
    }
    if (last.days() - first.days() >= kMaxSeriesDays) {
        throw InvalidArgument("date range longer than " + std::to_string(kMaxSeriesDays) + " days");
    }
    std::vector<Date> dates;
    for (Date d = first; d <= last; d = d.next()) {
        dates.push_back(d);
    }
    return dates;
}

Json to_json(const risk::AreaRisk& area) {
    Json j;
    j["geo_id"] = area.geo_id;
    j["name"] = area.name;
    j["level"] = area.level;
    j["index"] = area.index;
    j["perception"] = area.perception;
    j["perception_source"] = area.perception_source;
    j["density"] = area.density;
    j["mobility"] = area.mobility;
    Json features = Json::object();
    for (std::size_t i = 0; i < kFeatureDim; ++i) {
        features[std::string(feature_names()[i])] = {{"raw", area.raw[i]},
                                                     {"encoded", area.encoded[i]},
                                                     {"contribution", area.contributions[i]}};
    }
    j["features"] = std::move(features);
    return j;
}

Json to_json(const risk::Assessment& assessment) {
    Json j;
    j["date"] = assessment.date.str();
    j["stale"] = assessment.stale;
    if (assessment.query) {
        j["query"] = {{"lat", assessment.query->lat}, {"lon", assessment.query->lon}};
    }
    Json chain = Json::array();
    for (const auto& a : assessment.chain) {
        chain.push_back(to_json(a));
    }
    j["chain"] = std::move(chain);
    if (assessment.location) {
        j["location"] = to_json(*assessment.location);
    }
    if (assessment.nearest_poi) {
        j["nearest_poi"] = *assessment.nearest_poi;
    }
    return j;
}

Json to_json(std::string_view geo_id, const std::vector<risk::DatedIndex>& series) {
    Json points = Json::array();
    for (const auto& p : series) {
        points.push_back({{"date", p.date.str()}, {"index", p.index}, {"stale", p.stale}});
    }
    return Json{{"geo_id", geo_id}, {"points", std::move(points)}};
}

Json to_json(const std::vector<risk::ScoredPoi>& pois) {
    Json list = Json::array();
    for (const auto& p : pois) {
        list.push_back({{"name", p.poi.name},
                        {"tag", p.poi.tag},
                        {"lat", p.poi.gps.lat},
                        {"lon", p.poi.gps.lon},
                        {"mobility", p.poi.mobility},
                        {"distance_km", p.distance_km},
                        {"city", p.city},
                        {"index", p.index}});
    }
    return Json{{"pois", std::move(list)}};
}

Json to_json(const AreaPosts& posts) {
    Json list = Json::array();
    for (const auto& p : posts.posts) {
        list.push_back({{"id", p.post_id},
                        {"subreddit", p.subreddit},
                        {"date", p.date.str()},
                        {"snippet", p.snippet},
                        {"awareness", p.awareness}});
    }
    return Json{{"geo_id", posts.geo_id},
                {"date", posts.date.str()},
                {"window_days", kPostWindowDays},
                {"perception_source", posts.perception_source},
                {"synthetic", posts.synthetic},
                {"posts", std::move(list)}};
}

}  // namespace asat

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "asat/perception.hpp"
#include "asat/risk.hpp"

namespace asat {

using Json = nlohmann::ordered_json;

/// Days of posts, ending at the query date, that count towards an area.
inline constexpr int kPostWindowDays = 7;

struct EnginePaths {
    std::filesystem::path snapshot;
    std::filesystem::path models;
    std::optional<std::filesystem::path> graph;  // default: <snapshot>/graph
    std::optional<std::filesystem::path> gamma;  // default: uniform profile
};

struct AreaPost {
    std::string post_id;
    std::string subreddit;
    Date date;
    std::string snippet;
    double awareness = 0.0;
};

struct AreaPosts {
    std::string geo_id;
    Date date;
    std::vector<AreaPost> posts;
    std::string perception_source;  // empty when no estimate exists
    bool synthetic = false;
};

/// Everything a query needs, loaded from disk once and never mutated.
class Engine {
public:
    static std::shared_ptr<const Engine> open(const EnginePaths& paths);
    Engine(risk::Assessor assessor, perception::PostIndex posts, EnginePaths paths);

    const risk::Assessor& assessor() const noexcept { return assessor_; }
    const perception::PostIndex& posts() const noexcept { return posts_; }
    const EnginePaths& paths() const noexcept { return paths_; }

    /// Throws NotFound for an unknown geo_id.
    AreaPosts area_posts(std::string_view geo_id, std::optional<Date> date) const;

private:
    risk::Assessor assessor_;
    perception::PostIndex posts_;
    EnginePaths paths_;
};

/// Every day from `from` to `to` inclusive (defaults: first and latest
/// ingested date). Throws InvalidArgument when from > to or the range is
/// unreasonably long.
std::vector<Date> series_dates(const graph::Ahin& ahin, std::optional<Date> from, std::optional<Date> to);

Json to_json(const risk::AreaRisk& area);
Json to_json(const risk::Assessment& assessment);
Json to_json(std::string_view geo_id, const std::vector<risk::DatedIndex>& series);
Json to_json(const std::vector<risk::ScoredPoi>& pois);
Json to_json(const AreaPosts& posts);

}  // namespace asat

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "asat/common.hpp"

namespace asat::ingest {

/// A row that could not be turned into a record. Ingestion never aborts a
/// file because of one bad row.
struct Rejection {
    std::size_t line = 0;
    std::string reason;
};

template <class Record>
struct ParseResult {
    std::vector<Record> records;
    std::vector<Rejection> rejections;
    /// Data rows seen (header excluded); rows == records + rejections.
    std::size_t rows = 0;
};

struct DiseaseRecord {
    Date date;
    std::string geo_id;
    std::string state;
    std::int64_t confirmed = 0;
    std::int64_t new_cases = 0;
    std::int64_t deaths = 0;
    double fatality_rate = 0.0;

    friend bool operator==(const DiseaseRecord&, const DiseaseRecord&) = default;
};

struct DemographicRecord {
    std::string geo_id;
    Level level = Level::City;
    std::string name;
    std::string parent_geo_id;  // empty for the nation
    std::int64_t population = 0;
    double pop_density = 0.0;
    double pct_over_65 = 0.0;
    double pct_female = 0.0;
    double lat = 0.0;
    double lon = 0.0;

    friend bool operator==(const DemographicRecord&, const DemographicRecord&) = default;
};

struct MobilityRecord {
    std::string geo_id;
    Date date;
    int level = 1;

    friend bool operator==(const MobilityRecord&, const MobilityRecord&) = default;
};

struct RawPost {
    std::string post_id;
    std::string subreddit;
    std::int64_t created = 0;  // unix seconds, UTC
    std::string author_hash;
    std::string title;
    std::string body;

    Date date() const { return Date::from_unix_seconds(created); }
    std::string text() const { return title.empty() ? body : title + "\n" + body; }

    friend bool operator==(const RawPost&, const RawPost&) = default;
};

using KnownIds = std::unordered_set<std::string>;

inline constexpr std::string_view kDiseaseHeader =
    "date,geo_id,state,confirmed,new_cases,deaths,fatality_rate";
inline constexpr std::string_view kDemographicsHeader =
    "geo_id,level,name,parent_geo_id,population,pop_density,pct_over_65,pct_female,lat,lon";
inline constexpr std::string_view kMobilityHeader = "geo_id,date,level";

/// Disease rows sorted by (geo_id, date). When `known` is given, rows for
/// other geo_ids are rejected.
ParseResult<DiseaseRecord> parse_disease(std::string_view text, const KnownIds* known = nullptr);

/// Gazetteer rows in file order. Duplicate ids, parent cycles and a nation
/// count other than one raise ParseError; orphans are rejected.
ParseResult<DemographicRecord> parse_demographics(std::string_view text);

/// Mobility rows sorted by (geo_id, date); levels outside [1,5] are rejected.
ParseResult<MobilityRecord> parse_mobility(std::string_view text, const KnownIds* known = nullptr);

/// JSONL posts in file order. Raw usernames are replaced by their hash.
ParseResult<RawPost> parse_posts(std::string_view text);

std::string write_disease(const std::vector<DiseaseRecord>& records);
std::string write_demographics(const std::vector<DemographicRecord>& records);
std::string write_mobility(const std::vector<MobilityRecord>& records);
std::string write_posts(const std::vector<RawPost>& posts);
std::string write_rejections(std::string_view source, const std::vector<Rejection>& rejections);

/// Anonymized author token: 16 lowercase hex digits.
std::string anonymize_author(std::string_view username);
bool is_author_hash(std::string_view value) noexcept;

/// Two-letter postal code for a US state or territory name.
std::optional<std::string_view> state_abbreviation(std::string_view state_name) noexcept;

struct LocationMatch {
    std::vector<std::string> geo_ids;  // order of first mention
    bool ambiguous = false;            // a name resolved to several places
    bool from_subreddit = false;       // nothing in the text; subreddit fallback
};

/// Place-name index over a demographic tree used to attach posts to areas.
class Gazetteer {
public:
    explicit Gazetteer(const std::vector<DemographicRecord>& records);

    LocationMatch extract(const RawPost& post) const;

    /// The state containing `geo_id` (itself for a state), if any.
    std::optional<std::string> state_of(std::string_view geo_id) const;
    std::optional<std::string> state_for_subreddit(std::string_view subreddit) const;
    bool contains(std::string_view geo_id) const;

private:
    struct Entry {
        std::string geo_id;
        Level level;
    };
    std::map<std::string, std::vector<Entry>, std::less<>> phrases_;  // lowercased, space joined
    std::unordered_map<std::string, std::string> abbreviations_;       // "PA" -> state geo_id
    std::unordered_map<std::string, std::string> state_names_;         // "newyork" -> geo_id
    std::unordered_map<std::string, std::string> state_of_;
    std::unordered_set<std::string> ids_;
    std::size_t max_phrase_tokens_ = 1;
};

LocationMatch extract_locations(const RawPost& post, const Gazetteer& gazetteer);

/// Lowercased word tokens (letters and digits), in order.
std::vector<std::string> tokenize(std::string_view text);

}  // namespace asat::ingest

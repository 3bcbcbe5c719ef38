#include "asat/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "asat/csv.hpp"

namespace asat::ingest {

namespace {

std::optional<std::int64_t> parse_count(std::string_view text) {
    const std::string t = trim(text);
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || value < 0) {
        return std::nullopt;
    }
    return value;
}

std::optional<double> parse_real(std::string_view text) {
    const std::string t = trim(text);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

// Half a unit in the last printed decimal place of a numeric field.
double printed_tolerance(std::string_view text) {
    const auto dot = text.find('.');
    if (dot == std::string_view::npos) {
        return 0.5;
    }
    std::size_t decimals = 0;
    for (std::size_t i = dot + 1; i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]));
         ++i) {
        ++decimals;
    }
    return 0.5 * std::pow(10.0, -static_cast<double>(decimals)) + 1e-12;
}

void check_header(const csv::Row& row, std::string_view expected, std::string_view file) {
    std::vector<std::string> fields;
    for (const auto& f : row.fields) {
        fields.push_back(trim(f));
    }
    if (csv::join(fields) != expected) {
        throw ParseError(std::string(file) + ": expected header '" + std::string(expected) + "'");
    }
}

std::string rejection_field(std::size_t expected, std::size_t got) {
    return "expected " + std::to_string(expected) + " fields, got " + std::to_string(got);
}

}  // namespace

ParseResult<DiseaseRecord> parse_disease(std::string_view text, const KnownIds* known) {
    ParseResult<DiseaseRecord> result;
    const auto rows = csv::parse(text);
    if (rows.empty()) {
        return result;
    }
    check_header(rows.front(), kDiseaseHeader, "disease.csv");
    std::map<std::pair<std::string, std::int32_t>, std::size_t> seen;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        ++result.rows;
        auto reject = [&](std::string reason) {
            result.rejections.push_back(Rejection{row.line, std::move(reason)});
        };
        if (row.fields.size() != 7) {
            reject(rejection_field(7, row.fields.size()));
            continue;
        }
        const auto date = Date::parse(trim(row.fields[0]));
        const std::string geo_id = trim(row.fields[1]);
        const auto confirmed = parse_count(row.fields[3]);
        const auto new_cases = parse_count(row.fields[4]);
        const auto deaths = parse_count(row.fields[5]);
        if (!date) {
            reject("invalid date '" + row.fields[0] + "'");
            continue;
        }
        if (geo_id.empty()) {
            reject("empty geo_id");
            continue;
        }
        if (known && !known->contains(geo_id)) {
            reject("unknown geo_id '" + geo_id + "'");
            continue;
        }
        if (!confirmed || !new_cases || !deaths) {
            reject("counts must be non-negative integers");
            continue;
        }
        if (*deaths > *confirmed) {
            reject("deaths exceed confirmed cases");
            continue;
        }
        const double expected_rate =
            *confirmed > 0 ? static_cast<double>(*deaths) / static_cast<double>(*confirmed) : 0.0;
        const std::string rate_text = trim(row.fields[6]);
        if (!rate_text.empty()) {
            const auto rate = parse_real(rate_text);
            if (!rate || *rate < 0.0 || *rate > 1.0) {
                reject("fatality_rate must be a fraction in [0,1]");
                continue;
            }
            if (std::abs(*rate - expected_rate) > std::max(1e-6, printed_tolerance(rate_text))) {
                reject("fatality_rate inconsistent with deaths/confirmed");
                continue;
            }
        }
        const auto key = std::make_pair(geo_id, date->days());
        if (auto it = seen.find(key); it != seen.end()) {
            reject("duplicate row for " + geo_id + " on " + date->str() + " (first at line " +
                   std::to_string(it->second) + ")");
            continue;
        }
        seen.emplace(key, row.line);
        result.records.push_back(DiseaseRecord{*date, geo_id, trim(row.fields[2]), *confirmed,
                                               *new_cases, *deaths, expected_rate});
    }
    std::sort(result.records.begin(), result.records.end(),
              [](const DiseaseRecord& a, const DiseaseRecord& b) {
                  return std::tie(a.geo_id, a.date) < std::tie(b.geo_id, b.date);
              });
    return result;
}

ParseResult<DemographicRecord> parse_demographics(std::string_view text) {
    ParseResult<DemographicRecord> result;
    const auto rows = csv::parse(text);
    if (rows.empty()) {
        return result;
    }
    check_header(rows.front(), kDemographicsHeader, "demographics.csv");

    struct Parsed {
        DemographicRecord record;
        std::size_t line;
    };
    std::vector<Parsed> parsed;
    std::unordered_map<std::string, std::size_t> index;  // geo_id -> parsed slot
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        ++result.rows;
        auto reject = [&](std::string reason) {
            result.rejections.push_back(Rejection{row.line, std::move(reason)});
        };
        if (row.fields.size() != 10) {
            reject(rejection_field(10, row.fields.size()));
            continue;
        }
        DemographicRecord rec;
        rec.geo_id = trim(row.fields[0]);
        const auto level = parse_level(trim(row.fields[1]));
        rec.name = trim(row.fields[2]);
        rec.parent_geo_id = trim(row.fields[3]);
        const auto population = parse_count(row.fields[4]);
        const auto density = parse_real(row.fields[5]);
        const auto over65 = parse_real(row.fields[6]);
        const auto female = parse_real(row.fields[7]);
        const auto lat = parse_real(row.fields[8]);
        const auto lon = parse_real(row.fields[9]);
        if (rec.geo_id.empty()) {
            reject("empty geo_id");
            continue;
        }
        if (!level) {
            reject("unknown level '" + row.fields[1] + "'");
            continue;
        }
        if (!population || !density || *density < 0.0) {
            reject("population and pop_density must be non-negative numbers");
            continue;
        }
        if (!over65 || !female || *over65 < 0.0 || *over65 > 1.0 || *female < 0.0 || *female > 1.0) {
            reject("pct_over_65 and pct_female must be fractions in [0,1]");
            continue;
        }
        if (!lat || !lon || *lat < -90.0 || *lat > 90.0 || *lon < -180.0 || *lon > 180.0) {
            reject("lat/lon out of range");
            continue;
        }
        rec.level = *level;
        rec.population = *population;
        rec.pop_density = *density;
        rec.pct_over_65 = *over65;
        rec.pct_female = *female;
        rec.lat = *lat;
        rec.lon = *lon;
        if (auto it = index.find(rec.geo_id); it != index.end()) {
            throw ParseError("demographics.csv: duplicate geo_id '" + rec.geo_id + "' at lines " +
                             std::to_string(parsed[it->second].line) + " and " +
                             std::to_string(row.line));
        }
        index.emplace(rec.geo_id, parsed.size());
        parsed.push_back(Parsed{std::move(rec), row.line});
    }

    // Parent cycles make the hierarchy unusable as a whole.
    std::vector<std::uint8_t> state(parsed.size(), 0);  // 0 new, 1 on stack, 2 done
    for (std::size_t start = 0; start < parsed.size(); ++start) {
        std::vector<std::size_t> chain;
        std::size_t cur = start;
        while (true) {
            if (state[cur] == 2) {
                break;
            }
            if (state[cur] == 1) {
                throw ParseError("demographics.csv: cycle in parent references through '" +
                                 parsed[cur].record.geo_id + "' (line " +
                                 std::to_string(parsed[cur].line) + ")");
            }
            state[cur] = 1;
            chain.push_back(cur);
            const auto it = index.find(parsed[cur].record.parent_geo_id);
            if (parsed[cur].record.parent_geo_id.empty() || it == index.end()) {
                break;
            }
            cur = it->second;
        }
        for (std::size_t c : chain) {
            state[c] = 2;
        }
    }

    std::size_t nations = 0;
    for (const auto& p : parsed) {
        nations += p.record.level == Level::Nation ? 1 : 0;
    }
    if (nations != 1) {
        throw ParseError("demographics.csv: expected exactly one nation record, found " +
                         std::to_string(nations));
    }

    // Accept level by level so that a rejected parent cascades to its subtree.
    std::vector<bool> accepted(parsed.size(), false);
    std::vector<bool> rejected(parsed.size(), false);
    for (Level level : kAllLevels) {
        for (std::size_t i = 0; i < parsed.size(); ++i) {
            const auto& rec = parsed[i].record;
            if (rec.level != level) {
                continue;
            }
            std::string reason;
            if (level == Level::Nation) {
                if (!rec.parent_geo_id.empty()) {
                    reason = "nation must not have a parent";
                }
            } else {
                const auto it = index.find(rec.parent_geo_id);
                if (it == index.end()) {
                    reason = "orphan: parent '" + rec.parent_geo_id + "' not found";
                } else if (parsed[it->second].record.level != *parent_level(level)) {
                    reason = "parent '" + rec.parent_geo_id + "' is not a " +
                             std::string(to_string(*parent_level(level)));
                } else if (!accepted[it->second]) {
                    reason = "orphan: parent '" + rec.parent_geo_id + "' was rejected";
                }
            }
            if (reason.empty()) {
                accepted[i] = true;
            } else {
                rejected[i] = true;
                result.rejections.push_back(Rejection{parsed[i].line, std::move(reason)});
            }
        }
    }
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        if (accepted[i]) {
            result.records.push_back(parsed[i].record);
        }
    }
    std::sort(result.rejections.begin(), result.rejections.end(),
              [](const Rejection& a, const Rejection& b) { return a.line < b.line; });
    return result;
}

ParseResult<MobilityRecord> parse_mobility(std::string_view text, const KnownIds* known) {
    ParseResult<MobilityRecord> result;
    const auto rows = csv::parse(text);
    if (rows.empty()) {
        return result;
    }
    check_header(rows.front(), kMobilityHeader, "mobility.csv");
    std::set<std::pair<std::string, std::int32_t>> seen;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        ++result.rows;
        auto reject = [&](std::string reason) {
            result.rejections.push_back(Rejection{row.line, std::move(reason)});
        };
        if (row.fields.size() != 3) {
            reject(rejection_field(3, row.fields.size()));
            continue;
        }
        const std::string geo_id = trim(row.fields[0]);
        const auto date = Date::parse(trim(row.fields[1]));
        const auto level = parse_count(row.fields[2]);
        if (geo_id.empty() || !date) {
            reject("invalid geo_id or date");
            continue;
        }
        if (!level) {
            reject("level must be an integer, got '" + row.fields[2] + "'");
            continue;
        }
        if (*level < 1 || *level > 5) {
            reject("level " + std::to_string(*level) + " outside [1,5]");
            continue;
        }
        if (known && !known->contains(geo_id)) {
            reject("unknown geo_id '" + geo_id + "'");
            continue;
        }
        if (!seen.emplace(geo_id, date->days()).second) {
            reject("duplicate row for " + geo_id + " on " + date->str());
            continue;
        }
        result.records.push_back(MobilityRecord{geo_id, *date, static_cast<int>(*level)});
    }
    std::sort(result.records.begin(), result.records.end(),
              [](const MobilityRecord& a, const MobilityRecord& b) {
                  return std::tie(a.geo_id, a.date) < std::tie(b.geo_id, b.date);
              });
    return result;
}

std::string anonymize_author(std::string_view username) {
    return hex64(fnv1a64(username, fnv1a64("asat-author-salt")));
}

bool is_author_hash(std::string_view value) noexcept {
    return value.size() == 16 && std::all_of(value.begin(), value.end(), [](char c) {
               return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
           });
}

ParseResult<RawPost> parse_posts(std::string_view text) {
    using nlohmann::json;
    ParseResult<RawPost> result;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    auto as_text = [](const json& v) -> std::optional<std::string> {
        if (v.is_string()) {
            return v.get<std::string>();
        }
        if (v.is_number_integer()) {
            return std::to_string(v.get<std::int64_t>());
        }
        return std::nullopt;
    };
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        ++line_no;
        const std::string line = trim(text.substr(pos, end - pos));
        pos = end + 1;
        if (line.empty()) {
            continue;
        }
        ++result.rows;
        auto reject = [&](std::string reason) {
            result.rejections.push_back(Rejection{line_no, std::move(reason)});
        };
        const json obj = json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) {
            reject("not a JSON object");
            continue;
        }
        RawPost post;
        const auto id = obj.contains("id") ? as_text(obj["id"]) : std::nullopt;
        if (!id || id->empty()) {
            reject("missing id");
            continue;
        }
        post.post_id = *id;
        if (!obj.contains("created_utc")) {
            reject("missing created_utc");
            continue;
        }
        const json& created = obj["created_utc"];
        if (created.is_number()) {
            post.created = static_cast<std::int64_t>(std::floor(created.get<double>()));
        } else if (created.is_string()) {
            const auto v = parse_real(created.get<std::string>());
            if (!v) {
                reject("created_utc is not a timestamp");
                continue;
            }
            post.created = static_cast<std::int64_t>(std::floor(*v));
        } else {
            reject("created_utc is not a timestamp");
            continue;
        }
        auto string_field = [&](const char* key) {
            return obj.contains(key) && obj[key].is_string() ? obj[key].get<std::string>()
                                                             : std::string{};
        };
        post.subreddit = string_field("subreddit");
        post.title = string_field("title");
        post.body = string_field("body");
        const std::string author = string_field("author");
        const std::string author_hash = string_field("author_hash");
        if (!author.empty()) {
            post.author_hash = anonymize_author(author);
        } else if (is_author_hash(author_hash)) {
            post.author_hash = author_hash;
        } else {
            post.author_hash = anonymize_author(author_hash);
        }
        result.records.push_back(std::move(post));
    }
    return result;
}

std::string write_disease(const std::vector<DiseaseRecord>& records) {
    std::string out(kDiseaseHeader);
    out.push_back('\n');
    for (const auto& r : records) {
        out += csv::join({r.date.str(), r.geo_id, r.state, std::to_string(r.confirmed),
                          std::to_string(r.new_cases), std::to_string(r.deaths),
                          format_double(r.fatality_rate)});
        out.push_back('\n');
    }
    return out;
}

std::string write_demographics(const std::vector<DemographicRecord>& records) {
    std::string out(kDemographicsHeader);
    out.push_back('\n');
    for (const auto& r : records) {
        out += csv::join({r.geo_id, std::string(to_string(r.level)), r.name, r.parent_geo_id,
                          std::to_string(r.population), format_double(r.pop_density),
                          format_double(r.pct_over_65), format_double(r.pct_female),
                          format_double(r.lat), format_double(r.lon)});
        out.push_back('\n');
    }
    return out;
}

std::string write_mobility(const std::vector<MobilityRecord>& records) {
    std::string out(kMobilityHeader);
    out.push_back('\n');
    for (const auto& r : records) {
        out += csv::join({r.geo_id, r.date.str(), std::to_string(r.level)});
        out.push_back('\n');
    }
    return out;
}

std::string write_posts(const std::vector<RawPost>& posts) {
    std::string out;
    for (const auto& p : posts) {
        nlohmann::ordered_json obj;
        obj["id"] = p.post_id;
        obj["subreddit"] = p.subreddit;
        obj["created_utc"] = p.created;
        obj["author_hash"] = p.author_hash;
        obj["title"] = p.title;
        obj["body"] = p.body;
        out += obj.dump();
        out.push_back('\n');
    }
    return out;
}

std::string write_rejections(std::string_view source, const std::vector<Rejection>& rejections) {
    std::string out;
    for (const auto& r : rejections) {
        out += csv::join({std::string(source), std::to_string(r.line), r.reason});
        out.push_back('\n');
    }
    return out;
}

}  // namespace asat::ingest

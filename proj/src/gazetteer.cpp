#include <algorithm>
#include <cctype>

#include "asat/ingest.hpp"

namespace asat::ingest {

namespace {

struct StateName {
    std::string_view name;
    std::string_view code;
};

constexpr StateName kStates[] = {
    {"Alabama", "AL"},        {"Alaska", "AK"},         {"Arizona", "AZ"},
    {"Arkansas", "AR"},       {"California", "CA"},     {"Colorado", "CO"},
    {"Connecticut", "CT"},    {"Delaware", "DE"},       {"District of Columbia", "DC"},
    {"Florida", "FL"},        {"Georgia", "GA"},        {"Hawaii", "HI"},
    {"Idaho", "ID"},          {"Illinois", "IL"},       {"Indiana", "IN"},
    {"Iowa", "IA"},           {"Kansas", "KS"},         {"Kentucky", "KY"},
    {"Louisiana", "LA"},      {"Maine", "ME"},          {"Maryland", "MD"},
    {"Massachusetts", "MA"},  {"Michigan", "MI"},       {"Minnesota", "MN"},
    {"Mississippi", "MS"},    {"Missouri", "MO"},       {"Montana", "MT"},
    {"Nebraska", "NE"},       {"Nevada", "NV"},         {"New Hampshire", "NH"},
    {"New Jersey", "NJ"},     {"New Mexico", "NM"},     {"New York", "NY"},
    {"North Carolina", "NC"}, {"North Dakota", "ND"},   {"Ohio", "OH"},
    {"Oklahoma", "OK"},       {"Oregon", "OR"},         {"Pennsylvania", "PA"},
    {"Puerto Rico", "PR"},    {"Rhode Island", "RI"},   {"South Carolina", "SC"},
    {"South Dakota", "SD"},   {"Tennessee", "TN"},      {"Texas", "TX"},
    {"Utah", "UT"},           {"Vermont", "VT"},        {"Virginia", "VA"},
    {"Washington", "WA"},     {"West Virginia", "WV"},  {"Wisconsin", "WI"},
    {"Wyoming", "WY"},
};

bool is_word_char(unsigned char c) { return std::isalnum(c) != 0; }

// Tokens with their original spelling, for case-sensitive postal codes.
std::vector<std::string> raw_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string current;
    for (unsigned char c : text) {
        if (is_word_char(c)) {
            current.push_back(static_cast<char>(c));
        } else if (!current.empty()) {
            out.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) {
        out.push_back(std::move(current));
    }
    return out;
}

std::string join_tokens(const std::vector<std::string>& tokens, std::size_t first, std::size_t n) {
    std::string out;
    for (std::size_t i = first; i < first + n; ++i) {
        if (i > first) {
            out.push_back(' ');
        }
        out += tokens[i];
    }
    return out;
}

std::string squash(std::string_view text) {
    std::string out;
    for (unsigned char c : text) {
        if (is_word_char(c)) {
            out.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    return out;
}

}  // namespace

std::optional<std::string_view> state_abbreviation(std::string_view state_name) noexcept {
    for (const auto& s : kStates) {
        if (s.name.size() == state_name.size() &&
            std::equal(s.name.begin(), s.name.end(), state_name.begin(), [](char a, char b) {
                return std::tolower(static_cast<unsigned char>(a)) ==
                       std::tolower(static_cast<unsigned char>(b));
            })) {
            return s.code;
        }
    }
    return std::nullopt;
}

std::vector<std::string> tokenize(std::string_view text) {
    auto tokens = raw_tokens(text);
    for (auto& t : tokens) {
        t = to_lower(t);
    }
    return tokens;
}

Gazetteer::Gazetteer(const std::vector<DemographicRecord>& records) {
    std::unordered_map<std::string, const DemographicRecord*> by_id;
    for (const auto& r : records) {
        by_id.emplace(r.geo_id, &r);
    }
    auto add_phrase = [&](std::string_view name, const DemographicRecord& r) {
        const auto tokens = tokenize(name);
        if (tokens.empty()) {
            return;
        }
        max_phrase_tokens_ = std::max(max_phrase_tokens_, tokens.size());
        auto& entries = phrases_[join_tokens(tokens, 0, tokens.size())];
        if (std::none_of(entries.begin(), entries.end(),
                         [&](const Entry& e) { return e.geo_id == r.geo_id; })) {
            entries.push_back(Entry{r.geo_id, r.level});
        }
    };
    for (const auto& r : records) {
        ids_.insert(r.geo_id);
        // Walk up to the state.
        const DemographicRecord* cur = &r;
        while (cur && cur->level != Level::State && cur->level != Level::Nation) {
            auto it = by_id.find(cur->parent_geo_id);
            cur = it == by_id.end() ? nullptr : it->second;
        }
        if (cur && cur->level == Level::State) {
            state_of_.emplace(r.geo_id, cur->geo_id);
        }
        switch (r.level) {
            case Level::Nation:
                break;
            case Level::State: {
                add_phrase(r.name, r);
                state_names_.emplace(squash(r.name), r.geo_id);
                std::string code;
                if (auto abbr = state_abbreviation(r.name)) {
                    code = std::string(*abbr);
                } else if (r.geo_id.size() == 2 && std::isupper(static_cast<unsigned char>(r.geo_id[0])) &&
                           std::isupper(static_cast<unsigned char>(r.geo_id[1]))) {
                    code = r.geo_id;
                }
                if (!code.empty()) {
                    abbreviations_.emplace(code, r.geo_id);
                    state_names_.emplace(to_lower(code), r.geo_id);
                }
                break;
            }
            case Level::County: {
                std::string base = r.name;
                for (std::string_view suffix : {" County", " Parish"}) {
                    if (base.size() > suffix.size() &&
                        to_lower(base.substr(base.size() - suffix.size())) == to_lower(suffix)) {
                        base = base.substr(0, base.size() - suffix.size());
                    }
                }
                add_phrase(base, r);
                add_phrase(base + " County", r);
                break;
            }
            case Level::City:
                add_phrase(r.name, r);
                break;
        }
    }
}

bool Gazetteer::contains(std::string_view geo_id) const {
    return ids_.contains(std::string(geo_id));
}

std::optional<std::string> Gazetteer::state_of(std::string_view geo_id) const {
    if (auto it = state_of_.find(std::string(geo_id)); it != state_of_.end()) {
        return it->second;
    }
    return std::nullopt;
}

std::optional<std::string> Gazetteer::state_for_subreddit(std::string_view subreddit) const {
    std::string s = squash(subreddit);
    if (s.starts_with("r") && subreddit.starts_with("r/")) {
        s = s.substr(1);
    }
    for (std::string_view prefix : {"coronavirus", "covid19", "covid"}) {
        if (s.starts_with(prefix)) {
            s = s.substr(prefix.size());
            break;
        }
    }
    if (s.empty()) {
        return std::nullopt;
    }
    if (auto it = state_names_.find(s); it != state_names_.end()) {
        return it->second;
    }
    return std::nullopt;
}

LocationMatch Gazetteer::extract(const RawPost& post) const {
    LocationMatch match;
    const auto original = raw_tokens(post.text());
    std::vector<std::string> lower(original.size());
    std::transform(original.begin(), original.end(), lower.begin(),
                   [](const std::string& t) { return to_lower(t); });

    struct Mention {
        std::vector<Entry> candidates;
    };
    std::vector<Mention> mentions;
    for (std::size_t i = 0; i < lower.size();) {
        bool found = false;
        const std::size_t longest = std::min(max_phrase_tokens_, lower.size() - i);
        for (std::size_t n = longest; n >= 1; --n) {
            if (auto it = phrases_.find(join_tokens(lower, i, n)); it != phrases_.end()) {
                mentions.push_back(Mention{it->second});
                i += n;
                found = true;
                break;
            }
        }
        if (found) {
            continue;
        }
        // Postal codes only count when written in capitals ("PA", not "pa").
        if (original[i].size() == 2 && std::isupper(static_cast<unsigned char>(original[i][0])) &&
            std::isupper(static_cast<unsigned char>(original[i][1]))) {
            if (auto it = abbreviations_.find(original[i]); it != abbreviations_.end()) {
                mentions.push_back(Mention{{Entry{it->second, Level::State}}});
            }
        }
        ++i;
    }

    // State cues: states named in the text plus the subreddit's state.
    std::vector<std::string> cues;
    for (const auto& m : mentions) {
        for (const auto& e : m.candidates) {
            if (e.level == Level::State) {
                cues.push_back(e.geo_id);
            }
        }
    }
    if (auto s = state_for_subreddit(post.subreddit)) {
        cues.push_back(*s);
    }
    auto cued = [&](const std::string& geo_id) {
        const auto state = state_of(geo_id);
        return state && std::find(cues.begin(), cues.end(), *state) != cues.end();
    };
    auto emit = [&](const std::string& geo_id) {
        if (std::find(match.geo_ids.begin(), match.geo_ids.end(), geo_id) == match.geo_ids.end()) {
            match.geo_ids.push_back(geo_id);
        }
    };

    for (const auto& m : mentions) {
        if (m.candidates.size() == 1) {
            emit(m.candidates.front().geo_id);
            continue;
        }
        std::vector<std::string> narrowed;
        for (const auto& e : m.candidates) {
            if (cued(e.geo_id)) {
                narrowed.push_back(e.geo_id);
            }
        }
        if (narrowed.empty()) {
            for (const auto& e : m.candidates) {
                narrowed.push_back(e.geo_id);
            }
        }
        if (narrowed.size() > 1) {
            match.ambiguous = true;
        }
        for (const auto& id : narrowed) {
            emit(id);
        }
    }
    if (match.geo_ids.empty()) {
        if (auto s = state_for_subreddit(post.subreddit)) {
            match.geo_ids.push_back(*s);
            match.from_subreddit = true;
        }
    }
    return match;
}

LocationMatch extract_locations(const RawPost& post, const Gazetteer& gazetteer) {
    return gazetteer.extract(post);
}

}  // namespace asat::ingest

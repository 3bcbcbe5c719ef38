#include "asat/common.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <numbers>

namespace asat {

Date Date::from_ymd(int y, unsigned m, unsigned d) {
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                          std::chrono::day{d}};
    if (!ymd.ok()) {
        throw InvalidArgument("invalid calendar date");
    }
    return Date(static_cast<std::int32_t>(std::chrono::sys_days{ymd}.time_since_epoch().count()));
}

std::optional<Date> Date::parse(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        return std::nullopt;
    }
    int y = 0;
    unsigned m = 0, d = 0;
    auto field = [&](std::size_t pos, std::size_t len, auto& out) {
        const char* first = text.data() + pos;
        const char* last = first + len;
        auto [ptr, ec] = std::from_chars(first, last, out);
        return ec == std::errc() && ptr == last;
    };
    if (!field(0, 4, y) || !field(5, 2, m) || !field(8, 2, d)) {
        return std::nullopt;
    }
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                          std::chrono::day{d}};
    if (!ymd.ok()) {
        return std::nullopt;
    }
    return Date(static_cast<std::int32_t>(std::chrono::sys_days{ymd}.time_since_epoch().count()));
}

Date Date::from_unix_seconds(std::int64_t seconds) {
    std::int64_t days = seconds / 86400;
    if (seconds % 86400 < 0) {
        --days;
    }
    return Date(static_cast<std::int32_t>(days));
}

std::string Date::str() const {
    const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days_}}};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

std::string_view to_string(Level level) noexcept {
    switch (level) {
        case Level::Nation: return "nation";
        case Level::State: return "state";
        case Level::County: return "county";
        case Level::City: return "city";
    }
    return "unknown";
}

std::optional<Level> parse_level(std::string_view text) noexcept {
    for (Level level : kAllLevels) {
        if (to_string(level) == text) {
            return level;
        }
    }
    return std::nullopt;
}

std::optional<Level> parent_level(Level level) noexcept {
    if (level == Level::Nation) {
        return std::nullopt;
    }
    return static_cast<Level>(static_cast<std::uint8_t>(level) - 1);
}

std::optional<Level> child_level(Level level) noexcept {
    if (level == Level::City) {
        return std::nullopt;
    }
    return static_cast<Level>(static_cast<std::uint8_t>(level) + 1);
}

double euclidean_degrees(LatLon a, LatLon b) noexcept {
    const double dlat = a.lat - b.lat;
    const double dlon = a.lon - b.lon;
    return std::sqrt(dlat * dlat + dlon * dlon);
}

double haversine_km(LatLon a, LatLon b) noexcept {
    constexpr double kEarthRadiusKm = 6371.0088;
    constexpr double kRad = std::numbers::pi / 180.0;
    const double dlat = (b.lat - a.lat) * kRad;
    const double dlon = (b.lon - a.lon) * kRad;
    const double s = std::sin(dlat / 2) * std::sin(dlat / 2) +
                     std::cos(a.lat * kRad) * std::cos(b.lat * kRad) * std::sin(dlon / 2) *
                         std::sin(dlon / 2);
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(s)));
}

double distance(DistanceMetric metric, LatLon a, LatLon b) noexcept {
    return metric == DistanceMetric::Haversine ? haversine_km(a, b) : euclidean_degrees(a, b);
}

const std::array<std::string_view, kFeatureDim>& feature_names() noexcept {
    static constexpr std::array<std::string_view, kFeatureDim> names{
        "confirmed",   "new_cases",  "deaths",   "fatality_rate", "population",
        "pop_density", "pct_over_65", "pct_female", "mobility",     "perception"};
    return names;
}

std::optional<std::size_t> feature_index(std::string_view name) noexcept {
    const auto& names = feature_names();
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) {
            return i;
        }
    }
    return std::nullopt;
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) noexcept {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& word : state_) {
        word = splitmix64(s);
    }
}

// xoshiro256**
std::uint64_t Rng::next_u64() noexcept {
    auto rotl = [](std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double Rng::uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() noexcept {
    if (spare_) {
        const double v = *spare_;
        spare_.reset();
        return v;
    }
    double u1 = uniform();
    while (u1 <= 0.0) {
        u1 = uniform();
    }
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    return r * std::cos(theta);
}

std::size_t Rng::below(std::size_t n) noexcept {
    if (n <= 1) {
        return 0;
    }
    // Lemire's multiply-shift with rejection.
    const std::uint64_t bound = n;
    __uint128_t m = static_cast<__uint128_t>(next_u64()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
        const std::uint64_t threshold = -bound % bound;
        while (low < threshold) {
            m = static_cast<__uint128_t>(next_u64()) * bound;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::size_t>(m >> 64);
}

std::string to_lower(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
        return static_cast<char>(std::tolower(c));
    });
    return out;
}

std::string trim(std::string_view text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = text.find_last_not_of(" \t\r\n");
    return std::string(text.substr(first, last - first + 1));
}

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc()) {
        return "nan";
    }
    return std::string(buf, ptr);
}

}  // namespace asat

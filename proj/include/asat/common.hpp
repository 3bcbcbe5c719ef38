#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace asat {

/// Base class for every error raised by the engine. The C API maps the
/// concrete subclass onto a status code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class NotFound : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class MissingArtifact : public Error {
public:
    explicit MissingArtifact(std::string artifact)
        : Error("missing artifact: " + artifact), artifact_(std::move(artifact)) {}
    const std::string& artifact() const noexcept { return artifact_; }

private:
    std::string artifact_;
};

class OutOfCoverage : public Error {
public:
    using Error::Error;
};

class UnknownDate : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

/// Calendar date stored as days since 1970-01-01.
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(std::int32_t days) : days_(days) {}

    static Date from_ymd(int y, unsigned m, unsigned d);
    /// Parses YYYY-MM-DD; returns nullopt on anything else.
    static std::optional<Date> parse(std::string_view text);
    static Date from_unix_seconds(std::int64_t seconds);

    std::string str() const;
    constexpr std::int32_t days() const noexcept { return days_; }
    constexpr Date next() const noexcept { return Date(days_ + 1); }

    friend constexpr auto operator<=>(Date, Date) = default;

private:
    std::int32_t days_ = 0;
};

enum class Level : std::uint8_t { Nation = 0, State = 1, County = 2, City = 3 };

inline constexpr std::array<Level, 4> kAllLevels{Level::Nation, Level::State, Level::County,
                                                 Level::City};

std::string_view to_string(Level level) noexcept;
std::optional<Level> parse_level(std::string_view text) noexcept;
/// The level one step above; nullopt for the nation.
std::optional<Level> parent_level(Level level) noexcept;
std::optional<Level> child_level(Level level) noexcept;

struct LatLon {
    double lat = 0.0;
    double lon = 0.0;

    friend bool operator==(const LatLon&, const LatLon&) = default;
};

enum class DistanceMetric : std::uint8_t { EuclideanDegrees, Haversine };

double euclidean_degrees(LatLon a, LatLon b) noexcept;
double haversine_km(LatLon a, LatLon b) noexcept;
double distance(DistanceMetric metric, LatLon a, LatLon b) noexcept;

// Attribute layout of the concatenated feature vector A = A1 + A2 + A3 + A4.
inline constexpr std::size_t kFeatureDim = 10;
namespace dim {
inline constexpr std::size_t kConfirmed = 0;
inline constexpr std::size_t kNewCases = 1;
inline constexpr std::size_t kDeaths = 2;
inline constexpr std::size_t kFatalityRate = 3;
inline constexpr std::size_t kPopulation = 4;
inline constexpr std::size_t kPopDensity = 5;
inline constexpr std::size_t kPctOver65 = 6;
inline constexpr std::size_t kPctFemale = 7;
inline constexpr std::size_t kMobility = 8;
inline constexpr std::size_t kPerception = 9;
}  // namespace dim

using Features = std::array<double, kFeatureDim>;

/// Canonical dimension names, used by profile files and JSON output.
const std::array<std::string_view, kFeatureDim>& feature_names() noexcept;
std::optional<std::size_t> feature_index(std::string_view name) noexcept;

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept;
std::string hex64(std::uint64_t value);

/// Deterministic generator with platform-independent uniform and normal
/// draws (std distributions are implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64() noexcept;
    /// Uniform in [0, 1).
    double uniform() noexcept;
    double normal() noexcept;
    /// Uniform integer in [0, n).
    std::size_t below(std::size_t n) noexcept;

    template <class T>
    void shuffle(std::vector<T>& items) noexcept {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[below(i)]);
        }
    }

private:
    std::uint64_t state_[4];
    std::optional<double> spare_;
};

std::uint64_t splitmix64(std::uint64_t& state) noexcept;

std::string to_lower(std::string_view text);
std::string trim(std::string_view text);
/// Formats with enough digits to round-trip a double exactly.
std::string format_double(double value);

}  // namespace asat

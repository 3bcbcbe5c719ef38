#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "asat/engine.hpp"
#include "asat/gae.hpp"
#include "asat/graph.hpp"
#include "asat/perception.hpp"

namespace asat::pipeline {

namespace fs = std::filesystem;

/// Flat key=value file; keys are kept sorted so rewrites are stable.
class Manifest {
public:
    static Manifest load(const fs::path& path);  // empty when absent
    void save(const fs::path& path) const;

    std::optional<std::string> get(const std::string& key) const;
    void set(const std::string& key, std::string value);
    /// Drops every key starting with `prefix`.
    void erase_prefix(const std::string& prefix);
    /// Records the FNV-1a checksum of `file` under "<stage>.checksum.<name>".
    void checksum(const std::string& stage, const fs::path& file);

    const std::map<std::string, std::string>& entries() const noexcept { return entries_; }

private:
    std::map<std::string, std::string> entries_;
};

inline constexpr std::string_view kManifestFile = "manifest.txt";
inline constexpr std::uint64_t kDefaultSeed = 7;

// Snapshot layout written by ingest.
inline constexpr std::string_view kDiseaseFile = "disease.csv";
inline constexpr std::string_view kDemographicsFile = "demographics.csv";
inline constexpr std::string_view kMobilityFile = "mobility.csv";
inline constexpr std::string_view kPostsFile = "posts.jsonl";
inline constexpr std::string_view kPoisFile = "pois.csv";
inline constexpr std::string_view kPostLocationsFile = "post_locations.csv";
inline constexpr std::string_view kRejectionsFile = "rejections.csv";

// Model directory layout written by train.
inline constexpr std::string_view kPerceptionModelFile = "perception.model";
inline constexpr std::string_view kCganFile = "cgan.model";
inline constexpr std::string_view kPerceptionsFile = "perceptions.csv";
inline constexpr std::string_view kTrainingLogFile = "training.json";

struct IngestOptions {
    fs::path disease;
    fs::path demographics;
    fs::path mobility;
    fs::path posts;
    std::optional<fs::path> pois;
    fs::path out;
};

struct SourceCount {
    std::size_t rows = 0;
    std::size_t records = 0;
    std::size_t rejections = 0;
};

struct IngestReport {
    std::map<std::string, SourceCount> sources;
    std::size_t located_posts = 0;
    std::size_t ambiguous_posts = 0;
    Json to_json() const;
};

/// Parses and validates the raw inputs into a snapshot directory.
IngestReport run_ingest(const IngestOptions& options);

/// Snapshot records re-read from an ingested directory.
struct Snapshot {
    std::vector<ingest::DemographicRecord> demographics;
    std::vector<ingest::DiseaseRecord> disease;
    std::vector<ingest::MobilityRecord> mobility;
    std::vector<ingest::RawPost> posts;
    std::vector<perception::PostLocation> locations;
    std::vector<risk::Poi> pois;
};

/// Throws MissingArtifact naming the first absent file.
Snapshot load_snapshot(const fs::path& dir);
std::vector<perception::PostLocation> read_post_locations(std::string_view csv_text);

struct GraphOptions {
    fs::path snapshot;
    std::optional<fs::path> out;  // default <snapshot>/graph
    graph::BuildOptions build;
};

struct GraphReport {
    std::map<std::string, std::size_t> nodes;  // per level plus "total"
    std::size_t include_edges = 0;
    std::size_t near_edges = 0;
    Json to_json() const;
};

GraphReport run_build_graph(const GraphOptions& options);

/// The network described by a snapshot and a graph directory, with a4 taken
/// from `perceptions`.
graph::Ahin load_ahin(const Snapshot& snapshot, const fs::path& graph_dir,
                      const graph::PerceptionTable& perceptions = {});

enum class Component { Perception, Cgan, Gae, All };
std::optional<Component> parse_component(std::string_view text) noexcept;

struct TrainOptions {
    Component component = Component::All;
    std::optional<std::uint64_t> seed;  // default: manifest, then kDefaultSeed
    fs::path snapshot;
    std::optional<fs::path> graph;
    fs::path models;
    perception::PerceptionConfig perception;
    perception::CganConfig cgan;
    gae::GaeConfig gae;
    perception::AreaPerceptionOptions area;
};

struct TrainReport {
    std::uint64_t seed = 0;
    std::vector<std::string> notes;
    std::optional<perception::PerceptionReport> perception;
    std::optional<std::size_t> cgan_steps;
    std::optional<double> cgan_final_d_loss;
    std::optional<double> cgan_final_g_loss;
    std::optional<double> gae_final_loss;
    std::map<std::string, std::size_t> perception_sources;
    Json to_json() const;
};

TrainReport run_train(const TrainOptions& options);

struct ExportOptions {
    fs::path snapshot;
    std::optional<fs::path> graph;
    fs::path out;
};

struct ExportReport {
    std::vector<fs::path> files;
    std::map<std::string, std::size_t> nodes;  // per level plus "total"
    std::size_t include_edges = 0;
    std::size_t near_edges = 0;
    Json to_json() const;
};

/// Writes the four public dataset files (disease; demographics and
/// mobility; located posts; network).
ExportReport run_export(const ExportOptions& options);

}  // namespace asat::pipeline

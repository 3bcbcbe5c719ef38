#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "asat/common.hpp"
#include "asat/ingest.hpp"

namespace asat::graph {

using NodeId = std::uint32_t;

enum class Relation : std::uint8_t { Include = 0, Near = 1 };
inline constexpr std::size_t kRelationCount = 2;

std::string_view to_string(Relation relation) noexcept;
std::optional<Relation> parse_relation(std::string_view text) noexcept;

struct GeoNode {
    std::string geo_id;
    Level level = Level::City;
    std::string name;
    LatLon gps;
    std::optional<NodeId> parent;
    std::vector<NodeId> children;
    // Static demographic attributes (A2).
    std::int64_t population = 0;
    double pop_density = 0.0;
    double pct_over_65 = 0.0;
    double pct_female = 0.0;
};

/// Undirected for Near (stored once, source has the smaller geo_id);
/// parent -> child for Include.
struct Edge {
    NodeId source = 0;
    NodeId target = 0;
    Relation relation = Relation::Near;

    friend bool operator==(const Edge&, const Edge&) = default;
};

/// A = A1 + A2 + A3 + A4 for one node on one date.
struct FeatureVector {
    Date date;
    bool known_date = true;  // false: date outside the ingested range
    bool has_disease = false;
    bool has_mobility = false;
    bool has_perception = false;
    Features raw{};
    Features normalized{};  // min-max over the node's level on that date

    std::span<const double, 4> a1() const { return std::span<const double, 4>(raw.data(), 4); }
    std::span<const double, 4> a2() const { return std::span<const double, 4>(raw.data() + 4, 4); }
    double a3() const { return raw[dim::kMobility]; }
    double a4() const { return raw[dim::kPerception]; }
};

/// Directed type graph the AHIN conforms to.
struct SchemaEdge {
    Level from;
    Relation relation;
    Level to;
};
const std::vector<SchemaEdge>& network_schema();
bool schema_allows(Level from, Relation relation, Level to) noexcept;

/// T1 -R1-> T2 -R2-> ... -RL-> T(L+1).
struct MetaPath {
    std::string name;
    std::vector<Level> types;
    std::vector<Relation> relations;

    std::size_t length() const noexcept { return relations.size(); }
    /// Throws InvalidArgument when a step is not an edge of the schema.
    void validate() const;

    static MetaPath p1();  // county -include-> city -near-> city
    static MetaPath p2();  // state -include-> county -near-> county
    static MetaPath p3();  // nation -include-> state -near-> state
    /// The path that guides encoding of nodes at `level`; none for the nation.
    static std::optional<MetaPath> guiding(Level level);
};

struct NeighborSet {
    std::vector<NodeId> nodes;  // ascending, never contains the query node
    Relation final_relation = Relation::Near;
};

/// (geo_id, date) -> perception score.
using PerceptionTable = std::map<std::pair<std::string, Date>, double>;

struct BuildOptions {
    std::size_t k = 2;
    DistanceMetric metric = DistanceMetric::EuclideanDegrees;
};

struct KnnPoint {
    std::string geo_id;
    LatLon gps;
};

/// Undirected k-nearest-neighbor edges among `points` (indices into the
/// input, first < second by geo_id). Ties are broken by ascending geo_id.
std::vector<std::pair<std::size_t, std::size_t>> knn_geospatial(const std::vector<KnnPoint>& points,
                                                                std::size_t k,
                                                                DistanceMetric metric);

/// The attributed heterogeneous information network. Immutable once built.
class Ahin {
public:
    /// Assembles a network from a validated demographic tree and an explicit
    /// list of near edges given as geo_id pairs.
    static Ahin assemble(const std::vector<ingest::DemographicRecord>& demographics,
                         const std::vector<ingest::DiseaseRecord>& disease,
                         const std::vector<ingest::MobilityRecord>& mobility,
                         const PerceptionTable& perceptions,
                         const std::vector<std::pair<std::string, std::string>>& near_edges,
                         BuildOptions options);

    std::size_t node_count() const noexcept { return nodes_.size(); }
    const GeoNode& node(NodeId id) const { return nodes_.at(id); }
    std::optional<NodeId> find(std::string_view geo_id) const;
    /// Throws NotFound.
    NodeId require(std::string_view geo_id) const;
    std::span<const NodeId> nodes_at(Level level) const;
    NodeId nation() const noexcept { return nation_; }

    const std::vector<Edge>& edges() const noexcept { return edges_; }
    std::size_t edge_count(Relation relation) const noexcept;
    std::span<const NodeId> near(NodeId id) const { return near_.at(id); }
    bool adjacent_near(NodeId a, NodeId b) const;

    const std::vector<Date>& dates() const noexcept { return dates_; }
    std::optional<Date> latest_date() const;
    bool has_date(Date date) const;

    FeatureVector feature_vector(NodeId id, Date date) const;
    FeatureVector feature_vector(std::string_view geo_id, Date date) const;

    NeighborSet meta_path_neighbors(NodeId id, const MetaPath& path) const;
    /// Neighbors used when encoding `id`: end nodes of the guiding-path
    /// instances parent(id) -include-> id -near-> u.
    NeighborSet guided_neighbors(NodeId id) const;

    const BuildOptions& options() const noexcept { return options_; }
    const std::vector<ingest::DemographicRecord>& demographics() const noexcept { return demographics_; }
    const std::vector<ingest::DiseaseRecord>& disease() const noexcept { return disease_; }
    const std::vector<ingest::MobilityRecord>& mobility() const noexcept { return mobility_; }
    const PerceptionTable& perceptions() const noexcept { return perceptions_; }

    /// Same network with a4 taken from `perceptions`.
    Ahin with_perceptions(const PerceptionTable& perceptions) const;
    /// Same network minus the listed near edges (unordered pairs).
    Ahin without_near_edges(const std::vector<std::pair<NodeId, NodeId>>& removed) const;

    std::vector<std::pair<std::string, std::string>> near_edge_ids() const;

private:
    Ahin() = default;
    void index_attributes();
    std::size_t date_slot(Date date) const;  // dates_.size() for an unknown date
    Features raw_features(NodeId id, std::size_t slot, FeatureVector* flags) const;

    BuildOptions options_;
    std::vector<ingest::DemographicRecord> demographics_;
    std::vector<ingest::DiseaseRecord> disease_;
    std::vector<ingest::MobilityRecord> mobility_;
    PerceptionTable perceptions_;

    std::vector<GeoNode> nodes_;
    std::unordered_map<std::string, NodeId> index_;
    std::array<std::vector<NodeId>, 4> by_level_;
    NodeId nation_ = 0;
    std::vector<Edge> edges_;
    std::vector<std::vector<NodeId>> near_;  // sorted adjacency

    std::vector<Date> dates_;
    struct Dated {
        std::vector<std::pair<std::size_t, std::array<double, 4>>> disease;
        std::vector<std::pair<std::size_t, double>> mobility;
        std::vector<std::pair<std::size_t, double>> perception;
    };
    std::vector<Dated> dated_;
    // [level][slot] -> per-dimension (min, max) of raw features
    std::array<std::vector<std::pair<Features, Features>>, 4> cohort_;
};

/// Validates the tree, computes near edges by k-NN per level and attaches
/// attributes. Throws InvalidArgument on an empty or invalid tree.
Ahin build_ahin(const std::vector<ingest::DemographicRecord>& demographics,
                const std::vector<ingest::DiseaseRecord>& disease,
                const std::vector<ingest::MobilityRecord>& mobility,
                const PerceptionTable& perceptions, BuildOptions options = {});

/// nodes.csv + edges.csv.
void write_graph(const Ahin& ahin, const std::filesystem::path& dir);
/// Near edges read back from edges.csv, plus the build options from graph.meta.
struct StoredGraph {
    std::vector<std::pair<std::string, std::string>> near_edges;
    BuildOptions options;
};
StoredGraph read_graph(const std::filesystem::path& dir);

}  // namespace asat::graph

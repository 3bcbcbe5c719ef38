#include "asat/graph.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

#include "asat/csv.hpp"

namespace asat::graph {

std::string_view to_string(Relation relation) noexcept {
    return relation == Relation::Include ? "include" : "near";
}

std::optional<Relation> parse_relation(std::string_view text) noexcept {
    if (text == "include") {
        return Relation::Include;
    }
    if (text == "near") {
        return Relation::Near;
    }
    return std::nullopt;
}

const std::vector<SchemaEdge>& network_schema() {
    static const std::vector<SchemaEdge> schema{
        {Level::Nation, Relation::Include, Level::State},
        {Level::State, Relation::Include, Level::County},
        {Level::County, Relation::Include, Level::City},
        {Level::State, Relation::Near, Level::State},
        {Level::County, Relation::Near, Level::County},
        {Level::City, Relation::Near, Level::City},
    };
    return schema;
}

bool schema_allows(Level from, Relation relation, Level to) noexcept {
    const auto& schema = network_schema();
    return std::any_of(schema.begin(), schema.end(), [&](const SchemaEdge& e) {
        return e.from == from && e.relation == relation && e.to == to;
    });
}

void MetaPath::validate() const {
    if (types.size() != relations.size() + 1 || relations.empty()) {
        throw InvalidArgument("meta-path '" + name + "' needs L relations and L+1 types");
    }
    for (std::size_t i = 0; i < relations.size(); ++i) {
        if (!schema_allows(types[i], relations[i], types[i + 1])) {
            throw InvalidArgument("meta-path '" + name + "' step " + std::to_string(i + 1) +
                                  " is not in the network schema");
        }
    }
}

MetaPath MetaPath::p1() {
    return {"P1", {Level::County, Level::City, Level::City}, {Relation::Include, Relation::Near}};
}

MetaPath MetaPath::p2() {
    return {"P2", {Level::State, Level::County, Level::County}, {Relation::Include, Relation::Near}};
}

MetaPath MetaPath::p3() {
    return {"P3", {Level::Nation, Level::State, Level::State}, {Relation::Include, Relation::Near}};
}

std::optional<MetaPath> MetaPath::guiding(Level level) {
    switch (level) {
        case Level::City: return p1();
        case Level::County: return p2();
        case Level::State: return p3();
        case Level::Nation: return std::nullopt;
    }
    return std::nullopt;
}

std::vector<std::pair<std::size_t, std::size_t>> knn_geospatial(const std::vector<KnnPoint>& points,
                                                                std::size_t k,
                                                                DistanceMetric metric) {
    const std::size_t n = points.size();
    std::set<std::pair<std::size_t, std::size_t>> edges;
    if (n < 2 || k == 0) {
        return {};
    }
    const std::size_t take = std::min(k, n - 1);
    std::vector<std::pair<double, std::size_t>> candidates;
    candidates.reserve(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        candidates.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) {
                candidates.emplace_back(distance(metric, points[i].gps, points[j].gps), j);
            }
        }
        std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                          candidates.end(), [&](const auto& a, const auto& b) {
                              if (a.first != b.first) {
                                  return a.first < b.first;
                              }
                              return points[a.second].geo_id < points[b.second].geo_id;
                          });
        for (std::size_t c = 0; c < take; ++c) {
            std::size_t a = i;
            std::size_t b = candidates[c].second;
            if (points[b].geo_id < points[a].geo_id) {
                std::swap(a, b);
            }
            edges.emplace(a, b);
        }
    }
    std::vector<std::pair<std::size_t, std::size_t>> out(edges.begin(), edges.end());
    std::sort(out.begin(), out.end(), [&](const auto& x, const auto& y) {
        return std::tie(points[x.first].geo_id, points[x.second].geo_id) <
               std::tie(points[y.first].geo_id, points[y.second].geo_id);
    });
    return out;
}

Ahin Ahin::assemble(const std::vector<ingest::DemographicRecord>& demographics,
                    const std::vector<ingest::DiseaseRecord>& disease,
                    const std::vector<ingest::MobilityRecord>& mobility,
                    const PerceptionTable& perceptions,
                    const std::vector<std::pair<std::string, std::string>>& near_edges,
                    BuildOptions options) {
    if (demographics.empty()) {
        throw InvalidArgument("cannot build a network from empty demographics");
    }
    Ahin g;
    g.options_ = options;
    g.demographics_ = demographics;
    g.disease_ = disease;
    g.mobility_ = mobility;
    g.perceptions_ = perceptions;

    std::vector<const ingest::DemographicRecord*> order;
    std::unordered_map<std::string, const ingest::DemographicRecord*> by_id;
    for (const auto& r : demographics) {
        if (!by_id.emplace(r.geo_id, &r).second) {
            throw InvalidArgument("duplicate geo_id '" + r.geo_id + "'");
        }
        order.push_back(&r);
    }
    std::sort(order.begin(), order.end(), [](const auto* a, const auto* b) {
        return std::tie(a->level, a->geo_id) < std::tie(b->level, b->geo_id);
    });
    g.nodes_.reserve(order.size());
    for (const auto* r : order) {
        const auto id = static_cast<NodeId>(g.nodes_.size());
        g.index_.emplace(r->geo_id, id);
        g.by_level_[static_cast<std::size_t>(r->level)].push_back(id);
        GeoNode node;
        node.geo_id = r->geo_id;
        node.level = r->level;
        node.name = r->name;
        node.gps = LatLon{r->lat, r->lon};
        node.population = r->population;
        node.pop_density = r->pop_density;
        node.pct_over_65 = r->pct_over_65;
        node.pct_female = r->pct_female;
        g.nodes_.push_back(std::move(node));
    }
    if (g.by_level_[0].size() != 1) {
        throw InvalidArgument("the network needs exactly one nation node");
    }
    g.nation_ = g.by_level_[0].front();

    for (const auto* r : order) {
        if (r->level == Level::Nation) {
            continue;
        }
        const auto it = g.index_.find(r->parent_geo_id);
        if (it == g.index_.end() || g.nodes_[it->second].level != *parent_level(r->level)) {
            throw InvalidArgument("'" + r->geo_id + "' has no valid " +
                                  std::string(to_string(*parent_level(r->level))) + " parent");
        }
        const NodeId child = g.index_.at(r->geo_id);
        g.nodes_[child].parent = it->second;
        g.nodes_[it->second].children.push_back(child);
        g.edges_.push_back(Edge{it->second, child, Relation::Include});
    }
    for (auto& node : g.nodes_) {
        std::sort(node.children.begin(), node.children.end());
    }
    std::sort(g.edges_.begin(), g.edges_.end(), [](const Edge& a, const Edge& b) {
        return std::tie(a.source, a.target) < std::tie(b.source, b.target);
    });

    std::set<std::pair<NodeId, NodeId>> near;
    for (const auto& [a_id, b_id] : near_edges) {
        const NodeId a = g.require(a_id);
        const NodeId b = g.require(b_id);
        if (a == b) {
            throw InvalidArgument("near edge from '" + a_id + "' to itself");
        }
        if (g.nodes_[a].level != g.nodes_[b].level) {
            throw InvalidArgument("near edge '" + a_id + "'-'" + b_id + "' crosses levels");
        }
        near.emplace(std::min(a, b), std::max(a, b));
    }
    g.near_.assign(g.nodes_.size(), {});
    for (const auto& [a, b] : near) {
        // NodeIds within a level follow geo_id order, so a < b means a has the smaller id.
        g.edges_.push_back(Edge{a, b, Relation::Near});
        g.near_[a].push_back(b);
        g.near_[b].push_back(a);
    }
    for (auto& adj : g.near_) {
        std::sort(adj.begin(), adj.end());
    }
    g.index_attributes();
    return g;
}

void Ahin::index_attributes() {
    std::set<Date> dates;
    for (const auto& r : disease_) {
        if (index_.contains(r.geo_id)) {
            dates.insert(r.date);
        }
    }
    for (const auto& r : mobility_) {
        if (index_.contains(r.geo_id)) {
            dates.insert(r.date);
        }
    }
    for (const auto& [key, value] : perceptions_) {
        if (index_.contains(key.first)) {
            dates.insert(key.second);
        }
    }
    dates_.assign(dates.begin(), dates.end());
    dated_.assign(nodes_.size(), Dated{});
    for (const auto& r : disease_) {
        if (auto it = index_.find(r.geo_id); it != index_.end()) {
            dated_[it->second].disease.emplace_back(
                date_slot(r.date),
                std::array<double, 4>{static_cast<double>(r.confirmed),
                                      static_cast<double>(r.new_cases),
                                      static_cast<double>(r.deaths), r.fatality_rate});
        }
    }
    for (const auto& r : mobility_) {
        if (auto it = index_.find(r.geo_id); it != index_.end()) {
            dated_[it->second].mobility.emplace_back(date_slot(r.date), static_cast<double>(r.level));
        }
    }
    for (const auto& [key, value] : perceptions_) {
        if (auto it = index_.find(key.first); it != index_.end()) {
            dated_[it->second].perception.emplace_back(date_slot(key.second), value);
        }
    }
    auto by_slot = [](const auto& a, const auto& b) { return a.first < b.first; };
    for (auto& d : dated_) {
        std::sort(d.disease.begin(), d.disease.end(), by_slot);
        std::sort(d.mobility.begin(), d.mobility.end(), by_slot);
        std::sort(d.perception.begin(), d.perception.end(), by_slot);
    }

    const std::size_t slots = dates_.size() + 1;
    for (Level level : kAllLevels) {
        auto& stats = cohort_[static_cast<std::size_t>(level)];
        stats.assign(slots, {});
        for (std::size_t slot = 0; slot < slots; ++slot) {
            Features lo;
            Features hi;
            lo.fill(0.0);
            hi.fill(0.0);
            bool first = true;
            for (NodeId id : by_level_[static_cast<std::size_t>(level)]) {
                const Features raw = raw_features(id, slot, nullptr);
                for (std::size_t d = 0; d < kFeatureDim; ++d) {
                    lo[d] = first ? raw[d] : std::min(lo[d], raw[d]);
                    hi[d] = first ? raw[d] : std::max(hi[d], raw[d]);
                }
                first = false;
            }
            stats[slot] = {lo, hi};
        }
    }
}

std::size_t Ahin::date_slot(Date date) const {
    const auto it = std::lower_bound(dates_.begin(), dates_.end(), date);
    if (it == dates_.end() || *it != date) {
        return dates_.size();
    }
    return static_cast<std::size_t>(it - dates_.begin());
}

Features Ahin::raw_features(NodeId id, std::size_t slot, FeatureVector* flags) const {
    Features raw{};
    const GeoNode& n = nodes_[id];
    raw[dim::kPopulation] = static_cast<double>(n.population);
    raw[dim::kPopDensity] = n.pop_density;
    raw[dim::kPctOver65] = n.pct_over_65;
    raw[dim::kPctFemale] = n.pct_female;
    const Dated& d = dated_[id];
    auto find = [slot](const auto& series) {
        return std::lower_bound(series.begin(), series.end(), slot,
                                [](const auto& entry, std::size_t s) { return entry.first < s; });
    };
    if (auto it = find(d.disease); it != d.disease.end() && it->first == slot) {
        std::copy(it->second.begin(), it->second.end(), raw.begin());
        if (flags) {
            flags->has_disease = true;
        }
    }
    if (auto it = find(d.mobility); it != d.mobility.end() && it->first == slot) {
        raw[dim::kMobility] = it->second;
        if (flags) {
            flags->has_mobility = true;
        }
    }
    if (auto it = find(d.perception); it != d.perception.end() && it->first == slot) {
        raw[dim::kPerception] = it->second;
        if (flags) {
            flags->has_perception = true;
        }
    }
    return raw;
}

std::optional<NodeId> Ahin::find(std::string_view geo_id) const {
    if (auto it = index_.find(std::string(geo_id)); it != index_.end()) {
        return it->second;
    }
    return std::nullopt;
}

NodeId Ahin::require(std::string_view geo_id) const {
    if (auto id = find(geo_id)) {
        return *id;
    }
    throw NotFound("unknown geo_id '" + std::string(geo_id) + "'");
}

std::span<const NodeId> Ahin::nodes_at(Level level) const {
    return by_level_[static_cast<std::size_t>(level)];
}

std::size_t Ahin::edge_count(Relation relation) const noexcept {
    return static_cast<std::size_t>(std::count_if(
        edges_.begin(), edges_.end(), [relation](const Edge& e) { return e.relation == relation; }));
}

bool Ahin::adjacent_near(NodeId a, NodeId b) const {
    const auto& adj = near_.at(a);
    return std::binary_search(adj.begin(), adj.end(), b);
}

std::optional<Date> Ahin::latest_date() const {
    if (dates_.empty()) {
        return std::nullopt;
    }
    return dates_.back();
}

bool Ahin::has_date(Date date) const { return date_slot(date) < dates_.size(); }

FeatureVector Ahin::feature_vector(NodeId id, Date date) const {
    if (id >= nodes_.size()) {
        throw NotFound("unknown node id " + std::to_string(id));
    }
    FeatureVector fv;
    fv.date = date;
    const std::size_t slot = date_slot(date);
    fv.known_date = slot < dates_.size();
    fv.raw = raw_features(id, slot, &fv);
    const auto& [lo, hi] = cohort_[static_cast<std::size_t>(nodes_[id].level)][slot];
    for (std::size_t d = 0; d < kFeatureDim; ++d) {
        const double range = hi[d] - lo[d];
        fv.normalized[d] = range > 0.0 ? std::clamp((fv.raw[d] - lo[d]) / range, 0.0, 1.0) : 0.0;
    }
    return fv;
}

FeatureVector Ahin::feature_vector(std::string_view geo_id, Date date) const {
    return feature_vector(require(geo_id), date);
}

NeighborSet Ahin::meta_path_neighbors(NodeId id, const MetaPath& path) const {
    path.validate();
    if (nodes_.at(id).level != path.types.front()) {
        throw InvalidArgument("meta-path " + path.name + " starts at " +
                              std::string(asat::to_string(path.types.front())) + ", node '" +
                              nodes_[id].geo_id + "' is a " +
                              std::string(asat::to_string(nodes_[id].level)));
    }
    std::vector<NodeId> frontier{id};
    for (std::size_t step = 0; step < path.length(); ++step) {
        std::vector<NodeId> next;
        for (NodeId x : frontier) {
            if (path.relations[step] == Relation::Include) {
                for (NodeId c : nodes_[x].children) {
                    next.push_back(c);
                }
            } else {
                const auto& adj = near_[x];
                next.insert(next.end(), adj.begin(), adj.end());
            }
        }
        std::sort(next.begin(), next.end());
        next.erase(std::unique(next.begin(), next.end()), next.end());
        frontier = std::move(next);
    }
    frontier.erase(std::remove(frontier.begin(), frontier.end(), id), frontier.end());
    return NeighborSet{std::move(frontier), path.relations.back()};
}

NeighborSet Ahin::guided_neighbors(NodeId id) const {
    const GeoNode& n = nodes_.at(id);
    const auto path = MetaPath::guiding(n.level);
    if (!path || !n.parent) {
        return NeighborSet{{}, Relation::Near};
    }
    // Instances parent -include-> id -...-> u: continue the walk from id.
    std::vector<NodeId> frontier{id};
    for (std::size_t step = 1; step < path->length(); ++step) {
        std::vector<NodeId> next;
        for (NodeId x : frontier) {
            if (path->relations[step] == Relation::Include) {
                next.insert(next.end(), nodes_[x].children.begin(), nodes_[x].children.end());
            } else {
                next.insert(next.end(), near_[x].begin(), near_[x].end());
            }
        }
        std::sort(next.begin(), next.end());
        next.erase(std::unique(next.begin(), next.end()), next.end());
        frontier = std::move(next);
    }
    frontier.erase(std::remove(frontier.begin(), frontier.end(), id), frontier.end());
    return NeighborSet{std::move(frontier), path->relations.back()};
}

Ahin Ahin::with_perceptions(const PerceptionTable& perceptions) const {
    Ahin copy = *this;
    copy.perceptions_ = perceptions;
    copy.index_attributes();
    return copy;
}

Ahin Ahin::without_near_edges(const std::vector<std::pair<NodeId, NodeId>>& removed) const {
    std::set<std::pair<NodeId, NodeId>> drop;
    for (auto [a, b] : removed) {
        drop.emplace(std::min(a, b), std::max(a, b));
    }
    std::vector<std::pair<std::string, std::string>> kept;
    for (const auto& e : edges_) {
        if (e.relation == Relation::Near && !drop.contains({e.source, e.target})) {
            kept.emplace_back(nodes_[e.source].geo_id, nodes_[e.target].geo_id);
        }
    }
    return assemble(demographics_, disease_, mobility_, perceptions_, kept, options_);
}

std::vector<std::pair<std::string, std::string>> Ahin::near_edge_ids() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& e : edges_) {
        if (e.relation == Relation::Near) {
            out.emplace_back(nodes_[e.source].geo_id, nodes_[e.target].geo_id);
        }
    }
    return out;
}

Ahin build_ahin(const std::vector<ingest::DemographicRecord>& demographics,
                const std::vector<ingest::DiseaseRecord>& disease,
                const std::vector<ingest::MobilityRecord>& mobility,
                const PerceptionTable& perceptions, BuildOptions options) {
    if (demographics.empty()) {
        throw InvalidArgument("cannot build a network from empty demographics");
    }
    std::vector<std::pair<std::string, std::string>> near;
    for (Level level : {Level::State, Level::County, Level::City}) {
        std::vector<KnnPoint> points;
        for (const auto& r : demographics) {
            if (r.level == level) {
                points.push_back(KnnPoint{r.geo_id, LatLon{r.lat, r.lon}});
            }
        }
        for (auto [a, b] : knn_geospatial(points, options.k, options.metric)) {
            near.emplace_back(points[a].geo_id, points[b].geo_id);
        }
    }
    return Ahin::assemble(demographics, disease, mobility, perceptions, near, options);
}

void write_graph(const Ahin& ahin, const std::filesystem::path& dir) {
    std::string nodes = "node_id,geo_id,level,name,parent_geo_id,lat,lon\n";
    for (NodeId id = 0; id < ahin.node_count(); ++id) {
        const auto& n = ahin.node(id);
        nodes += csv::join({std::to_string(id), n.geo_id, std::string(to_string(n.level)), n.name,
                            n.parent ? ahin.node(*n.parent).geo_id : std::string{},
                            format_double(n.gps.lat), format_double(n.gps.lon)});
        nodes.push_back('\n');
    }
    std::string edges = "source,target,relation\n";
    for (const auto& e : ahin.edges()) {
        edges += csv::join({ahin.node(e.source).geo_id, ahin.node(e.target).geo_id,
                            std::string(to_string(e.relation))});
        edges.push_back('\n');
    }
    const std::string meta =
        "k=" + std::to_string(ahin.options().k) + "\nmetric=" +
        (ahin.options().metric == DistanceMetric::Haversine ? "haversine" : "euclidean") + "\n";
    csv::write_file(dir / "nodes.csv", nodes);
    csv::write_file(dir / "edges.csv", edges);
    csv::write_file(dir / "graph.meta", meta);
}

StoredGraph read_graph(const std::filesystem::path& dir) {
    StoredGraph out;
    const auto rows = csv::parse(csv::read_file(dir / "edges.csv"));
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& f = rows[r].fields;
        if (f.size() != 3 || !parse_relation(f[2])) {
            throw ParseError("edges.csv line " + std::to_string(rows[r].line) + ": malformed edge");
        }
        if (*parse_relation(f[2]) == Relation::Near) {
            out.near_edges.emplace_back(f[0], f[1]);
        }
    }
    const auto meta = csv::read_file(dir / "graph.meta");
    std::size_t pos = 0;
    while (pos < meta.size()) {
        auto end = meta.find('\n', pos);
        if (end == std::string::npos) {
            end = meta.size();
        }
        const std::string line = meta.substr(pos, end - pos);
        pos = end + 1;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            continue;
        }
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key == "k") {
            out.options.k = static_cast<std::size_t>(std::stoul(value));
        } else if (key == "metric") {
            out.options.metric =
                value == "haversine" ? DistanceMetric::Haversine : DistanceMetric::EuclideanDegrees;
        }
    }
    return out;
}

}  // namespace asat::graph

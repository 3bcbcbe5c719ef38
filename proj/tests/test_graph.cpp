#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "asat/graph.hpp"
#include "support.hpp"

using namespace asat;
using namespace asat::graph;

namespace {

struct Fixture {
    std::vector<ingest::DemographicRecord> demo;
    std::vector<ingest::DiseaseRecord> disease;
    std::vector<ingest::MobilityRecord> mobility;
};

Fixture load_fixture() {
    const auto dir = testing::fixture_dir();
    Fixture f;
    f.demo = ingest::parse_demographics(testing::read_text(dir / "demographics.csv")).records;
    f.disease = ingest::parse_disease(testing::read_text(dir / "disease.csv")).records;
    f.mobility = ingest::parse_mobility(testing::read_text(dir / "mobility.csv")).records;
    return f;
}

Ahin fixture_ahin(BuildOptions options = {}) {
    const auto f = load_fixture();
    return build_ahin(f.demo, f.disease, f.mobility, {}, options);
}

std::set<NodeId> as_set(const std::vector<NodeId>& v) {
    return {v.begin(), v.end()};
}

const Date kDay = Date::from_ymd(2020, 3, 22);

}  // namespace

TEST_SUITE("features") {
    TEST_CASE("Cuyahoga disease attributes on March 22") {
        const auto fv = fixture_ahin().feature_vector("39035", kDay);
        CHECK(fv.has_disease);
        CHECK(fv.a1()[0] == 125);
        CHECK(fv.a1()[1] == 33);
        CHECK(fv.a1()[2] == 1);
        CHECK(fv.a1()[3] == 0.008);
    }

    TEST_CASE("Cleveland demographics") {
        const auto fv = fixture_ahin().feature_vector("3916000", kDay);
        CHECK(fv.a2()[0] == 383793);
        CHECK(fv.a2()[1] == 5107);
        CHECK(fv.a2()[2] == 0.135);
        CHECK(fv.a2()[3] == 0.518);
    }

    TEST_CASE("mobility and perception slots") {
        const auto f = load_fixture();
        const PerceptionTable p{{{"3916000", kDay}, 0.7}};
        const auto ahin = build_ahin(f.demo, f.disease, f.mobility, p, {});
        const auto fv = ahin.feature_vector("3916000", Date::from_ymd(2020, 3, 24));
        CHECK(fv.has_mobility);
        CHECK(fv.a3() == 3);
        CHECK_FALSE(fv.has_perception);
        const auto with_p = ahin.feature_vector("3916000", kDay);
        CHECK(with_p.has_perception);
        CHECK(with_p.a4() == 0.7);
    }

    TEST_CASE("a date outside the range is flagged") {
        const auto ahin = fixture_ahin();
        const auto fv = ahin.feature_vector("39035", Date::from_ymd(2021, 1, 1));
        CHECK_FALSE(fv.known_date);
        CHECK_FALSE(fv.has_disease);
        CHECK(fv.a2()[0] > 0);
        CHECK_FALSE(ahin.has_date(Date::from_ymd(2021, 1, 1)));
        CHECK(ahin.latest_date() == Date::from_ymd(2020, 3, 24));
    }

    TEST_CASE("unknown geo_id") {
        CHECK_THROWS_AS(fixture_ahin().feature_vector("nowhere", kDay), NotFound);
    }

    TEST_CASE("normalization is min-max within the level on that date") {
        const auto ahin = fixture_ahin();
        for (Date date : ahin.dates()) {
            for (Level level : kAllLevels) {
                const auto ids = ahin.nodes_at(level);
                std::vector<Features> raws;
                for (NodeId id : ids) {
                    raws.push_back(ahin.feature_vector(id, date).raw);
                }
                for (std::size_t d = 0; d < kFeatureDim; ++d) {
                    double lo = raws[0][d], hi = raws[0][d];
                    for (const auto& r : raws) {
                        lo = std::min(lo, r[d]);
                        hi = std::max(hi, r[d]);
                    }
                    for (std::size_t i = 0; i < ids.size(); ++i) {
                        const double want = hi > lo ? (raws[i][d] - lo) / (hi - lo) : 0.0;
                        CHECK(ahin.feature_vector(ids[i], date).normalized[d] == doctest::Approx(want).epsilon(1e-12));
                    }
                }
            }
        }
    }
}

TEST_SUITE("structure") {
    TEST_CASE("fixture counts") {
        const auto ahin = fixture_ahin();
        CHECK(ahin.nodes_at(Level::Nation).size() == 1);
        CHECK(ahin.nodes_at(Level::State).size() == 3);
        CHECK(ahin.nodes_at(Level::County).size() == 10);
        CHECK(ahin.nodes_at(Level::City).size() == 22);
        CHECK(ahin.node_count() == 36);
        CHECK(ahin.edge_count(Relation::Include) == 35);
    }

    TEST_CASE("include edges follow the parent links and the schema") {
        const auto ahin = fixture_ahin();
        for (const auto& e : ahin.edges()) {
            const auto& s = ahin.node(e.source);
            const auto& t = ahin.node(e.target);
            CHECK(schema_allows(s.level, e.relation, t.level));
            if (e.relation == Relation::Include) {
                CHECK(t.parent == e.source);
            } else {
                CHECK(s.level == t.level);
                CHECK(s.geo_id < t.geo_id);
            }
        }
    }

    TEST_CASE("a lone state has no near edges") {
        const auto demo = testing::synthetic_gazetteer(1, 1, 1, 3);
        const auto ahin = build_ahin(demo, {}, {}, {}, {});
        CHECK(ahin.node_count() == 4);
        CHECK(ahin.edge_count(Relation::Near) == 0);
        CHECK(ahin.guided_neighbors(ahin.require("S0")).nodes.empty());
    }

    TEST_CASE("an empty tree is rejected") {
        CHECK_THROWS_AS(build_ahin({}, {}, {}, {}, {}), InvalidArgument);
    }

    TEST_CASE("k-NN matches brute force on random gazetteers") {
        Rng rng(8);
        for (std::uint64_t seed = 1; seed <= 25; ++seed) {
            const std::size_t s = 1 + rng.below(4), c = 1 + rng.below(4), k_cities = 1 + rng.below(6);
            const auto demo = testing::synthetic_gazetteer(s, c, k_cities, seed);
            for (std::size_t k : {1, 2, 4}) {
                for (auto metric : {DistanceMetric::EuclideanDegrees, DistanceMetric::Haversine}) {
                    const auto ahin = build_ahin(demo, {}, {}, {}, {k, metric});
                    CHECK(ahin.node_count() == 1 + s + s * c + s * c * k_cities);
                    CHECK(ahin.edge_count(Relation::Include) == ahin.node_count() - 1);
                    for (Level level : {Level::State, Level::County, Level::City}) {
                        std::vector<KnnPoint> points;
                        for (NodeId id : ahin.nodes_at(level)) {
                            points.push_back({ahin.node(id).geo_id, ahin.node(id).gps});
                        }
                        CHECK(testing::near_pairs(ahin, level) == testing::brute_force_knn(points, k, metric));
                    }
                }
            }
        }
    }

    TEST_CASE("ties go to the smaller geo_id") {
        // b and c are both one unit from a; c has a closer partner of its own.
        const std::vector<KnnPoint> points{{"a", {0, 0}}, {"c", {0, 1}}, {"b", {1, 0}}, {"d", {0, 1.5}}};
        const auto edges = knn_geospatial(points, 1, DistanceMetric::EuclideanDegrees);
        std::set<std::pair<std::string, std::string>> got;
        for (auto [i, j] : edges) {
            got.emplace(points[i].geo_id, points[j].geo_id);
        }
        CHECK(got == std::set<std::pair<std::string, std::string>>{{"a", "b"}, {"c", "d"}});
    }

    TEST_CASE("near adjacency is symmetric and sorted") {
        const auto ahin = fixture_ahin({3, DistanceMetric::Haversine});
        for (NodeId v = 0; v < ahin.node_count(); ++v) {
            const auto adj = ahin.near(v);
            CHECK(std::is_sorted(adj.begin(), adj.end()));
            for (NodeId u : adj) {
                CHECK(ahin.adjacent_near(u, v));
                const auto back = ahin.near(u);
                CHECK(std::find(back.begin(), back.end(), v) != back.end());
            }
        }
    }
}

TEST_SUITE("meta-paths") {
    TEST_CASE("the three guiding paths are valid") {
        for (const auto& p : {MetaPath::p1(), MetaPath::p2(), MetaPath::p3()}) {
            CHECK_NOTHROW(p.validate());
            CHECK(p.length() == 2);
            CHECK(p.relations[0] == Relation::Include);
            CHECK(p.relations[1] == Relation::Near);
        }
        CHECK(MetaPath::p1().types == std::vector<Level>{Level::County, Level::City, Level::City});
        CHECK_FALSE(MetaPath::guiding(Level::Nation).has_value());
        CHECK(MetaPath::guiding(Level::City)->name == MetaPath::p1().name);
    }

    TEST_CASE("a path that leaves the schema is rejected") {
        MetaPath bad{"bad", {Level::City, Level::County}, {Relation::Include}};
        CHECK_THROWS_AS(bad.validate(), InvalidArgument);
        MetaPath skip{"skip", {Level::State, Level::City}, {Relation::Include}};
        CHECK_THROWS_AS(skip.validate(), InvalidArgument);
    }

    TEST_CASE("walking P1 from a county reaches the near peers of its cities") {
        const auto ahin = fixture_ahin();
        for (NodeId county : ahin.nodes_at(Level::County)) {
            std::set<NodeId> want;
            for (NodeId c : ahin.node(county).children) {
                for (NodeId u : ahin.near(c)) {
                    want.insert(u);
                }
            }
            want.erase(county);
            CHECK(as_set(ahin.meta_path_neighbors(county, MetaPath::p1()).nodes) == want);
        }
        CHECK_THROWS_AS(ahin.meta_path_neighbors(ahin.nodes_at(Level::City)[0], MetaPath::p1()), InvalidArgument);
    }

    TEST_CASE("guided neighbors are the near peers") {
        const auto ahin = fixture_ahin();
        for (NodeId v = 0; v < ahin.node_count(); ++v) {
            const auto got = ahin.guided_neighbors(v);
            const auto adj = ahin.near(v);
            CHECK(got.nodes == std::vector<NodeId>(adj.begin(), adj.end()));
            CHECK(got.final_relation == Relation::Near);
        }
        CHECK(ahin.guided_neighbors(ahin.nation()).nodes.empty());
    }
}

TEST_SUITE("derived networks") {
    TEST_CASE("with_perceptions only changes a4") {
        const auto ahin = fixture_ahin();
        const PerceptionTable p{{{"39035", kDay}, 0.25}};
        const auto other = ahin.with_perceptions(p);
        const auto a = ahin.feature_vector("39035", kDay).raw;
        const auto b = other.feature_vector("39035", kDay).raw;
        for (std::size_t d = 0; d < kFeatureDim; ++d) {
            CHECK(b[d] == (d == dim::kPerception ? 0.25 : a[d]));
        }
        CHECK(other.edges() == ahin.edges());
    }

    TEST_CASE("without_near_edges removes exactly the listed pairs") {
        const auto ahin = fixture_ahin();
        std::vector<std::pair<NodeId, NodeId>> removed;
        for (const auto& e : ahin.edges()) {
            if (e.relation == Relation::Near && removed.size() < 3) {
                removed.emplace_back(e.target, e.source);  // either orientation
            }
        }
        const auto cut = ahin.without_near_edges(removed);
        CHECK(cut.edge_count(Relation::Near) == ahin.edge_count(Relation::Near) - 3);
        CHECK(cut.edge_count(Relation::Include) == ahin.edge_count(Relation::Include));
        for (auto [a, b] : removed) {
            CHECK_FALSE(cut.adjacent_near(a, b));
        }
    }

    TEST_CASE("graph files round-trip") {
        const auto f = load_fixture();
        const auto ahin = build_ahin(f.demo, f.disease, f.mobility, {}, {3, DistanceMetric::Haversine});
        testing::TempDir dir;
        write_graph(ahin, dir.path());
        const auto stored = read_graph(dir.path());
        CHECK(stored.options.k == 3);
        CHECK(stored.options.metric == DistanceMetric::Haversine);
        const auto again = Ahin::assemble(f.demo, f.disease, f.mobility, {}, stored.near_edges, stored.options);
        CHECK(again.edges() == ahin.edges());
        CHECK(again.near_edge_ids() == ahin.near_edge_ids());
    }

    TEST_CASE("assemble refuses edges that break the schema") {
        const auto f = load_fixture();
        CHECK_THROWS_AS(Ahin::assemble(f.demo, {}, {}, {}, {{"39035", "3916000"}}, {}), InvalidArgument);
        CHECK_THROWS_AS(Ahin::assemble(f.demo, {}, {}, {}, {{"39035", "nowhere"}}, {}), Error);
    }
}

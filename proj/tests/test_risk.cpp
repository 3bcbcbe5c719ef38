#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "asat/risk.hpp"
#include "support.hpp"

using namespace asat;
using namespace asat::risk;

namespace {

const Date kDay = Date::from_ymd(2020, 3, 22);
const Date kLast = Date::from_ymd(2020, 3, 24);
const LatLon kCircle{41.5045, -81.6080};

graph::Ahin fixture_ahin() {
    const auto dir = testing::fixture_dir();
    graph::PerceptionTable p;
    p[{"3916000", kDay}] = 0.8;
    p[{"44106-area", kDay}] = 0.3;
    return graph::build_ahin(ingest::parse_demographics(testing::read_text(dir / "demographics.csv")).records,
                             ingest::parse_disease(testing::read_text(dir / "disease.csv")).records,
                             ingest::parse_mobility(testing::read_text(dir / "mobility.csv")).records, p);
}

std::vector<Poi> fixture_pois() {
    return parse_pois(testing::read_text(testing::fixture_dir() / "pois.csv")).records;
}

gae::RelationMatrices relations() {
    Rng rng(31);
    return gae::RelationMatrices::random(kFeatureDim, 0.5, rng);
}

Assessor fixture_assessor(RiskProfile profile = RiskProfile::uniform()) {
    return Assessor(fixture_ahin(), relations(), profile, fixture_pois());
}

// Encoder pass computed outside the assessor.
gae::EncoderState reference_state(const graph::Ahin& ahin, Date date) {
    return gae::encode(gae::encoder_input(ahin, date), relations());
}

double expected_index(const Vector& encoded, const RiskProfile& profile) {
    double sum = 0.0;
    for (std::size_t i = 0; i < kFeatureDim; ++i) {
        double v = encoded(static_cast<Eigen::Index>(i));
        if (i == dim::kPerception && profile.invert_awareness) {
            v = 1.0 - v;
        }
        sum += profile.gamma[i] * v;
    }
    return sum;
}

}  // namespace

TEST_SUITE("index") {
    TEST_CASE("weighted sum of the oriented representation") {
        const std::vector<double> a{0.2, 0.4, 0.6}, g{1.0, 0.5, 0.0};
        CHECK(risk_index(a, g) == doctest::Approx(0.4));
        CHECK_THROWS_AS(risk_index(a, std::vector<double>{1.0}), InvalidArgument);
        CHECK_THROWS_AS(risk_index(a, std::vector<double>{1.0, -0.1, 0.0}), InvalidArgument);
    }

    TEST_CASE("awareness is inverted, nothing else") {
        Vector e = Vector::LinSpaced(kFeatureDim, 0.0, 0.9);
        RiskProfile p = RiskProfile::uniform();
        const Vector o = orient(e, p);
        for (Eigen::Index i = 0; i < e.size(); ++i) {
            CHECK(o(i) == doctest::Approx(i == dim::kPerception ? 1.0 - e(i) : e(i)));
        }
        p.invert_awareness = false;
        CHECK(orient(e, p) == e);
    }

    TEST_CASE("linear in gamma and increasing in every weighted dimension") {
        Rng rng(2);
        for (int trial = 0; trial < 300; ++trial) {
            Vector e(kFeatureDim);
            RiskProfile p;
            for (std::size_t i = 0; i < kFeatureDim; ++i) {
                e(static_cast<Eigen::Index>(i)) = rng.uniform();
                p.gamma[i] = rng.uniform();
            }
            const double base = risk_index(orient(e, p), p);
            RiskProfile scaled = p;
            for (double& g : scaled.gamma) {
                g *= 3.0;
            }
            CHECK(risk_index(orient(e, scaled), scaled) == doctest::Approx(3.0 * base));
            const auto d = static_cast<Eigen::Index>(rng.below(kFeatureDim));
            Vector up = e;
            up(d) += 0.1;
            const double moved = risk_index(orient(up, p), p);
            if (d == static_cast<Eigen::Index>(dim::kPerception)) {
                CHECK(moved < base);
            } else {
                CHECK(moved > base);
            }
        }
    }
}

TEST_SUITE("profiles") {
    TEST_CASE("uniform weights") {
        const auto p = RiskProfile::uniform();
        for (double g : p.gamma) {
            CHECK(g == doctest::Approx(0.1));
        }
        CHECK(p.invert_awareness);
    }

    TEST_CASE("parsing") {
        const auto p = RiskProfile::parse("dimension,weight\nconfirmed,0.5\npop_density,2\ninvert_awareness,false\n");
        CHECK(p.gamma[dim::kConfirmed] == 0.5);
        CHECK(p.gamma[dim::kPopDensity] == 2.0);
        CHECK(p.gamma[dim::kMobility] == 0.0);
        CHECK_FALSE(p.invert_awareness);
        CHECK_THROWS_AS(RiskProfile::parse("dim,w\n"), ParseError);
        CHECK_THROWS_AS(RiskProfile::parse("dimension,weight\nunknown,1\n"), ParseError);
        CHECK_THROWS_AS(RiskProfile::parse("dimension,weight\nconfirmed,1\nconfirmed,2\n"), ParseError);
        CHECK_THROWS_AS(RiskProfile::parse("dimension,weight\nconfirmed,abc\n"), ParseError);
        CHECK_THROWS_AS(RiskProfile::parse("dimension,weight\nconfirmed,-1\n"), InvalidArgument);
    }

    TEST_CASE("every dimension name is accepted") {
        for (std::size_t i = 0; i < kFeatureDim; ++i) {
            const auto p = RiskProfile::parse("dimension,weight\n" + std::string(feature_names()[i]) + ",1\n");
            CHECK(p.gamma[i] == 1.0);
        }
    }
}

TEST_SUITE("pois") {
    TEST_CASE("fixture file") {
        const auto r = parse_pois(testing::read_text(testing::fixture_dir() / "pois.csv"));
        CHECK(r.records.size() == 9);
        CHECK(r.rejections.empty());
        CHECK(parse_pois(write_pois(r.records)).records == r.records);
    }

    TEST_CASE("bad rows are rejected") {
        const auto r = parse_pois(std::string(kPoiHeader) +
                                  "\nA,shop,1,2,3\nB,shop,95,2,3\nC,shop,1,2,6\nD,shop,1,2,2.5\n,shop,1,2,1\nE,shop,1,2\n");
        CHECK(r.records.size() == 1);
        CHECK(r.rejections.size() == 5);
        CHECK_THROWS_AS(parse_pois("a,b\n"), ParseError);
    }
}

TEST_SUITE("assessor") {
    TEST_CASE("the chain runs from state to city and matches an outside encoding") {
        const auto assessor = fixture_assessor();
        const auto state = reference_state(assessor.ahin(), kDay);
        const auto a = assessor.assess("3916000", kDay);
        REQUIRE(a.chain.size() == 3);
        CHECK(a.chain[0].geo_id == "39");
        CHECK(a.chain[1].geo_id == "39035");
        CHECK(a.chain[2].geo_id == "3916000");
        CHECK_FALSE(a.stale);
        for (const auto& area : a.chain) {
            const auto id = assessor.ahin().require(area.geo_id);
            const Vector e = state.output.col(id);
            CHECK(area.index == doctest::Approx(expected_index(e, assessor.profile())).epsilon(1e-12));
            const double total = std::accumulate(area.contributions.begin(), area.contributions.end(), 0.0);
            CHECK(total == doctest::Approx(area.index));
        }
        CHECK(a.chain[2].density == 1389.0);
        CHECK(a.chain[2].perception == 0.8);
        CHECK(a.chain[1].raw[dim::kConfirmed] == 125);
    }

    TEST_CASE("every index lies in [0, sum of weights]") {
        Rng rng(5);
        RiskProfile p;
        for (double& g : p.gamma) {
            g = rng.uniform();
        }
        const double cap = std::accumulate(p.gamma.begin(), p.gamma.end(), 0.0);
        const auto assessor = fixture_assessor(p);
        for (Date d : assessor.ahin().dates()) {
            for (graph::NodeId id = 0; id < assessor.ahin().node_count(); ++id) {
                const auto a = assessor.assess(assessor.ahin().node(id).geo_id, d);
                for (const auto& area : a.chain) {
                    CHECK(area.index >= -1e-12);
                    CHECK(area.index <= cap + 1e-12);
                }
            }
        }
    }

    TEST_CASE("a location resolves to the nearest city and snaps to a POI") {
        const auto assessor = fixture_assessor();
        const auto& ahin = assessor.ahin();
        graph::NodeId nearest = 0;
        double best = 1e300;
        for (auto id : ahin.nodes_at(Level::City)) {
            const double km = haversine_km(kCircle, ahin.node(id).gps);
            if (km < best) {
                best = km;
                nearest = id;
            }
        }
        CHECK(ahin.node(nearest).geo_id == "44106-area");
        const auto a = assessor.assess(kCircle, kLast);
        CHECK(a.chain.back().geo_id == "44106-area");
        REQUIRE(a.location.has_value());
        CHECK(a.location->level == "location");
        const auto pois = fixture_pois();
        const auto snap = *std::min_element(pois.begin(), pois.end(), [](const Poi& x, const Poi& y) {
            return haversine_km(kCircle, x.gps) < haversine_km(kCircle, y.gps);
        });
        REQUIRE(haversine_km(kCircle, snap.gps) <= 1.0);
        CHECK(a.nearest_poi == std::optional<std::string>(snap.name));
        CHECK(a.location->mobility == snap.mobility);

        // The POI mobility replaces the city's own before averaging with the neighbors.
        const auto state = reference_state(ahin, kLast);
        double lo = 1e300, hi = -1e300;
        for (auto id : ahin.nodes_at(Level::City)) {
            const double m = ahin.feature_vector(id, kLast).raw[dim::kMobility];
            lo = std::min(lo, m);
            hi = std::max(hi, m);
        }
        Vector e = state.output.col(nearest);
        e(dim::kMobility) = ((snap.mobility - lo) / (hi - lo) + state.aggregate(dim::kMobility, nearest)) / 2.0;
        CHECK(a.location->index == doctest::Approx(expected_index(e, assessor.profile())).epsilon(1e-12));
    }

    TEST_CASE("locate agrees with a brute-force nearest-city scan") {
        const auto demo = testing::synthetic_gazetteer(3, 4, 6, 77);
        Rng rng(78);
        const Assessor assessor(graph::build_ahin(demo, {}, {}, {}, {}), relations(), RiskProfile::uniform(), {}, {},
                                CoverageOptions{2.0, 1e9, 1.0});
        const auto& ahin = assessor.ahin();
        for (int trial = 0; trial < 2000; ++trial) {
            const auto anchor = ahin.node(ahin.nodes_at(Level::City)[rng.below(ahin.nodes_at(Level::City).size())]).gps;
            const LatLon q{anchor.lat + 3.0 * (rng.uniform() - 0.5), anchor.lon + 3.0 * (rng.uniform() - 0.5)};
            graph::NodeId best = 0;
            double best_km = 1e300;
            for (auto id : ahin.nodes_at(Level::City)) {
                const double km = haversine_km(q, ahin.node(id).gps);
                if (km < best_km) {
                    best_km = km;
                    best = id;
                }
            }
            try {
                CHECK(assessor.locate(q) == best);
            } catch (const OutOfCoverage&) {
                // Outside the bounding box of the cities plus the margin.
            }
        }
    }

    TEST_CASE("no POI nearby keeps the city's own representation") {
        const auto assessor = fixture_assessor();
        const auto a = assessor.assess(LatLon{41.4048, -81.7229}, kLast);  // Parma centre
        CHECK_FALSE(a.nearest_poi.has_value());
        REQUIRE(a.location.has_value());
        CHECK(a.location->index == doctest::Approx(a.chain.back().index));
    }

    TEST_CASE("errors") {
        const auto assessor = fixture_assessor();
        CHECK_THROWS_AS(assessor.assess(LatLon{91.0, 0.0}), InvalidArgument);
        CHECK_THROWS_AS(assessor.assess(LatLon{0.0, -181.0}), InvalidArgument);
        CHECK_THROWS_AS(assessor.assess(LatLon{-33.9, 151.2}), OutOfCoverage);
        CHECK_THROWS_AS(assessor.assess("nowhere"), NotFound);
        CHECK_THROWS_AS(assessor.compare_dates("39035", {}), InvalidArgument);
        RiskProfile bad = RiskProfile::uniform();
        bad.gamma[0] = -1.0;
        CHECK_THROWS_AS(Assessor(fixture_ahin(), relations(), bad), InvalidArgument);
        CHECK_THROWS_AS(Assessor(fixture_ahin(), gae::RelationMatrices::identity(3), RiskProfile::uniform()),
                        InvalidArgument);
    }

    TEST_CASE("dates default to the latest and unknown dates are stale") {
        const auto assessor = fixture_assessor();
        CHECK(assessor.assess("39035").date == kLast);
        const auto old = assessor.assess("39035", Date::from_ymd(2019, 1, 1));
        CHECK(old.stale);
        const auto series =
            assessor.compare_dates("39035", {Date::from_ymd(2020, 3, 8), kDay, Date::from_ymd(2020, 4, 1)});
        REQUIRE(series.size() == 3);
        CHECK(series[1].index == assessor.assess("39035", kDay).chain.back().index);
        CHECK_FALSE(series[0].stale);
        CHECK(series[2].stale);
    }

    TEST_CASE("nearby POIs by tag and radius") {
        const auto assessor = fixture_assessor();
        const auto found = assessor.nearby_pois(kCircle, "Grocery", 5.0, kLast);
        std::vector<std::pair<double, std::string>> oracle;
        for (const auto& p : fixture_pois()) {
            const double km = haversine_km(kCircle, p.gps);
            if (p.tag == "grocery" && km < 5.0) {
                oracle.emplace_back(km, p.name);
            }
        }
        std::sort(oracle.begin(), oracle.end());
        REQUIRE(found.size() == 3);
        REQUIRE(oracle.size() == 3);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(found[i].poi.name == oracle[i].second);
            CHECK(found[i].distance_km == doctest::Approx(oracle[i].first));
            CHECK(found[i].index >= 0.0);
        }
        CHECK(assessor.nearby_pois(kCircle, "grocery", 0.0).empty());
        CHECK(assessor.nearby_pois(kCircle, "bakery", 50.0).empty());
    }

    TEST_CASE("zero weights give a zero index, a single weight isolates one dimension") {
        RiskProfile zero;
        CHECK(fixture_assessor(zero).assess("39035").chain.back().index == 0.0);
        RiskProfile only = RiskProfile{};
        only.gamma[dim::kConfirmed] = 1.0;
        const auto assessor = fixture_assessor(only);
        const auto area = assessor.assess("39035", kDay).chain.back();
        CHECK(area.index == doctest::Approx(area.encoded[dim::kConfirmed]));
    }
}

#include <doctest.h>

#include <thread>

#include "asat/pipeline.hpp"
#include "asat/service.hpp"
#include "support.hpp"

// After Eigen: a system header pulled in by httplib defines macros that
// clash with Eigen's internals.
#include <httplib.h>

using namespace asat;
using namespace asat::service;
using testing::TempDir;

namespace {

struct Workspace {
    TempDir dir;
    std::shared_ptr<const Engine> engine;

    Workspace() {
        const auto f = testing::fixture_dir();
        pipeline::run_ingest({f / "disease.csv", f / "demographics.csv", f / "mobility.csv", f / "posts.jsonl",
                              f / "pois.csv", dir / "snap"});
        pipeline::run_build_graph({dir / "snap", std::nullopt, {}});
        pipeline::TrainOptions t;
        t.snapshot = dir / "snap";
        t.models = dir / "models";
        t.perception.epochs = 20;
        t.cgan.steps = 100;
        t.gae.epochs = 30;
        pipeline::run_train(t);
        engine = Engine::open({dir / "snap", dir / "models", std::nullopt, std::nullopt});
    }
};

std::shared_ptr<const Engine> shared_engine() {
    static const Workspace w;
    return w.engine;
}

const Engine& engine() {
    return *shared_engine();
}

Json body(const Response& r) {
    return Json::parse(r.body);
}

}  // namespace

TEST_SUITE("handlers") {
    TEST_CASE("risk by coordinates") {
        const auto r = get_risk(engine(), {{"lat", "41.5045"}, {"lon", "-81.6080"}, {"date", "2020-03-24"}});
        REQUIRE(r.status == 200);
        const auto j = body(r);
        CHECK(j["date"] == "2020-03-24");
        CHECK(j["stale"] == false);
        REQUIRE(j["chain"].size() == 3);
        CHECK(j["chain"][0]["level"] == "state");
        CHECK(j["chain"][1]["level"] == "county");
        CHECK(j["chain"][2]["level"] == "city");
        CHECK(j["chain"][2]["geo_id"] == "44106-area");
        CHECK(j["location"]["level"] == "location");
        CHECK(j.contains("nearest_poi"));
        CHECK(j["query"]["lat"] == 41.5045);
        for (const auto& a : j["chain"]) {
            CHECK(a["index"].get<double>() >= 0.0);
            CHECK(a["index"].get<double>() <= 1.0);
            double total = 0.0;
            for (const auto& [name, f] : a["features"].items()) {
                total += f["contribution"].get<double>();
            }
            CHECK(total == doctest::Approx(a["index"].get<double>()));
        }
    }

    TEST_CASE("risk by geo_id matches the assessor") {
        const auto r = get_risk(engine(), {{"geo_id", "39035"}, {"date", "2020-03-22"}});
        REQUIRE(r.status == 200);
        const auto j = body(r);
        CHECK(j["chain"].size() == 2);
        CHECK(j["chain"][1]["index"].get<double>() ==
              engine().assessor().assess("39035", Date::from_ymd(2020, 3, 22)).chain.back().index);
        CHECK(j["chain"][1]["features"]["confirmed"]["raw"] == 125);
        CHECK_FALSE(j.contains("location"));
    }

    TEST_CASE("error statuses") {
        auto code = [](const Response& r) { return body(r)["code"].get<std::string>(); };
        const auto missing = get_risk(engine(), {{"lat", "41.5"}});
        CHECK(missing.status == 400);
        CHECK(code(missing) == "invalid_argument");
        CHECK(get_risk(engine(), {{"lat", "abc"}, {"lon", "1"}}).status == 400);
        CHECK(get_risk(engine(), {{"lat", "95"}, {"lon", "1"}}).status == 400);
        const auto far = get_risk(engine(), {{"lat", "-33.9"}, {"lon", "151.2"}});
        CHECK(far.status == 404);
        CHECK(code(far) == "out_of_coverage");
        CHECK(get_risk(engine(), {{"geo_id", "nowhere"}}).status == 404);
        CHECK(get_risk(engine(), {{"geo_id", "39035"}, {"date", "03/22/2020"}}).status == 400);
        const auto stale = get_risk(engine(), {{"geo_id", "39035"}, {"date", "2020-05-01"}});
        CHECK(stale.status == 422);
        CHECK(code(stale) == "unknown_date");
        const auto allowed = get_risk(engine(), {{"geo_id", "39035"}, {"date", "2020-05-01"}, {"allow_stale", "true"}});
        CHECK(allowed.status == 200);
        CHECK(body(allowed)["stale"] == true);
    }

    TEST_CASE("time series") {
        const auto r = get_timeseries(engine(), "39035", {{"from", "2020-03-20"}, {"to", "2020-03-24"}});
        REQUIRE(r.status == 200);
        const auto j = body(r);
        REQUIRE(j["points"].size() == 5);
        CHECK(j["points"][0]["date"] == "2020-03-20");
        for (const auto& p : j["points"]) {
            const auto d = *Date::parse(p["date"].get<std::string>());
            CHECK(p["index"].get<double>() == engine().assessor().assess("39035", d).chain.back().index);
        }
        CHECK(body(get_timeseries(engine(), "39035", {}))["points"].size() == 17);
        CHECK(get_timeseries(engine(), "39035", {{"from", "2020-03-24"}, {"to", "2020-03-20"}}).status == 400);
        CHECK(get_timeseries(engine(), "nowhere", {}).status == 404);
    }

    TEST_CASE("points of interest") {
        const auto r = get_pois(engine(), {{"lat", "41.5045"}, {"lon", "-81.6080"}, {"tag", "grocery"}});
        REQUIRE(r.status == 200);
        const auto list = body(r)["pois"];
        CHECK(list.size() == 3);
        for (std::size_t i = 1; i < list.size(); ++i) {
            CHECK(list[i - 1]["distance_km"].get<double>() <= list[i]["distance_km"].get<double>());
        }
        CHECK(body(get_pois(engine(), {{"lat", "41.5045"}, {"lon", "-81.6080"}, {"tag", "grocery"},
                                       {"radius_km", "0.5"}}))["pois"]
                  .size() == 1);
        CHECK(get_pois(engine(), {{"lat", "41.5"}, {"lon", "-81.6"}, {"radius_km", "-1"}}).status == 400);
    }

    TEST_CASE("posts for an area") {
        const auto r = get_posts(engine(), "42", {{"date", "2020-03-24"}});
        REQUIRE(r.status == 200);
        const auto j = body(r);
        CHECK(j["window_days"] == kPostWindowDays);
        const auto hits = engine().posts().posts_for("42", Date::from_ymd(2020, 3, 24), kPostWindowDays);
        CHECK(j["posts"].size() == hits.size());
        CHECK(get_posts(engine(), "nowhere", {}).status == 404);
    }

    TEST_CASE("error mapping") {
        CHECK(error_response(InvalidArgument("x")).status == 400);
        CHECK(error_response(ParseError("x")).status == 400);
        CHECK(error_response(NotFound("x")).status == 404);
        CHECK(error_response(OutOfCoverage("x")).status == 404);
        CHECK(error_response(UnknownDate("x")).status == 422);
        CHECK(error_response(std::runtime_error("x")).status == 500);
        CHECK(body(error_response(NotFound("gone")))["message"] == "gone");
    }
}

TEST_SUITE("server") {
    TEST_CASE("serves the API over HTTP") {
        Server server(shared_engine(), 4);
        const int port = server.start("127.0.0.1", 0);
        CHECK(port > 0);
        httplib::Client client("127.0.0.1", port);
        const auto risk = client.Get("/v1/risk?geo_id=3916000&date=2020-03-24");
        REQUIRE(risk);
        CHECK(risk->status == 200);
        CHECK(risk->get_header_value("Access-Control-Allow-Origin") == "*");
        CHECK(risk->body == get_risk(engine(), {{"geo_id", "3916000"}, {"date", "2020-03-24"}}).body);
        const auto series = client.Get("/v1/areas/39035/timeseries?from=2020-03-22");
        REQUIRE(series);
        CHECK(Json::parse(series->body)["points"].size() == 3);
        const auto posts = client.Get("/v1/areas/42/posts");
        REQUIRE(posts);
        CHECK(posts->status == 200);
        const auto pois = client.Get("/v1/pois?lat=41.5045&lon=-81.608&tag=grocery");
        REQUIRE(pois);
        CHECK(pois->status == 200);
        const auto nothing = client.Get("/v2/else");
        REQUIRE(nothing);
        CHECK(nothing->status == 404);
        CHECK(Json::parse(nothing->body)["code"] == "not_found");
        server.stop();
        server.wait();
    }

    TEST_CASE("stop from another thread releases every waiter") {
        Server server(shared_engine(), 2);
        server.start("127.0.0.1", 0);
        std::thread a([&] { server.wait(); });
        std::thread b([&] { server.wait(); });
        server.stop();
        a.join();
        b.join();
        CHECK(true);
    }

    TEST_CASE("reload swaps the engine") {
        Server server(shared_engine(), 2);
        const auto first = server.engine();
        server.reload(shared_engine());
        CHECK(server.engine() == first);
        CHECK_THROWS_AS(
            [&] {
                Server other(shared_engine(), 1);
                other.start("256.0.0.1", 1);
            }(),
            Error);
    }
}

#include "asat/asat.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <string>

#include "asat/engine.hpp"
#include "asat/pipeline.hpp"
#include "asat/service.hpp"

struct asat_engine {
    std::shared_ptr<const asat::Engine> engine;
};

struct asat_server {
    explicit asat_server(std::shared_ptr<const asat::Engine> engine) : server(std::move(engine)) {}
    asat::service::Server server;
};

namespace {

thread_local std::string g_last_error;

asat_status status_for(const std::exception& e) {
    using namespace asat;
    if (dynamic_cast<const MissingArtifact*>(&e)) return ASAT_MISSING_ARTIFACT;
    if (dynamic_cast<const UnknownDate*>(&e)) return ASAT_UNKNOWN_DATE;
    if (dynamic_cast<const OutOfCoverage*>(&e)) return ASAT_OUT_OF_COVERAGE;
    if (dynamic_cast<const NotFound*>(&e)) return ASAT_NOT_FOUND;
    if (dynamic_cast<const ParseError*>(&e)) return ASAT_PARSE_ERROR;
    if (dynamic_cast<const InvalidArgument*>(&e)) return ASAT_INVALID_ARGUMENT;
    if (dynamic_cast<const TrainingError*>(&e)) return ASAT_TRAINING_ERROR;
    if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return ASAT_IO_ERROR;
    if (dynamic_cast<const nlohmann::json::exception*>(&e)) return ASAT_INVALID_ARGUMENT;
    return ASAT_INTERNAL_ERROR;
}

template <class Fn>
asat_status guarded(Fn&& fn) {
    try {
        g_last_error.clear();
        fn();
        return ASAT_OK;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return status_for(e);
    } catch (...) {
        g_last_error = "unknown failure";
        return ASAT_INTERNAL_ERROR;
    }
}

char* duplicate(const std::string& text) {
    char* out = static_cast<char*>(std::malloc(text.size() + 1));
    if (!out) {
        throw std::bad_alloc();
    }
    std::memcpy(out, text.c_str(), text.size() + 1);
    return out;
}

void emit(char** out, const asat::Json& json) {
    if (out) {
        *out = duplicate(json.dump());
    }
}

void require(const void* p, const char* what) {
    if (!p) {
        throw asat::InvalidArgument(std::string(what) + " must not be NULL");
    }
}

std::optional<asat::Date> optional_date(const char* text) {
    if (!text || !*text) {
        return std::nullopt;
    }
    const auto d = asat::Date::parse(text);
    if (!d) {
        throw asat::InvalidArgument(std::string("'") + text + "' is not a YYYY-MM-DD date");
    }
    return d;
}

asat::Json parse_options(const char* text) {
    require(text, "options");
    auto j = asat::Json::parse(text);
    if (!j.is_object()) {
        throw asat::InvalidArgument("options must be a JSON object");
    }
    return j;
}

std::filesystem::path required_path(const asat::Json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_string()) {
        throw asat::InvalidArgument(std::string("option '") + key + "' is required");
    }
    return j[key].get<std::string>();
}

std::optional<std::filesystem::path> optional_path(const asat::Json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) {
        return std::nullopt;
    }
    return std::filesystem::path(j[key].get<std::string>());
}

}  // namespace

extern "C" {

const char* asat_version(void) {
    return "1.0.0";
}

const char* asat_status_name(asat_status status) {
    switch (status) {
        case ASAT_OK: return "ok";
        case ASAT_INVALID_ARGUMENT: return "invalid_argument";
        case ASAT_NOT_FOUND: return "not_found";
        case ASAT_MISSING_ARTIFACT: return "missing_artifact";
        case ASAT_PARSE_ERROR: return "parse_error";
        case ASAT_OUT_OF_COVERAGE: return "out_of_coverage";
        case ASAT_UNKNOWN_DATE: return "unknown_date";
        case ASAT_TRAINING_ERROR: return "training_error";
        case ASAT_IO_ERROR: return "io_error";
        case ASAT_INTERNAL_ERROR: return "internal_error";
    }
    return "unknown";
}

const char* asat_last_error(void) {
    return g_last_error.c_str();
}

void asat_string_free(char* text) {
    std::free(text);
}

asat_status asat_ingest(const char* options_json, char** report_json) {
    return guarded([&] {
        const auto j = parse_options(options_json);
        asat::pipeline::IngestOptions o;
        o.disease = required_path(j, "disease");
        o.demographics = required_path(j, "demographics");
        o.mobility = required_path(j, "mobility");
        o.posts = required_path(j, "posts");
        o.pois = optional_path(j, "pois");
        o.out = required_path(j, "out");
        emit(report_json, asat::pipeline::run_ingest(o).to_json());
    });
}

asat_status asat_build_graph(const char* options_json, char** report_json) {
    return guarded([&] {
        const auto j = parse_options(options_json);
        asat::pipeline::GraphOptions o;
        o.snapshot = required_path(j, "snapshot");
        o.out = optional_path(j, "out");
        o.build.k = j.value("k", std::size_t{2});
        const std::string metric = j.value("metric", std::string("euclidean"));
        if (metric == "haversine") {
            o.build.metric = asat::DistanceMetric::Haversine;
        } else if (metric != "euclidean") {
            throw asat::InvalidArgument("metric must be 'euclidean' or 'haversine'");
        }
        if (o.build.k == 0) {
            throw asat::InvalidArgument("k must be at least 1");
        }
        emit(report_json, asat::pipeline::run_build_graph(o).to_json());
    });
}

asat_status asat_train(const char* options_json, char** report_json) {
    return guarded([&] {
        const auto j = parse_options(options_json);
        asat::pipeline::TrainOptions o;
        const auto component = asat::pipeline::parse_component(j.value("component", std::string("all")));
        if (!component) {
            throw asat::InvalidArgument("component must be perception, cgan, gae or all");
        }
        o.component = *component;
        if (j.contains("seed") && !j["seed"].is_null()) {
            o.seed = j["seed"].get<std::uint64_t>();
        }
        o.snapshot = required_path(j, "snapshot");
        o.models = required_path(j, "models");
        o.graph = optional_path(j, "graph");
        o.perception.epochs = j.value("perception_epochs", o.perception.epochs);
        o.cgan.steps = j.value("cgan_steps", o.cgan.steps);
        o.gae.epochs = j.value("gae_epochs", o.gae.epochs);
        o.area.threshold = j.value("threshold", o.area.threshold);
        o.area.synth_count = j.value("synth_count", o.area.synth_count);
        emit(report_json, asat::pipeline::run_train(o).to_json());
    });
}

asat_status asat_export_datasets(const char* options_json, char** report_json) {
    return guarded([&] {
        const auto j = parse_options(options_json);
        asat::pipeline::ExportOptions o;
        o.snapshot = required_path(j, "snapshot");
        o.graph = optional_path(j, "graph");
        o.out = required_path(j, "out");
        emit(report_json, asat::pipeline::run_export(o).to_json());
    });
}

asat_status asat_engine_open(const char* snapshot, const char* models, const char* graph,
                             const char* gamma, asat_engine** out) {
    return guarded([&] {
        require(snapshot, "snapshot");
        require(models, "models");
        require(out, "out");
        asat::EnginePaths paths;
        paths.snapshot = snapshot;
        paths.models = models;
        if (graph) paths.graph = std::filesystem::path(graph);
        if (gamma) paths.gamma = std::filesystem::path(gamma);
        *out = new asat_engine{asat::Engine::open(paths)};
    });
}

void asat_engine_close(asat_engine* engine) {
    delete engine;
}

asat_status asat_engine_assess_location(const asat_engine* engine, double lat, double lon,
                                        const char* date, char** json) {
    return guarded([&] {
        require(engine, "engine");
        emit(json, asat::to_json(engine->engine->assessor().assess(asat::LatLon{lat, lon},
                                                                   optional_date(date))));
    });
}

asat_status asat_engine_assess_area(const asat_engine* engine, const char* geo_id, const char* date,
                                    char** json) {
    return guarded([&] {
        require(engine, "engine");
        require(geo_id, "geo_id");
        emit(json, asat::to_json(engine->engine->assessor().assess(geo_id, optional_date(date))));
    });
}

asat_status asat_engine_timeseries(const asat_engine* engine, const char* geo_id, const char* from,
                                   const char* to, char** json) {
    return guarded([&] {
        require(engine, "engine");
        require(geo_id, "geo_id");
        const auto& assessor = engine->engine->assessor();
        assessor.ahin().require(geo_id);
        const auto dates = asat::series_dates(assessor.ahin(), optional_date(from), optional_date(to));
        emit(json, asat::to_json(geo_id, assessor.compare_dates(geo_id, dates)));
    });
}

asat_status asat_engine_pois(const asat_engine* engine, double lat, double lon, const char* tag,
                             double radius_km, const char* date, char** json) {
    return guarded([&] {
        require(engine, "engine");
        emit(json, asat::to_json(engine->engine->assessor().nearby_pois(
                       asat::LatLon{lat, lon}, tag ? tag : "", radius_km, optional_date(date))));
    });
}

asat_status asat_engine_posts(const asat_engine* engine, const char* geo_id, const char* date,
                              char** json) {
    return guarded([&] {
        require(engine, "engine");
        require(geo_id, "geo_id");
        emit(json, asat::to_json(engine->engine->area_posts(geo_id, optional_date(date))));
    });
}

asat_status asat_server_start(const asat_engine* engine, const char* host, int port, asat_server** out) {
    return guarded([&] {
        require(engine, "engine");
        require(out, "out");
        if (port < 0 || port > 65535) {
            throw asat::InvalidArgument("port must be in [0, 65535]");
        }
        auto server = std::make_unique<asat_server>(engine->engine);
        server->server.start(host ? host : "127.0.0.1", port);
        *out = server.release();
    });
}

int asat_server_port(const asat_server* server) {
    return server ? server->server.port() : -1;
}

asat_status asat_server_reload(asat_server* server, const asat_engine* engine) {
    return guarded([&] {
        require(server, "server");
        require(engine, "engine");
        server->server.reload(engine->engine);
    });
}

void asat_server_wait(asat_server* server) {
    if (server) {
        server->server.wait();
    }
}

void asat_server_stop(asat_server* server) {
    if (server) {
        server->server.stop();
        server->server.wait();
    }
}

void asat_server_free(asat_server* server) {
    delete server;
}

}  // extern "C"

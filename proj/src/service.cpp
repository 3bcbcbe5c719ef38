#include "asat/service.hpp"

#include <cmath>

#include <httplib.h>

namespace asat::service {

namespace {

Response json_response(const Json& body) {
    return Response{200, body.dump()};
}

Response error(int status, std::string_view code, std::string_view message) {
    return Response{status, Json{{"code", code}, {"message", message}}.dump()};
}

std::optional<std::string> param(const Params& params, const std::string& key) {
    if (auto it = params.find(key); it != params.end()) {
        return it->second;
    }
    return std::nullopt;
}

double number_param(const Params& params, const std::string& key) {
    const auto text = param(params, key);
    if (!text) {
        throw InvalidArgument("missing query parameter '" + key + "'");
    }
    try {
        std::size_t used = 0;
        const double v = std::stod(*text, &used);
        if (used == text->size() && std::isfinite(v)) {
            return v;
        }
    } catch (const std::exception&) {
    }
    throw InvalidArgument("query parameter '" + key + "' is not a number");
}

std::optional<Date> date_param(const Params& params, const std::string& key) {
    const auto text = param(params, key);
    if (!text) {
        return std::nullopt;
    }
    const auto d = Date::parse(*text);
    if (!d) {
        throw InvalidArgument("query parameter '" + key + "' is not a YYYY-MM-DD date");
    }
    return d;
}

bool flag_param(const Params& params, const std::string& key) {
    const auto text = param(params, key);
    return text && (*text == "1" || *text == "true");
}

void require_known_date(const Engine& engine, std::optional<Date> date, const Params& params) {
    if (date && !engine.assessor().ahin().has_date(*date) && !flag_param(params, "allow_stale")) {
        throw UnknownDate("no data ingested for " + date->str() + " (pass allow_stale=true to accept "
                          "zero-padded disease features)");
    }
}

template <class Fn>
Response guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const std::exception& e) {
        return error_response(e);
    }
}

}  // namespace

Response error_response(const std::exception& e) {
    if (dynamic_cast<const UnknownDate*>(&e)) return error(422, "unknown_date", e.what());
    if (dynamic_cast<const OutOfCoverage*>(&e)) return error(404, "out_of_coverage", e.what());
    if (dynamic_cast<const NotFound*>(&e)) return error(404, "not_found", e.what());
    if (dynamic_cast<const InvalidArgument*>(&e)) return error(400, "invalid_argument", e.what());
    if (dynamic_cast<const ParseError*>(&e)) return error(400, "invalid_argument", e.what());
    return error(500, "internal", e.what());
}

Response get_risk(const Engine& engine, const Params& params) {
    return guarded([&] {
        const auto date = date_param(params, "date");
        if (const auto geo_id = param(params, "geo_id"); geo_id && !params.contains("lat")) {
            require_known_date(engine, date, params);
            return json_response(to_json(engine.assessor().assess(*geo_id, date)));
        }
        const LatLon where{number_param(params, "lat"), number_param(params, "lon")};
        require_known_date(engine, date, params);
        return json_response(to_json(engine.assessor().assess(where, date)));
    });
}

Response get_timeseries(const Engine& engine, std::string_view geo_id, const Params& params) {
    return guarded([&] {
        const auto& ahin = engine.assessor().ahin();
        ahin.require(geo_id);
        const auto dates = series_dates(ahin, date_param(params, "from"), date_param(params, "to"));
        return json_response(to_json(geo_id, engine.assessor().compare_dates(geo_id, dates)));
    });
}

Response get_pois(const Engine& engine, const Params& params) {
    return guarded([&] {
        const LatLon where{number_param(params, "lat"), number_param(params, "lon")};
        const double radius = params.contains("radius_km") ? number_param(params, "radius_km") : 5.0;
        if (radius < 0.0) {
            throw InvalidArgument("radius_km must not be negative");
        }
        const auto date = date_param(params, "date");
        const std::string tag = param(params, "tag").value_or("");
        return json_response(to_json(engine.assessor().nearby_pois(where, tag, radius, date)));
    });
}

Response get_posts(const Engine& engine, std::string_view geo_id, const Params& params) {
    return guarded([&] { return json_response(to_json(engine.area_posts(geo_id, date_param(params, "date")))); });
}

Server::Server(std::shared_ptr<const Engine> engine, std::size_t threads)
    : engine_(std::move(engine)), http_(std::make_unique<httplib::Server>()) {
    http_->new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
    // Small JSON replies otherwise wait out the peer's delayed ACK.
    http_->set_tcp_nodelay(true);
    auto reply = [](httplib::Response& res, const Response& r) {
        res.status = r.status;
        res.set_content(r.body, "application/json; charset=utf-8");
    };
    auto params_of = [](const httplib::Request& req) {
        return Params(req.params.begin(), req.params.end());
    };
    http_->Get("/v1/risk", [this, reply, params_of](const httplib::Request& req, httplib::Response& res) {
        reply(res, get_risk(*this->engine(), params_of(req)));
    });
    http_->Get(R"(/v1/areas/([^/]+)/timeseries)",
               [this, reply, params_of](const httplib::Request& req, httplib::Response& res) {
                   reply(res, get_timeseries(*this->engine(), req.matches[1].str(), params_of(req)));
               });
    http_->Get(R"(/v1/areas/([^/]+)/posts)",
               [this, reply, params_of](const httplib::Request& req, httplib::Response& res) {
                   reply(res, get_posts(*this->engine(), req.matches[1].str(), params_of(req)));
               });
    http_->Get("/v1/pois", [this, reply, params_of](const httplib::Request& req, httplib::Response& res) {
        reply(res, get_pois(*this->engine(), params_of(req)));
    });
    http_->set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.status == 404 && res.body.empty()) {
            res.set_content(Json{{"code", "not_found"}, {"message", "no such endpoint"}}.dump(),
                            "application/json; charset=utf-8");
        }
    });
    // Lets a browser UI on another origin call the API.
    http_->set_default_headers({{"Access-Control-Allow-Origin", "*"}});
}

Server::~Server() {
    stop();
    wait();
}

int Server::start(const std::string& host, int port) {
    port_ = port == 0 ? http_->bind_to_any_port(host) : (http_->bind_to_port(host, port) ? port : -1);
    if (port_ <= 0) {
        throw Error("cannot bind " + host + ":" + std::to_string(port));
    }
    thread_ = std::thread([this] { http_->listen_after_bind(); });
    http_->wait_until_ready();
    return port_;
}

void Server::wait() {
    // Several threads may wait; only one joins, the rest block on the lock.
    std::lock_guard lock(join_mutex_);
    if (thread_.joinable()) {
        thread_.join();
    }
}

void Server::stop() {
    if (http_) {
        http_->stop();
    }
}

void Server::reload(std::shared_ptr<const Engine> engine) {
    std::lock_guard lock(mutex_);
    engine_ = std::move(engine);
}

std::shared_ptr<const Engine> Server::engine() const {
    std::lock_guard lock(mutex_);
    return engine_;
}

}  // namespace asat::service

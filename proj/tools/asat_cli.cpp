// Command-line front end over the C API.

#include <csignal>
#include <cstdio>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "asat/asat.h"

namespace {

using Json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// A failed call: missing inputs are a usage problem, the rest runtime errors.
int report_failure(asat_status status) {
    std::cerr << "asat: " << asat_status_name(status) << ": " << asat_last_error() << "\n";
    return status == ASAT_MISSING_ARTIFACT || status == ASAT_INVALID_ARGUMENT ? kExitUsage : kExitRuntime;
}

// `text` is read only after the call has filled it in.
std::optional<Json> take(asat_status status, char* const& text, int& exit_code) {
    if (status != ASAT_OK) {
        exit_code = report_failure(status);
        return std::nullopt;
    }
    Json j = Json::parse(text);
    asat_string_free(text);
    exit_code = kExitOk;
    return j;
}

std::string fixed(double v, int digits = 3) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(digits) << v;
    return out.str();
}

void print_assessment(const Json& a) {
    std::cout << "Risk assessment for " << a["date"].get<std::string>();
    if (a["stale"].get<bool>()) {
        std::cout << " (stale: no data for this date, disease features zero-padded)";
    }
    std::cout << "\n";
    std::cout << std::left << std::setw(10) << "level" << std::setw(20) << "geo_id" << std::setw(26)
              << "name" << std::right << std::setw(8) << "index" << std::setw(12) << "perception"
              << std::setw(12) << "density" << std::setw(10) << "mobility" << "\n";
    auto row = [](const Json& r) {
        std::cout << std::left << std::setw(10) << r["level"].get<std::string>() << std::setw(20)
                  << r["geo_id"].get<std::string>() << std::setw(26) << r["name"].get<std::string>()
                  << std::right << std::setw(8) << fixed(r["index"].get<double>()) << std::setw(12)
                  << fixed(r["perception"].get<double>()) << std::setw(12)
                  << fixed(r["density"].get<double>(), 1) << std::setw(10)
                  << fixed(r["mobility"].get<double>(), 0) << "\n";
    };
    for (const auto& r : a["chain"]) {
        row(r);
    }
    if (a.contains("location")) {
        row(a["location"]);
    }
    std::cout << a.dump() << "\n";
}

struct EngineOptions {
    std::string snapshot;
    std::string models;
    std::string graph;
    std::string gamma;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--snapshot", snapshot, "Snapshot directory written by ingest")
            ->required()
            ->envname("ASAT_SNAPSHOT");
        cmd->add_option("--models", models, "Model directory written by train")
            ->required()
            ->envname("ASAT_MODELS");
        cmd->add_option("--graph", graph, "Graph directory (default <snapshot>/graph)")->envname("ASAT_GRAPH");
        cmd->add_option("--gamma", gamma, "Risk profile CSV (dimension,weight)")->envname("ASAT_GAMMA");
    }

    asat_status open(asat_engine** engine) const {
        return asat_engine_open(snapshot.c_str(), models.c_str(), graph.empty() ? nullptr : graph.c_str(),
                                gamma.empty() ? nullptr : gamma.c_str(), engine);
    }
};

int run_serve(const EngineOptions& paths, const std::string& bind) {
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos) {
        std::cerr << "asat: --bind must be HOST:PORT\n";
        return kExitUsage;
    }
    const std::string host = bind.substr(0, colon);
    int port = 0;
    try {
        port = std::stoi(bind.substr(colon + 1));
    } catch (const std::exception&) {
        std::cerr << "asat: bad port in --bind '" << bind << "'\n";
        return kExitUsage;
    }
    // Block termination signals here; a watcher thread turns them into a stop.
    // Background jobs may inherit SIGINT as ignored, which would drop it.
    std::signal(SIGINT, SIG_DFL);
    std::signal(SIGTERM, SIG_DFL);
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    asat_engine* engine = nullptr;
    if (auto s = paths.open(&engine); s != ASAT_OK) {
        return report_failure(s);
    }
    asat_server* server = nullptr;
    const auto started = asat_server_start(engine, host.c_str(), port, &server);
    asat_engine_close(engine);
    if (started != ASAT_OK) {
        return report_failure(started);
    }
    std::cout << "listening on http://" << host << ":" << asat_server_port(server) << std::endl;
    std::thread watcher([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        asat_server_stop(server);
    });
    asat_server_wait(server);
    watcher.detach();
    asat_server_free(server);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical community-level pandemic risk assessment"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(asat_version()));
    int exit_code = kExitOk;

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Parse and validate raw inputs into a snapshot");
    std::string disease, demo, mobility, posts, pois, ingest_out;
    ingest->add_option("--disease", disease, "disease.csv")->required();
    ingest->add_option("--demo", demo, "demographics.csv")->required();
    ingest->add_option("--mobility", mobility, "mobility.csv")->required();
    ingest->add_option("--posts", posts, "posts.jsonl")->required();
    ingest->add_option("--pois", pois, "POI CSV (name,tag,lat,lon,mobility)");
    ingest->add_option("--out", ingest_out, "Snapshot directory")->required()->envname("ASAT_SNAPSHOT");
    ingest->callback([&] {
        Json o{{"disease", disease}, {"demographics", demo}, {"mobility", mobility}, {"posts", posts},
               {"out", ingest_out}};
        if (!pois.empty()) {
            o["pois"] = pois;
        }
        char* text = nullptr;
        if (auto r = take(asat_ingest(o.dump().c_str(), &text), text, exit_code)) {
            for (const auto& [name, c] : (*r)["sources"].items()) {
                std::cout << std::left << std::setw(14) << name << c["records"] << " records, "
                          << c["rejections"] << " rejected (" << c["rows"] << " rows)\n";
            }
            std::cout << "posts located: " << (*r)["located_posts"] << " (" << (*r)["ambiguous_posts"]
                      << " ambiguous)\n";
        }
    });

    // build-graph
    auto* build = app.add_subcommand("build-graph", "Build the area network from a snapshot");
    std::string build_snapshot, build_out;
    std::size_t k = 2;
    bool haversine = false;
    build->add_option("--snapshot", build_snapshot, "Snapshot directory")->required()->envname("ASAT_SNAPSHOT");
    build->add_option("--k", k, "Near neighbors per node")->check(CLI::PositiveNumber);
    build->add_option("--out", build_out, "Graph directory (default <snapshot>/graph)");
    build->add_flag("--haversine", haversine, "Use great-circle distance instead of degrees");
    build->callback([&] {
        Json o{{"snapshot", build_snapshot}, {"k", k}, {"metric", haversine ? "haversine" : "euclidean"}};
        if (!build_out.empty()) {
            o["out"] = build_out;
        }
        char* text = nullptr;
        if (auto r = take(asat_build_graph(o.dump().c_str(), &text), text, exit_code)) {
            const auto& n = (*r)["nodes"];
            std::cout << n["total"] << " nodes (" << n["nation"] << " nation, " << n["state"] << " states, "
                      << n["county"] << " counties, " << n["city"] << " cities), "
                      << (*r)["include_edges"] << " R1 edges, " << (*r)["near_edges"] << " R2 edges\n";
        }
    });

    // train
    auto* train = app.add_subcommand("train", "Train perception, cGAN and auto-encoder models");
    std::string component = "all", train_snapshot, train_models, train_graph;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> cgan_steps, gae_epochs, perception_epochs, threshold, synth_count;
    train->add_option("--component", component, "perception|cgan|gae|all")
        ->check(CLI::IsMember({"perception", "cgan", "gae", "all"}));
    train->add_option("--seed", seed, "Seed (default: manifest, then 7)")->envname("ASAT_SEED");
    train->add_option("--snapshot", train_snapshot, "Snapshot directory")->required()->envname("ASAT_SNAPSHOT");
    train->add_option("--models", train_models, "Model output directory")->required()->envname("ASAT_MODELS");
    train->add_option("--graph", train_graph, "Graph directory (default <snapshot>/graph)")->envname("ASAT_GRAPH");
    train->add_option("--cgan-steps", cgan_steps, "cGAN updates");
    train->add_option("--gae-epochs", gae_epochs, "Auto-encoder epochs");
    train->add_option("--perception-epochs", perception_epochs, "Perception network epochs");
    train->add_option("--threshold", threshold, "Real posts needed before skipping synthesis");
    train->add_option("--synth-count", synth_count, "Synthetic posts per area");
    train->callback([&] {
        Json o{{"component", component}, {"snapshot", train_snapshot}, {"models", train_models}};
        if (seed) o["seed"] = *seed;
        if (!train_graph.empty()) o["graph"] = train_graph;
        if (cgan_steps) o["cgan_steps"] = *cgan_steps;
        if (gae_epochs) o["gae_epochs"] = *gae_epochs;
        if (perception_epochs) o["perception_epochs"] = *perception_epochs;
        if (threshold) o["threshold"] = *threshold;
        if (synth_count) o["synth_count"] = *synth_count;
        char* text = nullptr;
        if (auto r = take(asat_train(o.dump().c_str(), &text), text, exit_code)) {
            std::cout << r->dump(2) << "\n";
        }
    });

    // assess
    auto* assess = app.add_subcommand("assess", "Hierarchical risk for a location or area");
    EngineOptions assess_paths;
    assess_paths.add_to(assess);
    std::optional<double> lat, lon;
    std::string geo_id, date;
    auto* lat_opt = assess->add_option("--lat", lat, "Latitude");
    auto* lon_opt = assess->add_option("--lon", lon, "Longitude");
    auto* geo_opt = assess->add_option("--geo-id", geo_id, "Area identifier");
    lat_opt->needs(lon_opt);
    lon_opt->needs(lat_opt);
    geo_opt->excludes(lat_opt)->excludes(lon_opt);
    assess->add_option("--date", date, "YYYY-MM-DD (default: latest ingested)");
    assess->callback([&] {
        if (!lat && geo_id.empty()) {
            throw CLI::ValidationError("assess", "give --lat/--lon or --geo-id");
        }
        asat_engine* engine = nullptr;
        if (auto s = assess_paths.open(&engine); s != ASAT_OK) {
            exit_code = report_failure(s);
            return;
        }
        char* text = nullptr;
        const char* d = date.empty() ? nullptr : date.c_str();
        const auto status = lat ? asat_engine_assess_location(engine, *lat, *lon, d, &text)
                                : asat_engine_assess_area(engine, geo_id.c_str(), d, &text);
        asat_engine_close(engine);
        if (auto r = take(status, text, exit_code)) {
            print_assessment(*r);
        }
    });

    // serve
    auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
    EngineOptions serve_paths;
    serve_paths.add_to(serve);
    std::string bind = "127.0.0.1:8080";
    serve->add_option("--bind", bind, "HOST:PORT")->envname("ASAT_BIND");
    serve->callback([&] { exit_code = run_serve(serve_paths, bind); });

    // export-datasets
    auto* exporter = app.add_subcommand("export-datasets", "Write the public dataset files");
    std::string export_snapshot, export_graph, export_out;
    exporter->add_option("--snapshot", export_snapshot, "Snapshot directory")->required()->envname("ASAT_SNAPSHOT");
    exporter->add_option("--graph", export_graph, "Graph directory (default <snapshot>/graph)")->envname("ASAT_GRAPH");
    exporter->add_option("--out", export_out, "Output directory")->required();
    exporter->callback([&] {
        Json o{{"snapshot", export_snapshot}, {"out", export_out}};
        if (!export_graph.empty()) {
            o["graph"] = export_graph;
        }
        char* text = nullptr;
        if (auto r = take(asat_export_datasets(o.dump().c_str(), &text), text, exit_code)) {
            for (const auto& f : (*r)["files"]) {
                std::cout << "wrote " << f.get<std::string>() << "\n";
            }
            const auto& n = (*r)["nodes"];
            std::cout << "AHIN: " << n["total"] << " nodes (" << n["nation"] << " nation, " << n["state"]
                      << " states, " << n["county"] << " counties, " << n["city"] << " cities) and "
                      << (*r)["edges"] << " edges (" << (*r)["include_edges"] << " R1, "
                      << (*r)["near_edges"] << " R2)\n";
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e);
        }
        app.exit(e);
        std::cerr << app.help();
        return kExitUsage;
    }
    return exit_code;
}

#include "asat/pipeline.hpp"

#include <algorithm>
#include <set>

#include "asat/csv.hpp"

namespace asat::pipeline {

namespace {

std::string read_optional(const fs::path& path) {
    return fs::exists(path) ? csv::read_file(path) : std::string{};
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string::npos) {
            end = text.size();
        }
        out.push_back(text.substr(pos, end - pos));
        pos = end + 1;
    }
    return out;
}

std::string post_locations_csv(const std::vector<perception::PostLocation>& locations) {
    std::string out = "post_id,geo_id,ambiguous\n";
    for (const auto& l : locations) {
        out += csv::join({l.post_id, l.geo_id, l.ambiguous ? "1" : "0"});
        out.push_back('\n');
    }
    return out;
}

std::map<std::string, std::size_t> level_counts(const graph::Ahin& ahin) {
    std::map<std::string, std::size_t> out;
    for (Level level : kAllLevels) {
        out[std::string(to_string(level))] = ahin.nodes_at(level).size();
    }
    out["total"] = ahin.node_count();
    return out;
}

fs::path graph_dir_for(const fs::path& snapshot, const std::optional<fs::path>& graph) {
    return graph ? *graph : snapshot / "graph";
}

Json curve_json(const std::vector<double>& curve) {
    return Json(curve);
}

}  // namespace

// ----------------------------------------------------------------- manifest

Manifest Manifest::load(const fs::path& path) {
    Manifest m;
    for (const auto& raw : split_lines(read_optional(path))) {
        const std::string line = trim(raw);
        if (line.empty() || line.front() == '#') {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParseError(path.string() + ": manifest line without '=': " + line);
        }
        m.entries_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return m;
}

void Manifest::save(const fs::path& path) const {
    std::string out;
    for (const auto& [k, v] : entries_) {
        out += k + "=" + v + "\n";
    }
    csv::write_file(path, out);
}

std::optional<std::string> Manifest::get(const std::string& key) const {
    if (auto it = entries_.find(key); it != entries_.end()) {
        return it->second;
    }
    return std::nullopt;
}

void Manifest::set(const std::string& key, std::string value) {
    entries_[key] = std::move(value);
}

void Manifest::erase_prefix(const std::string& prefix) {
    for (auto it = entries_.lower_bound(prefix); it != entries_.end() && it->first.starts_with(prefix);) {
        it = entries_.erase(it);
    }
}

void Manifest::checksum(const std::string& stage, const fs::path& file) {
    set(stage + ".checksum." + file.filename().string(), hex64(fnv1a64(csv::read_file(file))));
}

// ------------------------------------------------------------------- ingest

Json IngestReport::to_json() const {
    Json j;
    for (const auto& [name, c] : sources) {
        j["sources"][name] = {{"rows", c.rows}, {"records", c.records}, {"rejections", c.rejections}};
    }
    j["located_posts"] = located_posts;
    j["ambiguous_posts"] = ambiguous_posts;
    return j;
}

IngestReport run_ingest(const IngestOptions& options) {
    const auto demo = ingest::parse_demographics(csv::read_file(options.demographics));
    ingest::KnownIds known;
    for (const auto& r : demo.records) {
        known.insert(r.geo_id);
    }
    const auto disease = ingest::parse_disease(csv::read_file(options.disease), &known);
    const auto mobility = ingest::parse_mobility(csv::read_file(options.mobility), &known);
    const auto posts = ingest::parse_posts(csv::read_file(options.posts));
    ingest::ParseResult<risk::Poi> pois;
    if (options.pois) {
        pois = risk::parse_pois(csv::read_file(*options.pois));
    }

    IngestReport report;
    auto count = [&](const std::string& name, const auto& result) {
        report.sources[name] = {result.rows, result.records.size(), result.rejections.size()};
    };
    count("demographics", demo);
    count("disease", disease);
    count("mobility", mobility);
    count("posts", posts);
    if (options.pois) {
        count("pois", pois);
    }

    const ingest::Gazetteer gazetteer(demo.records);
    std::vector<perception::PostLocation> locations;
    for (const auto& post : posts.records) {
        const auto match = gazetteer.extract(post);
        if (!match.geo_ids.empty()) {
            ++report.located_posts;
        }
        if (match.ambiguous) {
            ++report.ambiguous_posts;
        }
        for (const auto& id : match.geo_ids) {
            locations.push_back({post.post_id, id, match.ambiguous});
        }
    }

    const fs::path& out = options.out;
    fs::create_directories(out);
    csv::write_file(out / kDemographicsFile, ingest::write_demographics(demo.records));
    csv::write_file(out / kDiseaseFile, ingest::write_disease(disease.records));
    csv::write_file(out / kMobilityFile, ingest::write_mobility(mobility.records));
    csv::write_file(out / kPostsFile, ingest::write_posts(posts.records));
    csv::write_file(out / kPostLocationsFile, post_locations_csv(locations));
    if (options.pois) {
        csv::write_file(out / kPoisFile, risk::write_pois(pois.records));
    } else if (fs::exists(out / kPoisFile)) {
        fs::remove(out / kPoisFile);
    }
    std::string rejections = "source,line,reason\n";
    rejections += ingest::write_rejections("demographics", demo.rejections);
    rejections += ingest::write_rejections("disease", disease.rejections);
    rejections += ingest::write_rejections("mobility", mobility.rejections);
    rejections += ingest::write_rejections("posts", posts.rejections);
    rejections += ingest::write_rejections("pois", pois.rejections);
    csv::write_file(out / kRejectionsFile, rejections);

    Manifest manifest = Manifest::load(out / kManifestFile);
    manifest.erase_prefix("ingest.");
    manifest.set("ingest.input.disease", options.disease.string());
    manifest.set("ingest.input.demographics", options.demographics.string());
    manifest.set("ingest.input.mobility", options.mobility.string());
    manifest.set("ingest.input.posts", options.posts.string());
    if (options.pois) {
        manifest.set("ingest.input.pois", options.pois->string());
    }
    manifest.set("ingest.out", out.string());
    for (auto name : {kDemographicsFile, kDiseaseFile, kMobilityFile, kPostsFile, kPostLocationsFile,
                      kRejectionsFile}) {
        manifest.checksum("ingest", out / name);
    }
    if (options.pois) {
        manifest.checksum("ingest", out / kPoisFile);
    }
    manifest.save(out / kManifestFile);
    return report;
}

std::vector<perception::PostLocation> read_post_locations(std::string_view csv_text) {
    std::vector<perception::PostLocation> out;
    const auto rows = csv::parse(csv_text);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& f = rows[r].fields;
        if (f.size() != 3) {
            throw ParseError("post_locations.csv line " + std::to_string(rows[r].line) + ": malformed");
        }
        out.push_back({f[0], f[1], f[2] == "1"});
    }
    return out;
}

Snapshot load_snapshot(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        throw MissingArtifact(dir.string());
    }
    Snapshot s;
    s.demographics = ingest::parse_demographics(csv::read_file(dir / kDemographicsFile)).records;
    s.disease = ingest::parse_disease(csv::read_file(dir / kDiseaseFile)).records;
    s.mobility = ingest::parse_mobility(csv::read_file(dir / kMobilityFile)).records;
    s.posts = ingest::parse_posts(csv::read_file(dir / kPostsFile)).records;
    s.locations = read_post_locations(csv::read_file(dir / kPostLocationsFile));
    if (fs::exists(dir / kPoisFile)) {
        s.pois = risk::parse_pois(csv::read_file(dir / kPoisFile)).records;
    }
    return s;
}

// -------------------------------------------------------------------- graph

Json GraphReport::to_json() const {
    return Json{{"nodes", nodes}, {"include_edges", include_edges}, {"near_edges", near_edges}};
}

GraphReport run_build_graph(const GraphOptions& options) {
    const auto snapshot = load_snapshot(options.snapshot);
    const auto ahin = graph::build_ahin(snapshot.demographics, snapshot.disease, snapshot.mobility, {},
                                        options.build);
    const fs::path out = graph_dir_for(options.snapshot, options.out);
    graph::write_graph(ahin, out);

    Manifest manifest = Manifest::load(options.snapshot / kManifestFile);
    manifest.erase_prefix("graph.");
    manifest.set("graph.k", std::to_string(options.build.k));
    manifest.set("graph.metric",
                 options.build.metric == DistanceMetric::Haversine ? "haversine" : "euclidean");
    manifest.set("graph.out", out.string());
    for (auto name : {"nodes.csv", "edges.csv", "graph.meta"}) {
        manifest.checksum("graph", out / name);
    }
    manifest.save(options.snapshot / kManifestFile);

    GraphReport report;
    report.nodes = level_counts(ahin);
    report.include_edges = ahin.edge_count(graph::Relation::Include);
    report.near_edges = ahin.edge_count(graph::Relation::Near);
    return report;
}

graph::Ahin load_ahin(const Snapshot& snapshot, const fs::path& graph_dir,
                      const graph::PerceptionTable& perceptions) {
    const auto stored = graph::read_graph(graph_dir);
    return graph::Ahin::assemble(snapshot.demographics, snapshot.disease, snapshot.mobility, perceptions,
                                 stored.near_edges, stored.options);
}

// -------------------------------------------------------------------- train

std::optional<Component> parse_component(std::string_view text) noexcept {
    if (text == "perception") return Component::Perception;
    if (text == "cgan") return Component::Cgan;
    if (text == "gae") return Component::Gae;
    if (text == "all") return Component::All;
    return std::nullopt;
}

Json TrainReport::to_json() const {
    Json j;
    j["seed"] = seed;
    if (perception) {
        j["perception"] = {{"train_size", perception->train_size},
                           {"heldout_size", perception->heldout_size},
                           {"train_mae", perception->train_mae},
                           {"heldout_mae", perception->heldout_mae},
                           {"final_loss", perception->loss_curve.empty() ? 0.0 : perception->loss_curve.back()}};
    }
    if (cgan_steps) {
        j["cgan"] = {{"steps", *cgan_steps},
                     {"final_discriminator_loss", cgan_final_d_loss.value_or(0.0)},
                     {"final_generator_loss", cgan_final_g_loss.value_or(0.0)}};
    }
    if (gae_final_loss) {
        j["gae"] = {{"final_loss", *gae_final_loss}};
    }
    if (!perception_sources.empty()) {
        j["perception_sources"] = perception_sources;
    }
    j["notes"] = notes;
    return j;
}

TrainReport run_train(const TrainOptions& options) {
    const fs::path manifest_path = options.snapshot / kManifestFile;
    const auto snapshot = load_snapshot(options.snapshot);
    Manifest manifest = Manifest::load(manifest_path);

    TrainReport report;
    report.seed = kDefaultSeed;
    if (options.seed) {
        report.seed = *options.seed;
    } else if (auto s = manifest.get("seed")) {
        report.seed = std::stoull(*s);
    }
    const fs::path graph_dir = graph_dir_for(options.snapshot, options.graph);
    const graph::Ahin base = load_ahin(snapshot, graph_dir);
    const fs::path& models = options.models;
    fs::create_directories(models);
    Json log = Json::object();

    const bool do_perception = options.component == Component::Perception || options.component == Component::All;
    const bool do_cgan = options.component == Component::Cgan || options.component == Component::All;
    const bool do_gae = options.component == Component::Gae || options.component == Component::All;

    std::vector<perception::Vector> embeddings;
    std::unordered_map<std::string, std::size_t> post_index;
    if (do_perception || do_cgan) {
        for (std::size_t i = 0; i < snapshot.posts.size(); ++i) {
            embeddings.push_back(perception::embed_post(snapshot.posts[i].text()).values);
            post_index.emplace(snapshot.posts[i].post_id, i);
        }
    }
    auto as_matrix = [](const std::vector<perception::Vector>& cols, Eigen::Index rows) {
        perception::Matrix m(rows, static_cast<Eigen::Index>(cols.size()));
        for (std::size_t i = 0; i < cols.size(); ++i) {
            m.col(static_cast<Eigen::Index>(i)) = cols[i];
        }
        return m;
    };
    const auto embed_rows = static_cast<Eigen::Index>(perception::kDefaultEmbeddingDim);

    if (do_perception) {
        perception::Vector labels(static_cast<Eigen::Index>(snapshot.posts.size()));
        for (std::size_t i = 0; i < snapshot.posts.size(); ++i) {
            labels(static_cast<Eigen::Index>(i)) = perception::sentiment_awareness(snapshot.posts[i].text());
        }
        auto config = options.perception;
        config.seed = report.seed;
        try {
            auto trained = perception::train_perception(as_matrix(embeddings, embed_rows), labels, config);
            perception::save_perception_model(trained.model, models / kPerceptionModelFile);
            log["perception_loss"] = curve_json(trained.report.loss_curve);
            report.perception = std::move(trained.report);
        } catch (const perception::InsufficientData& e) {
            fs::remove(models / kPerceptionModelFile);
            report.notes.push_back(e.what());
        }
    }

    if (do_cgan) {
        std::vector<perception::Vector> real;
        std::vector<perception::Vector> conditions;
        for (const auto& loc : snapshot.locations) {
            const auto node = base.find(loc.geo_id);
            const auto it = post_index.find(loc.post_id);
            if (!node || it == post_index.end()) {
                continue;
            }
            real.push_back(embeddings[it->second]);
            conditions.push_back(
                perception::condition_for(base, *node, snapshot.posts[it->second].date()).to_vector());
        }
        auto config = options.cgan;
        config.seed = report.seed;
        try {
            auto trained = perception::train_cgan(
                as_matrix(real, embed_rows),
                as_matrix(conditions, static_cast<Eigen::Index>(perception::kConditionDim)), config);
            perception::save_cgan(trained.pair, models / kCganFile);
            report.cgan_steps = trained.losses.discriminator.size();
            if (!trained.losses.discriminator.empty()) {
                report.cgan_final_d_loss = trained.losses.discriminator.back();
                report.cgan_final_g_loss = trained.losses.generator.back();
            }
            log["cgan_discriminator_loss"] = curve_json(trained.losses.discriminator);
            log["cgan_generator_loss"] = curve_json(trained.losses.generator);
        } catch (const perception::InsufficientData& e) {
            fs::remove(models / kCganFile);
            report.notes.push_back(e.what());
        } catch (const perception::CganDivergence& e) {
            perception::save_cgan(e.last_stable(), models / kCganFile);
            throw;
        }
    }

    if (do_perception || do_cgan) {
        std::optional<perception::PerceptionModel> model;
        std::optional<perception::CganPair> cgan;
        if (fs::exists(models / kPerceptionModelFile)) {
            model = perception::load_perception_model(models / kPerceptionModelFile);
        }
        if (fs::exists(models / kCganFile)) {
            cgan = perception::load_cgan(models / kCganFile);
        }
        if (!model || !cgan) {
            report.notes.push_back("no synthesis models; areas without enough posts use the real mean or zero");
        }
        auto area = options.area;
        area.seed = report.seed;
        const auto posts = perception::index_posts(snapshot.posts, snapshot.locations);
        const auto estimates = perception::estimate_perceptions(base, posts, cgan ? &*cgan : nullptr,
                                                                model ? &*model : nullptr, area,
                                                                kPostWindowDays);
        csv::write_file(models / kPerceptionsFile, perception::write_estimates(estimates));
        for (const auto& [key, value] : estimates.areas) {
            ++report.perception_sources[std::string(perception::to_string(value.source))];
        }
    }

    if (do_gae) {
        const auto estimates = perception::read_estimates(csv::read_file(models / kPerceptionsFile));
        const auto ahin = base.with_perceptions(estimates.table());
        auto config = options.gae;
        config.seed = report.seed;
        const auto trained = gae::train_gae(ahin, config);
        gae::save_relations(trained.relations, models);
        log["gae_loss"] = curve_json(trained.loss_curve);
        if (!trained.loss_curve.empty()) {
            report.gae_final_loss = trained.loss_curve.back();
        }
    }

    Json out = report.to_json();
    out["curves"] = std::move(log);
    csv::write_file(models / kTrainingLogFile, out.dump(1) + "\n");

    manifest.set("seed", std::to_string(report.seed));
    manifest.set("train.models", models.string());
    manifest.set("train.graph", graph_dir.string());
    for (auto name : {kPerceptionModelFile, kCganFile, kPerceptionsFile}) {
        if (fs::exists(models / name)) {
            manifest.checksum("train", models / name);
        }
    }
    for (auto name : {"R_include.csv", "R_near.csv"}) {
        if (fs::exists(models / name)) {
            manifest.checksum("train", models / name);
        }
    }
    manifest.save(manifest_path);
    return report;
}

// ------------------------------------------------------------------- export

Json ExportReport::to_json() const {
    Json files_json = Json::array();
    for (const auto& f : files) {
        files_json.push_back(f.filename().string());
    }
    return Json{{"files", files_json},
                {"nodes", nodes},
                {"include_edges", include_edges},
                {"near_edges", near_edges},
                {"edges", include_edges + near_edges}};
}

ExportReport run_export(const ExportOptions& options) {
    const auto snapshot = load_snapshot(options.snapshot);
    const auto ahin = load_ahin(snapshot, graph_dir_for(options.snapshot, options.graph));
    const fs::path& out = options.out;
    ExportReport report;

    const fs::path db1 = out / "db1_disease.csv";
    csv::write_file(db1, ingest::write_disease(snapshot.disease));

    std::map<std::string, std::vector<const ingest::MobilityRecord*>> mobility;
    for (const auto& m : snapshot.mobility) {
        mobility[m.geo_id].push_back(&m);
    }
    std::string db2_text = std::string(ingest::kDemographicsHeader) + ",mobility_date,mobility_level\n";
    for (const auto& line : split_lines(ingest::write_demographics(snapshot.demographics))) {
        if (line.empty() || line == ingest::kDemographicsHeader) {
            continue;
        }
        const auto geo_id = csv::split_line(line).front();
        const auto it = mobility.find(geo_id);
        if (it == mobility.end()) {
            db2_text += line + ",,\n";
            continue;
        }
        for (const auto* m : it->second) {
            db2_text += line + "," + m->date.str() + "," + std::to_string(m->level) + "\n";
        }
    }
    const fs::path db2 = out / "db2_demographics_mobility.csv";
    csv::write_file(db2, db2_text);

    std::map<std::string, std::vector<std::string>> located;
    for (const auto& l : snapshot.locations) {
        located[l.post_id].push_back(l.geo_id);
    }
    std::string db3_text;
    for (const auto& p : snapshot.posts) {
        Json j;
        j["id"] = p.post_id;
        j["subreddit"] = p.subreddit;
        j["created_utc"] = p.created;
        j["author_hash"] = p.author_hash;
        j["title"] = p.title;
        j["body"] = p.body;
        j["locations"] = located.contains(p.post_id) ? Json(located[p.post_id]) : Json::array();
        j["awareness"] = perception::sentiment_awareness(p.text());
        db3_text += j.dump() + "\n";
    }
    const fs::path db3 = out / "db3_posts.jsonl";
    csv::write_file(db3, db3_text);

    Json nodes = Json::array();
    for (graph::NodeId id = 0; id < ahin.node_count(); ++id) {
        const auto& n = ahin.node(id);
        nodes.push_back({{"geo_id", n.geo_id},
                         {"level", to_string(n.level)},
                         {"name", n.name},
                         {"parent", n.parent ? ahin.node(*n.parent).geo_id : std::string{}},
                         {"lat", n.gps.lat},
                         {"lon", n.gps.lon}});
    }
    Json edges = Json::array();
    for (const auto& e : ahin.edges()) {
        edges.push_back({{"source", ahin.node(e.source).geo_id},
                         {"target", ahin.node(e.target).geo_id},
                         {"relation", e.relation == graph::Relation::Include ? "R1" : "R2"}});
    }
    report.nodes = level_counts(ahin);
    report.include_edges = ahin.edge_count(graph::Relation::Include);
    report.near_edges = ahin.edge_count(graph::Relation::Near);
    Json db4_json{{"counts",
                   {{"nodes", report.nodes},
                    {"edges", report.include_edges + report.near_edges},
                    {"R1", report.include_edges},
                    {"R2", report.near_edges}}},
                  {"nodes", std::move(nodes)},
                  {"edges", std::move(edges)}};
    const fs::path db4 = out / "db4_ahin.json";
    csv::write_file(db4, db4_json.dump(1) + "\n");

    report.files = {db1, db2, db3, db4};
    return report;
}

}  // namespace asat::pipeline

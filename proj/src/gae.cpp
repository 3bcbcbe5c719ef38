#include "asat/gae.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "asat/csv.hpp"

namespace asat::gae {

namespace {

double logistic(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

std::vector<double> softmax(const std::vector<double>& raw) {
    const double peak = *std::max_element(raw.begin(), raw.end());
    std::vector<double> out(raw.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        out[i] = std::exp(raw[i] - peak);
        sum += out[i];
    }
    for (double& w : out) {
        w /= sum;
    }
    return out;
}

std::vector<Vector> columns(const Matrix& m, const std::vector<NodeId>& ids) {
    std::vector<Vector> out;
    out.reserve(ids.size());
    for (NodeId id : ids) {
        out.emplace_back(m.col(static_cast<Eigen::Index>(id)));
    }
    return out;
}

// BCE of sigmoid(s) against `label`, written stably.
double bce(double s, double label) {
    return label * nn::softplus(-s) + (1.0 - label) * nn::softplus(s);
}

}  // namespace

RelationMatrices RelationMatrices::random(std::size_t dim, double std, Rng& rng) {
    RelationMatrices out;
    const auto n = static_cast<Eigen::Index>(dim);
    for (auto& m : out.r) {
        m = Matrix(n, n);
        for (Eigen::Index c = 0; c < n; ++c) {
            for (Eigen::Index r = 0; r < n; ++r) {
                m(r, c) = rng.normal() * std;
            }
        }
    }
    return out;
}

RelationMatrices RelationMatrices::identity(std::size_t dim) {
    RelationMatrices out;
    for (auto& m : out.r) {
        m = Matrix::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    }
    return out;
}

bool RelationMatrices::finite() const {
    return std::all_of(r.begin(), r.end(), [](const Matrix& m) { return m.allFinite(); });
}

double attention_raw(const Vector& a_v, const Vector& a_u, const Matrix& r) {
    if (r.rows() != a_v.size() || r.cols() != a_u.size()) {
        throw InvalidArgument("attention: vectors of size " + std::to_string(a_v.size()) + " and " +
                              std::to_string(a_u.size()) + " do not fit a " +
                              std::to_string(r.rows()) + "x" + std::to_string(r.cols()) +
                              " relation matrix");
    }
    return a_v.dot(r * a_u);
}

AttentionWeights attention_normalized(const Vector& a_v, std::span<const Vector> neighbors,
                                      const Matrix& r) {
    if (neighbors.empty()) {
        throw NoNeighbors("attention over an empty neighborhood");
    }
    AttentionWeights out;
    const Vector left = r.transpose() * a_v;
    for (const auto& a_u : neighbors) {
        if (a_u.size() != left.size()) {
            attention_raw(a_v, a_u, r);  // throws with the shapes
        }
        out.raw.push_back(left.dot(a_u));
    }
    out.normalized = softmax(out.raw);
    return out;
}

Vector aggregate_neighbors(std::span<const Vector> neighbors, std::span<const double> weights) {
    if (neighbors.size() != weights.size() || neighbors.empty()) {
        throw InvalidArgument("aggregation needs one weight per neighbor");
    }
    Vector out = Vector::Zero(neighbors.front().size());
    for (std::size_t i = 0; i < neighbors.size(); ++i) {
        if (neighbors[i].size() != out.size()) {
            throw InvalidArgument("neighbor representations differ in size");
        }
        out += weights[i] * neighbors[i];
    }
    return out;
}

Vector combine(const Vector& a_v, const Vector& a_n) {
    if (a_v.size() != a_n.size()) {
        throw InvalidArgument("cannot combine vectors of different sizes");
    }
    return (a_v + a_n) * 0.5;
}

double decode_link(const Vector& a_v, const Vector& a_u) {
    return logistic(a_v.dot(a_u));
}

EncoderInput encoder_input(const graph::Ahin& ahin, Date date) {
    EncoderInput in;
    in.features = Matrix(static_cast<Eigen::Index>(kFeatureDim),
                         static_cast<Eigen::Index>(ahin.node_count()));
    in.neighbors.resize(ahin.node_count());
    for (NodeId id = 0; id < ahin.node_count(); ++id) {
        const auto fv = ahin.feature_vector(id, date);
        for (std::size_t d = 0; d < kFeatureDim; ++d) {
            in.features(static_cast<Eigen::Index>(d), id) = fv.normalized[d];
        }
        in.neighbors[id] = ahin.guided_neighbors(id).nodes;
    }
    return in;
}

EncoderState encode(const EncoderInput& input, const RelationMatrices& relations) {
    EncoderState state;
    state.input = input.features;
    state.aggregate = input.features;
    state.output = input.features;
    state.attention.resize(input.neighbors.size());
    const Matrix& r = relations[input.relation];
    for (std::size_t v = 0; v < input.neighbors.size(); ++v) {
        const auto& ids = input.neighbors[v];
        if (ids.empty()) {
            continue;
        }
        const auto col = static_cast<Eigen::Index>(v);
        const auto neighbors = columns(input.features, ids);
        state.attention[v] = attention_normalized(input.features.col(col), neighbors, r);
        state.aggregate.col(col) = aggregate_neighbors(neighbors, state.attention[v].normalized);
        state.output.col(col) = combine(input.features.col(col), state.aggregate.col(col));
    }
    return state;
}

double link_loss(const EncoderInput& input, const RelationMatrices& relations,
                 std::span<const LinkSample> samples, RelationMatrices* grads) {
    if (samples.empty()) {
        throw InvalidArgument("link loss over no samples");
    }
    const EncoderState state = encode(input, relations);
    const auto& h = state.output;
    const double n = static_cast<double>(samples.size());
    double loss = 0.0;
    Matrix dh = Matrix::Zero(h.rows(), h.cols());
    for (const auto& s : samples) {
        const auto a = static_cast<Eigen::Index>(s.a);
        const auto b = static_cast<Eigen::Index>(s.b);
        const double score = h.col(a).dot(h.col(b));
        loss += bce(score, s.label) / n;
        const double ds = (logistic(score) - s.label) / n;
        dh.col(a) += ds * h.col(b);
        dh.col(b) += ds * h.col(a);
    }
    if (grads) {
        *grads = RelationMatrices{};
        for (auto& m : grads->r) {
            m = Matrix::Zero(static_cast<Eigen::Index>(relations.dim()),
                             static_cast<Eigen::Index>(relations.dim()));
        }
        Matrix& dr = (*grads)[input.relation];
        for (std::size_t v = 0; v < input.neighbors.size(); ++v) {
            const auto& ids = input.neighbors[v];
            if (ids.empty()) {
                continue;
            }
            const auto col = static_cast<Eigen::Index>(v);
            const auto& w = state.attention[v].normalized;
            // h_v = a_v / 2 + sum_u w_u a_u / 2, w = softmax(beta).
            std::vector<double> dw(ids.size());
            double mean = 0.0;
            for (std::size_t i = 0; i < ids.size(); ++i) {
                dw[i] = 0.5 * dh.col(col).dot(input.features.col(static_cast<Eigen::Index>(ids[i])));
                mean += w[i] * dw[i];
            }
            Vector weighted = Vector::Zero(h.rows());
            for (std::size_t i = 0; i < ids.size(); ++i) {
                const double dbeta = w[i] * (dw[i] - mean);
                weighted += dbeta * input.features.col(static_cast<Eigen::Index>(ids[i]));
            }
            // d beta_u / dR = a_v a_u^T
            dr += input.features.col(col) * weighted.transpose();
        }
    }
    return loss;
}

std::vector<std::pair<NodeId, NodeId>> sample_negatives(const graph::Ahin& ahin, std::size_t count,
                                                        Rng& rng) {
    // Pick a level with probability proportional to its number of pairs.
    std::vector<double> pairs;
    double total = 0.0;
    for (Level level : kAllLevels) {
        const auto n = static_cast<double>(ahin.nodes_at(level).size());
        pairs.push_back(n * (n - 1.0) / 2.0);
        total += pairs.back();
    }
    std::vector<std::pair<NodeId, NodeId>> out;
    if (total <= 0.0 || count == 0) {
        return out;
    }
    std::size_t attempts = 0;
    const std::size_t max_attempts = 1000 * count + 1000;
    while (out.size() < count && attempts++ < max_attempts) {
        double pick = rng.uniform() * total;
        std::size_t li = 0;
        while (li + 1 < pairs.size() && pick >= pairs[li]) {
            pick -= pairs[li];
            ++li;
        }
        const auto nodes = ahin.nodes_at(kAllLevels[li]);
        if (nodes.size() < 2) {
            continue;
        }
        const std::size_t i = rng.below(nodes.size());
        std::size_t j = rng.below(nodes.size() - 1);
        if (j >= i) {
            ++j;
        }
        if (!ahin.adjacent_near(nodes[i], nodes[j])) {
            out.emplace_back(std::min(nodes[i], nodes[j]), std::max(nodes[i], nodes[j]));
        }
    }
    return out;
}

TrainedGae train_gae(const graph::Ahin& ahin, const GaeConfig& config, std::optional<Date> date) {
    if (ahin.edge_count(Relation::Near) == 0) {
        throw InvalidArgument("cannot train the auto-encoder on a network without near edges");
    }
    TrainedGae out;
    out.date = date ? *date : ahin.latest_date().value_or(Date{});
    const EncoderInput input = encoder_input(ahin, out.date);
    Rng rng(config.seed);
    out.relations = RelationMatrices::random(kFeatureDim, config.init_std, rng);

    std::vector<LinkSample> positives;
    for (const auto& e : ahin.edges()) {
        if (e.relation == Relation::Near) {
            positives.push_back({e.source, e.target, 1.0});
        }
    }
    Matrix& r = out.relations[input.relation];
    nn::FlatAdam adam(static_cast<std::size_t>(r.size()), nn::AdamConfig{config.learning_rate});
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::vector<LinkSample> samples = positives;
        for (auto [a, b] : sample_negatives(ahin, positives.size(), rng)) {
            samples.push_back({a, b, 0.0});
        }
        RelationMatrices grads;
        out.loss_curve.push_back(link_loss(input, out.relations, samples, &grads));
        const Matrix& g = grads[input.relation];
        adam.step(std::span<double>(r.data(), static_cast<std::size_t>(r.size())),
                  std::span<const double>(g.data(), static_cast<std::size_t>(g.size())));
        if (!std::isfinite(out.loss_curve.back()) || !out.relations.finite()) {
            throw TrainingError("auto-encoder training diverged at epoch " + std::to_string(epoch));
        }
    }
    out.representations = config.epochs == 0 ? input.features : encode(input, out.relations).output;
    return out;
}

double link_auc(std::span<const double> positive, std::span<const double> negative) {
    if (positive.empty() || negative.empty()) {
        throw InvalidArgument("AUC needs positive and negative scores");
    }
    // Rank-sum form of the Mann-Whitney statistic with midranks for ties.
    std::vector<std::pair<double, int>> all;
    for (double s : positive) all.emplace_back(s, 1);
    for (double s : negative) all.emplace_back(s, 0);
    std::sort(all.begin(), all.end());
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < all.size();) {
        std::size_t j = i;
        while (j < all.size() && all[j].first == all[i].first) {
            ++j;
        }
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) {
            if (all[k].second == 1) {
                rank_sum += midrank;
            }
        }
        i = j;
    }
    const auto np = static_cast<double>(positive.size());
    const auto nn = static_cast<double>(negative.size());
    return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

LinkSplit split_links(const graph::Ahin& ahin, double fraction, std::uint64_t seed) {
    std::vector<std::pair<NodeId, NodeId>> edges;
    for (const auto& e : ahin.edges()) {
        if (e.relation == Relation::Near) {
            edges.emplace_back(e.source, e.target);
        }
    }
    Rng rng(seed);
    rng.shuffle(edges);
    const auto count = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::round(fraction * static_cast<double>(edges.size()))));
    std::vector<std::pair<NodeId, NodeId>> held(edges.begin(),
                                                edges.begin() + static_cast<std::ptrdiff_t>(count));
    std::set<std::pair<NodeId, NodeId>> seen;
    std::vector<std::pair<NodeId, NodeId>> negatives;
    while (negatives.size() < held.size()) {
        const auto batch = sample_negatives(ahin, held.size() - negatives.size(), rng);
        if (batch.empty()) {
            break;
        }
        for (const auto& p : batch) {
            if (seen.insert(p).second) {
                negatives.push_back(p);
            }
        }
    }
    return LinkSplit{ahin.without_near_edges(held), std::move(held), std::move(negatives)};
}

void save_relations(const RelationMatrices& relations, const std::filesystem::path& dir) {
    for (Relation rel : {Relation::Include, Relation::Near}) {
        const Matrix& m = relations[rel];
        std::string out = "relation," + std::string(graph::to_string(rel)) + ",d_a," +
                          std::to_string(m.rows()) + "\n";
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                out += (j ? "," : "") + format_double(m(i, j));
            }
            out.push_back('\n');
        }
        csv::write_file(dir / ("R_" + std::string(graph::to_string(rel)) + ".csv"), out);
    }
}

RelationMatrices load_relations(const std::filesystem::path& dir) {
    RelationMatrices out;
    for (Relation rel : {Relation::Include, Relation::Near}) {
        const auto path = dir / ("R_" + std::string(graph::to_string(rel)) + ".csv");
        const auto rows = csv::parse(csv::read_file(path));
        if (rows.empty() || rows[0].fields.size() != 4 || rows[0].fields[0] != "relation" ||
            rows[0].fields[1] != graph::to_string(rel) || rows[0].fields[2] != "d_a") {
            throw ParseError(path.string() + ": bad relation matrix header");
        }
        const auto n = static_cast<Eigen::Index>(std::stoul(rows[0].fields[3]));
        if (static_cast<Eigen::Index>(rows.size()) != n + 1) {
            throw ParseError(path.string() + ": expected " + std::to_string(n) + " rows");
        }
        Matrix m(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& f = rows[static_cast<std::size_t>(i) + 1].fields;
            if (static_cast<Eigen::Index>(f.size()) != n) {
                throw ParseError(path.string() + ": row " + std::to_string(i + 1) + " has " +
                                 std::to_string(f.size()) + " values");
            }
            for (Eigen::Index j = 0; j < n; ++j) {
                m(i, j) = std::stod(f[static_cast<std::size_t>(j)]);
            }
        }
        out[rel] = std::move(m);
    }
    if (out[Relation::Include].rows() != out[Relation::Near].rows() || !out.finite()) {
        throw ParseError(dir.string() + ": relation matrices disagree in size or are not finite");
    }
    return out;
}

}  // namespace asat::gae

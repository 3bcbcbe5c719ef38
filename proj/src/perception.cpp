#include "asat/perception.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "asat/csv.hpp"

namespace asat::perception {

using nn::softplus;
using nn::strict_sigmoid;

namespace {

constexpr std::uint64_t kBuckets = 1ULL << 20;

double logistic(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

Matrix stack_rows(const Matrix& top, const Matrix& bottom) {
    Matrix out(top.rows() + bottom.rows(), top.cols());
    out << top, bottom;
    return out;
}

Matrix gather(const Matrix& source, const std::vector<std::size_t>& columns) {
    Matrix out(source.rows(), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t i = 0; i < columns.size(); ++i) {
        out.col(static_cast<Eigen::Index>(i)) = source.col(static_cast<Eigen::Index>(columns[i]));
    }
    return out;
}

Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Matrix out(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) {
            out(r, c) = rng.normal();
        }
    }
    return out;
}

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count, Rng& rng) {
    std::vector<std::size_t> out(count);
    for (auto& i : out) {
        i = rng.below(n);
    }
    return out;
}

// Order-independent mean: sum after sorting.
double sorted_mean(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    return sum / static_cast<double>(values.size());
}

void expect_header(std::istream& in, std::string_view expected) {
    std::string line;
    std::getline(in, line);
    if (trim(line) != expected) {
        throw ParseError("checkpoint header '" + trim(line) + "', expected '" +
                         std::string(expected) + "'");
    }
}

std::size_t read_field(std::istream& in, std::string_view key) {
    std::string name;
    std::size_t value = 0;
    if (!(in >> name >> value) || name != key) {
        throw ParseError("checkpoint field '" + std::string(key) + "' missing");
    }
    return value;
}

}  // namespace

PostEmbedding embed_post(std::string_view text, std::size_t dim, std::uint64_t seed) {
    PostEmbedding out;
    out.values = Vector::Zero(static_cast<Eigen::Index>(dim));
    for (const auto& token : ingest::tokenize(text)) {
        const std::uint64_t bucket = fnv1a64(token, seed ^ 0xcbf29ce484222325ULL) % kBuckets;
        // Row `bucket` of the fixed projection matrix, generated on demand.
        Rng row(seed * 0x9e3779b97f4a7c15ULL + bucket);
        for (std::size_t d = 0; d < dim; ++d) {
            out.values(static_cast<Eigen::Index>(d)) += row.normal();
        }
    }
    const double norm = out.values.norm();
    if (norm > 0.0) {
        out.values /= norm;
    }
    return out;
}

Vector Condition::to_vector() const {
    Vector v(static_cast<Eigen::Index>(kConditionDim));
    for (std::size_t i = 0; i < 4; ++i) {
        v(static_cast<Eigen::Index>(i)) = a1[i];
        v(static_cast<Eigen::Index>(4 + i)) = a2[i];
    }
    v(8) = o.lat / 90.0;
    v(9) = o.lon / 180.0;
    return v;
}

Condition condition_for(const graph::Ahin& ahin, graph::NodeId node, Date date) {
    const auto fv = ahin.feature_vector(node, date);
    Condition c;
    std::copy_n(fv.normalized.begin(), 4, c.a1.begin());
    std::copy_n(fv.normalized.begin() + 4, 4, c.a2.begin());
    c.o = ahin.node(node).gps;
    return c;
}

// ---------------------------------------------------------------- perception

double PerceptionModel::score(const Vector& embedding) const {
    return strict_sigmoid(net_.forward(embedding)(0, 0));
}

Vector PerceptionModel::score(const Matrix& embeddings) const {
    const Matrix logits = net_.forward(embeddings);
    Vector out(logits.cols());
    for (Eigen::Index i = 0; i < logits.cols(); ++i) {
        out(i) = strict_sigmoid(logits(0, i));
    }
    return out;
}

double perception_loss(const PerceptionModel& model, const Matrix& embeddings, const Vector& labels,
                       nn::Gradients* grads) {
    nn::Mlp::Tape tape;
    const Matrix logits = model.network().forward(embeddings, tape);
    const auto n = static_cast<double>(labels.size());
    double loss = 0.0;
    Matrix dlogits(1, labels.size());
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
        const double s = logistic(logits(0, i));
        const double diff = s - labels(i);
        loss += diff * diff;
        dlogits(0, i) = 2.0 * diff * s * (1.0 - s) / n;
    }
    if (grads) {
        model.network().backward(tape, dlogits, *grads);
    }
    return loss / n;
}

TrainedPerception train_perception(const Matrix& embeddings, const Vector& labels,
                                   const PerceptionConfig& config) {
    const auto n = static_cast<std::size_t>(embeddings.cols());
    if (static_cast<std::size_t>(labels.size()) != n) {
        throw InvalidArgument("one label per embedding required");
    }
    if (n < config.min_examples) {
        throw InsufficientData("perception training needs at least " +
                               std::to_string(config.min_examples) + " labeled posts, got " +
                               std::to_string(n) + "; score posts with the lexicon directly");
    }
    Rng rng(config.seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    const auto heldout = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(config.holdout_fraction * static_cast<double>(n))));
    std::vector<std::size_t> train(order.begin(), order.end() - static_cast<std::ptrdiff_t>(heldout));
    std::vector<std::size_t> test(order.end() - static_cast<std::ptrdiff_t>(heldout), order.end());

    TrainedPerception out;
    out.model = PerceptionModel(nn::Mlp({static_cast<std::size_t>(embeddings.rows()), config.hidden, 1},
                                        {nn::Activation::Tanh, nn::Activation::Identity}, rng));
    nn::Adam adam(out.model.network(), nn::AdamConfig{config.learning_rate});
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(train);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < train.size(); start += config.batch_size) {
            const std::size_t end = std::min(train.size(), start + config.batch_size);
            std::vector<std::size_t> batch(train.begin() + static_cast<std::ptrdiff_t>(start),
                                           train.begin() + static_cast<std::ptrdiff_t>(end));
            Vector y(static_cast<Eigen::Index>(batch.size()));
            for (std::size_t i = 0; i < batch.size(); ++i) {
                y(static_cast<Eigen::Index>(i)) = labels(static_cast<Eigen::Index>(batch[i]));
            }
            auto grads = out.model.network().zero_gradients();
            epoch_loss += perception_loss(out.model, gather(embeddings, batch), y, &grads) *
                          static_cast<double>(batch.size());
            adam.step(out.model.network(), grads);
        }
        out.report.loss_curve.push_back(epoch_loss / static_cast<double>(train.size()));
        if (!std::isfinite(out.report.loss_curve.back())) {
            throw TrainingError("perception training diverged at epoch " + std::to_string(epoch));
        }
    }
    auto mae = [&](const std::vector<std::size_t>& idx) {
        const Vector s = out.model.score(gather(embeddings, idx));
        double sum = 0.0;
        for (std::size_t i = 0; i < idx.size(); ++i) {
            sum += std::abs(s(static_cast<Eigen::Index>(i)) - labels(static_cast<Eigen::Index>(idx[i])));
        }
        return sum / static_cast<double>(idx.size());
    };
    out.report.train_mae = mae(train);
    out.report.heldout_mae = mae(test);
    out.report.train_size = train.size();
    out.report.heldout_size = test.size();
    return out;
}

// ----------------------------------------------------------------------- cGAN

CganPair CganPair::create(std::size_t noise_dim, std::size_t embedding_dim,
                          std::size_t condition_dim, std::size_t hidden, Rng& rng) {
    CganPair pair;
    pair.noise_dim = noise_dim;
    pair.embedding_dim = embedding_dim;
    pair.condition_dim = condition_dim;
    pair.generator = nn::Mlp({noise_dim + condition_dim, hidden, embedding_dim},
                             {nn::Activation::Tanh, nn::Activation::Identity}, rng);
    pair.discriminator = nn::Mlp({embedding_dim + condition_dim, hidden, 1},
                                 {nn::Activation::Tanh, nn::Activation::Identity}, rng);
    return pair;
}

Matrix CganPair::generate(const Matrix& noise, const Matrix& conditions) const {
    return generator.forward(stack_rows(noise, conditions));
}

Matrix CganPair::generate(const Matrix& conditions, Rng& rng) const {
    return generate(normal_matrix(static_cast<Eigen::Index>(noise_dim), conditions.cols(), rng),
                    conditions);
}

Vector CganPair::discriminate(const Matrix& embeddings, const Matrix& conditions) const {
    const Matrix logits = discriminator.forward(stack_rows(embeddings, conditions));
    Vector out(logits.cols());
    for (Eigen::Index i = 0; i < logits.cols(); ++i) {
        out(i) = strict_sigmoid(logits(0, i));
    }
    return out;
}

double discriminator_loss(const CganPair& pair, const Matrix& real, const Matrix& real_conditions,
                          const Matrix& noise, const Matrix& fake_conditions, nn::Gradients* grads) {
    const Matrix fake = pair.generate(noise, fake_conditions);
    nn::Mlp::Tape real_tape;
    nn::Mlp::Tape fake_tape;
    const Matrix real_logits = pair.discriminator.forward(stack_rows(real, real_conditions), real_tape);
    const Matrix fake_logits = pair.discriminator.forward(stack_rows(fake, fake_conditions), fake_tape);
    const auto nr = static_cast<double>(real_logits.cols());
    const auto nf = static_cast<double>(fake_logits.cols());
    double loss = 0.0;
    Matrix d_real(1, real_logits.cols());
    Matrix d_fake(1, fake_logits.cols());
    for (Eigen::Index i = 0; i < real_logits.cols(); ++i) {
        const double l = real_logits(0, i);
        loss += softplus(-l) / nr;
        d_real(0, i) = (logistic(l) - 1.0) / nr;
    }
    for (Eigen::Index i = 0; i < fake_logits.cols(); ++i) {
        const double l = fake_logits(0, i);
        loss += softplus(l) / nf;
        d_fake(0, i) = logistic(l) / nf;
    }
    if (grads) {
        pair.discriminator.backward(real_tape, d_real, *grads);
        pair.discriminator.backward(fake_tape, d_fake, *grads);
    }
    return loss;
}

double generator_loss(const CganPair& pair, const Matrix& noise, const Matrix& conditions,
                      bool non_saturating, nn::Gradients* grads) {
    nn::Mlp::Tape gen_tape;
    nn::Mlp::Tape disc_tape;
    const Matrix fake = pair.generator.forward(stack_rows(noise, conditions), gen_tape);
    const Matrix logits = pair.discriminator.forward(stack_rows(fake, conditions), disc_tape);
    const auto n = static_cast<double>(logits.cols());
    double loss = 0.0;
    Matrix d_logits(1, logits.cols());
    for (Eigen::Index i = 0; i < logits.cols(); ++i) {
        const double l = logits(0, i);
        if (non_saturating) {
            loss += softplus(-l) / n;
            d_logits(0, i) = (logistic(l) - 1.0) / n;
        } else {
            // log(1 - sigmoid(l)) = -softplus(l)
            loss -= softplus(l) / n;
            d_logits(0, i) = -logistic(l) / n;
        }
    }
    if (grads) {
        auto scratch = pair.discriminator.zero_gradients();
        const Matrix d_input = pair.discriminator.backward(disc_tape, d_logits, scratch);
        const Matrix d_fake = d_input.topRows(static_cast<Eigen::Index>(pair.embedding_dim));
        pair.generator.backward(gen_tape, d_fake, *grads);
    }
    return loss;
}

TrainedCgan train_cgan(const Matrix& embeddings, const Matrix& conditions, const CganConfig& config) {
    const auto n = static_cast<std::size_t>(embeddings.cols());
    if (static_cast<std::size_t>(conditions.cols()) != n) {
        throw InvalidArgument("one condition per embedding required");
    }
    if (n < config.min_pairs) {
        throw InsufficientData("cGAN training needs at least " + std::to_string(config.min_pairs) +
                               " (embedding, condition) pairs, got " + std::to_string(n));
    }
    Rng rng(config.seed);
    TrainedCgan out;
    out.pair = CganPair::create(config.noise_dim, static_cast<std::size_t>(embeddings.rows()),
                                static_cast<std::size_t>(conditions.rows()), config.hidden, rng);
    CganPair last_stable = out.pair;
    const nn::AdamConfig adam_config{config.learning_rate, config.beta1};
    nn::Adam d_opt(out.pair.discriminator, adam_config);
    nn::Adam g_opt(out.pair.generator, adam_config);
    const auto batch = config.batch_size;
    const auto noise_rows = static_cast<Eigen::Index>(config.noise_dim);
    for (std::size_t step = 0; step < config.steps; ++step) {
        const auto real_idx = sample_indices(n, batch, rng);
        const auto fake_idx = sample_indices(n, batch, rng);
        const Matrix noise = normal_matrix(noise_rows, static_cast<Eigen::Index>(batch), rng);
        auto d_grads = out.pair.discriminator.zero_gradients();
        const double d_loss =
            discriminator_loss(out.pair, gather(embeddings, real_idx), gather(conditions, real_idx),
                               noise, gather(conditions, fake_idx), &d_grads);
        if (!std::isfinite(d_loss)) {
            throw CganDivergence(step, last_stable);
        }
        d_opt.step(out.pair.discriminator, d_grads);

        const auto gen_idx = sample_indices(n, batch, rng);
        const Matrix gen_noise = normal_matrix(noise_rows, static_cast<Eigen::Index>(batch), rng);
        auto g_grads = out.pair.generator.zero_gradients();
        const double g_loss = generator_loss(out.pair, gen_noise, gather(conditions, gen_idx),
                                             config.non_saturating, &g_grads);
        if (!std::isfinite(g_loss)) {
            throw CganDivergence(step, last_stable);
        }
        g_opt.step(out.pair.generator, g_grads);
        if (!out.pair.generator.finite() || !out.pair.discriminator.finite()) {
            throw CganDivergence(step, last_stable);
        }
        out.losses.discriminator.push_back(d_loss);
        out.losses.generator.push_back(g_loss);
        if (config.checkpoint_every && (step + 1) % config.checkpoint_every == 0) {
            last_stable = out.pair;
        }
    }
    return out;
}

// ------------------------------------------------------------ area perception

std::string_view to_string(PerceptionSource source) noexcept {
    switch (source) {
        case PerceptionSource::Real: return "real";
        case PerceptionSource::Synthetic: return "synthetic";
        case PerceptionSource::Padded: return "padded";
    }
    return "padded";
}

std::optional<PerceptionSource> parse_source(std::string_view text) noexcept {
    for (auto s : {PerceptionSource::Real, PerceptionSource::Synthetic, PerceptionSource::Padded}) {
        if (to_string(s) == text) {
            return s;
        }
    }
    return std::nullopt;
}

AreaPerception area_perception(const graph::Ahin& ahin, graph::NodeId area, Date date,
                               std::span<const double> post_scores, const CganPair* cgan,
                               const PerceptionModel* model, const AreaPerceptionOptions& options) {
    AreaPerception out;
    out.real_posts = post_scores.size();
    const std::vector<double> scores(post_scores.begin(), post_scores.end());
    if (!scores.empty() && scores.size() >= options.threshold) {
        out.value = sorted_mean(scores);
        out.source = PerceptionSource::Real;
        return out;
    }
    if (cgan && model && options.synth_count > 0) {
        if (cgan->condition_dim != kConditionDim ||
            cgan->embedding_dim != model->network().input_size()) {
            throw InvalidArgument("cGAN and perception model dimensions disagree");
        }
        const Vector cond = condition_for(ahin, area, date).to_vector();
        const Matrix conditions = cond.replicate(1, static_cast<Eigen::Index>(options.synth_count));
        std::uint64_t seed = options.seed;
        seed = fnv1a64(ahin.node(area).geo_id, seed) ^ static_cast<std::uint64_t>(date.days());
        Rng rng(seed);
        const Matrix synthetic = cgan->generate(conditions, rng);
        const Vector s = model->score(synthetic);
        out.value = sorted_mean(std::vector<double>(s.data(), s.data() + s.size()));
        out.source = PerceptionSource::Synthetic;
        return out;
    }
    if (!scores.empty()) {
        out.value = sorted_mean(scores);
        out.source = PerceptionSource::Real;
        return out;
    }
    out.value = 0.0;
    out.source = PerceptionSource::Padded;
    return out;
}

std::vector<std::size_t> PostIndex::posts_for(std::string_view geo_id, Date date,
                                              int window_days) const {
    std::vector<std::size_t> out;
    const auto it = by_area.find(std::string(geo_id));
    if (it == by_area.end()) {
        return out;
    }
    const Date first(date.days() - std::max(window_days, 1) + 1);
    for (std::size_t i : it->second) {
        const Date d = posts[i].date();
        if (d >= first && d <= date) {
            out.push_back(i);
        }
    }
    std::sort(out.begin(), out.end(), [&](std::size_t a, std::size_t b) {
        return std::tie(posts[a].created, posts[a].post_id) < std::tie(posts[b].created, posts[b].post_id);
    });
    return out;
}

PostIndex index_posts(std::vector<ingest::RawPost> posts, const std::vector<PostLocation>& locations) {
    PostIndex index;
    index.posts = std::move(posts);
    std::unordered_map<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < index.posts.size(); ++i) {
        by_id.emplace(index.posts[i].post_id, i);
        index.scores.push_back(sentiment_awareness(index.posts[i].text()));
    }
    for (const auto& loc : locations) {
        if (auto it = by_id.find(loc.post_id); it != by_id.end()) {
            auto& list = index.by_area[loc.geo_id];
            if (std::find(list.begin(), list.end(), it->second) == list.end()) {
                list.push_back(it->second);
            }
        }
    }
    return index;
}

graph::PerceptionTable PerceptionEstimates::table() const {
    graph::PerceptionTable t;
    for (const auto& [key, value] : areas) {
        t.emplace(key, value.value);
    }
    return t;
}

PerceptionEstimates estimate_perceptions(const graph::Ahin& ahin, const PostIndex& posts,
                                         const CganPair* cgan, const PerceptionModel* model,
                                         const AreaPerceptionOptions& options, int window_days) {
    PerceptionEstimates out;
    for (graph::NodeId id = 0; id < ahin.node_count(); ++id) {
        const auto& geo_id = ahin.node(id).geo_id;
        for (Date date : ahin.dates()) {
            std::vector<double> scores;
            for (std::size_t p : posts.posts_for(geo_id, date, window_days)) {
                scores.push_back(posts.scores[p]);
            }
            out.areas.emplace(std::make_pair(geo_id, date),
                              area_perception(ahin, id, date, scores, cgan, model, options));
        }
    }
    return out;
}

std::string write_estimates(const PerceptionEstimates& estimates) {
    std::string out = "geo_id,date,value,source,real_posts\n";
    for (const auto& [key, value] : estimates.areas) {
        out += csv::join({key.first, key.second.str(), format_double(value.value),
                          std::string(to_string(value.source)), std::to_string(value.real_posts)});
        out.push_back('\n');
    }
    return out;
}

PerceptionEstimates read_estimates(std::string_view csv_text) {
    PerceptionEstimates out;
    const auto rows = csv::parse(csv_text);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& f = rows[r].fields;
        const auto date = f.size() == 5 ? Date::parse(f[1]) : std::nullopt;
        const auto source = f.size() == 5 ? parse_source(f[3]) : std::nullopt;
        if (!date || !source) {
            throw ParseError("perceptions.csv line " + std::to_string(rows[r].line) + ": malformed");
        }
        AreaPerception p;
        p.value = std::stod(f[2]);
        p.source = *source;
        p.real_posts = static_cast<std::size_t>(std::stoul(f[4]));
        out.areas.emplace(std::make_pair(f[0], *date), p);
    }
    return out;
}

void save_perception_model(const PerceptionModel& model, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "asat-perception v1\n";
    out << "embedding_dim " << model.network().input_size() << '\n';
    nn::write_mlp(out, model.network());
    csv::write_file(path, out.str());
}

PerceptionModel load_perception_model(const std::filesystem::path& path) {
    std::istringstream in(csv::read_file(path));
    expect_header(in, "asat-perception v1");
    const auto dim = read_field(in, "embedding_dim");
    PerceptionModel model(nn::read_mlp(in));
    if (model.network().input_size() != dim || model.network().output_size() != 1) {
        throw ParseError(path.string() + ": inconsistent perception model shape");
    }
    return model;
}

void save_cgan(const CganPair& pair, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "asat-cgan v1\n";
    out << "noise_dim " << pair.noise_dim << '\n';
    out << "embedding_dim " << pair.embedding_dim << '\n';
    out << "condition_dim " << pair.condition_dim << '\n';
    out << "generator\n";
    nn::write_mlp(out, pair.generator);
    out << "discriminator\n";
    nn::write_mlp(out, pair.discriminator);
    csv::write_file(path, out.str());
}

CganPair load_cgan(const std::filesystem::path& path) {
    std::istringstream in(csv::read_file(path));
    expect_header(in, "asat-cgan v1");
    CganPair pair;
    pair.noise_dim = read_field(in, "noise_dim");
    pair.embedding_dim = read_field(in, "embedding_dim");
    pair.condition_dim = read_field(in, "condition_dim");
    std::string tag;
    if (!(in >> tag) || tag != "generator") {
        throw ParseError(path.string() + ": generator block missing");
    }
    pair.generator = nn::read_mlp(in);
    if (!(in >> tag) || tag != "discriminator") {
        throw ParseError(path.string() + ": discriminator block missing");
    }
    pair.discriminator = nn::read_mlp(in);
    if (pair.generator.input_size() != pair.noise_dim + pair.condition_dim ||
        pair.generator.output_size() != pair.embedding_dim ||
        pair.discriminator.input_size() != pair.embedding_dim + pair.condition_dim) {
        throw ParseError(path.string() + ": inconsistent cGAN shapes");
    }
    return pair;
}

}  // namespace asat::perception

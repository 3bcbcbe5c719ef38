#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "asat/graph.hpp"
#include "asat/ingest.hpp"
#include "asat/nn.hpp"

namespace asat::perception {

using nn::Matrix;
using nn::Vector;

inline constexpr std::size_t kDefaultEmbeddingDim = 32;
inline constexpr std::uint64_t kDefaultEmbeddingSeed = 0x5a7e11173ULL;
inline constexpr std::size_t kConditionDim = 10;

/// Raised when there are too few examples to train; callers fall back to
/// scoring posts directly with the lexicon.
class InsufficientData : public TrainingError {
public:
    using TrainingError::TrainingError;
};

enum class EmbeddingSource : std::uint8_t { Real, Synthetic };

struct PostEmbedding {
    Vector values;
    EmbeddingSource source = EmbeddingSource::Real;
};

/// Hashed bag of tokens projected through a seeded Gaussian matrix and
/// L2-normalized. The empty text maps to the zero vector.
PostEmbedding embed_post(std::string_view text, std::size_t dim = kDefaultEmbeddingDim,
                         std::uint64_t seed = kDefaultEmbeddingSeed);

class Lexicon {
public:
    /// Parses "token<TAB>weight" lines; '#' starts a comment line.
    static Lexicon parse(std::string_view tsv);
    /// The lexicon compiled into the library.
    static const Lexicon& bundled();

    std::optional<double> weight(std::string_view token) const;
    bool is_negator(std::string_view token) const;
    std::size_t size() const noexcept { return weights_.size(); }
    const std::map<std::string, double, std::less<>>& entries() const noexcept { return weights_; }

private:
    std::map<std::string, double, std::less<>> weights_;
};

/// Awareness in [0,1]: logistic of the mean matched lexicon weight, with
/// weights flipped and damped after a nearby negator. 0.5 when nothing
/// matches.
double sentiment_awareness(std::string_view text, const Lexicon& lexicon = Lexicon::bundled());

/// cGAN condition (a1, a2, o) for one area on one date.
struct Condition {
    std::array<double, 4> a1{};
    std::array<double, 4> a2{};
    LatLon o;

    /// Normalized a1 and a2 followed by lat/90 and lon/180.
    Vector to_vector() const;
};

Condition condition_for(const graph::Ahin& ahin, graph::NodeId node, Date date);

// ---------------------------------------------------------------- perception

struct PerceptionConfig {
    std::size_t hidden = 32;
    std::size_t epochs = 300;
    std::size_t batch_size = 32;
    double learning_rate = 5e-3;
    double holdout_fraction = 0.2;
    std::uint64_t seed = 7;
    std::size_t min_examples = 100;
};

/// Embedding -> awareness network with a final logistic squashing.
class PerceptionModel {
public:
    PerceptionModel() = default;
    explicit PerceptionModel(nn::Mlp net) : net_(std::move(net)) {}

    double score(const Vector& embedding) const;
    Vector score(const Matrix& embeddings) const;  // one column per post
    const nn::Mlp& network() const noexcept { return net_; }
    nn::Mlp& network() noexcept { return net_; }

private:
    nn::Mlp net_;
};

struct PerceptionReport {
    double train_mae = 0.0;
    double heldout_mae = 0.0;
    std::size_t train_size = 0;
    std::size_t heldout_size = 0;
    std::vector<double> loss_curve;
};

struct TrainedPerception {
    PerceptionModel model;
    PerceptionReport report;
};

/// Mean squared error of the squashed output, and its parameter gradient
/// when `grads` is non-null.
double perception_loss(const PerceptionModel& model, const Matrix& embeddings, const Vector& labels,
                       nn::Gradients* grads);

/// Throws InsufficientData below `config.min_examples` labeled embeddings.
TrainedPerception train_perception(const Matrix& embeddings, const Vector& labels,
                                   const PerceptionConfig& config);

// ----------------------------------------------------------------------- cGAN

struct CganConfig {
    std::size_t noise_dim = 8;
    std::size_t hidden = 64;
    double learning_rate = 1e-3;
    double beta1 = 0.5;
    std::size_t steps = 3000;
    std::size_t batch_size = 64;
    bool non_saturating = true;
    std::uint64_t seed = 7;
    std::size_t checkpoint_every = 100;
    std::size_t min_pairs = 200;
};

/// Generator G(z | c) and discriminator D(p | c), both one-hidden-layer
/// tanh networks. D returns a logit; probabilities go through strict_sigmoid.
struct CganPair {
    nn::Mlp generator;
    nn::Mlp discriminator;
    std::size_t noise_dim = 0;
    std::size_t embedding_dim = 0;
    std::size_t condition_dim = 0;

    static CganPair create(std::size_t noise_dim, std::size_t embedding_dim,
                           std::size_t condition_dim, std::size_t hidden, Rng& rng);

    /// One generated embedding per condition column.
    Matrix generate(const Matrix& noise, const Matrix& conditions) const;
    Matrix generate(const Matrix& conditions, Rng& rng) const;
    /// D(p | c) in (0, 1), one per column.
    Vector discriminate(const Matrix& embeddings, const Matrix& conditions) const;
};

struct CganLosses {
    std::vector<double> discriminator;
    std::vector<double> generator;
};

struct TrainedCgan {
    CganPair pair;
    CganLosses losses;
};

/// Training produced a non-finite loss; carries the last finite checkpoint.
class CganDivergence : public TrainingError {
public:
    CganDivergence(std::size_t step, CganPair last_stable)
        : TrainingError("cGAN diverged at step " + std::to_string(step)),
          step_(step),
          last_stable_(std::move(last_stable)) {}
    std::size_t step() const noexcept { return step_; }
    const CganPair& last_stable() const noexcept { return last_stable_; }

private:
    std::size_t step_;
    CganPair last_stable_;
};

/// -E[log D(p|c)] - E[log(1 - D(G(z|c')|c'))]; gradient w.r.t. D's
/// parameters when `grads` is non-null.
double discriminator_loss(const CganPair& pair, const Matrix& real, const Matrix& real_conditions,
                          const Matrix& noise, const Matrix& fake_conditions, nn::Gradients* grads);

/// -E[log D(G(z|c)|c)] (non-saturating) or E[log(1 - D(G(z|c)|c))];
/// gradient w.r.t. G's parameters when `grads` is non-null.
double generator_loss(const CganPair& pair, const Matrix& noise, const Matrix& conditions,
                      bool non_saturating, nn::Gradients* grads);

/// `embeddings` and `conditions` hold one training pair per column.
TrainedCgan train_cgan(const Matrix& embeddings, const Matrix& conditions, const CganConfig& config);

// ------------------------------------------------------------ area perception

enum class PerceptionSource : std::uint8_t { Real, Synthetic, Padded };
std::string_view to_string(PerceptionSource source) noexcept;
std::optional<PerceptionSource> parse_source(std::string_view text) noexcept;

struct AreaPerception {
    double value = 0.0;
    PerceptionSource source = PerceptionSource::Padded;
    std::size_t real_posts = 0;
};

struct AreaPerceptionOptions {
    std::size_t threshold = 5;     // real posts needed to skip synthesis
    std::size_t synth_count = 16;  // m
    std::uint64_t seed = 7;
};

/// Mean awareness of real posts when there are at least `threshold` of
/// them; otherwise the mean model score of `synth_count` embeddings drawn
/// from the cGAN under the area's condition. Falls back to the real mean
/// (if any) or a zero-padded value when no models are available.
AreaPerception area_perception(const graph::Ahin& ahin, graph::NodeId area, Date date,
                               std::span<const double> post_scores, const CganPair* cgan,
                               const PerceptionModel* model, const AreaPerceptionOptions& options);

/// Posts attached to areas: geo_id -> indices into the post list.
struct PostIndex {
    std::vector<ingest::RawPost> posts;
    std::vector<double> scores;  // lexicon awareness per post
    std::unordered_map<std::string, std::vector<std::size_t>> by_area;

    /// Posts for `geo_id` created within `window_days` days ending at `date`,
    /// ordered by (created, post_id).
    std::vector<std::size_t> posts_for(std::string_view geo_id, Date date, int window_days) const;
};

/// (post_id, geo_id) attributions produced by location extraction.
struct PostLocation {
    std::string post_id;
    std::string geo_id;
    bool ambiguous = false;
};

PostIndex index_posts(std::vector<ingest::RawPost> posts, const std::vector<PostLocation>& locations);

struct PerceptionEstimates {
    std::map<std::pair<std::string, Date>, AreaPerception> areas;

    graph::PerceptionTable table() const;
};

/// Perception for every node on every date of the network.
PerceptionEstimates estimate_perceptions(const graph::Ahin& ahin, const PostIndex& posts,
                                         const CganPair* cgan, const PerceptionModel* model,
                                         const AreaPerceptionOptions& options, int window_days);

std::string write_estimates(const PerceptionEstimates& estimates);
PerceptionEstimates read_estimates(std::string_view csv_text);

// Checkpoints: versioned text files.
void save_perception_model(const PerceptionModel& model, const std::filesystem::path& path);
PerceptionModel load_perception_model(const std::filesystem::path& path);
void save_cgan(const CganPair& pair, const std::filesystem::path& path);
CganPair load_cgan(const std::filesystem::path& path);

}  // namespace asat::perception

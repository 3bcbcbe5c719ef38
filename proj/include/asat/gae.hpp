#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "asat/graph.hpp"
#include "asat/nn.hpp"

namespace asat::gae {

using nn::Matrix;
using nn::Vector;
using graph::NodeId;
using graph::Relation;

/// One d_a x d_a matrix per relation type.
struct RelationMatrices {
    std::array<Matrix, graph::kRelationCount> r;

    /// Entries drawn from N(0, std^2).
    static RelationMatrices random(std::size_t dim, double std, Rng& rng);
    static RelationMatrices identity(std::size_t dim);

    std::size_t dim() const { return static_cast<std::size_t>(r[0].rows()); }
    const Matrix& operator[](Relation rel) const { return r[static_cast<std::size_t>(rel)]; }
    Matrix& operator[](Relation rel) { return r[static_cast<std::size_t>(rel)]; }
    bool finite() const;

    friend bool operator==(const RelationMatrices&, const RelationMatrices&) = default;
};

/// beta = a_v^T R a_u. Throws InvalidArgument on a dimension mismatch.
double attention_raw(const Vector& a_v, const Vector& a_u, const Matrix& r);

/// Raised for an empty neighborhood; encode() leaves such nodes unchanged.
class NoNeighbors : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

struct AttentionWeights {
    std::vector<double> raw;
    std::vector<double> normalized;  // softmax of raw
};

/// Softmax of the raw weights over `neighbors` (one vector each).
AttentionWeights attention_normalized(const Vector& a_v, std::span<const Vector> neighbors,
                                      const Matrix& r);

/// sum_u w_u a_u.
Vector aggregate_neighbors(std::span<const Vector> neighbors, std::span<const double> weights);

/// (a_v + a_N) / 2.
Vector combine(const Vector& a_v, const Vector& a_n);

/// sigmoid(a_v . a_u).
double decode_link(const Vector& a_v, const Vector& a_u);

/// Node features on one date (normalized, one column per node) together
/// with each node's guided neighborhood.
struct EncoderInput {
    Matrix features;
    std::vector<std::vector<NodeId>> neighbors;
    Relation relation = Relation::Near;
};

EncoderInput encoder_input(const graph::Ahin& ahin, Date date);

struct EncoderState {
    Matrix input;
    Matrix aggregate;  // a_N(v); equals the input column when N(v) is empty
    Matrix output;
    std::vector<AttentionWeights> attention;
};

EncoderState encode(const EncoderInput& input, const RelationMatrices& relations);

struct LinkSample {
    NodeId a = 0;
    NodeId b = 0;
    double label = 0.0;
};

/// Mean binary cross-entropy of the decoder over `samples` after one
/// encoding pass; the gradient w.r.t. each relation matrix is written to
/// `grads` when non-null.
double link_loss(const EncoderInput& input, const RelationMatrices& relations,
                 std::span<const LinkSample> samples, RelationMatrices* grads);

/// `count` pairs drawn uniformly from same-level node pairs that are not
/// near-adjacent in `ahin`.
std::vector<std::pair<NodeId, NodeId>> sample_negatives(const graph::Ahin& ahin, std::size_t count,
                                                        Rng& rng);

struct GaeConfig {
    std::size_t epochs = 200;
    double learning_rate = 1e-2;
    double init_std = 0.1;
    std::uint64_t seed = 7;
};

struct TrainedGae {
    RelationMatrices relations;
    std::vector<double> loss_curve;
    Date date;
    /// Encoded representations under the trained matrices; the raw input
    /// features when no epoch ran.
    Matrix representations;
};

/// Trains on the near edges present on `date` (default: latest). Throws
/// InvalidArgument when the network has no near edges.
TrainedGae train_gae(const graph::Ahin& ahin, const GaeConfig& config,
                     std::optional<Date> date = std::nullopt);

/// Mann-Whitney AUC; ties count one half.
double link_auc(std::span<const double> positive, std::span<const double> negative);

/// Near edges withheld for evaluation, and as many non-adjacent pairs.
struct LinkSplit {
    graph::Ahin train;
    std::vector<std::pair<NodeId, NodeId>> held_out;
    std::vector<std::pair<NodeId, NodeId>> negatives;
};

LinkSplit split_links(const graph::Ahin& ahin, double fraction, std::uint64_t seed);

/// R_<relation>.csv per relation: a "relation,<name>,d_a,<n>" header line
/// followed by the matrix rows.
void save_relations(const RelationMatrices& relations, const std::filesystem::path& dir);
RelationMatrices load_relations(const std::filesystem::path& dir);

}  // namespace asat::gae

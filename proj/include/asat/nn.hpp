#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "asat/common.hpp"

namespace asat::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation : std::uint8_t { Identity, Tanh, Sigmoid };

std::string_view to_string(Activation activation) noexcept;

/// Logistic function clamped to the open interval (0, 1).
double strict_sigmoid(double x) noexcept;
/// log(1 + exp(x)) without overflow.
double softplus(double x) noexcept;

struct Dense {
    Matrix weight;  // out x in
    Vector bias;    // out
    Activation activation = Activation::Identity;
};

/// Parameter gradients with the same shapes as the network's layers.
struct Gradients {
    std::vector<Matrix> weight;
    std::vector<Vector> bias;

    std::vector<double> flatten() const;
};

/// Fully connected network; samples are matrix columns.
class Mlp {
public:
    Mlp() = default;
    /// `sizes` = input, hidden..., output; one activation per layer.
    Mlp(const std::vector<std::size_t>& sizes, const std::vector<Activation>& activations, Rng& rng);

    struct Tape {
        std::vector<Matrix> inputs;   // input of each layer
        std::vector<Matrix> outputs;  // activated output of each layer
    };

    Matrix forward(const Matrix& x) const;
    Matrix forward(const Matrix& x, Tape& tape) const;
    /// Propagates dL/d(output) back through the tape. Parameter gradients are
    /// accumulated into `grads`; returns dL/d(input).
    Matrix backward(const Tape& tape, const Matrix& grad_output, Gradients& grads) const;

    Gradients zero_gradients() const;
    std::size_t input_size() const;
    std::size_t output_size() const;
    std::size_t parameter_count() const;
    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> values);
    bool finite() const;

    const std::vector<Dense>& layers() const noexcept { return layers_; }
    std::vector<Dense>& layers() noexcept { return layers_; }

    friend bool operator==(const Mlp& a, const Mlp& b);

private:
    std::vector<Dense> layers_;
};

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

class Adam {
public:
    Adam(const Mlp& net, AdamConfig config);
    void step(Mlp& net, const Gradients& grads);

private:
    AdamConfig config_;
    Gradients m_;
    Gradients v_;
    long t_ = 0;
};

/// Adam over a flat parameter vector.
class FlatAdam {
public:
    FlatAdam(std::size_t size, AdamConfig config);
    void step(std::span<double> params, std::span<const double> grads);

private:
    AdamConfig config_;
    std::vector<double> m_;
    std::vector<double> v_;
    long t_ = 0;
};

/// Text block: "mlp <layers>" then per layer "dense <in> <out> <activation>"
/// followed by weight rows and the bias row. Values round-trip exactly.
void write_mlp(std::ostream& out, const Mlp& net);
Mlp read_mlp(std::istream& in);

/// Central finite-difference gradient of `loss` with respect to every
/// parameter of `net`.
template <class LossFn>
std::vector<double> numeric_gradient(Mlp& net, LossFn&& loss, double step = 1e-6) {
    auto params = net.parameters();
    std::vector<double> grad(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + step;
        net.set_parameters(params);
        const double up = loss();
        params[i] = saved - step;
        net.set_parameters(params);
        const double down = loss();
        params[i] = saved;
        grad[i] = (up - down) / (2.0 * step);
    }
    net.set_parameters(params);
    return grad;
}

/// max_i |a_i - b_i| / max(|a_i|, |b_i|), skipping entries where both are
/// below `floor` in magnitude (those are compared absolutely against `floor`).
double max_relative_error(std::span<const double> analytic, std::span<const double> numeric,
                          double floor = 1e-9);

}  // namespace asat::nn

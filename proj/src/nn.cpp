#include "asat/nn.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace asat::nn {

std::string_view to_string(Activation activation) noexcept {
    switch (activation) {
        case Activation::Identity: return "identity";
        case Activation::Tanh: return "tanh";
        case Activation::Sigmoid: return "sigmoid";
    }
    return "identity";
}

namespace {

Activation parse_activation(std::string_view text) {
    if (text == "identity") return Activation::Identity;
    if (text == "tanh") return Activation::Tanh;
    if (text == "sigmoid") return Activation::Sigmoid;
    throw ParseError("unknown activation '" + std::string(text) + "'");
}

Matrix activate(const Matrix& z, Activation act) {
    switch (act) {
        case Activation::Identity: return z;
        case Activation::Tanh: return z.array().tanh().matrix();
        case Activation::Sigmoid: return z.unaryExpr([](double v) { return strict_sigmoid(v); });
    }
    return z;
}

// Derivative expressed through the activated output.
Matrix activation_derivative(const Matrix& out, Activation act) {
    switch (act) {
        case Activation::Identity: return Matrix::Ones(out.rows(), out.cols());
        case Activation::Tanh: return (1.0 - out.array().square()).matrix();
        case Activation::Sigmoid: return (out.array() * (1.0 - out.array())).matrix();
    }
    return Matrix::Ones(out.rows(), out.cols());
}

}  // namespace

double strict_sigmoid(double x) noexcept {
    constexpr double kLow = std::numeric_limits<double>::min();
    constexpr double kHigh = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
    const double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    if (std::isnan(s)) {
        return 0.5;
    }
    return std::clamp(s, kLow, kHigh);
}

double softplus(double x) noexcept {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

std::vector<double> Gradients::flatten() const {
    std::vector<double> out;
    for (std::size_t l = 0; l < weight.size(); ++l) {
        out.insert(out.end(), weight[l].data(), weight[l].data() + weight[l].size());
        out.insert(out.end(), bias[l].data(), bias[l].data() + bias[l].size());
    }
    return out;
}

Mlp::Mlp(const std::vector<std::size_t>& sizes, const std::vector<Activation>& activations,
         Rng& rng) {
    if (sizes.size() < 2 || activations.size() != sizes.size() - 1) {
        throw InvalidArgument("an MLP needs one activation per layer");
    }
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        Dense layer;
        const auto in = static_cast<Eigen::Index>(sizes[l]);
        const auto out = static_cast<Eigen::Index>(sizes[l + 1]);
        // Glorot normal initialization.
        const double scale = std::sqrt(2.0 / static_cast<double>(in + out));
        layer.weight = Matrix(out, in);
        for (Eigen::Index c = 0; c < in; ++c) {
            for (Eigen::Index r = 0; r < out; ++r) {
                layer.weight(r, c) = rng.normal() * scale;
            }
        }
        layer.bias = Vector::Zero(out);
        layer.activation = activations[l];
        layers_.push_back(std::move(layer));
    }
}

Matrix Mlp::forward(const Matrix& x) const {
    Matrix h = x;
    for (const auto& layer : layers_) {
        Matrix z = layer.weight * h;
        z.colwise() += layer.bias;
        h = activate(z, layer.activation);
    }
    return h;
}

Matrix Mlp::forward(const Matrix& x, Tape& tape) const {
    tape.inputs.clear();
    tape.outputs.clear();
    Matrix h = x;
    for (const auto& layer : layers_) {
        tape.inputs.push_back(h);
        Matrix z = layer.weight * h;
        z.colwise() += layer.bias;
        h = activate(z, layer.activation);
        tape.outputs.push_back(h);
    }
    return h;
}

Matrix Mlp::backward(const Tape& tape, const Matrix& grad_output, Gradients& grads) const {
    Matrix grad = grad_output;
    for (std::size_t i = layers_.size(); i-- > 0;) {
        const auto& layer = layers_[i];
        const Matrix dz = grad.cwiseProduct(activation_derivative(tape.outputs[i], layer.activation));
        grads.weight[i] += dz * tape.inputs[i].transpose();
        grads.bias[i] += dz.rowwise().sum();
        grad = layer.weight.transpose() * dz;
    }
    return grad;
}

Gradients Mlp::zero_gradients() const {
    Gradients g;
    for (const auto& layer : layers_) {
        g.weight.push_back(Matrix::Zero(layer.weight.rows(), layer.weight.cols()));
        g.bias.push_back(Vector::Zero(layer.bias.size()));
    }
    return g;
}

std::size_t Mlp::input_size() const {
    return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.front().weight.cols());
}

std::size_t Mlp::output_size() const {
    return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.back().weight.rows());
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers_) {
        n += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
    }
    return n;
}

std::vector<double> Mlp::parameters() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const auto& layer : layers_) {
        out.insert(out.end(), layer.weight.data(), layer.weight.data() + layer.weight.size());
        out.insert(out.end(), layer.bias.data(), layer.bias.data() + layer.bias.size());
    }
    return out;
}

void Mlp::set_parameters(std::span<const double> values) {
    if (values.size() != parameter_count()) {
        throw InvalidArgument("parameter vector has the wrong size");
    }
    std::size_t pos = 0;
    for (auto& layer : layers_) {
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(pos), layer.weight.size(),
                    layer.weight.data());
        pos += static_cast<std::size_t>(layer.weight.size());
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(pos), layer.bias.size(),
                    layer.bias.data());
        pos += static_cast<std::size_t>(layer.bias.size());
    }
}

bool Mlp::finite() const {
    for (const auto& layer : layers_) {
        if (!layer.weight.allFinite() || !layer.bias.allFinite()) {
            return false;
        }
    }
    return true;
}

bool operator==(const Mlp& a, const Mlp& b) {
    if (a.layers_.size() != b.layers_.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.layers_.size(); ++i) {
        const auto& x = a.layers_[i];
        const auto& y = b.layers_[i];
        if (x.activation != y.activation || x.weight.rows() != y.weight.rows() ||
            x.weight.cols() != y.weight.cols() || x.weight != y.weight || x.bias != y.bias) {
            return false;
        }
    }
    return true;
}

Adam::Adam(const Mlp& net, AdamConfig config)
    : config_(config), m_(net.zero_gradients()), v_(net.zero_gradients()) {}

void Adam::step(Mlp& net, const Gradients& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
        m = config_.beta1 * m + (1.0 - config_.beta1) * g;
        v = config_.beta2 * v + (1.0 - config_.beta2) * g.cwiseProduct(g);
        param.array() -= config_.learning_rate * (m.array() / c1) /
                         ((v.array() / c2).sqrt() + config_.epsilon);
    };
    auto& layers = net.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        update(layers[l].weight, grads.weight[l], m_.weight[l], v_.weight[l]);
        update(layers[l].bias, grads.bias[l], m_.bias[l], v_.bias[l]);
    }
}

FlatAdam::FlatAdam(std::size_t size, AdamConfig config)
    : config_(config), m_(size, 0.0), v_(size, 0.0) {}

void FlatAdam::step(std::span<double> params, std::span<const double> grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grads[i];
        v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grads[i] * grads[i];
        params[i] -= config_.learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + config_.epsilon);
    }
}

void write_mlp(std::ostream& out, const Mlp& net) {
    out << "mlp " << net.layers().size() << '\n';
    for (const auto& layer : net.layers()) {
        out << "dense " << layer.weight.cols() << ' ' << layer.weight.rows() << ' '
            << to_string(layer.activation) << '\n';
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
                out << (c ? " " : "") << format_double(layer.weight(r, c));
            }
            out << '\n';
        }
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
            out << (r ? " " : "") << format_double(layer.bias(r));
        }
        out << '\n';
    }
}

Mlp read_mlp(std::istream& in) {
    std::string tag;
    std::size_t count = 0;
    if (!(in >> tag >> count) || tag != "mlp") {
        throw ParseError("expected an 'mlp' block");
    }
    Mlp net;
    for (std::size_t l = 0; l < count; ++l) {
        std::string dense;
        Eigen::Index cols = 0, rows = 0;
        std::string act;
        if (!(in >> dense >> cols >> rows >> act) || dense != "dense" || cols <= 0 || rows <= 0) {
            throw ParseError("malformed dense layer header");
        }
        Dense layer;
        layer.activation = parse_activation(act);
        layer.weight = Matrix(rows, cols);
        layer.bias = Vector(rows);
        auto read_value = [&]() {
            std::string token;
            if (!(in >> token)) {
                throw ParseError("truncated weight block");
            }
            return std::stod(token);
        };
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) {
                layer.weight(r, c) = read_value();
            }
        }
        for (Eigen::Index r = 0; r < rows; ++r) {
            layer.bias(r) = read_value();
        }
        net.layers().push_back(std::move(layer));
    }
    return net;
}

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric,
                          double floor) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double a = analytic[i];
        const double n = numeric[i];
        const double scale = std::max(std::abs(a), std::abs(n));
        const double err = scale < floor ? std::abs(a - n) / floor : std::abs(a - n) / scale;
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace asat::nn

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "numfmt.hpp"

namespace tflow {

enum class Activation { identity, relu, leaky_relu, sigmoid, tanh_scaled };

inline constexpr double kLeakySlope = 0.01;

/// Per-layer activation. `scale` is the output bound for tanh_scaled and is
/// ignored otherwise.
struct ActivationSpec {
    Activation kind = Activation::identity;
    double scale = 1.0;

    static ActivationSpec tanh_bounded(double gamma) { return {Activation::tanh_scaled, gamma}; }
    friend bool operator==(const ActivationSpec&, const ActivationSpec&) = default;
};

inline double activate(const ActivationSpec& a, double u) {
    switch (a.kind) {
        case Activation::identity: return u;
        case Activation::relu: return u > 0.0 ? u : 0.0;
        case Activation::leaky_relu: return u > 0.0 ? u : kLeakySlope * u;
        case Activation::sigmoid:
            return u >= 0.0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
        case Activation::tanh_scaled: {
            const double y = a.scale * std::tanh(u);
            // Keep the output strictly inside (-scale, scale) even when tanh rounds to 1.
            if (std::abs(y) >= a.scale) return std::nextafter(std::copysign(a.scale, y), 0.0);
            return y;
        }
    }
    return u;
}

/// d activate / du, expressed through the pre-activation u and output y.
inline double activate_derivative(const ActivationSpec& a, double u, double y) {
    switch (a.kind) {
        case Activation::identity: return 1.0;
        case Activation::relu: return u > 0.0 ? 1.0 : 0.0;
        case Activation::leaky_relu: return u > 0.0 ? 1.0 : kLeakySlope;
        case Activation::sigmoid: return y * (1.0 - y);
        case Activation::tanh_scaled: {
            const double t = std::tanh(u);
            return a.scale * (1.0 - t * t);
        }
    }
    return 1.0;
}

inline std::string to_string(const ActivationSpec& a) {
    switch (a.kind) {
        case Activation::identity: return "identity";
        case Activation::relu: return "relu";
        case Activation::leaky_relu: return "leaky_relu";
        case Activation::sigmoid: return "sigmoid";
        case Activation::tanh_scaled: return "tanh_scaled:" + exact_double(a.scale);
    }
    return "identity";
}

inline ActivationSpec parse_activation(const std::string& s) {
    if (s == "identity") return {Activation::identity};
    if (s == "relu") return {Activation::relu};
    if (s == "leaky_relu") return {Activation::leaky_relu};
    if (s == "sigmoid") return {Activation::sigmoid};
    if (s.starts_with("tanh_scaled:")) {
        double g;
        if (parse_double(std::string_view(s).substr(12), g) && g > 0) return ActivationSpec::tanh_bounded(g);
    }
    throw FormatError("unknown activation '" + s + "'");
}

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t step = 0;
};

struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Fully connected network with a scalar output. Parameters are stored flat:
/// for each layer, the row-major (out x in) weight matrix followed by the bias.
class DenseNet {
public:
    DenseNet() = default;
    DenseNet(std::vector<int> layer_sizes, std::vector<ActivationSpec> activations)
        : sizes_(std::move(layer_sizes)), acts_(std::move(activations)) {
        if (sizes_.size() < 2) throw ConfigError("network needs at least an input and an output layer");
        if (acts_.size() != sizes_.size() - 1) throw ConfigError("one activation per layer transition required");
        if (sizes_.back() != 1) throw ConfigError("only scalar-output networks are supported");
        std::size_t total = 0;
        for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
            if (sizes_[l] < 1 || sizes_[l + 1] < 1) throw ConfigError("layer sizes must be positive");
            offsets_.push_back(total);
            total += static_cast<std::size_t>(sizes_[l + 1]) * (sizes_[l] + 1);
        }
        params_.assign(total, 0.0);
        adam_.m.assign(total, 0.0);
        adam_.v.assign(total, 0.0);
    }

    /// Glorot-uniform weights, zero biases.
    void init_glorot(std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        for (std::size_t l = 0; l < layer_count(); ++l) {
            const double limit = std::sqrt(6.0 / (sizes_[l] + sizes_[l + 1]));
            std::uniform_real_distribution<double> dist(-limit, limit);
            auto w = weights(l);
            for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = dist(rng);
            biases(l).setZero();
        }
        touch();
    }

    std::size_t layer_count() const { return acts_.size(); }
    int input_size() const { return sizes_.front(); }
    const std::vector<int>& layer_sizes() const { return sizes_; }
    const std::vector<ActivationSpec>& activations() const { return acts_; }
    std::size_t parameter_count() const { return params_.size(); }

    std::span<const double> parameters() const { return params_; }
    /// Mutable parameter access invalidates outstanding forward caches.
    std::span<double> mutable_parameters() {
        touch();
        return params_;
    }

    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const RowMajor> weights(std::size_t l) const {
        return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
    }
    Eigen::Map<const Eigen::VectorXd> biases(std::size_t l) const {
        return {params_.data() + offsets_[l] + static_cast<std::size_t>(sizes_[l + 1]) * sizes_[l], sizes_[l + 1]};
    }

    const AdamState& adam() const { return adam_; }
    AdamState& mutable_adam() { return adam_; }

    /// Incremented whenever parameters may have changed.
    std::uint64_t version() const { return version_; }

    friend void write_densenet(std::ostream&, const DenseNet&);
    friend DenseNet read_densenet(std::istream&);

private:
    Eigen::Map<RowMajor> weights(std::size_t l) {
        return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
    }
    Eigen::Map<Eigen::VectorXd> biases(std::size_t l) {
        return {params_.data() + offsets_[l] + static_cast<std::size_t>(sizes_[l + 1]) * sizes_[l], sizes_[l + 1]};
    }
    void touch() { ++version_; }

    std::vector<int> sizes_;
    std::vector<ActivationSpec> acts_;
    std::vector<std::size_t> offsets_;
    std::vector<double> params_;
    AdamState adam_;
    std::uint64_t version_ = 0;
};

/// Activations recorded by a forward pass; `values[0]` is the input.
struct ForwardCache {
    std::vector<Eigen::VectorXd> values;
    std::vector<Eigen::VectorXd> pre;
    const DenseNet* net = nullptr;
    std::uint64_t version = 0;
};

struct ForwardResult {
    double output = 0.0;
    ForwardCache cache;
};

inline ForwardResult forward(const DenseNet& net, std::span<const double> input) {
    if (static_cast<int>(input.size()) != net.input_size())
        throw ConfigError("network input has " + std::to_string(input.size()) + " values, expected " +
                          std::to_string(net.input_size()));
    ForwardResult r;
    r.cache.net = &net;
    r.cache.version = net.version();
    r.cache.values.emplace_back(Eigen::Map<const Eigen::VectorXd>(input.data(), input.size()));
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        Eigen::VectorXd u = net.weights(l) * r.cache.values.back() + net.biases(l);
        Eigen::VectorXd y(u.size());
        for (Eigen::Index k = 0; k < u.size(); ++k) y(k) = activate(net.activations()[l], u(k));
        r.cache.pre.push_back(std::move(u));
        r.cache.values.push_back(std::move(y));
    }
    r.output = r.cache.values.back()(0);
    return r;
}

/// Evaluates many inputs at once. `inputs` holds one sample per column.
inline Eigen::VectorXd forward_batch(const DenseNet& net, const Eigen::MatrixXd& inputs) {
    if (inputs.rows() != net.input_size()) throw ConfigError("batch input dimension mismatch");
    Eigen::MatrixXd cur = inputs;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        Eigen::MatrixXd u = net.weights(l) * cur;
        u.colwise() += net.biases(l);
        const auto& act = net.activations()[l];
        cur = u.unaryExpr([&act](double v) { return activate(act, v); });
    }
    return cur.row(0).transpose();
}

struct Gradients {
    std::vector<double> parameters;
    std::vector<double> input;
};

/// Adds upstream * d(output)/d(theta) into `param_grad` and returns d(output)/d(input) * upstream.
inline Eigen::VectorXd backward_accumulate(const DenseNet& net, double upstream, const ForwardCache& cache,
                                           std::span<double> param_grad) {
    if (cache.net != &net || cache.version != net.version())
        throw PreconditionError("forward cache is stale or belongs to another network");
    if (param_grad.size() != net.parameter_count()) throw ConfigError("gradient buffer has wrong size");
    std::size_t offset = 0;
    std::vector<std::size_t> offsets;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        offsets.push_back(offset);
        offset += static_cast<std::size_t>(net.layer_sizes()[l + 1]) * (net.layer_sizes()[l] + 1);
    }
    Eigen::VectorXd delta = Eigen::VectorXd::Constant(1, upstream);
    for (std::size_t l = net.layer_count(); l-- > 0;) {
        const auto& act = net.activations()[l];
        const Eigen::VectorXd& u = cache.pre[l];
        const Eigen::VectorXd& y = cache.values[l + 1];
        for (Eigen::Index k = 0; k < delta.size(); ++k) delta(k) *= activate_derivative(act, u(k), y(k));
        const int out = net.layer_sizes()[l + 1], in = net.layer_sizes()[l];
        Eigen::Map<DenseNet::RowMajor> gw(param_grad.data() + offsets[l], out, in);
        Eigen::Map<Eigen::VectorXd> gb(param_grad.data() + offsets[l] + static_cast<std::size_t>(out) * in, out);
        gw.noalias() += delta * cache.values[l].transpose();
        gb += delta;
        delta = net.weights(l).transpose() * delta;
    }
    return delta;
}

inline Gradients backward(const DenseNet& net, double upstream, const ForwardCache& cache) {
    Gradients g;
    g.parameters.assign(net.parameter_count(), 0.0);
    Eigen::VectorXd in = backward_accumulate(net, upstream, cache, g.parameters);
    g.input.assign(in.data(), in.data() + in.size());
    return g;
}

/// One bias-corrected ADAM update.
inline void adam_step(DenseNet& net, std::span<const double> grads, double lr, const AdamParams& hp = {}) {
    if (grads.size() != net.parameter_count()) throw ConfigError("gradient size does not match parameters");
    AdamState& st = net.mutable_adam();
    st.step += 1;
    const double c1 = 1.0 - std::pow(hp.beta1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(hp.beta2, static_cast<double>(st.step));
    auto params = net.mutable_parameters();
    for (std::size_t k = 0; k < params.size(); ++k) {
        const double g = grads[k];
        st.m[k] = hp.beta1 * st.m[k] + (1.0 - hp.beta1) * g;
        st.v[k] = hp.beta2 * st.v[k] + (1.0 - hp.beta2) * g * g;
        const double mhat = st.m[k] / c1;
        const double vhat = st.v[k] / c2;
        params[k] -= lr * mhat / (std::sqrt(vhat) + hp.epsilon);
    }
}

// Checkpoint layout (text, one record per line, numbers in shortest exact form):
//   tflow-densenet 1
//   layers <n> <size_0> ... <size_n-1>
//   activations <n-1> <name> ...          (tanh_scaled carries ":<gamma>")
//   params <count>
//   <value>                                 x count
//   adam <step>
//   <m> <v>                                 x count
inline void write_densenet(std::ostream& os, const DenseNet& net) {
    os << "tflow-densenet 1\n";
    os << "layers " << net.sizes_.size();
    for (int s : net.sizes_) os << ' ' << s;
    os << "\nactivations " << net.acts_.size();
    for (const auto& a : net.acts_) os << ' ' << to_string(a);
    os << "\nparams " << net.params_.size() << '\n';
    for (double p : net.params_) os << exact_double(p) << '\n';
    os << "adam " << net.adam_.step << '\n';
    for (std::size_t k = 0; k < net.params_.size(); ++k)
        os << exact_double(net.adam_.m[k]) << ' ' << exact_double(net.adam_.v[k]) << '\n';
}

inline DenseNet read_densenet(std::istream& is) {
    auto expect = [&](const std::string& word) {
        std::string tok;
        if (!(is >> tok) || tok != word) throw FormatError("densenet checkpoint: expected '" + word + "'");
    };
    auto read_number = [&]() {
        std::string tok;
        double v;
        if (!(is >> tok) || !parse_double(tok, v)) throw FormatError("densenet checkpoint: bad number '" + tok + "'");
        return v;
    };
    expect("tflow-densenet");
    if (read_number() != 1) throw FormatError("densenet checkpoint: unsupported version");
    expect("layers");
    std::vector<int> sizes(static_cast<std::size_t>(read_number()));
    for (int& s : sizes) s = static_cast<int>(read_number());
    expect("activations");
    std::vector<ActivationSpec> acts(static_cast<std::size_t>(read_number()));
    for (auto& a : acts) {
        std::string tok;
        is >> tok;
        a = parse_activation(tok);
    }
    DenseNet net(sizes, acts);
    expect("params");
    if (static_cast<std::size_t>(read_number()) != net.parameter_count())
        throw FormatError("densenet checkpoint: parameter count does not match layers");
    for (double& p : net.params_) p = read_number();
    expect("adam");
    net.adam_.step = static_cast<std::int64_t>(read_number());
    for (std::size_t k = 0; k < net.params_.size(); ++k) {
        net.adam_.m[k] = read_number();
        net.adam_.v[k] = read_number();
    }
    return net;
}

inline void save_densenet(const std::string& path, const DenseNet& net) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot write " + path);
    write_densenet(os, net);
}

inline DenseNet load_densenet(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open " + path);
    return read_densenet(is);
}

}  // namespace tflow

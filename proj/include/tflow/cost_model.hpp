#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "flow.hpp"
#include "nnet.hpp"
#include "numfmt.hpp"
#include "tracklet_features.hpp"

namespace tflow {

inline constexpr int kUnaryInputs = 8;
inline constexpr int kPairwiseInputs = PairwiseFeature::dimension;

/// Per-dimension z-score, fitted once and then frozen. Dimensions with no
/// spread pass through unchanged.
class Standardizer {
public:
    bool fitted() const { return fitted_; }
    const std::vector<double>& mean() const { return mean_; }
    const std::vector<double>& scale() const { return scale_; }

    void fit(const std::vector<std::vector<double>>& rows, std::size_t dim) {
        if (fitted_) throw PreconditionError("standardization is already fitted");
        mean_.assign(dim, 0.0);
        scale_.assign(dim, 1.0);
        if (!rows.empty()) {
            const double n = static_cast<double>(rows.size());
            std::vector<double> sq(dim, 0.0);
            for (const auto& r : rows)
                for (std::size_t k = 0; k < dim; ++k) mean_[k] += r[k] / n;
            for (const auto& r : rows)
                for (std::size_t k = 0; k < dim; ++k) sq[k] += (r[k] - mean_[k]) * (r[k] - mean_[k]) / n;
            for (std::size_t k = 0; k < dim; ++k) {
                const double sd = std::sqrt(sq[k]);
                if (sd < 1e-12) {
                    mean_[k] = 0.0;
                    scale_[k] = 1.0;
                } else {
                    scale_[k] = sd;
                }
            }
        }
        fitted_ = true;
    }

    void set(std::vector<double> mean, std::vector<double> scale) {
        mean_ = std::move(mean);
        scale_ = std::move(scale);
        fitted_ = true;
    }

    template <std::size_t N>
    std::array<double, N> apply(std::array<double, N> v) const {
        if (!fitted_) return v;
        for (std::size_t k = 0; k < N; ++k) v[k] = (v[k] - mean_[k]) / scale_[k];
        return v;
    }

private:
    bool fitted_ = false;
    std::vector<double> mean_;
    std::vector<double> scale_;
};

/// Raw unary network input. The first three entries are the median humanity,
/// median det score and (log) length; the rest are min/mean statistics and a
/// constant.
inline std::array<double, kUnaryInputs> unary_raw_input(const UnaryFeature& f) {
    return {f.median_humanity, f.median_det_score, std::log(f.length),  f.min_humanity,
            f.min_det_score,   f.mean_humanity,    f.mean_det_score,    1.0};
}

/// Raw pairwise network input; lengths and dt are log-transformed.
inline std::array<double, kPairwiseInputs> pairwise_raw_input(const PairwiseFeature& f) {
    auto v = f.values();
    v[15] = std::log(f.len_i);
    v[16] = std::log(f.len_j);
    v[17] = std::log(f.dt);
    return v;
}

struct CostModelParams {
    double beta = 0.7;
    double gamma = 5.0;
    std::vector<int> unary_hidden{4};
    std::vector<int> pairwise_hidden{256, 256};
    std::uint64_t seed = 1;
    /// Multiplies the Glorot-drawn output-layer weights.
    double output_init_scale = 1.0;
};

/// Edge-cost model: det costs from the unary net, link costs from the pairwise
/// net, both bounded to (-gamma, gamma); init/term costs are the constant beta.
struct CostModel {
    DenseNet unary_net;
    DenseNet pairwise_net;
    double beta = 0.7;
    double gamma = 5.0;
    Standardizer unary_stats;
    Standardizer pairwise_stats;

    std::array<double, kUnaryInputs> unary_input(const UnaryFeature& f) const {
        return unary_stats.apply(unary_raw_input(f));
    }
    std::array<double, kPairwiseInputs> pairwise_input(const PairwiseFeature& f) const {
        return pairwise_stats.apply(pairwise_raw_input(f));
    }
};

inline DenseNet make_bounded_net(int inputs, const std::vector<int>& hidden, double gamma) {
    std::vector<int> sizes{inputs};
    std::vector<ActivationSpec> acts;
    for (int h : hidden) {
        sizes.push_back(h);
        acts.push_back({Activation::leaky_relu});
    }
    sizes.push_back(1);
    acts.push_back(ActivationSpec::tanh_bounded(gamma));
    return DenseNet(sizes, acts);
}

/// Scales the weights feeding the output unit, leaving hidden layers alone.
inline void scale_output_layer(DenseNet& net, double factor) {
    const auto& sizes = net.layer_sizes();
    const std::size_t last = static_cast<std::size_t>(sizes[sizes.size() - 2]) + 1;
    auto p = net.mutable_parameters();
    for (std::size_t k = p.size() - last; k + 1 < p.size(); ++k) p[k] *= factor;
}

inline CostModel make_cost_model(const CostModelParams& p = {}) {
    if (!(p.gamma > 0.0)) throw ConfigError("gamma must be positive");
    if (p.beta < -p.gamma / 2 || p.beta > p.gamma / 2) throw ConfigError("beta must lie in [-gamma/2, gamma/2]");
    CostModel m{make_bounded_net(kUnaryInputs, p.unary_hidden, p.gamma),
                make_bounded_net(kPairwiseInputs, p.pairwise_hidden, p.gamma), p.beta, p.gamma, {}, {}};
    m.unary_net.init_glorot(p.seed);
    m.pairwise_net.init_glorot(p.seed + 1);
    if (p.output_init_scale != 1.0) {
        scale_output_layer(m.unary_net, p.output_init_scale);
        scale_output_layer(m.pairwise_net, p.output_init_scale);
    }
    return m;
}

inline double unary_cost(const CostModel& m, const UnaryFeature& f) {
    const auto in = m.unary_input(f);
    return forward(m.unary_net, in).output;
}

inline double pairwise_cost(const CostModel& m, const PairwiseFeature& f) {
    const auto in = m.pairwise_input(f);
    return forward(m.pairwise_net, in).output;
}

/// Features of every det edge (per node) and link edge (in link order) of a graph.
struct GraphFeatures {
    std::vector<UnaryFeature> unary;
    std::vector<PairwiseFeature> pairwise;
};

/// `tracklets` and `motions` are indexed by tracklet id.
inline GraphFeatures compute_graph_features(const FlowGraph& g, const std::vector<Tracklet>& tracklets,
                                            const std::vector<TrackletMotion>& motions,
                                            const FeatureParams& params = {}) {
    GraphFeatures f;
    for (int id : g.nodes) f.unary.push_back(unary_feature(tracklets.at(id)));
    for (std::size_t k = g.first_link(); k < g.edges.size(); ++k) {
        const int a = g.nodes[g.edges[k].from], b = g.nodes[g.edges[k].to];
        f.pairwise.push_back(pairwise_feature(tracklets[a], motions[a], tracklets[b], motions[b], params));
    }
    return f;
}

/// Standardized network inputs for a graph, one sample per column.
struct GraphInputs {
    Eigen::MatrixXd unary;
    Eigen::MatrixXd pairwise;
};

inline GraphInputs graph_inputs(const CostModel& m, const GraphFeatures& f) {
    GraphInputs in{Eigen::MatrixXd(kUnaryInputs, static_cast<Eigen::Index>(f.unary.size())),
                   Eigen::MatrixXd(kPairwiseInputs, static_cast<Eigen::Index>(f.pairwise.size()))};
    for (std::size_t k = 0; k < f.unary.size(); ++k) {
        const auto v = m.unary_input(f.unary[k]);
        in.unary.col(static_cast<Eigen::Index>(k)) = Eigen::Map<const Eigen::VectorXd>(v.data(), kUnaryInputs);
    }
    for (std::size_t k = 0; k < f.pairwise.size(); ++k) {
        const auto v = m.pairwise_input(f.pairwise[k]);
        in.pairwise.col(static_cast<Eigen::Index>(k)) = Eigen::Map<const Eigen::VectorXd>(v.data(), kPairwiseInputs);
    }
    return in;
}

/// Writes det costs (unary net), link costs (pairwise net) and beta on init/term.
inline void assign_costs(const CostModel& m, FlowGraph& g, const GraphInputs& in) {
    if (static_cast<std::size_t>(in.unary.cols()) != g.node_count() ||
        static_cast<std::size_t>(in.pairwise.cols()) != g.link_count())
        throw ConfigError("features missing for some graph edges");
    if (g.node_count() == 0) return;
    const Eigen::VectorXd det = forward_batch(m.unary_net, in.unary);
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        g.edges[g.det_edge(i)].cost = det(static_cast<Eigen::Index>(i));
        g.edges[g.init_edge(i)].cost = m.beta;
        g.edges[g.term_edge(i)].cost = m.beta;
    }
    if (g.link_count() == 0) return;
    const Eigen::VectorXd link = forward_batch(m.pairwise_net, in.pairwise);
    for (std::size_t k = 0; k < g.link_count(); ++k)
        g.edges[g.first_link() + k].cost = link(static_cast<Eigen::Index>(k));
}

inline void assign_costs(const CostModel& m, FlowGraph& g, const GraphFeatures& f) {
    assign_costs(m, g, graph_inputs(m, f));
}

/// Fits both standardizers from training features; rejects a second fit.
inline void fit_standardization(CostModel& m, const std::vector<UnaryFeature>& unary,
                                const std::vector<PairwiseFeature>& pairwise) {
    std::vector<std::vector<double>> u, p;
    for (const auto& f : unary) {
        const auto v = unary_raw_input(f);
        u.emplace_back(v.begin(), v.end());
    }
    for (const auto& f : pairwise) {
        const auto v = pairwise_raw_input(f);
        p.emplace_back(v.begin(), v.end());
    }
    m.unary_stats.fit(u, kUnaryInputs);
    m.pairwise_stats.fit(p, kPairwiseInputs);
}

// Bundle layout:
//   tflow-costmodel 1
//   beta <v>
//   gamma <v>
//   unary_stats <fitted> <dim> <mean...> <scale...>
//   pairwise_stats <fitted> <dim> <mean...> <scale...>
//   <unary densenet checkpoint>
//   <pairwise densenet checkpoint>
inline void write_cost_model(std::ostream& os, const CostModel& m) {
    os << "tflow-costmodel 1\nbeta " << exact_double(m.beta) << "\ngamma " << exact_double(m.gamma) << '\n';
    auto stats = [&](const char* name, const Standardizer& s, int dim) {
        os << name << ' ' << (s.fitted() ? 1 : 0) << ' ' << dim;
        for (int k = 0; k < dim; ++k) os << ' ' << exact_double(s.fitted() ? s.mean()[k] : 0.0);
        for (int k = 0; k < dim; ++k) os << ' ' << exact_double(s.fitted() ? s.scale()[k] : 1.0);
        os << '\n';
    };
    stats("unary_stats", m.unary_stats, kUnaryInputs);
    stats("pairwise_stats", m.pairwise_stats, kPairwiseInputs);
    write_densenet(os, m.unary_net);
    write_densenet(os, m.pairwise_net);
}

inline CostModel read_cost_model(std::istream& is) {
    auto word = [&](const std::string& expected) {
        std::string tok;
        if (!(is >> tok) || tok != expected) throw FormatError("cost model: expected '" + expected + "'");
    };
    auto number = [&]() {
        std::string tok;
        double v;
        if (!(is >> tok) || !parse_double(tok, v)) throw FormatError("cost model: bad number '" + tok + "'");
        return v;
    };
    word("tflow-costmodel");
    if (number() != 1) throw FormatError("cost model: unsupported version");
    CostModel m;
    word("beta");
    m.beta = number();
    word("gamma");
    m.gamma = number();
    auto stats = [&](const char* name, Standardizer& s, int dim) {
        word(name);
        const bool fitted = number() != 0;
        if (static_cast<int>(number()) != dim) throw FormatError(std::string("cost model: bad ") + name + " size");
        std::vector<double> mean(dim), scale(dim);
        for (auto& v : mean) v = number();
        for (auto& v : scale) v = number();
        if (fitted) s.set(std::move(mean), std::move(scale));
    };
    stats("unary_stats", m.unary_stats, kUnaryInputs);
    stats("pairwise_stats", m.pairwise_stats, kPairwiseInputs);
    m.unary_net = read_densenet(is);
    m.pairwise_net = read_densenet(is);
    if (m.unary_net.input_size() != kUnaryInputs || m.pairwise_net.input_size() != kPairwiseInputs)
        throw FormatError("cost model: network input sizes do not match features");
    return m;
}

inline void save_cost_model(const std::string& path, const CostModel& m) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot write " + path);
    write_cost_model(os, m);
}

inline CostModel load_cost_model(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open " + path);
    return read_cost_model(is);
}

}  // namespace tflow

#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <tflow/nnet.hpp>

namespace tflow::testing {

struct GradCheckReport {
    double worst = 0.0;
    int checked = 0;
    int straddled = 0;  // skipped: the two probes sit on different sides of a kink
};

namespace detail {

// Sign pattern of every hidden pre-activation. Leaky ReLU has a kink at zero,
// so a central difference whose probes disagree here measures no derivative.
inline std::vector<bool> kink_side(const ForwardCache& c) {
    std::vector<bool> s;
    for (std::size_t l = 0; l + 1 < c.pre.size(); ++l)
        for (Eigen::Index i = 0; i < c.pre[l].size(); ++i) s.push_back(c.pre[l][i] > 0);
    return s;
}

}  // namespace detail

// Relative error between analytic parameter/input gradients and central
// finite differences. Entries where both gradients are below `floor` in
// magnitude are compared on that floor instead.
// Only the parameters in `params` are perturbed; every input is.
inline GradCheckReport gradient_report(DenseNet net, const std::vector<double>& input,
                                       const std::vector<std::size_t>& params, double h = 1e-5, double floor = 1e-7) {
    const auto analytic = backward(net, 1.0, forward(net, input).cache);
    GradCheckReport r;
    auto compare = [&](double a, const ForwardResult& up, const ForwardResult& down) {
        if (detail::kink_side(up.cache) != detail::kink_side(down.cache)) {
            ++r.straddled;
            return;
        }
        const double n = (up.output - down.output) / (2 * h);
        r.worst = std::max(r.worst, std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor}));
        ++r.checked;
    };
    for (std::size_t k : params) {
        const double orig = net.parameters()[k];
        net.mutable_parameters()[k] = orig + h;
        const auto up = forward(net, input);
        net.mutable_parameters()[k] = orig - h;
        const auto down = forward(net, input);
        net.mutable_parameters()[k] = orig;
        compare(analytic.parameters[k], up, down);
    }
    auto x = input;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double orig = x[k];
        x[k] = orig + h;
        const auto up = forward(net, x);
        x[k] = orig - h;
        const auto down = forward(net, x);
        x[k] = orig;
        compare(analytic.input[k], up, down);
    }
    return r;
}

inline double gradient_check(const DenseNet& net, const std::vector<double>& input,
                             const std::vector<std::size_t>& params, double h = 1e-5, double floor = 1e-7) {
    return gradient_report(net, input, params, h, floor).worst;
}

inline double gradient_check(const DenseNet& net, const std::vector<double>& input, double h = 1e-5,
                             double floor = 1e-7) {
    std::vector<std::size_t> all(net.parameter_count());
    for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
    return gradient_check(net, input, all, h, floor);
}

inline std::vector<double> random_input(std::mt19937_64& rng, int n) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> x(n);
    for (auto& v : x) v = g(rng);
    return x;
}

}  // namespace tflow::testing

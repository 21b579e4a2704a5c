#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace tflow {

/// Dense rows x cols cost matrix. Entries equal to `forbidden` are never assigned.
class CostMatrix {
public:
    static constexpr double forbidden = std::numeric_limits<double>::infinity();

    CostMatrix() = default;
    CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
    CostMatrix(std::initializer_list<std::initializer_list<double>> init) {
        rows_ = init.size();
        cols_ = rows_ ? init.begin()->size() : 0;
        for (const auto& row : init) {
            if (row.size() != cols_) throw ConfigError("ragged cost matrix");
            values_.insert(values_.end(), row.begin(), row.end());
        }
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
    static bool is_forbidden(double v) { return std::isinf(v) && v > 0; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

enum class Objective { minimize, maximize };

using Assignment = std::vector<std::pair<int, int>>;

/// Optimal bipartite assignment (Kuhn-Munkres with row/column potentials).
///
/// Returns a maximum-cardinality matching over non-forbidden pairs and, among
/// those, one of optimal total cost. Rectangular input is padded to square
/// with forbidden entries; forbidden and padded pairs are stripped from the
/// result. Pairs are sorted by row.
inline Assignment solve_assignment(const CostMatrix& costs, Objective mode = Objective::minimize) {
    const std::size_t rows = costs.rows();
    const std::size_t cols = costs.cols();
    if (rows == 0 || cols == 0) return {};
    const std::size_t n = std::max(rows, cols);

    double max_abs = 0.0;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            const double v = costs(r, c);
            if (CostMatrix::is_forbidden(v)) continue;
            if (!std::isfinite(v)) throw ConfigError("cost matrix entries must be finite or forbidden");
            max_abs = std::max(max_abs, std::abs(v));
        }
    // Any matching that uses one fewer forbidden pair is strictly cheaper.
    const double penalty = 2.0 * static_cast<double>(n) * max_abs + 1.0;

    std::vector<double> a(n * n, penalty);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            const double v = costs(r, c);
            if (!CostMatrix::is_forbidden(v)) a[r * n + c] = mode == Objective::maximize ? -v : v;
        }

    // 1-based potentials; p[j] is the row matched to column j (0 = none).
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    std::vector<double> minv(n + 1);
    std::vector<char> used(n + 1);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = a[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    Assignment out;
    for (std::size_t j = 1; j <= n; ++j) {
        const std::size_t r = p[j] - 1, c = j - 1;
        if (r < rows && c < cols && !CostMatrix::is_forbidden(costs(r, c)))
            out.emplace_back(static_cast<int>(r), static_cast<int>(c));
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Sum of the matrix entries selected by an assignment.
inline double assignment_cost(const CostMatrix& costs, const Assignment& pairs) {
    double total = 0.0;
    for (auto [r, c] : pairs) total += costs(r, c);
    return total;
}

}  // namespace tflow

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include <tflow/assignment.hpp>

using namespace tflow;

namespace {

double brute_force_min(const CostMatrix& c) {
    std::vector<int> perm(c.rows());
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double s = 0;
        for (std::size_t r = 0; r < perm.size(); ++r) s += c(r, perm[r]);
        best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

bool is_matching(const Assignment& a) {
    std::set<int> rows, cols;
    for (auto [r, c] : a)
        if (!rows.insert(r).second || !cols.insert(c).second) return false;
    return true;
}

}  // namespace

TEST(Assignment, ZeroDiagonal) {
    const CostMatrix c{{0, 5}, {5, 0}};
    const auto a = solve_assignment(c);
    EXPECT_EQ(a, (Assignment{{0, 0}, {1, 1}}));
    EXPECT_DOUBLE_EQ(assignment_cost(c, a), 0.0);
}

TEST(Assignment, TwoByTwo) {
    const CostMatrix c{{1, 2}, {2, 1}};
    const auto a = solve_assignment(c);
    EXPECT_EQ(a, (Assignment{{0, 0}, {1, 1}}));
    EXPECT_DOUBLE_EQ(assignment_cost(c, a), 2.0);
}

TEST(Assignment, ThreeByThree) {
    const CostMatrix c{{4, 1, 3}, {2, 0, 5}, {3, 2, 2}};
    const auto a = solve_assignment(c);
    EXPECT_EQ(a, (Assignment{{0, 1}, {1, 0}, {2, 2}}));
    EXPECT_DOUBLE_EQ(assignment_cost(c, a), 5.0);
}

TEST(Assignment, EmptyMatrix) { EXPECT_TRUE(solve_assignment(CostMatrix(0, 0)).empty()); }

TEST(Assignment, MaximizeMatchesNegatedMinimize) {
    const CostMatrix c{{4, 1, 3}, {2, 0, 5}, {3, 2, 2}};
    const auto a = solve_assignment(c, Objective::maximize);
    EXPECT_EQ(a, (Assignment{{0, 0}, {1, 2}, {2, 1}}));
    EXPECT_DOUBLE_EQ(assignment_cost(c, a), 11.0);
}

TEST(Assignment, RectangularAndForbidden) {
    CostMatrix c(2, 3, CostMatrix::forbidden);
    c(0, 2) = 1.0;
    c(1, 2) = 0.5;
    c(1, 0) = 3.0;
    const auto a = solve_assignment(c);
    EXPECT_EQ(a, (Assignment{{0, 2}, {1, 0}}));

    CostMatrix none(2, 2, CostMatrix::forbidden);
    EXPECT_TRUE(solve_assignment(none).empty());
}

TEST(Assignment, RandomMatchesEnumeration) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-10, 10);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + trial % 6;
        CostMatrix c(n, n);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t k = 0; k < n; ++k) c(r, k) = u(rng);
        const auto a = solve_assignment(c);
        ASSERT_EQ(a.size(), n);
        ASSERT_TRUE(is_matching(a));
        EXPECT_NEAR(assignment_cost(c, a), brute_force_min(c), 1e-9);
    }
}

TEST(Assignment, RejectsNan) {
    CostMatrix c(1, 1, std::numeric_limits<double>::quiet_NaN());
    EXPECT_THROW(solve_assignment(c), ConfigError);
}

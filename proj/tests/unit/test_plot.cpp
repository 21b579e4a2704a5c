#include <gtest/gtest.h>

#include <regex>
#include <set>
#include <sstream>

#include <tflow/plot.hpp>

using namespace tflow;

namespace {

std::string svg_of(const std::vector<Trajectory>& tracks) {
    std::ostringstream os;
    write_svg(os, tracks);
    return os.str();
}

std::size_t count(const std::string& s, const std::string& what) {
    std::size_t n = 0;
    for (auto p = s.find(what); p != std::string::npos; p = s.find(what, p + 1)) ++n;
    return n;
}

Trajectory track(int id, int first, int last, std::set<int> interpolated = {}) {
    Trajectory t{id, {}};
    for (int f = first; f <= last; ++f) t.entries.push_back({f, {10.0 * f + id, 0, 10, 20}, interpolated.count(f) > 0});
    return t;
}

}  // namespace

TEST(Svg, EmptyInputDrawsAxesOnly) {
    const auto s = svg_of({});
    EXPECT_EQ(s.rfind("<svg", 0), 0u);
    EXPECT_NE(s.find("class=\"axes\""), std::string::npos);
    EXPECT_EQ(count(s, "class=\"track\""), 0u);
    EXPECT_EQ(count(s, "<polyline"), 0u);
    EXPECT_NE(s.find("</svg>"), std::string::npos);
}

TEST(Svg, OneColorPerIdentity) {
    const auto s = svg_of({track(1, 1, 5), track(2, 2, 8), track(7, 3, 4)});
    std::regex group("class=\"track\" data-identity=\"(\\d+)\" stroke=\"([^\"]+)\"");
    std::set<std::string> ids, colors;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), group); it != std::sregex_iterator(); ++it) {
        ids.insert((*it)[1]);
        colors.insert((*it)[2]);
    }
    EXPECT_EQ(ids.size(), 3u);
    EXPECT_EQ(colors.size(), ids.size());
}

TEST(Svg, InterpolatedRunsAreDashed) {
    const auto s = svg_of({track(1, 1, 10, {4, 5, 8}), track(2, 1, 3)});
    EXPECT_EQ(count(s, "stroke-dasharray"), 2u);
    // solid runs 1-3, 6-7, 9-10 plus the second track
    EXPECT_EQ(count(s, "<polyline"), 6u);
    // the dashed run bridges the real neighbors on both sides: frames 3..6
    std::regex dashed("stroke-dasharray=\"4 3\" points=\"([^\"]+)\"");
    std::smatch m;
    ASSERT_TRUE(std::regex_search(s, m, dashed));
    const std::string pts = m[1];
    EXPECT_EQ(std::count(pts.begin(), pts.end(), ' ') + 1, 4);
}

TEST(Svg, ColorsAreDistinctAndStable) {
    std::set<std::string> seen;
    for (std::size_t k = 0; k < 50; ++k) seen.insert(identity_color(k));
    EXPECT_EQ(seen.size(), 50u);
    EXPECT_EQ(identity_color(3), identity_color(3));
}

TEST(Svg, ReferenceDrawnSeparately) {
    PlotOptions opt;
    opt.reference = {track(1, 1, 5), track(2, 1, 5)};
    std::ostringstream os;
    write_svg(os, {track(1, 1, 5)}, opt);
    const auto s = os.str();
    EXPECT_EQ(count(s, "class=\"reference\""), 1u);
    EXPECT_EQ(count(s, "class=\"track\""), 1u);
    EXPECT_EQ(count(s, "<polyline"), 3u);
}

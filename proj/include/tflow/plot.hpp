#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "core_types.hpp"
#include "numfmt.hpp"

namespace tflow {

struct PlotOptions {
    double width = 960.0;
    double height = 540.0;
    double margin = 40.0;
    std::string title = "trajectories";
    /// Drawn underneath in light gray (typically the ground truth).
    std::vector<Trajectory> reference;
};

/// Distinct, deterministic color for the k-th identity (golden-angle hues).
inline std::string identity_color(std::size_t k) {
    const double hue = std::fmod(static_cast<double>(k) * 137.508, 360.0);
    return "hsl(" + fixed_double(hue, 1) + ",70%,45%)";
}

/// Static SVG of box-center x against frame. One polyline per run of real
/// or interpolated entries; interpolated runs are dashed. Each trajectory is
/// a <g> element carrying its identity and color.
inline void write_svg(std::ostream& os, const std::vector<Trajectory>& tracks, const PlotOptions& opt = {}) {
    int f0 = 1, f1 = 2;
    double x0 = 0.0, x1 = 1.0;
    bool any = false;
    for (const auto* set : {&tracks, &opt.reference})
        for (const auto& t : *set)
            for (const auto& e : t.entries) {
                const double cx = e.box.x + e.box.w / 2;
                if (!any) f0 = f1 = e.frame, x0 = x1 = cx, any = true;
                f0 = std::min(f0, e.frame), f1 = std::max(f1, e.frame);
                x0 = std::min(x0, cx), x1 = std::max(x1, cx);
            }
    if (f1 == f0) ++f1;
    if (x1 == x0) x1 += 1.0;
    const double pw = opt.width - 2 * opt.margin, ph = opt.height - 2 * opt.margin;
    auto px = [&](int f) { return opt.margin + pw * (f - f0) / (f1 - f0); };
    auto py = [&](double x) { return opt.margin + ph * (1.0 - (x - x0) / (x1 - x0)); };

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed_double(opt.width) << "\" height=\""
       << fixed_double(opt.height) << "\">\n";
    os << "<title>" << opt.title << "</title>\n";
    os << "<g class=\"axes\" stroke=\"black\" fill=\"none\">\n";
    os << "<line x1=\"" << fixed_double(opt.margin) << "\" y1=\"" << fixed_double(opt.height - opt.margin) << "\" x2=\""
       << fixed_double(opt.width - opt.margin) << "\" y2=\"" << fixed_double(opt.height - opt.margin) << "\"/>\n";
    os << "<line x1=\"" << fixed_double(opt.margin) << "\" y1=\"" << fixed_double(opt.margin) << "\" x2=\""
       << fixed_double(opt.margin) << "\" y2=\"" << fixed_double(opt.height - opt.margin) << "\"/>\n";
    os << "</g>\n";
    os << "<text x=\"" << fixed_double(opt.width / 2) << "\" y=\"" << fixed_double(opt.height - 8)
       << "\" text-anchor=\"middle\">frame</text>\n";
    os << "<text x=\"12\" y=\"" << fixed_double(opt.height / 2) << "\">x</text>\n";

    if (!opt.reference.empty()) {
        os << "<g class=\"reference\" stroke=\"#c8c8c8\" stroke-width=\"3\" fill=\"none\">\n";
        for (const auto& t : opt.reference) {
            os << "<polyline points=\"";
            for (std::size_t m = 0; m < t.entries.size(); ++m)
                os << (m ? " " : "") << fixed_double(px(t.entries[m].frame)) << ','
                   << fixed_double(py(t.entries[m].box.x + t.entries[m].box.w / 2));
            os << "\"/>\n";
        }
        os << "</g>\n";
    }

    for (std::size_t k = 0; k < tracks.size(); ++k) {
        const auto& t = tracks[k];
        const std::string color = identity_color(k);
        os << "<g class=\"track\" data-identity=\"" << t.identity << "\" stroke=\"" << color << "\" fill=\"none\">\n";
        std::size_t i = 0;
        while (i < t.entries.size()) {
            // A run shares the interpolated flag; consecutive runs share an endpoint.
            const bool dashed = t.entries[i].interpolated;
            std::size_t j = i;
            while (j + 1 < t.entries.size() && t.entries[j + 1].interpolated == dashed) ++j;
            const std::size_t from = i > 0 ? i - 1 : i;
            const std::size_t to = dashed && j + 1 < t.entries.size() ? j + 1 : j;
            os << "<polyline" << (dashed ? " stroke-dasharray=\"4 3\"" : "") << " points=\"";
            for (std::size_t m = dashed ? from : i; m <= to; ++m) {
                const auto& e = t.entries[m];
                os << (m == (dashed ? from : i) ? "" : " ") << fixed_double(px(e.frame)) << ','
                   << fixed_double(py(e.box.x + e.box.w / 2));
            }
            os << "\"/>\n";
            i = j + 1;
        }
        os << "</g>\n";
    }
    os << "</svg>\n";
}

}  // namespace tflow

#include "trustbench/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace trustbench {

namespace {

std::string fmt(double value, int decimals = 1) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
    return buf;
}

// White-to-steel-blue ramp for a value in [0,1].
std::string heat_color(double value) {
    value = std::clamp(value, 0.0, 1.0);
    int r = static_cast<int>(std::lround(255.0 - value * (255.0 - 70.0)));
    int g = static_cast<int>(std::lround(255.0 - value * (255.0 - 130.0)));
    int b = static_cast<int>(std::lround(255.0 - value * (255.0 - 180.0)));
    char buf[16];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
    return buf;
}

std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

}  // namespace

std::string render_heatmap_svg(
    const std::map<std::string, std::map<int, MacroMetrics>>& per_model_practice,
    const std::string& title) {
    const int cell = 34;
    const int left = 160;
    const int top = 60;
    const int rows = static_cast<int>(per_model_practice.size());
    const int width = left + kPracticeCount * cell + 20;
    const int height = top + rows * cell + 30;

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" font-family=\"monospace\" font-size=\"11\">\n";
    out << "<text x=\"" << left << "\" y=\"20\" font-size=\"14\">" << escape_xml(title)
        << "</text>\n";
    for (int p = 1; p <= kPracticeCount; ++p) {
        out << "<text x=\"" << (left + (p - 1) * cell + 8) << "\" y=\"" << (top - 8)
            << "\">p" << p << "</text>\n";
    }
    int row = 0;
    for (const auto& [model, by_practice] : per_model_practice) {
        int y = top + row * cell;
        out << "<text x=\"8\" y=\"" << (y + cell / 2 + 4) << "\">" << escape_xml(model)
            << "</text>\n";
        for (int p = 1; p <= kPracticeCount; ++p) {
            int x = left + (p - 1) * cell;
            auto it = by_practice.find(p);
            if (it == by_practice.end()) {
                out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell
                    << "\" height=\"" << cell << "\" fill=\"#eeeeee\" stroke=\"#999999\"/>\n";
                continue;
            }
            double f1 = it->second.f1;
            out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell
                << "\" height=\"" << cell << "\" fill=\"" << heat_color(f1)
                << "\" stroke=\"#999999\"/>\n";
            out << "<text x=\"" << (x + 4) << "\" y=\"" << (y + cell / 2 + 4) << "\">"
                << fmt(f1, 2) << "</text>\n";
        }
        ++row;
    }
    out << "</svg>\n";
    return out.str();
}

std::string render_boxplot_svg(const std::vector<GroupStats>& groups, const std::string& title) {
    const int plot_left = 70;
    const int plot_top = 50;
    const int plot_height = 240;
    const int slot = 90;
    const int width = plot_left + static_cast<int>(groups.size()) * slot + 30;
    const int height = plot_top + plot_height + 60;

    auto y_of = [&](double value) {
        return plot_top + plot_height - static_cast<int>(std::lround(value * plot_height));
    };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" font-family=\"monospace\" font-size=\"11\">\n";
    out << "<text x=\"" << plot_left << "\" y=\"20\" font-size=\"14\">" << escape_xml(title)
        << "</text>\n";
    // Axis with 0, 0.5, 1 gridlines.
    for (double tick : {0.0, 0.5, 1.0}) {
        int y = y_of(tick);
        out << "<line x1=\"" << plot_left << "\" y1=\"" << y << "\" x2=\"" << (width - 20)
            << "\" y2=\"" << y << "\" stroke=\"#dddddd\"/>\n";
        out << "<text x=\"30\" y=\"" << (y + 4) << "\">" << fmt(tick) << "</text>\n";
    }
    int index = 0;
    for (const auto& g : groups) {
        int cx = plot_left + index * slot + slot / 2;
        int half = 22;
        // Whiskers.
        out << "<line x1=\"" << cx << "\" y1=\"" << y_of(g.min) << "\" x2=\"" << cx
            << "\" y2=\"" << y_of(g.max) << "\" stroke=\"#444444\"/>\n";
        for (double cap : {g.min, g.max}) {
            out << "<line x1=\"" << (cx - 10) << "\" y1=\"" << y_of(cap) << "\" x2=\""
                << (cx + 10) << "\" y2=\"" << y_of(cap) << "\" stroke=\"#444444\"/>\n";
        }
        // Box and median.
        out << "<rect x=\"" << (cx - half) << "\" y=\"" << y_of(g.q3) << "\" width=\""
            << (2 * half) << "\" height=\"" << (y_of(g.q1) - y_of(g.q3))
            << "\" fill=\"#cfe2f3\" stroke=\"#444444\"/>\n";
        out << "<line x1=\"" << (cx - half) << "\" y1=\"" << y_of(g.median) << "\" x2=\""
            << (cx + half) << "\" y2=\"" << y_of(g.median)
            << "\" stroke=\"#c00000\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << (cx - half) << "\" y=\"" << (plot_top + plot_height + 20) << "\">"
            << escape_xml(g.name) << " (n=" << g.n << ")</text>\n";
        ++index;
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace trustbench
